#include "ecad/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ecad {

NormalizedScore normalize(double value, const EvalTypeConfig& et) {
  if (!std::isfinite(value)) return {0.0, true};
  const double span = et.max_value - et.min_value;
  double s = et.minimizes() ? (et.max_value - value) / span : (value - et.min_value) / span;
  if (et.allow_overflow) {
    s = std::max(s, 0.0);
  } else {
    s = std::clamp(s, 0.0, 1.0);
  }
  return {s, false};
}

bool ScoreCard::record(const EvalTypeConfig& et, const std::map<std::string, double>& metrics,
                       bool ok) {
  if (objectives_.contains(et.type)) return false;
  ObjectiveScore obj;
  obj.metrics = metrics;
  const auto it = metrics.find(et.scored_metric());
  if (!ok || it == metrics.end()) {
    obj.failed = true;
  } else {
    obj.raw = it->second;
    const auto n = normalize(it->second, et);
    obj.score = n.score;
    obj.failed = n.failed;
  }
  objectives_.emplace(et.type, std::move(obj));
  return true;
}

const ObjectiveScore* ScoreCard::objective(EvalType type) const {
  auto it = objectives_.find(type);
  return it == objectives_.end() ? nullptr : &it->second;
}

bool ScoreCard::complete(const PopConfig& pop) const {
  for (const auto* et : pop.active_eval_types()) {
    if (!objectives_.contains(et->type)) return false;
  }
  return true;
}

bool ScoreCard::failed() const {
  return std::any_of(objectives_.begin(), objectives_.end(),
                     [](const auto& kv) { return kv.second.failed; });
}

std::optional<double> ScoreCard::metric(const std::string& name) const {
  for (const auto& [type, obj] : objectives_) {
    if (auto it = obj.metrics.find(name); it != obj.metrics.end()) return it->second;
  }
  return std::nullopt;
}

double combine(const ScoreCard& card, const PopConfig& pop) {
  if (!card.complete(pop)) {
    throw std::logic_error("score card for genome " + std::to_string(card.genome_id()) +
                           " is incomplete");
  }
  if (card.failed()) return 0.0;
  double total = 0.0;
  for (const auto* et : pop.active_eval_types()) {
    total += et->weight * card.objective(et->type)->score;
  }
  return total;
}

Json to_json(const ScoreCard& card) {
  Json j = Json::object();
  j["genome_id"] = card.genome_id();
  Json objs = Json::object();
  for (const auto& [type, obj] : card.objectives()) {
    Json o = Json::object();
    o["raw"] = obj.raw;
    o["score"] = obj.score;
    o["failed"] = obj.failed;
    Json m = Json::object();
    for (const auto& [k, v] : obj.metrics) m[k] = v;
    o["metrics"] = std::move(m);
    objs[std::string(to_string(type))] = std::move(o);
  }
  j["objectives"] = std::move(objs);
  return j;
}

ScoreCard score_card_from_json(const Json& j) {
  ScoreCard card(j.at("genome_id").get<GenomeId>());
  const auto& objs = j.at("objectives");
  for (auto it = objs.begin(); it != objs.end(); ++it) {
    ObjectiveScore o;
    o.raw = it.value().at("raw").get<double>();
    o.score = it.value().at("score").get<double>();
    o.failed = it.value().at("failed").get<bool>();
    const auto& m = it.value().at("metrics");
    for (auto mi = m.begin(); mi != m.end(); ++mi) {
      // Non-finite values are written as null.
      o.metrics[mi.key()] = mi.value().is_null() ? std::nan("") : mi.value().get<double>();
    }
    card.set(eval_type_from_string(it.key()), std::move(o));
  }
  return card;
}

}  // namespace ecad
