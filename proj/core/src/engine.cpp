#include "ecad/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace ecad::engine {
namespace {

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

bool ranks_before(const Member& a, const Member& b) {
  if (*a.score != *b.score) return *a.score > *b.score;
  return a.genome.id < b.genome.id;
}

Json job_params(const EvalTypeConfig& et, const SearchOptions& opts, GenomeId id) {
  Json p = Json::object();
  if (et.type == EvalType::kSim) {
    if (et.epochs) p["epochs"] = *et.epochs;
    if (et.batch_size) p["batchSize"] = *et.batch_size;
    p["seed"] = opts.seed ^ (id * 0x9E3779B97F4A7C15ULL);
    for (const auto& [k, v] : opts.sim_params.items()) p[k] = v;
  } else {
    p["metric"] = et.scored_metric();
  }
  return p;
}

GenerationStats collect_stats(const Population& pop) {
  GenerationStats s;
  s.generation = pop.generation();
  s.population = static_cast<std::int64_t>(pop.size());
  s.median_neurons = pop.median_neurons();
  const auto ranked = pop.ranked();
  s.evaluated = static_cast<std::int64_t>(ranked.size());
  s.best_img_per_s = std::nan("");
  s.best_accuracy = std::nan("");
  if (ranked.empty()) return s;
  double sum = 0.0;
  for (const auto* m : ranked) sum += *m->score;
  s.mean_score = sum / static_cast<double>(ranked.size());
  const Member& best = *ranked.front();
  s.best_score = *best.score;
  s.best_id = best.genome.id;
  s.best_neurons = best.genome.first_neurons();
  s.best_batch = best.genome.batch_size();
  if (auto cfg = systolic_config(best.genome)) s.best_cfg = cfg->to_string();
  if (auto v = best.card.metric("img_per_s")) s.best_img_per_s = *v;
  if (auto v = best.card.metric("accuracy")) s.best_accuracy = *v;
  return s;
}

}  // namespace

Population::Population(const EcadConfig& cfg, std::uint64_t seed) : cfg_(&cfg), rng_(seed) {}

GenomeId Population::spawn_one() {
  const GenomeId id = next_id_++;
  members_.emplace(id, Member{spawn(*cfg_, rng_, id, generation_), ScoreCard(id), std::nullopt});
  return id;
}

GenomeId Population::add_child(const NetworkGenome& parent) {
  const GenomeId id = next_id_++;
  members_.emplace(id,
                   Member{mutate(parent, *cfg_, rng_, id, generation_), ScoreCard(id), std::nullopt});
  return id;
}

void Population::insert(Member m) {
  const GenomeId id = m.genome.id;
  if (members_.contains(id)) throw EngineError("duplicate genome id " + std::to_string(id));
  next_id_ = std::max(next_id_, id + 1);
  members_.emplace(id, std::move(m));
}

void Population::erase(GenomeId id) { members_.erase(id); }

std::vector<GenomeId> Population::unevaluated() const {
  std::vector<GenomeId> out;
  for (const auto& [id, m] : members_) {
    if (!m.evaluated()) out.push_back(id);
  }
  return out;
}

std::vector<const Member*> Population::ranked() const {
  std::vector<const Member*> out;
  for (const auto& [id, m] : members_) {
    if (m.evaluated()) out.push_back(&m);
  }
  std::sort(out.begin(), out.end(), [](const Member* a, const Member* b) { return ranks_before(*a, *b); });
  return out;
}

std::size_t Population::evaluated_count() const {
  return static_cast<std::size_t>(std::count_if(
      members_.begin(), members_.end(), [](const auto& kv) { return kv.second.evaluated(); }));
}

std::vector<GenomeId> Population::evict_to(std::size_t limit) {
  std::vector<GenomeId> evicted;
  const auto ranked = this->ranked();
  // Worst first; stop before the best.
  for (std::size_t i = ranked.size(); i-- > 1 && members_.size() > limit;) {
    evicted.push_back(ranked[i]->genome.id);
    members_.erase(ranked[i]->genome.id);
  }
  return evicted;
}

double Population::median_neurons() const {
  std::vector<std::int64_t> n;
  for (const auto& [id, m] : members_) n.push_back(m.genome.first_neurons());
  if (n.empty()) return 0.0;
  std::sort(n.begin(), n.end());
  const std::size_t mid = n.size() / 2;
  if (n.size() % 2 == 1) return static_cast<double>(n[mid]);
  return (static_cast<double>(n[mid - 1]) + static_cast<double>(n[mid])) / 2.0;
}

std::vector<NetworkGenome> select_parents(const Population& pop, std::size_t k) {
  const auto ranked = pop.ranked();
  if (ranked.size() < k) {
    throw EngineError("select_parents: need " + std::to_string(k) + " evaluated members, have " +
                      std::to_string(ranked.size()));
  }
  std::vector<NetworkGenome> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(ranked[i]->genome);
  return out;
}

double score_card(ScoreCard& card, const EcadConfig& cfg) {
  const auto model = cfg.hw_model_or_default();
  if (model.constrained) {
    if (const auto* hw = card.objective(EvalType::kHwDb); hw != nullptr && !hw->failed) {
      auto it = hw->metrics.find("feasible");
      if (it != hw->metrics.end() && it->second == 0.0) {
        ObjectiveScore pinned = *hw;
        pinned.score = 0.0;
        card.set(EvalType::kHwDb, std::move(pinned));
      }
    }
  }
  return combine(card, cfg.pop);
}

SearchReport run(const EcadConfig& cfg, dispatch::Dispatcher& dispatcher, store::EcadDb* store,
                 const SearchOptions& options) {
  const auto active = cfg.pop.active_eval_types();
  if (active.empty()) throw EngineError("config has no active evalTypes");
  for (const auto* et : active) {
    if (!dispatcher.serves(et->type)) {
      throw EngineError("no worker for active evalType " + std::string(to_string(et->type)));
    }
  }
  const auto max_pop = static_cast<std::size_t>(cfg.pop.max_pop_size);
  // Room for the surviving best plus every child.
  const auto children =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.pop.children_per_generation()),
                            max_pop > 1 ? max_pop - 1 : 1);
  const auto min_eval = static_cast<std::size_t>(std::max(cfg.pop.min_indiv_eval_complete, 1));

  Population pop(cfg, options.seed);
  for (int i = 0; i < cfg.pop.initial_pop_size; ++i) pop.spawn_one();

  SearchReport report;
  report.config_name = cfg.name;
  report.seed = options.seed;
  report.initial_median_neurons = pop.median_neurons();

  dispatch::JobId next_job = 1;
  for (int gen = 0;; ++gen) {
    pop.set_generation(gen);

    // Evaluate everything that has no score yet.
    const auto pending = pop.unevaluated();
    std::vector<dispatch::EvalJob> jobs;
    for (GenomeId id : pending) {
      const auto desc = to_description(pop.at(id).genome);
      for (const auto* et : active) {
        jobs.push_back({next_job++, id, et->type, desc, job_params(*et, options, id)});
      }
    }
    for (const auto& r : dispatcher.dispatch_all(jobs)) {
      auto& m = pop.at(r.genome_id);
      const auto* et = cfg.pop.eval_type(r.eval_type);
      m.card.record(*et, r.metrics, r.ok());
    }
    for (GenomeId id : pending) {
      auto& m = pop.at(id);
      if (!m.card.complete(cfg.pop)) throw EngineError("missing result for genome " + std::to_string(id));
      m.score = score_card(m.card, cfg);
      if (store != nullptr) store->append(store::IndividualRecord{0, gen, m.genome, m.card, *m.score});
    }

    const auto stats = collect_stats(pop);
    report.history.push_back(stats);
    if (store != nullptr) {
      store->append(store::GenerationRecord{0, gen, stats.best_score, stats.mean_score, stats.best_id,
                                            stats.population, stats.evaluated});
    }
    if (options.on_generation) options.on_generation(stats);

    if (gen + 1 >= cfg.pop.max_generations) {
      report.stop_reason = "maxGenerations";
      break;
    }
    if (stats.evaluated > 0 && stats.best_score >= cfg.pop.fitness_score_goal) {
      report.stop_reason = "fitnessScoreGoal";
      break;
    }

    pop.set_generation(gen + 1);
    const std::size_t evaluated = pop.evaluated_count();
    if (evaluated < min_eval) {
      // Not enough scored individuals to select from yet.
      const std::size_t room = max_pop > pop.size() ? max_pop - pop.size() : 0;
      for (std::size_t i = 0; i < std::min(min_eval - evaluated, room); ++i) pop.spawn_one();
      continue;
    }
    const auto parents = select_parents(pop, std::min(children, evaluated));
    for (std::size_t i = 0; i < children; ++i) pop.add_child(parents[i % parents.size()]);
    pop.evict_to(max_pop);
  }

  report.generations = static_cast<int>(report.history.size());
  report.final_median_neurons = pop.median_neurons();
  for (const auto* m : pop.ranked()) report.final_ranked.push_back(*m);
  report.dispatch_stats = dispatcher.stats();
  return report;
}

Json to_json(const GenerationStats& s) {
  Json j = Json::object();
  j["generation"] = s.generation;
  j["best_score"] = s.best_score;
  j["mean_score"] = s.mean_score;
  j["best_id"] = s.best_id;
  j["best_neurons"] = s.best_neurons;
  j["best_batch"] = s.best_batch;
  j["best_cfg"] = s.best_cfg;
  j["best_img_per_s"] = finite_or_null(s.best_img_per_s);
  j["best_accuracy"] = finite_or_null(s.best_accuracy);
  j["population"] = s.population;
  j["evaluated"] = s.evaluated;
  j["median_neurons"] = s.median_neurons;
  return j;
}

Json to_json(const SearchReport& r) {
  Json j = Json::object();
  j["config"] = r.config_name;
  j["seed"] = r.seed;
  j["generations"] = r.generations;
  j["stop_reason"] = r.stop_reason;
  j["initial_median_neurons"] = r.initial_median_neurons;
  j["final_median_neurons"] = r.final_median_neurons;
  if (const auto* best = r.best()) {
    Json b = Json::object();
    b["genome_id"] = best->genome.id;
    b["score"] = *best->score;
    b["network"] = to_json(to_description(best->genome));
    b["scores"] = to_json(best->card);
    j["best"] = std::move(b);
  }
  Json ranked = Json::array();
  for (const auto& m : r.final_ranked) {
    ranked.push_back({{"genome_id", m.genome.id}, {"score", *m.score}});
  }
  j["final_population"] = std::move(ranked);
  Json hist = Json::array();
  for (const auto& s : r.history) hist.push_back(to_json(s));
  j["history"] = std::move(hist);
  return j;
}

std::string csv_header() {
  return "generation,best_score,mean_score,best_neurons,best_batch,best_cfg,best_img_per_s,"
         "best_accuracy\n";
}

std::string csv_row(const GenerationStats& s) {
  return std::to_string(s.generation) + "," + fmt_double(s.best_score) + "," +
         fmt_double(s.mean_score) + "," + std::to_string(s.best_neurons) + "," +
         std::to_string(s.best_batch) + ",\"" + s.best_cfg + "\"," + fmt_double(s.best_img_per_s) +
         "," + fmt_double(s.best_accuracy) + "\n";
}

void write_csv(const std::filesystem::path& path, const std::vector<GenerationStats>& history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EngineError("cannot write " + path.string());
  out << csv_header();
  for (const auto& s : history) out << csv_row(s);
}

}  // namespace ecad::engine
