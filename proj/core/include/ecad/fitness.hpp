#pragma once

#include <map>
#include <optional>
#include <string>

#include "ecad/config.hpp"
#include "ecad/genome.hpp"

namespace ecad {

struct NormalizedScore {
  double score = 0.0;
  bool failed = false;
};

// (value - min) / (max - min), reversed when minimizing; clamped to [0, 1]
// unless the objective allows overflow. Non-finite values score 0 and fail.
NormalizedScore normalize(double value, const EvalTypeConfig& et);

struct ObjectiveScore {
  std::map<std::string, double> metrics;  // everything the worker reported
  double raw = 0.0;                       // the scored metric
  double score = 0.0;
  bool failed = false;

  bool operator==(const ObjectiveScore&) const = default;
};

class ScoreCard {
 public:
  ScoreCard() = default;
  explicit ScoreCard(GenomeId genome_id) : genome_id_(genome_id) {}

  GenomeId genome_id() const { return genome_id_; }

  // Records the first result for an objective; later copies are ignored and
  // return false. A failed result pins the objective at score 0.
  bool record(const EvalTypeConfig& et, const std::map<std::string, double>& metrics, bool ok);
  void set(EvalType type, ObjectiveScore score) { objectives_[type] = std::move(score); }

  bool has(EvalType type) const { return objectives_.contains(type); }
  const ObjectiveScore* objective(EvalType type) const;
  const std::map<EvalType, ObjectiveScore>& objectives() const { return objectives_; }

  bool complete(const PopConfig& pop) const;
  bool failed() const;
  // Any reported metric by name across objectives.
  std::optional<double> metric(const std::string& name) const;

  bool operator==(const ScoreCard&) const = default;

 private:
  GenomeId genome_id_ = 0;
  std::map<EvalType, ObjectiveScore> objectives_;
};

// Weighted sum over active objectives. Throws std::logic_error when the card
// is incomplete. Failed individuals combine to 0.
double combine(const ScoreCard& card, const PopConfig& pop);

Json to_json(const ScoreCard& card);
ScoreCard score_card_from_json(const Json& j);

}  // namespace ecad
