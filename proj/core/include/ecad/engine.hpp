#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecad/config.hpp"
#include "ecad/dispatch.hpp"
#include "ecad/fitness.hpp"
#include "ecad/genome.hpp"
#include "ecad/store.hpp"

namespace ecad::engine {

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Member {
  NetworkGenome genome;
  ScoreCard card;
  std::optional<double> score;  // set once every active objective reported

  bool evaluated() const { return score.has_value(); }
};

struct GenerationStats {
  int generation = 0;
  double best_score = 0.0;
  double mean_score = 0.0;
  GenomeId best_id = 0;
  std::int64_t best_neurons = 0;
  std::int64_t best_batch = 0;
  std::string best_cfg;
  double best_img_per_s = 0.0;  // NaN when not reported
  double best_accuracy = 0.0;   // NaN when not reported
  std::int64_t population = 0;
  std::int64_t evaluated = 0;
  double median_neurons = 0.0;  // over the whole population
};

class Population {
 public:
  Population(const EcadConfig& cfg, std::uint64_t seed);

  const EcadConfig& config() const { return *cfg_; }
  Rng& rng() { return rng_; }
  int generation() const { return generation_; }
  void set_generation(int g) { generation_ = g; }

  GenomeId spawn_one();
  GenomeId add_child(const NetworkGenome& parent);
  void insert(Member m);
  void erase(GenomeId id);

  std::size_t size() const { return members_.size(); }
  const std::map<GenomeId, Member>& members() const { return members_; }
  Member& at(GenomeId id) { return members_.at(id); }
  const Member& at(GenomeId id) const { return members_.at(id); }

  std::vector<GenomeId> unevaluated() const;
  // Evaluated members by score descending, lower id first on ties.
  std::vector<const Member*> ranked() const;
  std::size_t evaluated_count() const;

  // Removes the lowest-ranked evaluated members until size() <= limit. The
  // best member and unevaluated members are never removed.
  std::vector<GenomeId> evict_to(std::size_t limit);

  double median_neurons() const;

 private:
  const EcadConfig* cfg_;
  Rng rng_;
  std::map<GenomeId, Member> members_;
  GenomeId next_id_ = 1;
  int generation_ = 0;
};

// The k best evaluated genomes. Throws EngineError when fewer than k exist.
std::vector<NetworkGenome> select_parents(const Population& pop, std::size_t k);

struct SearchOptions {
  std::uint64_t seed = 1;
  // Merged into every simJob's params (e.g. trainSubset).
  Json sim_params = Json::object();
  std::function<void(const GenerationStats&)> on_generation;
};

struct SearchReport {
  std::string config_name;
  std::uint64_t seed = 0;
  int generations = 0;
  std::string stop_reason;
  std::vector<GenerationStats> history;
  std::vector<Member> final_ranked;
  double initial_median_neurons = 0.0;
  double final_median_neurons = 0.0;
  dispatch::DispatchStats dispatch_stats;

  const Member* best() const { return final_ranked.empty() ? nullptr : &final_ranked.front(); }
};

// Steady-state loop: evaluate, rank, breed from the top slice, evict the
// worst, snapshot to the store. `store` may be null.
SearchReport run(const EcadConfig& cfg, dispatch::Dispatcher& dispatcher, store::EcadDb* store,
                 const SearchOptions& options);

// Score for a complete card, applying the hardware feasibility rule.
double score_card(ScoreCard& card, const EcadConfig& cfg);

Json to_json(const GenerationStats& s);
Json to_json(const SearchReport& r);

std::string csv_header();
std::string csv_row(const GenerationStats& s);
void write_csv(const std::filesystem::path& path, const std::vector<GenerationStats>& history);

}  // namespace ecad::engine
