#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecad/config.hpp"
#include "ecad/network.hpp"

namespace ecad {

using GenomeId = std::uint64_t;
using Rng = std::mt19937_64;

class GenomeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace traits {
inline constexpr const char* kBatchSize = "batch_size";
inline constexpr const char* kNeurons = "neurons";
inline constexpr const char* kSysRows = "sys_rows";
inline constexpr const char* kSysCols = "sys_cols";
inline constexpr const char* kSysVec = "sys_vec";
inline constexpr const char* kSysInterleave = "sys_intrlv";
inline constexpr const char* kSysScale = "sys_scale";
inline constexpr const char* kEnableBias = "enableBias";
inline constexpr const char* kSystolicId = "systolic_id";
}  // namespace traits

struct CellState {
  CellInstance instance;
  std::map<std::string, std::int64_t> trait_values;

  std::optional<std::int64_t> trait(const std::string& name) const;

  bool operator==(const CellState&) const = default;
};

// One individual: the configured cell chain with every trait resolved.
struct NetworkGenome {
  GenomeId id = 0;
  std::optional<GenomeId> parent_id;
  int generation = 0;
  std::vector<CellState> cells;

  const CellState* find_cell(const std::string& name) const;
  // First dense cell, in chain order, whose systolic_id is 0.
  const CellState* systolic_owner() const;
  std::int64_t batch_size() const;
  // Neurons of the first dense cell, or 0 when there is none.
  std::int64_t first_neurons() const;

  bool same_traits(const NetworkGenome& other) const;
  bool operator==(const NetworkGenome&) const = default;
};

NetworkGenome spawn(const EcadConfig& cfg, Rng& rng, GenomeId id, int generation = 0);

NetworkGenome mutate(const NetworkGenome& parent, const EcadConfig& cfg, Rng& rng, GenomeId id,
                     int generation);

// Empty when the genome satisfies every trait constraint of cfg.
std::vector<std::string> invariant_violations(const NetworkGenome& g, const EcadConfig& cfg);

// Legal sys_intrlv values: powers of two >= rows + cols inside the trait range.
std::vector<std::int64_t> legal_interleaves(const TraitSpec& spec, std::int64_t rows,
                                            std::int64_t cols);

std::optional<SystolicConfig> systolic_config(const NetworkGenome& g);
NetworkDescription to_description(const NetworkGenome& g);
NetworkGenome from_description(const NetworkDescription& desc, const EcadConfig& cfg, GenomeId id);

Json to_json(const NetworkGenome& g);
NetworkGenome genome_from_json(const Json& j);

}  // namespace ecad
