#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace ecad {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EvalType { kSim, kHwDb, kPhys };

std::string_view to_string(EvalType type);
EvalType eval_type_from_string(std::string_view name);

enum class CellKind { kInput, kDense, kRelu, kOutput };

std::string_view to_string(CellKind kind);
std::optional<CellKind> cell_kind_from_string(std::string_view name);

struct EvalTypeConfig {
  EvalType type = EvalType::kSim;
  double weight = 1.0;
  double min_value = 0.0;
  double max_value = 1.0;
  bool active = true;
  bool allow_overflow = false;
  std::optional<bool> minimize;
  std::optional<int> epochs;      // simJob
  std::optional<int> batch_size;  // simJob
  std::optional<std::string> metric;
  Json extras = Json::object();

  bool minimizes() const { return minimize.value_or(false); }
  // Name of the EvalResult metric this objective scores.
  std::string scored_metric() const;

  bool operator==(const EvalTypeConfig&) const = default;
};

struct PopConfig {
  int initial_pop_size = 0;
  int max_pop_size = 0;
  double change_rate = 0.0;
  int min_indiv_eval_complete = 0;
  int max_generations = 1;
  double fitness_score_goal = 0.0;
  std::vector<EvalTypeConfig> eval_types;
  Json extras = Json::object();

  // ceil(changeRate * maxPopSize): children per generation and parent pool size.
  int children_per_generation() const;
  std::vector<const EvalTypeConfig*> active_eval_types() const;
  const EvalTypeConfig* eval_type(EvalType type) const;

  bool operator==(const PopConfig&) const = default;
};

// Legal-value description of one mutable trait. A "constant" spec comes from a
// bare integer in the cell type (e.g. "systolic_id": 0) and is never mutated.
struct TraitSpec {
  std::int64_t min_value = 0;
  std::int64_t max_value = 0;
  std::optional<std::int64_t> mod_value;
  std::optional<std::int64_t> pow_value;
  std::optional<double> change_rate;
  std::optional<std::string> func;
  bool constant = false;
  Json extras = Json::object();

  bool is_pow() const { return func.has_value() && *func == "PowFunction"; }

  // Number of legal values and the i-th one, in increasing order.
  std::int64_t domain_size() const;
  std::int64_t domain_value(std::int64_t index) const;
  bool contains(std::int64_t value) const;
  std::vector<std::int64_t> domain() const;

  bool operator==(const TraitSpec&) const = default;
};

struct CellTypeConfig {
  CellKind kind = CellKind::kDense;
  // Declaration order is kept; mutation visits traits in this order.
  std::vector<std::pair<std::string, TraitSpec>> traits;
  Json extras = Json::object();

  const TraitSpec* trait(std::string_view name) const;

  bool operator==(const CellTypeConfig&) const = default;
};

struct HwConfig {
  std::string device_type;
  std::int64_t dsp = 0;
  double freq_mhz = 0.0;
  double sram_kbit = 0.0;
  std::int64_t mem_banks = 0;
  double mem_speed_mts = 0.0;
  double mem_rate_bytes = 0.0;
  Json extras = Json::object();

  double bandwidth_bytes_per_s() const {
    return static_cast<double>(mem_banks) * mem_speed_mts * 1e6 * mem_rate_bytes;
  }

  bool operator==(const HwConfig&) const = default;
};

// Calibration knobs of the analytical hardware model.
struct HwModelConfig {
  double k_dsp = 1.0;
  double c_dsp = 32.0;
  double k_mem = 1.0;
  double c_mem = 256.0;
  // When false the single-element drain path is serialized after compute.
  bool drain_overlap = false;
  // When true, infeasible configurations score zero on the hwDB objective.
  bool constrained = true;
  Json extras = Json::object();

  bool operator==(const HwModelConfig&) const = default;
};

struct CellInstance {
  CellKind kind = CellKind::kDense;
  std::string name;
  std::string input;
  std::string output;
  std::optional<std::int64_t> input_size;
  std::optional<std::int64_t> output_size;
  bool fixed = false;
  Json extras = Json::object();

  bool operator==(const CellInstance&) const = default;
};

struct EcadConfig {
  std::string name;
  std::string version;
  std::vector<std::string> includes;
  PopConfig pop;
  double def_change_rate = 0.1;
  Json trait_extras = Json::object();
  std::vector<CellTypeConfig> cell_types;
  std::string net_type;
  Json net_extras = Json::object();
  HwConfig hw;
  std::optional<HwModelConfig> hw_model;
  std::vector<CellInstance> cell_array;  // in chain order, "global" to "global"
  Json extras = Json::object();

  const CellTypeConfig& cell_type(CellKind kind) const;
  HwModelConfig hw_model_or_default() const { return hw_model.value_or(HwModelConfig{}); }

  bool operator==(const EcadConfig&) const = default;
};

// Parses config text. Relative include paths resolve against base_dir.
EcadConfig parse_config(std::string_view text,
                        const std::filesystem::path& base_dir = std::filesystem::current_path());
EcadConfig load_config(const std::filesystem::path& path);

Json config_to_json(const EcadConfig& cfg);
std::string serialize_config(const EcadConfig& cfg);

}  // namespace ecad
