#include "ecad/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ecad {
namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

const Json& require(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + "." + key, "missing required field");
  return *it;
}

template <typename T>
T get_as(const Json& value, const std::string& field) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(field, std::string("wrong type (") + e.what() + ")");
  }
}

template <typename T>
T required_as(const Json& obj, const char* key, const std::string& where) {
  return get_as<T>(require(obj, key, where), where + "." + key);
}

template <typename T>
std::optional<T> optional_as(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return get_as<T>(*it, where + "." + key);
}

// Everything in obj whose key is not listed in known.
Json collect_extras(const Json& obj, std::initializer_list<std::string_view> known) {
  Json extras = Json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      extras[it.key()] = it.value();
    }
  }
  return extras;
}

void append_extras(Json& out, const Json& extras) {
  for (auto it = extras.begin(); it != extras.end(); ++it) out[it.key()] = it.value();
}

Json parse_json_text(std::string_view text, const std::string& origin) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::ostringstream msg;
    msg << origin << ": syntax error at byte " << e.byte << ": " << e.what();
    throw ConfigError(msg.str());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Shallow merge of include files: keys already in root win.
void merge_includes(Json& root, const std::filesystem::path& base_dir,
                    std::set<std::filesystem::path>& visiting) {
  auto it = root.find("includes");
  if (it == root.end()) return;
  if (!it->is_array()) fail("includes", "must be an array of paths");
  const std::vector<std::string> paths = get_as<std::vector<std::string>>(*it, "includes");
  for (const auto& rel : paths) {
    const auto path = std::filesystem::weakly_canonical(base_dir / rel);
    if (visiting.contains(path)) fail("includes", "include cycle through " + path.string());
    if (!std::filesystem::exists(path)) fail("includes", "cannot resolve include '" + rel + "'");
    Json child = parse_json_text(read_text_file(path), path.string());
    if (!child.is_object()) fail("includes", "'" + rel + "' is not a JSON object");
    visiting.insert(path);
    merge_includes(child, path.parent_path(), visiting);
    visiting.erase(path);
    for (auto c = child.begin(); c != child.end(); ++c) {
      if (c.key() == "includes") continue;
      if (!root.contains(c.key())) root[c.key()] = c.value();
    }
  }
}

EvalTypeConfig parse_eval_type(const Json& j, const std::string& where) {
  EvalTypeConfig et;
  et.type = [&] {
    try {
      return eval_type_from_string(required_as<std::string>(j, "type", where));
    } catch (const std::invalid_argument& e) {
      fail(where + ".type", e.what());
    }
  }();
  et.weight = required_as<double>(j, "weight", where);
  et.min_value = required_as<double>(j, "minValue", where);
  et.max_value = required_as<double>(j, "maxValue", where);
  et.active = optional_as<bool>(j, "active", where).value_or(true);
  et.allow_overflow = optional_as<bool>(j, "allowOverflow", where).value_or(false);
  et.minimize = optional_as<bool>(j, "minimize", where);
  et.epochs = optional_as<int>(j, "epochs", where);
  et.batch_size = optional_as<int>(j, "batchSize", where);
  et.metric = optional_as<std::string>(j, "metric", where);
  et.extras = collect_extras(j, {"type", "weight", "minValue", "maxValue", "active",
                                 "allowOverflow", "minimize", "epochs", "batchSize", "metric"});
  if (!(et.min_value < et.max_value)) fail(where, "minValue must be < maxValue");
  if (et.weight < 0.0) fail(where + ".weight", "must be >= 0");
  if (et.epochs && *et.epochs < 1) fail(where + ".epochs", "must be >= 1");
  if (et.batch_size && *et.batch_size < 1) fail(where + ".batchSize", "must be >= 1");
  return et;
}

PopConfig parse_pop(const Json& j) {
  const std::string where = "popConfigValues";
  PopConfig pop;
  pop.initial_pop_size = required_as<int>(j, "initialPopSize", where);
  pop.max_pop_size = required_as<int>(j, "maxPopSize", where);
  pop.change_rate = required_as<double>(j, "changeRate", where);
  pop.min_indiv_eval_complete =
      optional_as<int>(j, "minIndivEvalCompleteBeforeFitSelect", where).value_or(0);
  pop.max_generations = required_as<int>(j, "maxGenerations", where);
  pop.fitness_score_goal = required_as<double>(j, "fitnessScoreGoal", where);
  const Json& ets = require(j, "evalTypes", where);
  if (!ets.is_array()) fail(where + ".evalTypes", "must be an array");
  for (std::size_t i = 0; i < ets.size(); ++i) {
    pop.eval_types.push_back(
        parse_eval_type(ets[i], where + ".evalTypes[" + std::to_string(i) + "]"));
  }
  pop.extras = collect_extras(j, {"initialPopSize", "maxPopSize", "changeRate",
                                  "minIndivEvalCompleteBeforeFitSelect", "maxGenerations",
                                  "fitnessScoreGoal", "evalTypes"});
  if (pop.initial_pop_size <= 0) fail(where + ".initialPopSize", "must be > 0");
  if (pop.max_pop_size < pop.initial_pop_size) {
    fail(where + ".maxPopSize", "must be >= initialPopSize");
  }
  if (!(pop.change_rate > 0.0 && pop.change_rate <= 1.0)) {
    fail(where + ".changeRate", "must be in (0, 1]");
  }
  if (pop.min_indiv_eval_complete < 0) {
    fail(where + ".minIndivEvalCompleteBeforeFitSelect", "must be >= 0");
  }
  if (pop.max_generations < 1) fail(where + ".maxGenerations", "must be >= 1");
  std::set<EvalType> seen;
  for (const auto& et : pop.eval_types) {
    if (!seen.insert(et.type).second) {
      fail(where + ".evalTypes", "duplicate type " + std::string(to_string(et.type)));
    }
  }
  return pop;
}

TraitSpec parse_trait(const Json& j, const std::string& where) {
  TraitSpec t;
  t.min_value = required_as<std::int64_t>(j, "minValue", where);
  t.max_value = required_as<std::int64_t>(j, "maxValue", where);
  t.mod_value = optional_as<std::int64_t>(j, "modValue", where);
  t.pow_value = optional_as<std::int64_t>(j, "powValue", where);
  t.change_rate = optional_as<double>(j, "changeRate", where);
  t.func = optional_as<std::string>(j, "func", where);
  t.extras = collect_extras(
      j, {"minValue", "maxValue", "modValue", "powValue", "changeRate", "func"});
  if (t.min_value > t.max_value) fail(where, "minValue must be <= maxValue");
  if (t.mod_value) {
    if (*t.mod_value <= 0) fail(where + ".modValue", "must be > 0");
    if (t.min_value % *t.mod_value != 0 || t.max_value % *t.mod_value != 0) {
      fail(where + ".modValue", "minValue and maxValue must be multiples of modValue");
    }
  }
  if (t.func && *t.func != "PowFunction") fail(where + ".func", "unknown function '" + *t.func + "'");
  if (t.is_pow() && !t.pow_value) fail(where + ".powValue", "required by PowFunction");
  if (t.pow_value && *t.pow_value < 2) fail(where + ".powValue", "must be >= 2");
  if (t.change_rate && (*t.change_rate < 0.0 || *t.change_rate > 1.0)) {
    fail(where + ".changeRate", "must be in [0, 1]");
  }
  if (t.domain_size() == 0) fail(where, "no legal value in [minValue, maxValue]");
  return t;
}

bool is_trait_object(const Json& v) {
  return v.is_object() && v.contains("minValue") && v.contains("maxValue");
}

CellTypeConfig parse_cell_type(const Json& j, const std::string& where) {
  CellTypeConfig ct;
  const auto type_name = required_as<std::string>(j, "cell_type", where);
  const auto kind = cell_kind_from_string(type_name);
  if (!kind) fail(where + ".cell_type", "unknown cell_type '" + type_name + "'");
  ct.kind = *kind;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "cell_type") continue;
    if (is_trait_object(it.value())) {
      ct.traits.emplace_back(it.key(), parse_trait(it.value(), where + "." + it.key()));
    } else if (it.key() == "systolic_id" && it.value().is_number_integer()) {
      TraitSpec t;
      t.min_value = t.max_value = it.value().get<std::int64_t>();
      t.constant = true;
      ct.traits.emplace_back(it.key(), t);
    } else {
      ct.extras[it.key()] = it.value();
    }
  }
  return ct;
}

HwConfig parse_hw(const Json& j) {
  const std::string where = "hwConfig";
  HwConfig hw;
  hw.device_type = optional_as<std::string>(j, "deviceType", where).value_or("");
  hw.dsp = required_as<std::int64_t>(j, "dsp", where);
  hw.freq_mhz = required_as<double>(j, "freq", where);
  hw.sram_kbit = required_as<double>(j, "sram", where);
  hw.mem_banks = required_as<std::int64_t>(j, "mem_banks", where);
  hw.mem_speed_mts = required_as<double>(j, "mem_speed", where);
  hw.mem_rate_bytes = required_as<double>(j, "mem_rate", where);
  hw.extras = collect_extras(
      j, {"deviceType", "dsp", "freq", "sram", "mem_banks", "mem_speed", "mem_rate"});
  if (hw.dsp <= 0) fail(where + ".dsp", "must be > 0");
  if (!(hw.freq_mhz > 0)) fail(where + ".freq", "must be > 0");
  if (!(hw.sram_kbit > 0)) fail(where + ".sram", "must be > 0");
  if (hw.mem_banks <= 0) fail(where + ".mem_banks", "must be > 0");
  if (!(hw.mem_speed_mts > 0)) fail(where + ".mem_speed", "must be > 0");
  if (!(hw.mem_rate_bytes > 0)) fail(where + ".mem_rate", "must be > 0");
  return hw;
}

HwModelConfig parse_hw_model(const Json& j) {
  const std::string where = "hwModelConfig";
  HwModelConfig m;
  m.k_dsp = optional_as<double>(j, "k_dsp", where).value_or(m.k_dsp);
  m.c_dsp = optional_as<double>(j, "c_dsp", where).value_or(m.c_dsp);
  m.k_mem = optional_as<double>(j, "k_mem", where).value_or(m.k_mem);
  m.c_mem = optional_as<double>(j, "c_mem", where).value_or(m.c_mem);
  m.drain_overlap = optional_as<bool>(j, "drain_overlap", where).value_or(m.drain_overlap);
  m.constrained = optional_as<bool>(j, "constrained", where).value_or(m.constrained);
  m.extras = collect_extras(j, {"k_dsp", "c_dsp", "k_mem", "c_mem", "drain_overlap", "constrained"});
  if (m.k_dsp < 0 || m.c_dsp < 0 || m.k_mem < 0 || m.c_mem < 0) {
    fail(where, "coefficients must be >= 0");
  }
  return m;
}

CellInstance parse_cell(const Json& j, const std::string& where) {
  CellInstance c;
  const auto type_name = required_as<std::string>(j, "cell_type", where);
  const auto kind = cell_kind_from_string(type_name);
  if (!kind) fail(where + ".cell_type", "unknown cell_type '" + type_name + "'");
  c.kind = *kind;
  c.name = required_as<std::string>(j, "cell_name", where);
  c.input = required_as<std::string>(j, "input", where);
  c.output = required_as<std::string>(j, "output", where);
  c.input_size = optional_as<std::int64_t>(j, "input_size", where);
  c.output_size = optional_as<std::int64_t>(j, "output_size", where);
  c.fixed = optional_as<bool>(j, "fixed", where).value_or(false);
  c.extras = collect_extras(
      j, {"cell_type", "cell_name", "input", "output", "input_size", "output_size", "fixed"});
  if (c.name.empty() || c.name == "global") fail(where + ".cell_name", "invalid name");
  if (c.input_size && *c.input_size < 1) fail(where + ".input_size", "must be >= 1");
  if (c.output_size && *c.output_size < 1) fail(where + ".output_size", "must be >= 1");
  return c;
}

// Orders cells from the "global" input to the "global" output.
std::vector<CellInstance> order_chain(std::vector<CellInstance> cells) {
  if (cells.empty()) fail("cellArray", "empty cell array");
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!by_name.emplace(cells[i].name, i).second) {
      fail("cellArray", "duplicate cell_name '" + cells[i].name + "'");
    }
  }
  std::vector<std::size_t> heads;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].input == "global") heads.push_back(i);
  }
  if (heads.size() != 1) fail("cellArray", "broken chain: expected exactly one cell fed by 'global'");

  std::vector<CellInstance> ordered;
  std::set<std::size_t> visited;
  std::size_t cur = heads.front();
  while (true) {
    if (!visited.insert(cur).second) fail("cellArray", "broken chain: cycle at '" + cells[cur].name + "'");
    ordered.push_back(cells[cur]);
    const auto& out = cells[cur].output;
    if (out == "global") break;
    auto next = by_name.find(out);
    if (next == by_name.end()) {
      fail("cellArray", "broken chain: '" + cells[cur].name + "' outputs to unknown cell '" + out + "'");
    }
    if (cells[next->second].input != cells[cur].name) {
      fail("cellArray", "broken chain: '" + out + "' does not take input from '" + cells[cur].name + "'");
    }
    cur = next->second;
  }
  if (ordered.size() != cells.size()) {
    fail("cellArray", "broken chain: not every cell is reachable from 'global'");
  }
  if (ordered.front().kind != CellKind::kInput || !ordered.front().input_size) {
    fail("cellArray", "chain must start with an input cell declaring input_size");
  }
  return ordered;
}

EcadConfig from_json(const Json& root) {
  if (!root.is_object()) fail("<root>", "config must be a JSON object");
  EcadConfig cfg;
  cfg.name = optional_as<std::string>(root, "name", "<root>").value_or("");
  cfg.version = required_as<std::string>(root, "version", "<root>");
  if (cfg.version.empty()) fail("version", "must be non-empty");
  cfg.includes = optional_as<std::vector<std::string>>(root, "includes", "<root>")
                     .value_or(std::vector<std::string>{});
  cfg.pop = parse_pop(require(root, "popConfigValues", "<root>"));

  if (auto it = root.find("traitConfigValues"); it != root.end()) {
    cfg.def_change_rate = optional_as<double>(*it, "defChangeRate", "traitConfigValues").value_or(0.1);
    cfg.trait_extras = collect_extras(*it, {"defChangeRate"});
  }
  if (cfg.def_change_rate < 0.0 || cfg.def_change_rate > 1.0) {
    fail("traitConfigValues.defChangeRate", "must be in [0, 1]");
  }

  const Json& types = require(root, "cellTypes", "<root>");
  if (!types.is_array()) fail("cellTypes", "must be an array");
  std::set<CellKind> declared;
  for (std::size_t i = 0; i < types.size(); ++i) {
    auto ct = parse_cell_type(types[i], "cellTypes[" + std::to_string(i) + "]");
    if (!declared.insert(ct.kind).second) {
      fail("cellTypes", "duplicate declaration of '" + std::string(to_string(ct.kind)) + "'");
    }
    cfg.cell_types.push_back(std::move(ct));
  }

  if (auto it = root.find("netConfig"); it != root.end()) {
    cfg.net_type = optional_as<std::string>(*it, "netType", "netConfig").value_or("");
    cfg.net_extras = collect_extras(*it, {"netType"});
  }
  cfg.hw = parse_hw(require(root, "hwConfig", "<root>"));
  if (auto it = root.find("hwModelConfig"); it != root.end()) cfg.hw_model = parse_hw_model(*it);

  const Json& arr = require(root, "cellArray", "<root>");
  if (!arr.is_array()) fail("cellArray", "must be an array");
  std::vector<CellInstance> cells;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    auto cell = parse_cell(arr[i], "cellArray[" + std::to_string(i) + "]");
    if (!declared.contains(cell.kind)) {
      fail("cellArray[" + std::to_string(i) + "].cell_type",
           "cell_type '" + std::string(to_string(cell.kind)) + "' is not declared in cellTypes");
    }
    cells.push_back(std::move(cell));
  }
  cfg.cell_array = order_chain(std::move(cells));

  cfg.extras = collect_extras(root, {"name", "version", "includes", "popConfigValues",
                                     "traitConfigValues", "cellTypes", "netConfig", "hwConfig",
                                     "hwModelConfig", "cellArray"});
  return cfg;
}

Json trait_to_json(const TraitSpec& t) {
  if (t.constant) return Json(t.min_value);
  Json j = Json::object();
  j["minValue"] = t.min_value;
  j["maxValue"] = t.max_value;
  if (t.mod_value) j["modValue"] = *t.mod_value;
  if (t.pow_value) j["powValue"] = *t.pow_value;
  if (t.change_rate) j["changeRate"] = *t.change_rate;
  if (t.func) j["func"] = *t.func;
  append_extras(j, t.extras);
  return j;
}

}  // namespace

std::string_view to_string(EvalType type) {
  switch (type) {
    case EvalType::kSim: return "simJob";
    case EvalType::kHwDb: return "hwDBJob";
    case EvalType::kPhys: return "physJob";
  }
  return "?";
}

EvalType eval_type_from_string(std::string_view name) {
  if (name == "simJob") return EvalType::kSim;
  if (name == "hwDBJob") return EvalType::kHwDb;
  if (name == "physJob") return EvalType::kPhys;
  throw std::invalid_argument("unknown evalType '" + std::string(name) + "'");
}

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::kInput: return "input";
    case CellKind::kDense: return "dense";
    case CellKind::kRelu: return "relu";
    case CellKind::kOutput: return "output";
  }
  return "?";
}

std::optional<CellKind> cell_kind_from_string(std::string_view name) {
  if (name == "input") return CellKind::kInput;
  if (name == "dense") return CellKind::kDense;
  if (name == "relu") return CellKind::kRelu;
  if (name == "output") return CellKind::kOutput;
  return std::nullopt;
}

std::string EvalTypeConfig::scored_metric() const {
  if (metric) return *metric;
  switch (type) {
    case EvalType::kSim: return "accuracy";
    case EvalType::kHwDb: return "effective_gops";
    case EvalType::kPhys: return "effective_gops";
  }
  return "";
}

int PopConfig::children_per_generation() const {
  return static_cast<int>(std::ceil(change_rate * static_cast<double>(max_pop_size) - 1e-9));
}

std::vector<const EvalTypeConfig*> PopConfig::active_eval_types() const {
  std::vector<const EvalTypeConfig*> out;
  for (const auto& et : eval_types) {
    if (et.active) out.push_back(&et);
  }
  return out;
}

const EvalTypeConfig* PopConfig::eval_type(EvalType type) const {
  for (const auto& et : eval_types) {
    if (et.type == type) return &et;
  }
  return nullptr;
}

std::int64_t TraitSpec::domain_size() const {
  if (constant) return 1;
  if (is_pow()) return static_cast<std::int64_t>(domain().size());
  const std::int64_t step = mod_value.value_or(1);
  return (max_value - min_value) / step + 1;
}

std::int64_t TraitSpec::domain_value(std::int64_t index) const {
  if (constant) return min_value;
  if (is_pow()) return domain().at(static_cast<std::size_t>(index));
  return min_value + index * mod_value.value_or(1);
}

bool TraitSpec::contains(std::int64_t value) const {
  if (value < min_value || value > max_value) return false;
  if (constant) return value == min_value;
  if (is_pow()) {
    const auto d = domain();
    return std::find(d.begin(), d.end(), value) != d.end();
  }
  return !mod_value || value % *mod_value == 0;
}

std::vector<std::int64_t> TraitSpec::domain() const {
  std::vector<std::int64_t> out;
  if (constant) return {min_value};
  if (is_pow()) {
    for (std::int64_t v = 1; v <= max_value; v *= *pow_value) {
      if (v >= min_value) out.push_back(v);
      if (v > max_value / *pow_value) break;
    }
    return out;
  }
  const std::int64_t n = domain_size();
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out.push_back(domain_value(i));
  return out;
}

const TraitSpec* CellTypeConfig::trait(std::string_view name) const {
  for (const auto& [key, spec] : traits) {
    if (key == name) return &spec;
  }
  return nullptr;
}

const CellTypeConfig& EcadConfig::cell_type(CellKind kind) const {
  for (const auto& ct : cell_types) {
    if (ct.kind == kind) return ct;
  }
  throw ConfigError("cell_type '" + std::string(to_string(kind)) + "' is not declared in cellTypes");
}

EcadConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  Json root = parse_json_text(text, "config");
  if (!root.is_object()) fail("<root>", "config must be a JSON object");
  std::set<std::filesystem::path> visiting;
  merge_includes(root, base_dir, visiting);
  return from_json(root);
}

EcadConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  auto base = path.parent_path();
  if (base.empty()) base = std::filesystem::current_path();
  return parse_config(text, base);
}

Json config_to_json(const EcadConfig& cfg) {
  Json root = Json::object();
  root["name"] = cfg.name;
  root["version"] = cfg.version;
  if (!cfg.includes.empty()) root["includes"] = cfg.includes;

  Json pop = Json::object();
  pop["initialPopSize"] = cfg.pop.initial_pop_size;
  pop["maxPopSize"] = cfg.pop.max_pop_size;
  pop["changeRate"] = cfg.pop.change_rate;
  pop["minIndivEvalCompleteBeforeFitSelect"] = cfg.pop.min_indiv_eval_complete;
  pop["maxGenerations"] = cfg.pop.max_generations;
  pop["fitnessScoreGoal"] = cfg.pop.fitness_score_goal;
  Json ets = Json::array();
  for (const auto& et : cfg.pop.eval_types) {
    Json e = Json::object();
    e["type"] = std::string(to_string(et.type));
    e["weight"] = et.weight;
    e["minValue"] = et.min_value;
    e["maxValue"] = et.max_value;
    e["active"] = et.active;
    e["allowOverflow"] = et.allow_overflow;
    if (et.minimize) e["minimize"] = *et.minimize;
    if (et.epochs) e["epochs"] = *et.epochs;
    if (et.batch_size) e["batchSize"] = *et.batch_size;
    if (et.metric) e["metric"] = *et.metric;
    append_extras(e, et.extras);
    ets.push_back(std::move(e));
  }
  pop["evalTypes"] = std::move(ets);
  append_extras(pop, cfg.pop.extras);
  root["popConfigValues"] = std::move(pop);

  Json traits = Json::object();
  traits["defChangeRate"] = cfg.def_change_rate;
  append_extras(traits, cfg.trait_extras);
  root["traitConfigValues"] = std::move(traits);

  Json types = Json::array();
  for (const auto& ct : cfg.cell_types) {
    Json t = Json::object();
    t["cell_type"] = std::string(to_string(ct.kind));
    for (const auto& [name, spec] : ct.traits) t[name] = trait_to_json(spec);
    append_extras(t, ct.extras);
    types.push_back(std::move(t));
  }
  root["cellTypes"] = std::move(types);

  Json net = Json::object();
  net["netType"] = cfg.net_type;
  append_extras(net, cfg.net_extras);
  root["netConfig"] = std::move(net);

  Json hw = Json::object();
  hw["deviceType"] = cfg.hw.device_type;
  hw["dsp"] = cfg.hw.dsp;
  hw["freq"] = cfg.hw.freq_mhz;
  hw["sram"] = cfg.hw.sram_kbit;
  hw["mem_banks"] = cfg.hw.mem_banks;
  hw["mem_speed"] = cfg.hw.mem_speed_mts;
  hw["mem_rate"] = cfg.hw.mem_rate_bytes;
  append_extras(hw, cfg.hw.extras);
  root["hwConfig"] = std::move(hw);

  if (cfg.hw_model) {
    Json m = Json::object();
    m["k_dsp"] = cfg.hw_model->k_dsp;
    m["c_dsp"] = cfg.hw_model->c_dsp;
    m["k_mem"] = cfg.hw_model->k_mem;
    m["c_mem"] = cfg.hw_model->c_mem;
    m["drain_overlap"] = cfg.hw_model->drain_overlap;
    m["constrained"] = cfg.hw_model->constrained;
    append_extras(m, cfg.hw_model->extras);
    root["hwModelConfig"] = std::move(m);
  }

  Json cells = Json::array();
  for (const auto& c : cfg.cell_array) {
    Json j = Json::object();
    j["cell_type"] = std::string(to_string(c.kind));
    j["cell_name"] = c.name;
    j["input"] = c.input;
    j["output"] = c.output;
    if (c.input_size) j["input_size"] = *c.input_size;
    if (c.output_size) j["output_size"] = *c.output_size;
    j["fixed"] = c.fixed;
    append_extras(j, c.extras);
    cells.push_back(std::move(j));
  }
  root["cellArray"] = std::move(cells);

  append_extras(root, cfg.extras);
  return root;
}

std::string serialize_config(const EcadConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

}  // namespace ecad
