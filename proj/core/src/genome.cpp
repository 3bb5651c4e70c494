#include "ecad/genome.hpp"

#include <algorithm>
#include <bit>

namespace ecad {
namespace {

constexpr int kMutationRedraws = 16;

std::int64_t draw_index(Rng& rng, std::int64_t n) {
  std::uniform_int_distribution<std::int64_t> dist(0, n - 1);
  return dist(rng);
}

std::int64_t draw_value(const TraitSpec& spec, Rng& rng) {
  const std::int64_t n = spec.domain_size();
  if (n <= 0) throw GenomeError("trait has no legal value");
  return spec.domain_value(draw_index(rng, n));
}

bool coin(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(rng) < p;
}

bool has_interleave_rule(const CellTypeConfig& ct) {
  return ct.trait(traits::kSysInterleave) && ct.trait(traits::kSysRows) &&
         ct.trait(traits::kSysCols);
}

std::vector<std::int64_t> interleaves_for(const CellTypeConfig& ct, const CellState& cell) {
  return legal_interleaves(*ct.trait(traits::kSysInterleave),
                           cell.trait_values.at(traits::kSysRows),
                           cell.trait_values.at(traits::kSysCols));
}

void apply_interleave_rule(const CellTypeConfig& ct, CellState& cell, Rng& rng) {
  const auto legal = interleaves_for(ct, cell);
  if (legal.empty()) {
    throw GenomeError("unsatisfiable trait sys_intrlv for cell '" + cell.instance.name +
                      "': no power of 2 >= sys_rows + sys_cols in range");
  }
  cell.trait_values[traits::kSysInterleave] =
      legal[static_cast<std::size_t>(draw_index(rng, static_cast<std::int64_t>(legal.size())))];
}

double change_rate(const TraitSpec& spec, const EcadConfig& cfg) {
  return spec.change_rate.value_or(cfg.def_change_rate);
}

// One redraw pass: every trait flips a coin with its change rate.
void mutate_pass(NetworkGenome& child, const NetworkGenome& parent, const EcadConfig& cfg,
                 Rng& rng) {
  for (std::size_t ci = 0; ci < child.cells.size(); ++ci) {
    auto& cell = child.cells[ci];
    const auto& ct = cfg.cell_type(cell.instance.kind);
    bool interleave_selected = false;
    bool geometry_changed = false;
    for (const auto& [name, spec] : ct.traits) {
      if (spec.constant) continue;
      if (!coin(rng, change_rate(spec, cfg))) continue;
      if (name == traits::kSysInterleave) {
        interleave_selected = true;
        continue;
      }
      const auto before = cell.trait_values[name];
      cell.trait_values[name] = draw_value(spec, rng);
      if ((name == traits::kSysRows || name == traits::kSysCols) &&
          cell.trait_values[name] != before) {
        geometry_changed = true;
      }
    }
    if (!has_interleave_rule(ct) || !(interleave_selected || geometry_changed)) continue;
    if (interleaves_for(ct, cell).empty()) {
      // New rows/cols admit no interleave; keep the parent's geometry.
      cell.trait_values[traits::kSysRows] = parent.cells[ci].trait_values.at(traits::kSysRows);
      cell.trait_values[traits::kSysCols] = parent.cells[ci].trait_values.at(traits::kSysCols);
    }
    apply_interleave_rule(ct, cell, rng);
  }
}

struct Alternative {
  std::size_t cell;
  std::string trait;
  std::vector<std::int64_t> values;
};

// Changes exactly one trait to a different legal value without touching others.
void force_single_change(NetworkGenome& child, const EcadConfig& cfg, Rng& rng) {
  std::vector<Alternative> options;
  for (std::size_t ci = 0; ci < child.cells.size(); ++ci) {
    const auto& cell = child.cells[ci];
    const auto& ct = cfg.cell_type(cell.instance.kind);
    const bool rule = has_interleave_rule(ct);
    for (const auto& [name, spec] : ct.traits) {
      if (spec.constant) continue;
      const auto current = cell.trait_values.at(name);
      std::vector<std::int64_t> candidates;
      if (rule && name == traits::kSysInterleave) {
        candidates = interleaves_for(ct, cell);
      } else {
        candidates = spec.domain();
        if (rule && (name == traits::kSysRows || name == traits::kSysCols)) {
          const auto other = cell.trait_values.at(name == traits::kSysRows ? traits::kSysCols
                                                                         : traits::kSysRows);
          const auto interleave = cell.trait_values.at(traits::kSysInterleave);
          std::erase_if(candidates, [&](std::int64_t v) { return v + other > interleave; });
        }
      }
      std::erase(candidates, current);
      if (!candidates.empty()) options.push_back({ci, name, std::move(candidates)});
    }
  }
  if (options.empty()) return;
  const auto& pick =
      options[static_cast<std::size_t>(draw_index(rng, static_cast<std::int64_t>(options.size())))];
  child.cells[pick.cell].trait_values[pick.trait] = pick.values[static_cast<std::size_t>(
      draw_index(rng, static_cast<std::int64_t>(pick.values.size())))];
}

}  // namespace

std::optional<std::int64_t> CellState::trait(const std::string& name) const {
  auto it = trait_values.find(name);
  if (it == trait_values.end()) return std::nullopt;
  return it->second;
}

const CellState* NetworkGenome::find_cell(const std::string& name) const {
  for (const auto& c : cells) {
    if (c.instance.name == name) return &c;
  }
  return nullptr;
}

const CellState* NetworkGenome::systolic_owner() const {
  for (const auto& c : cells) {
    if (c.instance.kind != CellKind::kDense) continue;
    if (c.trait(traits::kSystolicId).value_or(0) == 0 && c.trait(traits::kSysRows)) return &c;
  }
  return nullptr;
}

std::int64_t NetworkGenome::batch_size() const {
  for (const auto& c : cells) {
    if (c.instance.kind == CellKind::kInput) return c.trait(traits::kBatchSize).value_or(1);
  }
  return 1;
}

std::int64_t NetworkGenome::first_neurons() const {
  for (const auto& c : cells) {
    if (c.instance.kind == CellKind::kDense) return c.trait(traits::kNeurons).value_or(0);
  }
  return 0;
}

bool NetworkGenome::same_traits(const NetworkGenome& other) const {
  if (cells.size() != other.cells.size()) return false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].trait_values != other.cells[i].trait_values) return false;
  }
  return true;
}

std::vector<std::int64_t> legal_interleaves(const TraitSpec& spec, std::int64_t rows,
                                            std::int64_t cols) {
  std::vector<std::int64_t> out;
  for (std::int64_t v = 1; v <= spec.max_value && v > 0; v *= 2) {
    if (v >= rows + cols && spec.contains(v)) out.push_back(v);
  }
  return out;
}

NetworkGenome spawn(const EcadConfig& cfg, Rng& rng, GenomeId id, int generation) {
  NetworkGenome g;
  g.id = id;
  g.generation = generation;
  for (const auto& inst : cfg.cell_array) {
    CellState cell{inst, {}};
    cell.instance.extras = Json::object();
    const auto& ct = cfg.cell_type(inst.kind);
    for (const auto& [name, spec] : ct.traits) cell.trait_values[name] = draw_value(spec, rng);
    if (has_interleave_rule(ct)) apply_interleave_rule(ct, cell, rng);
    g.cells.push_back(std::move(cell));
  }
  return g;
}

NetworkGenome mutate(const NetworkGenome& parent, const EcadConfig& cfg, Rng& rng, GenomeId id,
                     int generation) {
  NetworkGenome child;
  for (int attempt = 0; attempt < kMutationRedraws; ++attempt) {
    child = parent;
    mutate_pass(child, parent, cfg, rng);
    if (!child.same_traits(parent)) break;
  }
  if (child.same_traits(parent)) force_single_change(child, cfg, rng);
  child.id = id;
  child.parent_id = parent.id;
  child.generation = generation;
  return child;
}

std::vector<std::string> invariant_violations(const NetworkGenome& g, const EcadConfig& cfg) {
  std::vector<std::string> out;
  if (g.cells.size() != cfg.cell_array.size()) {
    out.push_back("cell count differs from the configured cell array");
    return out;
  }
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    const auto& cell = g.cells[i];
    const auto& declared = cfg.cell_array[i];
    const std::string where = "cell '" + cell.instance.name + "'";
    if (cell.instance.name != declared.name || cell.instance.kind != declared.kind) {
      out.push_back(where + ": topology differs from config");
      continue;
    }
    if (cell.instance.input_size != declared.input_size ||
        cell.instance.output_size != declared.output_size) {
      out.push_back(where + ": declared sizes changed");
    }
    const auto& ct = cfg.cell_type(cell.instance.kind);
    if (cell.trait_values.size() != ct.traits.size()) out.push_back(where + ": trait set differs");
    for (const auto& [name, spec] : ct.traits) {
      const auto v = cell.trait(name);
      if (!v) {
        out.push_back(where + ": missing trait " + name);
      } else if (!spec.contains(*v)) {
        out.push_back(where + ": " + name + "=" + std::to_string(*v) + " outside its legal set");
      }
    }
    if (has_interleave_rule(ct)) {
      const auto rows = cell.trait(traits::kSysRows).value_or(0);
      const auto cols = cell.trait(traits::kSysCols).value_or(0);
      const auto il = cell.trait(traits::kSysInterleave).value_or(0);
      if (il < rows + cols || !std::has_single_bit(static_cast<std::uint64_t>(il))) {
        out.push_back(where + ": sys_intrlv=" + std::to_string(il) +
                      " is not a power of 2 >= sys_rows + sys_cols");
      }
    }
  }
  return out;
}

std::optional<SystolicConfig> systolic_config(const NetworkGenome& g) {
  const auto* owner = g.systolic_owner();
  if (!owner) return std::nullopt;
  auto get = [&](const char* name) { return owner->trait(name).value_or(1); };
  return SystolicConfig{get(traits::kSysRows), get(traits::kSysCols), get(traits::kSysVec),
                        get(traits::kSysInterleave), get(traits::kSysScale)};
}

NetworkDescription to_description(const NetworkGenome& g) {
  NetworkDescription desc;
  desc.id = std::to_string(g.id);
  desc.batch = g.batch_size();
  std::int64_t width = 0;
  bool last_bias = true;
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    const auto& cell = g.cells[i];
    switch (cell.instance.kind) {
      case CellKind::kInput:
        width = cell.instance.input_size.value_or(0);
        break;
      case CellKind::kDense: {
        LayerDesc layer;
        layer.name = cell.instance.name;
        layer.in = width;
        layer.out = cell.instance.output_size.value_or(cell.trait(traits::kNeurons).value_or(0));
        const bool relu_next =
            i + 1 < g.cells.size() && g.cells[i + 1].instance.kind == CellKind::kRelu;
        layer.activation = relu_next ? Activation::kRelu : Activation::kNone;
        layer.bias = cell.trait(traits::kEnableBias).value_or(1) != 0;
        last_bias = layer.bias;
        width = layer.out;
        desc.layers.push_back(std::move(layer));
        break;
      }
      case CellKind::kRelu:
        if (desc.layers.empty()) throw GenomeError("relu cell without a preceding dense layer");
        break;
      case CellKind::kOutput:
        if (cell.instance.output_size) {
          desc.layers.push_back(LayerDesc{cell.instance.name, width, *cell.instance.output_size,
                                          Activation::kNone, last_bias});
          width = *cell.instance.output_size;
        }
        break;
    }
  }
  desc.systolic = systolic_config(g);
  return desc;
}

NetworkGenome from_description(const NetworkDescription& desc, const EcadConfig& cfg,
                               GenomeId id) {
  NetworkGenome g;
  g.id = id;
  auto find_layer = [&](const std::string& name) -> const LayerDesc* {
    for (const auto& l : desc.layers) {
      if (l.name == name) return &l;
    }
    return nullptr;
  };
  for (const auto& inst : cfg.cell_array) {
    CellState cell{inst, {}};
    cell.instance.extras = Json::object();
    const auto& ct = cfg.cell_type(inst.kind);
    for (const auto& [name, spec] : ct.traits) cell.trait_values[name] = spec.min_value;
    auto set = [&](const char* name, std::int64_t value) {
      const auto* spec = ct.trait(name);
      if (!spec) return;
      if (!spec->contains(value)) {
        throw GenomeError("cell '" + inst.name + "': " + name + "=" + std::to_string(value) +
                          " is not legal under this config");
      }
      cell.trait_values[name] = value;
    };
    if (inst.kind == CellKind::kInput) set(traits::kBatchSize, desc.batch);
    if (inst.kind == CellKind::kDense) {
      const auto* layer = find_layer(inst.name);
      if (!layer) throw GenomeError("description has no layer named '" + inst.name + "'");
      if (!inst.output_size) set(traits::kNeurons, layer->out);
      set(traits::kEnableBias, layer->bias ? 1 : 0);
      if (desc.systolic) {
        set(traits::kSysRows, desc.systolic->rows);
        set(traits::kSysCols, desc.systolic->cols);
        set(traits::kSysVec, desc.systolic->vec);
        set(traits::kSysInterleave, desc.systolic->interleave);
        set(traits::kSysScale, desc.systolic->scale);
      }
    }
    g.cells.push_back(std::move(cell));
  }
  if (auto bad = invariant_violations(g, cfg); !bad.empty()) throw GenomeError(bad.front());
  return g;
}

Json to_json(const NetworkGenome& g) {
  Json j = Json::object();
  j["id"] = g.id;
  j["parent_id"] = g.parent_id ? Json(*g.parent_id) : Json(nullptr);
  j["generation"] = g.generation;
  Json cells = Json::array();
  for (const auto& c : g.cells) {
    Json cj = Json::object();
    cj["cell_type"] = std::string(to_string(c.instance.kind));
    cj["cell_name"] = c.instance.name;
    cj["input"] = c.instance.input;
    cj["output"] = c.instance.output;
    if (c.instance.input_size) cj["input_size"] = *c.instance.input_size;
    if (c.instance.output_size) cj["output_size"] = *c.instance.output_size;
    cj["fixed"] = c.instance.fixed;
    Json tj = Json::object();
    for (const auto& [k, v] : c.trait_values) tj[k] = v;
    cj["traits"] = std::move(tj);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

NetworkGenome genome_from_json(const Json& j) {
  NetworkGenome g;
  g.id = j.at("id").get<GenomeId>();
  if (!j.at("parent_id").is_null()) g.parent_id = j.at("parent_id").get<GenomeId>();
  g.generation = j.at("generation").get<int>();
  for (const auto& cj : j.at("cells")) {
    CellState c;
    const auto kind = cell_kind_from_string(cj.at("cell_type").get<std::string>());
    if (!kind) throw GenomeError("unknown cell_type in stored genome");
    c.instance.kind = *kind;
    c.instance.name = cj.at("cell_name").get<std::string>();
    c.instance.input = cj.at("input").get<std::string>();
    c.instance.output = cj.at("output").get<std::string>();
    if (cj.contains("input_size")) c.instance.input_size = cj["input_size"].get<std::int64_t>();
    if (cj.contains("output_size")) c.instance.output_size = cj["output_size"].get<std::int64_t>();
    c.instance.fixed = cj.value("fixed", false);
    for (auto it = cj.at("traits").begin(); it != cj.at("traits").end(); ++it) {
      c.trait_values[it.key()] = it.value().get<std::int64_t>();
    }
    g.cells.push_back(std::move(c));
  }
  return g;
}

}  // namespace ecad
