#include "ecad/hwmodel.hpp"

#include <algorithm>
#include <stdexcept>

namespace ecad::hw {
namespace {

constexpr double kBytesPerElement = 4.0;  // float32 everywhere
constexpr double kM20kKbit = 20.0;

std::int64_t round_up(std::int64_t x, std::int64_t multiple) {
  return (x + multiple - 1) / multiple * multiple;
}

}  // namespace

BlockGeometry block_geometry(const SystolicConfig& cfg, std::int64_t m, std::int64_t k,
                             std::int64_t n) {
  cfg.validate();
  if (m < 1 || k < 1 || n < 1) throw std::invalid_argument("block_geometry: dims must be >= 1");
  BlockGeometry g;
  g.block_height = cfg.rows * cfg.interleave;
  g.block_width = cfg.cols * cfg.interleave;
  g.common_block = cfg.vec * cfg.scale;
  g.m = m;
  g.k = k;
  g.n = n;
  g.m_pad = round_up(m, g.block_height);
  g.k_pad = round_up(k, g.common_block);
  g.n_pad = round_up(n, g.block_width);
  return g;
}

std::int64_t compute_cycles(const SystolicConfig& cfg, const BlockGeometry& geom) {
  return geom.row_blocks() * geom.col_blocks() * (geom.k_pad / cfg.vec) * cfg.interleave *
         cfg.interleave;
}

std::int64_t drain_elements(const BlockGeometry& geom) { return geom.m_pad * geom.n_pad; }

std::int64_t transfer_bytes(const BlockGeometry& geom) {
  const std::int64_t per_pair =
      (geom.block_height * geom.common_block + geom.common_block * geom.block_width) * 4;
  return geom.output_blocks() * geom.common_blocks() * per_pair + geom.m_pad * geom.n_pad * 4;
}

double potential_gops(const SystolicConfig& cfg, double freq_mhz) {
  return 2.0 * static_cast<double>(cfg.rows * cfg.cols * cfg.vec) * freq_mhz * 1e6 / 1e9;
}

ResourceEstimate resource_estimate(const SystolicConfig& cfg, const HwConfig& hw,
                                   const HwModelConfig& model) {
  cfg.validate();
  ResourceEstimate r;
  const double lanes = static_cast<double>(cfg.rows * cfg.cols * cfg.vec);
  r.dsp = model.k_dsp * lanes + model.c_dsp;

  const double cb = static_cast<double>(cfg.vec * cfg.scale);
  const double il = static_cast<double>(cfg.interleave);
  // Double-buffered MMod caches, one I x CB slice per edge module.
  const double mmod_bytes =
      static_cast<double>(cfg.rows + cfg.cols) * 2.0 * il * cb * kBytesPerElement;
  // Global drain reorder cache (one output block) and the bias cache.
  const double bw = static_cast<double>(cfg.cols) * il;
  const double drain_bytes = static_cast<double>(cfg.rows) * il * bw * kBytesPerElement;
  const double bias_bytes = bw * kBytesPerElement;
  r.mem_kbyte = model.k_mem * mmod_bytes / 1024.0 + model.c_mem + (drain_bytes + bias_bytes) / 1024.0;
  r.m20k_blocks = r.mem_kbyte * 8.0 / kM20kKbit;
  // hw.sram is in kilobits.
  r.feasible = r.dsp <= static_cast<double>(hw.dsp) && r.mem_kbyte * 8.0 <= hw.sram_kbit;
  return r;
}

std::map<std::string, double> HwEstimate::metrics() const {
  return {{"total_time_ms", total_time_ms},
          {"potential_gops", potential_gops},
          {"effective_gops", effective_gops},
          {"img_per_s", img_per_s},
          {"latency_ms", latency_ms},
          {"dsp_est", resources.dsp},
          {"mem_kb_est", resources.mem_kbyte},
          {"feasible", feasible ? 1.0 : 0.0}};
}

HwEstimate estimate(const NetworkDescription& desc, const SystolicConfig& cfg, const HwConfig& hw,
                    const HwModelConfig& model) {
  if (desc.layers.empty()) throw std::invalid_argument("estimate: network has no layers");
  desc.validate();
  cfg.validate();
  const double freq_hz = hw.freq_mhz * 1e6;
  const double bandwidth = hw.bandwidth_bytes_per_s();
  if (!(freq_hz > 0) || !(bandwidth > 0)) throw std::invalid_argument("estimate: bad hwConfig");

  HwEstimate est;
  double total_s = 0.0;
  double macs = 0.0;
  for (const auto& layer : desc.layers) {
    LayerEstimate le;
    le.name = layer.name;
    le.geometry = block_geometry(cfg, desc.batch, layer.in, layer.out);
    le.compute_cycles = compute_cycles(cfg, le.geometry);
    le.drain_cycles = model.drain_overlap ? 0 : drain_elements(le.geometry);
    le.bytes = transfer_bytes(le.geometry);
    le.compute_s = static_cast<double>(le.compute_cycles + le.drain_cycles) / freq_hz;
    le.memory_s = static_cast<double>(le.bytes) / bandwidth;
    le.bandwidth_bound = le.memory_s > le.compute_s;
    le.time_s = std::max(le.compute_s, le.memory_s);
    total_s += le.time_s;
    macs += static_cast<double>(layer.in) * static_cast<double>(layer.out);
    est.layers.push_back(std::move(le));
  }

  est.total_ops = 2.0 * static_cast<double>(desc.batch) * macs;
  est.potential_gops = potential_gops(cfg, hw.freq_mhz);
  est.effective_gops = est.total_ops / total_s / 1e9;
  est.total_time_ms = est.total_ops / (est.effective_gops * 1e9) * 1e3;
  est.img_per_s = static_cast<double>(desc.batch) / (est.total_time_ms / 1e3);

  // Time to the first output: every earlier layer plus the first output block
  // of the last layer.
  double before_last = 0.0;
  for (std::size_t i = 0; i + 1 < est.layers.size(); ++i) before_last += est.layers[i].time_s;
  const auto& last = est.layers.back().geometry;
  const double first_block_cycles =
      static_cast<double>((last.k_pad / cfg.vec) * cfg.interleave * cfg.interleave);
  est.latency_ms = (before_last + first_block_cycles / freq_hz) * 1e3;

  est.resources = resource_estimate(cfg, hw, model);
  est.feasible = est.resources.feasible;
  return est;
}

double img_per_s_at(const NetworkDescription& desc, double effective_gops) {
  const double ops = 2.0 * static_cast<double>(desc.batch) *
                     static_cast<double>(desc.macs_per_sample());
  const double seconds = ops / (effective_gops * 1e9);
  return static_cast<double>(desc.batch) / seconds;
}

}  // namespace ecad::hw
