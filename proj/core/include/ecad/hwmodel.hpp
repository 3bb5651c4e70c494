#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecad/config.hpp"
#include "ecad/network.hpp"

// Analytical performance model of the blocked 2D systolic array. Each PE holds
// interleave^2 accumulators and consumes one vec-wide vector per cycle, so an
// output block of (rows*I) x (cols*I) takes (K'/vec) * I^2 cycles.
namespace ecad::hw {

struct BlockGeometry {
  std::int64_t block_height = 0;  // BH = rows * interleave (matrix A)
  std::int64_t block_width = 0;   // BW = cols * interleave (matrix B)
  std::int64_t common_block = 0;  // CB = vec * scale
  std::int64_t m = 0, k = 0, n = 0;
  std::int64_t m_pad = 0, k_pad = 0, n_pad = 0;

  std::int64_t row_blocks() const { return m_pad / block_height; }
  std::int64_t col_blocks() const { return n_pad / block_width; }
  std::int64_t common_blocks() const { return k_pad / common_block; }
  std::int64_t output_blocks() const { return row_blocks() * col_blocks(); }

  double m_efficiency() const { return static_cast<double>(m) / static_cast<double>(m_pad); }
  double k_efficiency() const { return static_cast<double>(k) / static_cast<double>(k_pad); }
  double n_efficiency() const { return static_cast<double>(n) / static_cast<double>(n_pad); }

  bool operator==(const BlockGeometry&) const = default;
};

BlockGeometry block_geometry(const SystolicConfig& cfg, std::int64_t m, std::int64_t k,
                             std::int64_t n);

// Cycles spent in the PE grid for one layer: (M'/BH) * (N'/BW) * (K'/V) * I^2.
std::int64_t compute_cycles(const SystolicConfig& cfg, const BlockGeometry& geom);
// Elements leaving through the single-element drain path: M' * N'.
std::int64_t drain_elements(const BlockGeometry& geom);
// Global-memory traffic for one layer: A and B blocks per output block plus the output write.
std::int64_t transfer_bytes(const BlockGeometry& geom);

// Roofline: 2 * rows * cols * vec * freq.
double potential_gops(const SystolicConfig& cfg, double freq_mhz);

struct ResourceEstimate {
  double dsp = 0.0;
  double mem_kbyte = 0.0;
  double m20k_blocks = 0.0;
  double alm = 0.0;  // not modeled; reported as 0
  bool feasible = false;
};

ResourceEstimate resource_estimate(const SystolicConfig& cfg, const HwConfig& hw,
                                   const HwModelConfig& model = {});

struct LayerEstimate {
  std::string name;
  BlockGeometry geometry;
  std::int64_t compute_cycles = 0;
  std::int64_t drain_cycles = 0;
  std::int64_t bytes = 0;
  double compute_s = 0.0;
  double memory_s = 0.0;
  double time_s = 0.0;
  bool bandwidth_bound = false;
};

struct HwEstimate {
  double total_time_ms = 0.0;
  double potential_gops = 0.0;
  double effective_gops = 0.0;
  double img_per_s = 0.0;
  double latency_ms = 0.0;
  double total_ops = 0.0;  // 2 * batch * sum(in * out), unpadded
  ResourceEstimate resources;
  bool feasible = false;
  std::vector<LayerEstimate> layers;

  // EvalResult metric map (total_time_ms, potential_gops, effective_gops,
  // img_per_s, latency_ms, dsp_est, mem_kb_est, feasible).
  std::map<std::string, double> metrics() const;
};

// Single systolic array shared by all layers; batch comes from desc.
HwEstimate estimate(const NetworkDescription& desc, const SystolicConfig& cfg, const HwConfig& hw,
                    const HwModelConfig& model = {});

// img/s implied by a given effective throughput for this network and batch.
double img_per_s_at(const NetworkDescription& desc, double effective_gops);

}  // namespace ecad::hw
