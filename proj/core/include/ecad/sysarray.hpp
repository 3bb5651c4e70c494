#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ecad/matrix.hpp"
#include "ecad/network.hpp"
#include "ecad/params.hpp"

// Functional, cycle-counting model of the blocked systolic GEMM dataflow.
namespace ecad::sim {

// Zero-padded block-major storage. Blocks are laid out row-major over the
// block grid and each block is row-major inside.
class BlockedMatrix {
 public:
  BlockedMatrix() = default;
  BlockedMatrix(std::int64_t rows, std::int64_t cols, std::int64_t block_rows,
                std::int64_t block_cols, bool transposed = false);

  static BlockedMatrix pack(const Matrix<float>& dense, std::int64_t block_rows,
                            std::int64_t block_cols);
  // Stores dense^T, which is how the host hands matrix B to the array.
  static BlockedMatrix pack_transposed(const Matrix<float>& dense, std::int64_t block_rows,
                                       std::int64_t block_cols);
  // Logical matrix; a transposed pack unpacks to the stored (transposed) form.
  Matrix<float> unpack() const;

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::int64_t block_rows() const { return block_rows_; }
  std::int64_t block_cols() const { return block_cols_; }
  std::int64_t padded_rows() const { return row_blocks_ * block_rows_; }
  std::int64_t padded_cols() const { return col_blocks_ * block_cols_; }
  std::int64_t row_blocks() const { return row_blocks_; }
  std::int64_t col_blocks() const { return col_blocks_; }
  bool transposed() const { return transposed_; }

  std::span<const float> block(std::int64_t br, std::int64_t bc) const;
  float at(std::int64_t r, std::int64_t c) const;
  void set(std::int64_t r, std::int64_t c, float v);
  const std::vector<float>& storage() const { return data_; }

 private:
  std::int64_t index(std::int64_t r, std::int64_t c) const;

  std::int64_t rows_ = 0, cols_ = 0;
  std::int64_t block_rows_ = 1, block_cols_ = 1;
  std::int64_t row_blocks_ = 0, col_blocks_ = 0;
  bool transposed_ = false;
  std::vector<float> data_;
};

struct CycleStats {
  std::int64_t compute_cycles = 0;
  std::int64_t a_blocks_loaded = 0;
  std::int64_t b_blocks_loaded = 0;
  std::int64_t output_blocks = 0;
  std::int64_t drain_elements = 0;
  std::int64_t flush_events = 0;

  CycleStats& operator+=(const CycleStats& o);
  bool operator==(const CycleStats&) const = default;
};

// One array instance. Drive a layer with begin_layer / step / finish, or use
// simulate_layer. Each step streams one (A, B^T) block pair through the
// memory-module chains into the PE grid; the last pair of an output block
// also drains it through the output modules.
class SystolicArray {
 public:
  explicit SystolicArray(const SystolicConfig& cfg);

  const SystolicConfig& config() const { return cfg_; }

  // a is M x K blocked (R*I) x (V*S); bt is N x K blocked (C*I) x (V*S).
  // An empty bias bypasses the bias stage.
  void begin_layer(const BlockedMatrix& a, const BlockedMatrix& bt, std::span<const float> bias,
                   bool relu);
  // Returns false once every block pair has been processed.
  bool step();
  bool layer_done() const;
  // Runs any remaining steps and returns the M x N result.
  Matrix<float> finish();

  // Zeros accumulators and caches; drains anything still pending.
  void flush();

  const CycleStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }

  bool accumulators_zero() const;
  bool caches_zero() const;

 private:
  struct MemoryModule {
    // Double buffer of I rows x CB values; `front` is read by the PEs.
    std::vector<float> buf[2];
    int front = 0;
  };

  void load_pair(std::int64_t br, std::int64_t bc, std::int64_t kb);
  void compute_pair(bool first_pair);
  void drain_block(std::int64_t br, std::int64_t bc);

  SystolicConfig cfg_;
  std::int64_t bh_, bw_, cb_, slots_;
  std::vector<MemoryModule> row_mods_;
  std::vector<MemoryModule> col_mods_;
  std::vector<float> acc_;  // R * C PEs, I^2 slots each
  std::vector<float> tree_;

  const BlockedMatrix* a_ = nullptr;
  const BlockedMatrix* bt_ = nullptr;
  std::vector<float> bias_;
  bool relu_ = false;
  std::int64_t next_pair_ = 0;
  std::int64_t total_pairs_ = 0;
  Matrix<float> out_;
  CycleStats stats_;
};

struct LayerRun {
  Matrix<float> output;
  CycleStats stats;
};

LayerRun simulate_layer(const Matrix<float>& a, const Matrix<float>& b, const SystolicConfig& cfg,
                        const std::optional<std::vector<float>>& bias = std::nullopt,
                        bool relu = false);

struct NetworkRun {
  Matrix<float> outputs;
  std::vector<CycleStats> layer_stats;

  std::vector<std::int64_t> predictions() const;
};

// Feeds `inputs` through every layer in batches of desc.batch on one array,
// flushing between layers.
NetworkRun run_network(const NetworkDescription& desc, const std::vector<LayerParams>& params,
                       const Matrix<float>& inputs, const SystolicConfig& cfg);
NetworkRun run_network(const NetworkDescription& desc, const std::vector<LayerParams>& params,
                       const Matrix<float>& inputs);

std::vector<std::int64_t> argmax_rows(const Matrix<float>& m);

}  // namespace ecad::sim
