#include "ecad/sysarray.hpp"

#include <algorithm>
#include <stdexcept>

namespace ecad::sim {
namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

// Pairwise adjacent reduction; an odd tail element moves up a level unchanged.
float tree_sum(float* v, std::int64_t n) {
  while (n > 1) {
    const std::int64_t half = n / 2;
    for (std::int64_t i = 0; i < half; ++i) v[i] = v[2 * i] + v[2 * i + 1];
    if (n % 2 != 0) v[half] = v[n - 1];
    n = half + n % 2;
  }
  return v[0];
}

}  // namespace

BlockedMatrix::BlockedMatrix(std::int64_t rows, std::int64_t cols, std::int64_t block_rows,
                             std::int64_t block_cols, bool transposed)
    : rows_(rows),
      cols_(cols),
      block_rows_(block_rows),
      block_cols_(block_cols),
      row_blocks_(ceil_div(rows, block_rows)),
      col_blocks_(ceil_div(cols, block_cols)),
      transposed_(transposed) {
  if (rows < 1 || cols < 1 || block_rows < 1 || block_cols < 1) {
    throw std::invalid_argument("BlockedMatrix: dims must be >= 1");
  }
  data_.assign(static_cast<std::size_t>(padded_rows() * padded_cols()), 0.0f);
}

std::int64_t BlockedMatrix::index(std::int64_t r, std::int64_t c) const {
  const std::int64_t br = r / block_rows_, bc = c / block_cols_;
  const std::int64_t block_size = block_rows_ * block_cols_;
  return (br * col_blocks_ + bc) * block_size + (r % block_rows_) * block_cols_ + c % block_cols_;
}

BlockedMatrix BlockedMatrix::pack(const Matrix<float>& dense, std::int64_t block_rows,
                                  std::int64_t block_cols) {
  BlockedMatrix m(static_cast<std::int64_t>(dense.rows()), static_cast<std::int64_t>(dense.cols()),
                  block_rows, block_cols);
  for (std::int64_t r = 0; r < m.rows_; ++r) {
    for (std::int64_t c = 0; c < m.cols_; ++c) m.data_[m.index(r, c)] = dense(r, c);
  }
  return m;
}

BlockedMatrix BlockedMatrix::pack_transposed(const Matrix<float>& dense, std::int64_t block_rows,
                                             std::int64_t block_cols) {
  BlockedMatrix m(static_cast<std::int64_t>(dense.cols()), static_cast<std::int64_t>(dense.rows()),
                  block_rows, block_cols, true);
  for (std::int64_t r = 0; r < m.rows_; ++r) {
    for (std::int64_t c = 0; c < m.cols_; ++c) m.data_[m.index(r, c)] = dense(c, r);
  }
  return m;
}

Matrix<float> BlockedMatrix::unpack() const {
  Matrix<float> dense(rows_, cols_);
  for (std::int64_t r = 0; r < rows_; ++r) {
    for (std::int64_t c = 0; c < cols_; ++c) dense(r, c) = data_[index(r, c)];
  }
  return dense;
}

std::span<const float> BlockedMatrix::block(std::int64_t br, std::int64_t bc) const {
  const std::int64_t size = block_rows_ * block_cols_;
  return {data_.data() + (br * col_blocks_ + bc) * size, static_cast<std::size_t>(size)};
}

float BlockedMatrix::at(std::int64_t r, std::int64_t c) const {
  if (r < 0 || c < 0 || r >= padded_rows() || c >= padded_cols()) {
    throw std::out_of_range("BlockedMatrix::at");
  }
  return data_[index(r, c)];
}

void BlockedMatrix::set(std::int64_t r, std::int64_t c, float v) {
  if (r < 0 || c < 0 || r >= rows_ || c >= cols_) throw std::out_of_range("BlockedMatrix::set");
  data_[index(r, c)] = v;
}

CycleStats& CycleStats::operator+=(const CycleStats& o) {
  compute_cycles += o.compute_cycles;
  a_blocks_loaded += o.a_blocks_loaded;
  b_blocks_loaded += o.b_blocks_loaded;
  output_blocks += o.output_blocks;
  drain_elements += o.drain_elements;
  flush_events += o.flush_events;
  return *this;
}

SystolicArray::SystolicArray(const SystolicConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  bh_ = cfg_.rows * cfg_.interleave;
  bw_ = cfg_.cols * cfg_.interleave;
  cb_ = cfg_.vec * cfg_.scale;
  slots_ = cfg_.interleave * cfg_.interleave;
  const auto cache = static_cast<std::size_t>(cfg_.interleave * cb_);
  row_mods_.resize(static_cast<std::size_t>(cfg_.rows));
  col_mods_.resize(static_cast<std::size_t>(cfg_.cols));
  for (auto* mods : {&row_mods_, &col_mods_}) {
    for (auto& m : *mods) {
      m.buf[0].assign(cache, 0.0f);
      m.buf[1].assign(cache, 0.0f);
    }
  }
  acc_.assign(static_cast<std::size_t>(cfg_.rows * cfg_.cols * slots_), 0.0f);
  tree_.resize(static_cast<std::size_t>(cfg_.vec));
}

void SystolicArray::begin_layer(const BlockedMatrix& a, const BlockedMatrix& bt,
                                std::span<const float> bias, bool relu) {
  if (a.block_rows() != bh_ || a.block_cols() != cb_ || bt.block_rows() != bw_ ||
      bt.block_cols() != cb_) {
    throw std::invalid_argument("begin_layer: operands are not blocked for this array");
  }
  if (a.cols() != bt.cols()) throw std::invalid_argument("begin_layer: inner dims differ");
  if (!bias.empty() && static_cast<std::int64_t>(bias.size()) != bt.rows()) {
    throw std::invalid_argument("begin_layer: bias length != N");
  }
  a_ = &a;
  bt_ = &bt;
  bias_.assign(bias.begin(), bias.end());
  relu_ = relu;
  next_pair_ = 0;
  total_pairs_ = a.row_blocks() * bt.row_blocks() * a.col_blocks();
  out_ = Matrix<float>(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(bt.rows()));
}

bool SystolicArray::layer_done() const { return a_ == nullptr || next_pair_ >= total_pairs_; }

// The loaders push one block into each chain head; every module keeps its own
// I-row slice and forwards the remainder down the chain.
void SystolicArray::load_pair(std::int64_t br, std::int64_t bc, std::int64_t kb) {
  const auto a_block = a_->block(br, kb);
  const auto b_block = bt_->block(bc, kb);
  const std::int64_t slice = cfg_.interleave * cb_;
  for (std::int64_t r = 0; r < cfg_.rows; ++r) {
    auto& m = row_mods_[static_cast<std::size_t>(r)];
    auto& back = m.buf[1 - m.front];
    std::copy_n(a_block.begin() + r * slice, slice, back.begin());
    m.front = 1 - m.front;
  }
  for (std::int64_t c = 0; c < cfg_.cols; ++c) {
    auto& m = col_mods_[static_cast<std::size_t>(c)];
    auto& back = m.buf[1 - m.front];
    std::copy_n(b_block.begin() + c * slice, slice, back.begin());
    m.front = 1 - m.front;
  }
  ++stats_.a_blocks_loaded;
  ++stats_.b_blocks_loaded;
}

// Every PE walks its I^2 accumulator slots once per vector, S vectors per
// block pair. All PEs run in lock step, so the pair costs S * I^2 cycles.
void SystolicArray::compute_pair(bool first_pair) {
  const std::int64_t il = cfg_.interleave, v = cfg_.vec;
  float* t = tree_.data();
  for (std::int64_t r = 0; r < cfg_.rows; ++r) {
    const auto& rm = row_mods_[static_cast<std::size_t>(r)];
    const float* a = rm.buf[rm.front].data();
    for (std::int64_t c = 0; c < cfg_.cols; ++c) {
      const auto& cm = col_mods_[static_cast<std::size_t>(c)];
      const float* b = cm.buf[cm.front].data();
      float* acc = acc_.data() + (r * cfg_.cols + c) * slots_;
      if (first_pair) std::fill_n(acc, slots_, 0.0f);
      for (std::int64_t s = 0; s < cfg_.scale; ++s) {
        for (std::int64_t slot = 0; slot < slots_; ++slot) {
          const float* av = a + (slot / il) * cb_ + s * v;
          const float* bv = b + (slot % il) * cb_ + s * v;
          for (std::int64_t e = 0; e < v; ++e) t[e] = av[e] * bv[e];
          acc[slot] += tree_sum(t, v);
        }
      }
    }
  }
  stats_.compute_cycles += cfg_.scale * slots_;
}

// Column chains shift their PE results into the output modules, which hand a
// single element per cycle to the global drain. The drain places each element
// at its row-major address, adds bias, applies ReLU and drops padding.
void SystolicArray::drain_block(std::int64_t br, std::int64_t bc) {
  const std::int64_t il = cfg_.interleave;
  const std::int64_t m = a_->rows(), n = bt_->rows();
  for (std::int64_t c = 0; c < cfg_.cols; ++c) {
    for (std::int64_t r = 0; r < cfg_.rows; ++r) {
      float* acc = acc_.data() + (r * cfg_.cols + c) * slots_;
      for (std::int64_t slot = 0; slot < slots_; ++slot) {
        const std::int64_t row = br * bh_ + r * il + slot / il;
        const std::int64_t col = bc * bw_ + c * il + slot % il;
        float value = acc[slot];
        acc[slot] = 0.0f;
        ++stats_.drain_elements;
        if (row >= m || col >= n) continue;
        if (!bias_.empty()) value += bias_[static_cast<std::size_t>(col)];
        if (relu_) value = std::max(value, 0.0f);
        out_(static_cast<std::size_t>(row), static_cast<std::size_t>(col)) = value;
      }
    }
  }
  ++stats_.output_blocks;
}

bool SystolicArray::step() {
  if (layer_done()) return false;
  const std::int64_t kblocks = a_->col_blocks();
  const std::int64_t out_block = next_pair_ / kblocks;
  const std::int64_t kb = next_pair_ % kblocks;
  const std::int64_t br = out_block / bt_->row_blocks();
  const std::int64_t bc = out_block % bt_->row_blocks();
  load_pair(br, bc, kb);
  compute_pair(kb == 0);
  if (kb == kblocks - 1) drain_block(br, bc);
  ++next_pair_;
  return !layer_done();
}

Matrix<float> SystolicArray::finish() {
  if (a_ == nullptr) throw std::logic_error("finish: no layer in progress");
  while (step()) {
  }
  a_ = nullptr;
  bt_ = nullptr;
  return std::move(out_);
}

void SystolicArray::flush() {
  std::fill(acc_.begin(), acc_.end(), 0.0f);
  for (auto* mods : {&row_mods_, &col_mods_}) {
    for (auto& m : *mods) {
      std::fill(m.buf[0].begin(), m.buf[0].end(), 0.0f);
      std::fill(m.buf[1].begin(), m.buf[1].end(), 0.0f);
      m.front = 0;
    }
  }
  // An interrupted layer is abandoned; its partial sums are discarded above.
  a_ = nullptr;
  bt_ = nullptr;
  next_pair_ = total_pairs_ = 0;
  ++stats_.flush_events;
}

bool SystolicArray::accumulators_zero() const {
  return std::all_of(acc_.begin(), acc_.end(), [](float x) { return x == 0.0f; });
}

bool SystolicArray::caches_zero() const {
  for (const auto* mods : {&row_mods_, &col_mods_}) {
    for (const auto& m : *mods) {
      for (const auto& buf : m.buf) {
        if (!std::all_of(buf.begin(), buf.end(), [](float x) { return x == 0.0f; })) return false;
      }
    }
  }
  return true;
}

LayerRun simulate_layer(const Matrix<float>& a, const Matrix<float>& b, const SystolicConfig& cfg,
                        const std::optional<std::vector<float>>& bias, bool relu) {
  if (a.cols() != b.rows()) throw std::invalid_argument("simulate_layer: A.cols != B.rows");
  SystolicArray array(cfg);
  const auto ab = BlockedMatrix::pack(a, cfg.rows * cfg.interleave, cfg.vec * cfg.scale);
  const auto bt = BlockedMatrix::pack_transposed(b, cfg.cols * cfg.interleave, cfg.vec * cfg.scale);
  std::span<const float> bias_span;
  if (bias) bias_span = *bias;
  array.begin_layer(ab, bt, bias_span, relu);
  LayerRun run;
  run.output = array.finish();
  run.stats = array.stats();
  return run;
}

std::vector<std::int64_t> argmax_rows(const Matrix<float>& m) {
  std::vector<std::int64_t> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    out[r] = std::max_element(row.begin(), row.end()) - row.begin();
  }
  return out;
}

std::vector<std::int64_t> NetworkRun::predictions() const { return argmax_rows(outputs); }

NetworkRun run_network(const NetworkDescription& desc, const std::vector<LayerParams>& params,
                       const Matrix<float>& inputs, const SystolicConfig& cfg) {
  desc.validate();
  check_params(desc, params);
  if (static_cast<std::int64_t>(inputs.cols()) != desc.input_size()) {
    throw std::invalid_argument("run_network: input width " + std::to_string(inputs.cols()) +
                                " != " + std::to_string(desc.input_size()));
  }
  SystolicArray array(cfg);
  const std::int64_t bh = cfg.rows * cfg.interleave, bw = cfg.cols * cfg.interleave;
  const std::int64_t cb = cfg.vec * cfg.scale;

  std::vector<BlockedMatrix> weights;
  for (const auto& p : params) weights.push_back(BlockedMatrix::pack_transposed(p.weights, bw, cb));

  NetworkRun run;
  run.layer_stats.resize(desc.layers.size());
  run.outputs = Matrix<float>(inputs.rows(), static_cast<std::size_t>(desc.output_size()));
  const auto total = static_cast<std::int64_t>(inputs.rows());
  const std::int64_t batch = std::max<std::int64_t>(desc.batch, 1);
  for (std::int64_t first = 0; first < total; first += batch) {
    const std::int64_t count = std::min(batch, total - first);
    Matrix<float> x = inputs.slice_rows(static_cast<std::size_t>(first),
                                        static_cast<std::size_t>(count));
    for (std::size_t l = 0; l < desc.layers.size(); ++l) {
      const auto& ld = desc.layers[l];
      const auto a = BlockedMatrix::pack(x, bh, cb);
      std::span<const float> bias;
      if (ld.bias) bias = params[l].bias;
      array.reset_stats();
      array.begin_layer(a, weights[l], bias, ld.activation == Activation::kRelu);
      x = array.finish();
      array.flush();
      run.layer_stats[l] += array.stats();
    }
    std::copy(x.data().begin(), x.data().end(),
              run.outputs.data().begin() + first * desc.output_size());
  }
  return run;
}

NetworkRun run_network(const NetworkDescription& desc, const std::vector<LayerParams>& params,
                       const Matrix<float>& inputs) {
  if (!desc.systolic) throw std::invalid_argument("run_network: description has no systolic config");
  return run_network(desc, params, inputs, *desc.systolic);
}

}  // namespace ecad::sim
