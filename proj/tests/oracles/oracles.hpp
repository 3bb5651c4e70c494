#pragma once

// Reference implementations used only by tests. They share no code with the
// library under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

struct Dense {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

// Plain triple loop in 64-bit.
inline Dense matmul_f64(const std::vector<float>& a, const std::vector<float>& b, std::size_t m,
                        std::size_t k, std::size_t n) {
  Dense c{m, n, std::vector<double>(m * n, 0.0)};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += double(a[i * k + p]) * double(b[p * n + j]);
      c.at(i, j) = s;
    }
  }
  return c;
}

inline std::int64_t round_up(std::int64_t x, std::int64_t m) { return ((x + m - 1) / m) * m; }

// Replays the array's float32 accumulation order for one output element:
// the padded common dimension is consumed in vec-wide chunks; each chunk is
// multiplied lane-wise, reduced by a pairwise tree (odd tail carried up), and
// added to a running sum that starts at +0.
inline float ordered_dot_f32(const float* a_row, const float* b_col, std::size_t b_stride,
                             std::int64_t k, std::int64_t k_pad, std::int64_t vec) {
  float acc = 0.0f;
  std::vector<float> lane(static_cast<std::size_t>(vec));
  for (std::int64_t base = 0; base < k_pad; base += vec) {
    for (std::int64_t e = 0; e < vec; ++e) {
      const std::int64_t p = base + e;
      const float x = p < k ? a_row[p] : 0.0f;
      const float y = p < k ? b_col[static_cast<std::size_t>(p) * b_stride] : 0.0f;
      lane[static_cast<std::size_t>(e)] = x * y;
    }
    std::int64_t len = vec;
    while (len > 1) {
      std::int64_t out = 0;
      for (std::int64_t i = 0; i + 1 < len; i += 2) lane[out++] = lane[i] + lane[i + 1];
      if (len % 2 == 1) lane[out++] = lane[len - 1];
      len = out;
    }
    acc += lane[0];
  }
  return acc;
}

// C = A * B (+ bias) (relu) in the array's order. cb = vec * scale.
inline std::vector<float> ordered_matmul_f32(const std::vector<float>& a,
                                             const std::vector<float>& b, std::size_t m,
                                             std::size_t k, std::size_t n, std::int64_t vec,
                                             std::int64_t cb, const std::vector<float>* bias,
                                             bool relu) {
  const std::int64_t k_pad = round_up(static_cast<std::int64_t>(k), cb);
  std::vector<float> c(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float v = ordered_dot_f32(&a[i * k], &b[j], n, static_cast<std::int64_t>(k), k_pad, vec);
      if (bias != nullptr) v += (*bias)[j];
      if (relu && v < 0.0f) v = 0.0f;
      c[i * n + j] = v;
    }
  }
  return c;
}

// Counts PE-grid cycles by walking the block schedule one step at a time:
// every output block, every common block, every vector, every accumulator slot.
inline std::int64_t count_cycles(std::int64_t r, std::int64_t c, std::int64_t v, std::int64_t il,
                                 std::int64_t s, std::int64_t m, std::int64_t k, std::int64_t n) {
  std::int64_t cycles = 0;
  for (std::int64_t row0 = 0; row0 < m; row0 += r * il) {
    for (std::int64_t col0 = 0; col0 < n; col0 += c * il) {
      for (std::int64_t k0 = 0; k0 < k; k0 += v * s) {
        for (std::int64_t vec_i = 0; vec_i < s; ++vec_i) cycles += il * il;
      }
    }
  }
  return cycles;
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> numeric_gradient(const std::function<double()>& f,
                                            std::vector<double*> coords, double h = 1e-6) {
  std::vector<double> g;
  g.reserve(coords.size());
  for (double* x : coords) {
    const double saved = *x;
    *x = saved + h;
    const double up = f();
    *x = saved - h;
    const double down = f();
    *x = saved;
    g.push_back((up - down) / (2.0 * h));
  }
  return g;
}

}  // namespace oracle
