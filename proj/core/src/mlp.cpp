#include <algorithm>
#include <cmath>
#include <random>

#include "ecad/nnsim.hpp"

namespace ecad::nn {
namespace {

// C = A * B, accumulating over the inner index in increasing order.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* ci = c.row(i).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const T aip = a(i, p);
      const T* bp = b.row(p).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

// A^T * B where A is m x k and B is m x n.
template <typename T>
Matrix<T> matmul_at_b(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const T* bi = b.row(i).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const T aip = a(i, p);
      if (aip == T(0)) continue;
      T* cp = c.row(p).data();
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
  return c;
}

// A * B^T where A is m x n and B is k x n.
template <typename T>
Matrix<T> matmul_a_bt(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), b.rows());
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const T* ai = a.row(i).data();
    for (std::size_t k = 0; k < b.rows(); ++k) {
      const T* bk = b.row(k).data();
      T s = 0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bk[j];
      c(i, k) = s;
    }
  }
  return c;
}

template <typename T>
void affine(const DenseLayer<T>& l, const Matrix<T>& x, Matrix<T>& z) {
  z = matmul(x, l.weights);
  if (l.use_bias) {
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += l.bias[j];
    }
  }
  if (l.activation == Activation::kRelu) {
    for (auto& v : z.data()) v = std::max(v, T(0));
  }
}

template <typename T>
void check_labels(const Matrix<T>& x, const Matrix<T>& labels, std::size_t classes) {
  if (labels.rows() != x.rows() || labels.cols() != classes) {
    throw std::invalid_argument("labels shape does not match batch/output size");
  }
}

}  // namespace

template <typename T>
Mlp<T> Mlp<T>::init(const NetworkDescription& desc, std::uint64_t seed) {
  desc.validate();
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer<T>> layers;
  for (const auto& ld : desc.layers) {
    DenseLayer<T> l;
    l.weights = Matrix<T>(static_cast<std::size_t>(ld.in), static_cast<std::size_t>(ld.out));
    const double limit = std::sqrt(6.0 / static_cast<double>(ld.in + ld.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& w : l.weights.data()) w = static_cast<T>(dist(rng));
    l.bias.assign(static_cast<std::size_t>(ld.out), T(0));
    l.activation = ld.activation;
    l.use_bias = ld.bias;
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

template <typename T>
Mlp<T> Mlp<T>::from_params(const NetworkDescription& desc, const std::vector<LayerParams>& params) {
  check_params(desc, params);
  std::vector<DenseLayer<T>> layers;
  for (std::size_t i = 0; i < params.size(); ++i) {
    DenseLayer<T> l;
    l.weights = params[i].weights.template cast<T>();
    l.bias.assign(params[i].bias.begin(), params[i].bias.end());
    l.activation = desc.layers[i].activation;
    l.use_bias = desc.layers[i].bias;
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

template <typename T>
std::vector<LayerParams> Mlp<T>::params() const {
  std::vector<LayerParams> out;
  for (const auto& l : layers_) {
    out.push_back({l.weights.template cast<float>(), std::vector<float>(l.bias.begin(), l.bias.end())});
  }
  return out;
}

template <typename T>
template <typename U>
Mlp<U> Mlp<T>::cast() const {
  std::vector<DenseLayer<U>> layers;
  for (const auto& l : layers_) {
    layers.push_back({l.weights.template cast<U>(), std::vector<U>(l.bias.begin(), l.bias.end()),
                      l.activation, l.use_bias});
  }
  return Mlp<U>(std::move(layers));
}

template <typename T>
Matrix<T> Mlp<T>::forward(const Matrix<T>& x) const {
  if (x.cols() != input_size()) {
    throw std::invalid_argument("forward: input width " + std::to_string(x.cols()) +
                                " != " + std::to_string(input_size()));
  }
  Matrix<T> h = x;
  Matrix<T> z;
  for (const auto& l : layers_) {
    affine(l, h, z);
    std::swap(h, z);
  }
  return h;
}

template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
  Matrix<T> p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const T mx = *std::max_element(z.begin(), z.end());
    T sum = 0;
    auto pi = p.row(i);
    for (std::size_t j = 0; j < z.size(); ++j) {
      pi[j] = std::exp(z[j] - mx);
      sum += pi[j];
    }
    for (auto& v : pi) v /= sum;
  }
  return p;
}

template <typename T>
T Mlp<T>::loss(const Matrix<T>& x, const Matrix<T>& labels) const {
  const auto logits = forward(x);
  check_labels(x, labels, output_size());
  T total = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const T mx = *std::max_element(z.begin(), z.end());
    T sum = 0;
    for (auto v : z) sum += std::exp(v - mx);
    const T log_norm = mx + std::log(sum);
    for (std::size_t j = 0; j < z.size(); ++j) total -= labels(i, j) * (z[j] - log_norm);
  }
  return total / static_cast<T>(x.rows());
}

template <typename T>
Gradients<T> Mlp<T>::grad(const Matrix<T>& x, const Matrix<T>& labels) const {
  check_labels(x, labels, output_size());
  const std::size_t n_layers = layers_.size();
  // Keep every layer's input and post-activation output for the backward pass.
  std::vector<Matrix<T>> acts(n_layers + 1);
  acts[0] = x;
  for (std::size_t l = 0; l < n_layers; ++l) affine(layers_[l], acts[l], acts[l + 1]);

  const auto& logits = acts[n_layers];
  const auto probs = softmax(logits);
  const T inv_batch = T(1) / static_cast<T>(x.rows());

  Gradients<T> g;
  g.weights.resize(n_layers);
  g.bias.resize(n_layers);
  g.loss = 0;
  Matrix<T> delta(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      delta(i, j) = (probs(i, j) - labels(i, j)) * inv_batch;
      if (labels(i, j) != T(0)) g.loss -= labels(i, j) * std::log(std::max(probs(i, j), T(1e-30)));
    }
  }
  g.loss *= inv_batch;

  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = layers_[l];
    if (layer.activation == Activation::kRelu) {
      const auto& out = acts[l + 1];
      for (std::size_t k = 0; k < delta.size(); ++k) {
        if (out.data()[k] <= T(0)) delta.data()[k] = 0;
      }
    }
    g.weights[l] = matmul_at_b(acts[l], delta);
    g.bias[l].assign(layer.bias.size(), T(0));
    if (layer.use_bias) {
      for (std::size_t i = 0; i < delta.rows(); ++i) {
        const auto row = delta.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) g.bias[l][j] += row[j];
      }
    }
    if (l > 0) delta = matmul_a_bt(delta, layer.weights);
  }
  return g;
}

template <typename T>
double accuracy(const Mlp<T>& m, const Matrix<T>& x, const Matrix<T>& labels) {
  if (x.rows() == 0) return 0.0;
  const auto logits = m.forward(x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto z = logits.row(i);
    const auto y = labels.row(i);
    hits += (std::max_element(z.begin(), z.end()) - z.begin()) ==
            (std::max_element(y.begin(), y.end()) - y.begin());
  }
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

std::vector<std::int64_t> argmax_rows(const Matrix<float>& m) {
  std::vector<std::int64_t> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    out[i] = std::max_element(row.begin(), row.end()) - row.begin();
  }
  return out;
}

template class Mlp<float>;
template class Mlp<double>;
template Mlp<double> Mlp<float>::cast<double>() const;
template Mlp<float> Mlp<double>::cast<float>() const;
template Matrix<float> softmax(const Matrix<float>&);
template Matrix<double> softmax(const Matrix<double>&);
template double accuracy(const Mlp<float>&, const Matrix<float>&, const Matrix<float>&);
template double accuracy(const Mlp<double>&, const Matrix<double>&, const Matrix<double>&);

}  // namespace ecad::nn
