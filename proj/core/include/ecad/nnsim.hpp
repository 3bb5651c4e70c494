#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecad/config.hpp"
#include "ecad/matrix.hpp"
#include "ecad/network.hpp"
#include "ecad/params.hpp"

namespace ecad::nn {

template <typename T>
struct DenseLayer {
  Matrix<T> weights;  // in x out
  std::vector<T> bias;
  Activation activation = Activation::kNone;
  bool use_bias = true;
};

template <typename T>
struct Gradients {
  std::vector<Matrix<T>> weights;
  std::vector<std::vector<T>> bias;
  T loss = 0;
};

template <typename T>
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer<T>> layers) : layers_(std::move(layers)) {}

  // Uniform +-sqrt(6 / (in + out)) weights, zero bias.
  static Mlp init(const NetworkDescription& desc, std::uint64_t seed);
  static Mlp from_params(const NetworkDescription& desc, const std::vector<LayerParams>& params);
  std::vector<LayerParams> params() const;

  template <typename U>
  Mlp<U> cast() const;

  // Logits; ReLU on layers flagged relu, nothing on the rest.
  Matrix<T> forward(const Matrix<T>& x) const;
  // Mean softmax cross-entropy against one-hot labels.
  T loss(const Matrix<T>& x, const Matrix<T>& labels) const;
  Gradients<T> grad(const Matrix<T>& x, const Matrix<T>& labels) const;

  std::vector<DenseLayer<T>>& layers() { return layers_; }
  const std::vector<DenseLayer<T>>& layers() const { return layers_; }
  std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().weights.rows(); }
  std::size_t output_size() const { return layers_.empty() ? 0 : layers_.back().weights.cols(); }

 private:
  std::vector<DenseLayer<T>> layers_;
};

template <typename T>
Matrix<T> softmax(const Matrix<T>& logits);

// Fraction of rows whose logit argmax matches the label argmax.
template <typename T>
double accuracy(const Mlp<T>& m, const Matrix<T>& x, const Matrix<T>& labels);

std::vector<std::int64_t> argmax_rows(const Matrix<float>& m);

struct Dataset {
  Matrix<float> train_x;  // n x 784 in [0, 1]
  Matrix<float> train_y;  // n x 10 one-hot
  Matrix<float> test_x;
  Matrix<float> test_y;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw or gzip IDX files (train-images-idx3-ubyte[.gz], train-labels-idx1-ubyte,
// t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte).
Dataset load_mnist(const std::filesystem::path& dir);
// Pixels scaled by 1/255, flattened row-major.
Matrix<float> read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
Matrix<float> one_hot(const std::vector<std::uint8_t>& labels, std::size_t classes = 10);

// Gaussian blobs around random class prototypes, inputs clipped to [0, 1].
Dataset synthetic_dataset(std::size_t train, std::size_t test, std::size_t inputs,
                          std::size_t classes, std::uint64_t seed);

struct TrainOptions {
  int epochs = 1;
  int batch_size = 100;
  std::uint64_t seed = 1;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<std::size_t> train_subset;  // first N training samples
  std::optional<std::size_t> test_subset;
  bool verbose = false;
};

struct TrainReport {
  std::string name;
  double accuracy = 0.0;
  int epochs = 0;
  double training_time = 0.0;  // seconds
  int batch_size = 0;
  // Not serialized: mean training loss and test accuracy after each epoch.
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
};

Json to_json(const TrainReport& r);
TrainReport train_report_from_json(const Json& j);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  Mlp<float> model;
  TrainReport report;
};

// Mini-batch Adam on the mean softmax cross-entropy. Throws TrainingDiverged
// on a non-finite loss.
TrainResult train(const NetworkDescription& desc, const Dataset& data, const TrainOptions& opts);

}  // namespace ecad::nn
