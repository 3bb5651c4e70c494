#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "ecad/nnsim.hpp"

namespace ecad::nn {
namespace {

Matrix<float> gather_rows(const Matrix<float>& m, const std::vector<std::size_t>& order,
                          std::size_t first, std::size_t count) {
  Matrix<float> out(count, m.cols());
  for (std::size_t i = 0; i < count; ++i) {
    const auto src = m.row(order[first + i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

struct AdamState {
  std::vector<float> m, v;
};

void adam_update(std::vector<float>& param, const std::vector<float>& grad, AdamState& st,
                 const TrainOptions& o, double bias1, double bias2) {
  if (st.m.empty()) {
    st.m.assign(param.size(), 0.0f);
    st.v.assign(param.size(), 0.0f);
  }
  const auto b1 = static_cast<float>(o.beta1), b2 = static_cast<float>(o.beta2);
  // Bias corrections folded into the step size.
  const auto step = static_cast<float>(o.learning_rate * std::sqrt(bias2) / bias1);
  const auto eps = static_cast<float>(o.epsilon * std::sqrt(bias2));
  for (std::size_t i = 0; i < param.size(); ++i) {
    st.m[i] = b1 * st.m[i] + (1.0f - b1) * grad[i];
    st.v[i] = b2 * st.v[i] + (1.0f - b2) * grad[i] * grad[i];
    param[i] -= step * st.m[i] / (std::sqrt(st.v[i]) + eps);
  }
}

}  // namespace

Json to_json(const TrainReport& r) {
  Json j = Json::object();
  j["name"] = r.name;
  j["accuracy"] = r.accuracy;
  j["epochs"] = r.epochs;
  j["training_time"] = r.training_time;
  j["batch_size"] = r.batch_size;
  return j;
}

TrainReport train_report_from_json(const Json& j) {
  TrainReport r;
  r.name = j.at("name").get<std::string>();
  r.accuracy = j.at("accuracy").get<double>();
  r.epochs = j.at("epochs").get<int>();
  r.training_time = j.at("training_time").get<double>();
  r.batch_size = j.at("batch_size").get<int>();
  return r;
}

TrainResult train(const NetworkDescription& desc, const Dataset& data, const TrainOptions& opts) {
  if (opts.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (opts.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (static_cast<std::int64_t>(data.train_x.cols()) != desc.input_size() ||
      static_cast<std::int64_t>(data.train_y.cols()) != desc.output_size()) {
    throw std::invalid_argument("train: dataset shape does not match network " + desc.id);
  }
  const auto start = std::chrono::steady_clock::now();

  const std::size_t n_train = std::min(opts.train_subset.value_or(data.train_x.rows()),
                                       data.train_x.rows());
  const std::size_t n_test = std::min(opts.test_subset.value_or(data.test_x.rows()),
                                      data.test_x.rows());
  if (n_train == 0) throw std::invalid_argument("train: no training samples");
  const auto test_x = data.test_x.slice_rows(0, n_test);
  const auto test_y = data.test_y.slice_rows(0, n_test);

  std::mt19937_64 rng(opts.seed);
  TrainResult result{Mlp<float>::init(desc, rng()), {}};
  auto& model = result.model;
  std::vector<AdamState> w_state(model.layers().size()), b_state(model.layers().size());

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(opts.batch_size);
  std::int64_t t = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t first = 0; first < n_train; first += batch) {
      const std::size_t count = std::min(batch, n_train - first);
      const auto x = gather_rows(data.train_x, order, first, count);
      const auto y = gather_rows(data.train_y, order, first, count);
      auto g = model.grad(x, y);
      if (!std::isfinite(g.loss)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) +
                               " step " + std::to_string(t + 1));
      }
      loss_sum += static_cast<double>(g.loss) * static_cast<double>(count);
      seen += count;
      ++t;
      const double bias1 = 1.0 - std::pow(opts.beta1, static_cast<double>(t));
      const double bias2 = 1.0 - std::pow(opts.beta2, static_cast<double>(t));
      for (std::size_t l = 0; l < model.layers().size(); ++l) {
        auto& layer = model.layers()[l];
        adam_update(layer.weights.data(), g.weights[l].data(), w_state[l], opts, bias1, bias2);
        if (layer.use_bias) adam_update(layer.bias, g.bias[l], b_state[l], opts, bias1, bias2);
      }
    }
    result.report.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
    result.report.epoch_accuracy.push_back(n_test > 0 ? accuracy(model, test_x, test_y) : 0.0);
    if (opts.verbose) {
      std::cerr << desc.id << " epoch " << epoch + 1 << " loss " << result.report.epoch_loss.back()
                << " accuracy " << result.report.epoch_accuracy.back() << "\n";
    }
  }

  result.report.name = desc.id;
  result.report.accuracy = result.report.epoch_accuracy.back();
  result.report.epochs = opts.epochs;
  result.report.batch_size = opts.batch_size;
  result.report.training_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace ecad::nn
