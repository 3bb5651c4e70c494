#include <gtest/gtest.h>
#include <zlib.h>

#include <cmath>
#include <random>

#include "ecad/nnsim.hpp"
#include "ecad/params.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ecad;
using testing_support::TempDir;

namespace {

NetworkDescription mlp(std::vector<std::int64_t> widths, std::int64_t batch = 10) {
  NetworkDescription d;
  d.id = "t";
  d.batch = batch;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    d.layers.push_back({last ? "output" : "dense" + std::to_string(i), widths[i], widths[i + 1],
                        last ? Activation::kNone : Activation::kRelu, true});
  }
  return d;
}

void be32(std::string& s, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::string idx_images(std::uint32_t magic, std::uint32_t n, std::size_t pixels_written) {
  std::string s;
  be32(s, magic);
  be32(s, n);
  be32(s, 28);
  be32(s, 28);
  for (std::size_t i = 0; i < pixels_written; ++i) s.push_back(static_cast<char>(i % 256));
  return s;
}

std::string idx_labels(std::uint32_t n, std::uint8_t fill = 3) {
  std::string s;
  be32(s, 2049);
  be32(s, n);
  s.append(n, static_cast<char>(fill));
  return s;
}

void write_gz(const std::filesystem::path& p, const std::string& bytes) {
  gzFile f = gzopen(p.string().c_str(), "wb");
  ASSERT_NE(f, nullptr);
  ASSERT_EQ(gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size())), static_cast<int>(bytes.size()));
  gzclose(f);
}

Matrix<double> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Matrix<double> m(r, c);
  for (auto& v : m.data()) v = d(rng);
  return m;
}

Matrix<double> labels_for(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  Matrix<double> y(n, classes);
  for (std::size_t i = 0; i < n; ++i) y(i, rng() % classes) = 1.0;
  return y;
}

}  // namespace

TEST(Mnist, ReadsGzipAndRaw) {
  TempDir dir("idx");
  write_gz(dir / "a.gz", idx_images(2051, 2, 2 * 784));
  testing_support::write_file(dir / "b", idx_images(2051, 2, 2 * 784));
  const auto gz = nn::read_idx_images(dir / "a.gz");
  const auto raw = nn::read_idx_images(dir / "b");
  EXPECT_EQ(gz, raw);
  ASSERT_EQ(gz.rows(), 2u);
  ASSERT_EQ(gz.cols(), 784u);
  EXPECT_FLOAT_EQ(gz(0, 255), 1.0f);
  EXPECT_FLOAT_EQ(gz(0, 0), 0.0f);
}

TEST(Mnist, RejectsBadInput) {
  TempDir dir("idx");
  write_gz(dir / "magic.gz", idx_images(2049, 1, 784));
  EXPECT_THROW(nn::read_idx_images(dir / "magic.gz"), nn::DatasetError);
  write_gz(dir / "short.gz", idx_images(2051, 3, 2 * 784));
  EXPECT_THROW(nn::read_idx_images(dir / "short.gz"), nn::DatasetError);
  write_gz(dir / "lab.gz", idx_labels(4, 11));
  EXPECT_THROW(nn::one_hot(nn::read_idx_labels(dir / "lab.gz")), nn::DatasetError);
  EXPECT_THROW(nn::read_idx_images(dir / "missing"), nn::DatasetError);
}

TEST(Mnist, CountMismatchAndMissingFiles) {
  TempDir dir("idx");
  write_gz(dir / "train-images-idx3-ubyte.gz", idx_images(2051, 3, 3 * 784));
  write_gz(dir / "train-labels-idx1-ubyte.gz", idx_labels(2));
  write_gz(dir / "t10k-images-idx3-ubyte.gz", idx_images(2051, 1, 784));
  EXPECT_THROW(nn::load_mnist(dir.path()), nn::DatasetError);
  write_gz(dir / "train-labels-idx1-ubyte.gz", idx_labels(3));
  EXPECT_THROW(nn::load_mnist(dir.path()), nn::DatasetError);  // t10k labels absent
  write_gz(dir / "t10k-labels-idx1-ubyte.gz", idx_labels(1));
  const auto data = nn::load_mnist(dir.path());
  EXPECT_EQ(data.train_x.rows(), 3u);
  EXPECT_EQ(data.train_y(2, 3), 1.0f);
}

TEST(Mnist, BundledSampleLoads) {
  const auto data = nn::load_mnist(testing_support::mnist_sample_dir());
  EXPECT_EQ(data.train_x.rows(), 8000u);
  EXPECT_EQ(data.test_x.rows(), 2000u);
  EXPECT_EQ(data.train_y.cols(), 10u);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  const auto desc = mlp({12, 9, 7, 4});
  auto net = nn::Mlp<double>::init(desc, 3);
  std::mt19937_64 rng(4);
  for (auto& l : net.layers()) {
    for (auto& b : l.bias) b = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  }
  const auto x = random_matrix(6, 12, rng);
  const auto y = labels_for(6, 4, rng);
  const auto g = net.grad(x, y);
  EXPECT_NEAR(g.loss, net.loss(x, y), 1e-12);

  std::vector<double*> coords;
  std::vector<double> analytic;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    for (std::size_t i = 0; i < layer.weights.size(); i += 5) {
      coords.push_back(&layer.weights.data()[i]);
      analytic.push_back(g.weights[l].data()[i]);
    }
    for (std::size_t j = 0; j < layer.bias.size(); ++j) {
      coords.push_back(&layer.bias[j]);
      analytic.push_back(g.bias[l][j]);
    }
  }
  const auto numeric = oracle::numeric_gradient([&] { return net.loss(x, y); }, coords);
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    EXPECT_NEAR(analytic[i], numeric[i], 1e-3 * std::max(1.0, std::abs(numeric[i]))) << i;
  }
}

TEST(Mlp, UniformLogitsBiasGradient) {
  const auto desc = mlp({5, 4});
  auto net = nn::Mlp<double>::init(desc, 1);
  for (auto& w : net.layers()[0].weights.data()) w = 0.0;
  std::mt19937_64 rng(2);
  const auto x = random_matrix(8, 5, rng);
  const auto y = labels_for(8, 4, rng);
  const auto g = net.grad(x, y);
  EXPECT_NEAR(g.loss, std::log(4.0), 1e-12);
  for (std::size_t c = 0; c < 4; ++c) {
    double count = 0;
    for (std::size_t i = 0; i < 8; ++i) count += y(i, c);
    EXPECT_NEAR(g.bias[0][c], 0.25 - count / 8.0, 1e-12);
  }
}

TEST(Mlp, ForwardIsBatchInvariant) {
  const auto desc = mlp({20, 16, 10});
  const auto net = nn::Mlp<float>::init(desc, 8);
  std::mt19937_64 rng(9);
  const auto x = random_matrix(13, 20, rng).cast<float>();
  const auto all = net.forward(x);
  for (std::size_t i = 0; i < 13; ++i) {
    const auto one = net.forward(x.slice_rows(i, 1));
    for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(one(0, j), all(i, j));
  }
}

TEST(Mlp, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(10);
  Matrix<double> logits(20, 10);
  for (auto& v : logits.data()) v = std::normal_distribution<double>(0, 30)(rng);
  const auto p = nn::softmax(logits);
  for (std::size_t i = 0; i < 20; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 10; ++j) {
      EXPECT_GE(p(i, j), 0.0);
      s += p(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Mlp, HandComputedTwoByTwo) {
  nn::DenseLayer<double> hidden{Matrix<double>(2, 2, {1, -1, 2, 1}), {0.5, -3}, Activation::kRelu, true};
  nn::DenseLayer<double> out{Matrix<double>(2, 2, {1, 0, 0, 1}), {0, 0}, Activation::kNone, true};
  const nn::Mlp<double> net({hidden, out});
  const auto logits = net.forward(Matrix<double>(1, 2, {1, 1}));
  // hidden = relu([1+2+0.5, -1+1-3]) = [3.5, 0]
  EXPECT_DOUBLE_EQ(logits(0, 0), 3.5);
  EXPECT_DOUBLE_EQ(logits(0, 1), 0.0);
  const Matrix<double> y(1, 2, {0, 1});
  EXPECT_NEAR(net.loss(Matrix<double>(1, 2, {1, 1}), y), std::log(1 + std::exp(3.5)), 1e-12);
}

TEST(Train, ZeroLearningRateKeepsInitialParams) {
  const auto desc = mlp({784, 32, 10});
  const auto data = nn::synthetic_dataset(200, 50, 784, 10, 5);
  nn::TrainOptions opts;
  opts.learning_rate = 0.0;
  opts.seed = 42;
  const auto res = nn::train(desc, data, opts);
  std::mt19937_64 rng(42);
  EXPECT_EQ(res.model.params(), nn::Mlp<float>::init(desc, rng()).params());
}

TEST(Train, LossDecreasesAcrossSeeds) {
  const auto desc = mlp({784, 64, 10});
  const auto data = nn::synthetic_dataset(1000, 200, 784, 10, 6);
  for (std::uint64_t seed : {1, 2, 3}) {
    nn::TrainOptions opts;
    opts.epochs = 3;
    opts.batch_size = 50;
    opts.seed = seed;
    const auto res = nn::train(desc, data, opts);
    ASSERT_EQ(res.report.epoch_loss.size(), 3u);
    EXPECT_LT(res.report.epoch_loss.back(), res.report.epoch_loss.front()) << "seed " << seed;
    EXPECT_GT(res.report.accuracy, 0.5);
  }
}

TEST(Train, SameSeedSameModel) {
  const auto desc = mlp({784, 16, 10});
  const auto data = nn::synthetic_dataset(300, 50, 784, 10, 7);
  nn::TrainOptions opts;
  opts.seed = 9;
  EXPECT_EQ(nn::train(desc, data, opts).model.params(), nn::train(desc, data, opts).model.params());
}

TEST(Train, ReportJsonRoundTrip) {
  nn::TrainReport r{"net", 0.97, 4, 1.5, 100, {}, {}};
  const auto back = nn::train_report_from_json(nn::to_json(r));
  EXPECT_EQ(back.name, "net");
  EXPECT_DOUBLE_EQ(back.accuracy, 0.97);
  EXPECT_EQ(back.epochs, 4);
  EXPECT_EQ(back.batch_size, 100);
  EXPECT_DOUBLE_EQ(back.training_time, 1.5);
}

TEST(Params, RoundTripIsByteIdentical) {
  TempDir dir("params");
  const auto desc = mlp({784, 852, 10});
  const auto params = nn::Mlp<float>::init(desc, 1).params();
  const auto files = save_params(params, {"dense0", "output"}, dir.path());
  ASSERT_EQ(files.size(), 4u);
  EXPECT_EQ(std::filesystem::file_size(dir / "dense0_weights.bin"), 16u + 784u * 852u * 4u);
  EXPECT_EQ(std::filesystem::file_size(dir / "dense0_biases.bin"), 16u + 852u * 4u);
  const auto loaded = load_params(desc, dir.path());
  EXPECT_EQ(loaded, params);

  TempDir again("params2");
  save_params(loaded, {"dense0", "output"}, again.path());
  for (const char* f : {"dense0_weights.bin", "dense0_biases.bin", "output_weights.bin"}) {
    EXPECT_EQ(testing_support::read_file(dir / f), testing_support::read_file(again / f)) << f;
  }
  std::int32_t dims[4];
  read_tensor(dir / "dense0_weights.bin", dims);
  EXPECT_EQ(dims[0], 784);
  EXPECT_EQ(dims[1], 852);
  EXPECT_EQ(dims[2], 1);
  EXPECT_EQ(dims[3], 1);
}

TEST(Params, RejectsDamagedFiles) {
  TempDir dir("params");
  const auto desc = mlp({8, 4});
  save_params(nn::Mlp<float>::init(desc, 1).params(), {"output"}, dir.path());
  auto bytes = testing_support::read_file(dir / "output_weights.bin");
  testing_support::write_file(dir / "output_weights.bin", bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(load_params(desc, dir.path()), ParamsError);
  testing_support::write_file(dir / "output_weights.bin", bytes + "x");
  EXPECT_THROW(load_params(desc, dir.path()), ParamsError);
  testing_support::write_file(dir / "output_weights.bin", bytes);
  auto wrong = mlp({9, 4});
  EXPECT_THROW(load_params(wrong, dir.path()), ParamsError);
}

TEST(Train, LogisticBaselineOneEpoch) {
  const char* env = std::getenv("ECAD_MNIST_DIR");
  nn::Dataset data;
  bool full = false;
  if (env != nullptr) {
    try {
      data = nn::load_mnist(env);
      full = data.train_x.rows() >= 60000;
    } catch (const nn::DatasetError&) {
    }
  }
  if (!full) data = nn::load_mnist(testing_support::mnist_sample_dir());
  nn::TrainOptions opts;
  opts.epochs = 1;
  opts.batch_size = 100;
  const auto res = nn::train(mlp({784, 10}), data, opts);
  EXPECT_GT(res.report.accuracy, full ? 0.85 : 0.78);
}
