#include <zlib.h>

#include <algorithm>
#include <array>
#include <memory>
#include <random>

#include "ecad/nnsim.hpp"

namespace ecad::nn {
namespace {

struct GzCloser {
  void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

// gzopen reads uncompressed files transparently.
GzHandle open_idx(const std::filesystem::path& path) {
  GzHandle f(gzopen(path.string().c_str(), "rb"));
  if (!f) throw DatasetError("cannot open " + path.string());
  return f;
}

void read_exact(gzFile f, void* dst, std::size_t n, const std::filesystem::path& path,
                const char* what) {
  auto* out = static_cast<unsigned char*>(dst);
  while (n > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
    const int got = gzread(f, out, chunk);
    if (got <= 0) throw DatasetError(path.string() + ": truncated " + what);
    out += got;
    n -= static_cast<std::size_t>(got);
  }
}

std::uint32_t read_be32(gzFile f, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  read_exact(f, b.data(), b.size(), path, "header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem) {
  for (const auto& name : {stem, stem + ".gz"}) {
    if (std::filesystem::exists(dir / name)) return dir / name;
  }
  throw DatasetError("missing " + stem + "[.gz] in " + dir.string());
}

}  // namespace

Matrix<float> read_idx_images(const std::filesystem::path& path) {
  auto f = open_idx(path);
  const auto magic = read_be32(f.get(), path);
  if (magic != 2051) {
    throw DatasetError(path.string() + ": bad image magic " + std::to_string(magic));
  }
  const auto count = read_be32(f.get(), path);
  const auto rows = read_be32(f.get(), path);
  const auto cols = read_be32(f.get(), path);
  const std::size_t width = std::size_t{rows} * cols;
  std::vector<unsigned char> raw(std::size_t{count} * width);
  read_exact(f.get(), raw.data(), raw.size(), path, "image data");
  Matrix<float> images(count, width);
  std::transform(raw.begin(), raw.end(), images.data().begin(),
                 [](unsigned char p) { return static_cast<float>(p) / 255.0f; });
  return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  auto f = open_idx(path);
  const auto magic = read_be32(f.get(), path);
  if (magic != 2049) {
    throw DatasetError(path.string() + ": bad label magic " + std::to_string(magic));
  }
  const auto count = read_be32(f.get(), path);
  std::vector<std::uint8_t> labels(count);
  read_exact(f.get(), labels.data(), labels.size(), path, "label data");
  return labels;
}

Matrix<float> one_hot(const std::vector<std::uint8_t>& labels, std::size_t classes) {
  Matrix<float> y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw DatasetError("label " + std::to_string(labels[i]) + " out of range at row " +
                         std::to_string(i));
    }
    y(i, labels[i]) = 1.0f;
  }
  return y;
}

Dataset load_mnist(const std::filesystem::path& dir) {
  auto load_pair = [&](const std::string& images, const std::string& labels, Matrix<float>& x,
                       Matrix<float>& y) {
    x = read_idx_images(find_idx(dir, images));
    const auto l = read_idx_labels(find_idx(dir, labels));
    if (l.size() != x.rows()) {
      throw DatasetError(images + " has " + std::to_string(x.rows()) + " images but " + labels +
                         " has " + std::to_string(l.size()) + " labels (count mismatch)");
    }
    y = one_hot(l);
  };
  Dataset d;
  load_pair("train-images-idx3-ubyte", "train-labels-idx1-ubyte", d.train_x, d.train_y);
  load_pair("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", d.test_x, d.test_y);
  return d;
}

Dataset synthetic_dataset(std::size_t train, std::size_t test, std::size_t inputs,
                          std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::normal_distribution<float> noise(0.0f, 0.15f);
  Matrix<float> prototypes(classes, inputs);
  for (auto& v : prototypes.data()) v = unit(rng) < 0.3f ? unit(rng) : 0.0f;

  auto make = [&](std::size_t n, Matrix<float>& x, Matrix<float>& y) {
    x = Matrix<float>(n, inputs);
    y = Matrix<float>(n, classes);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i % classes;
      y(i, c) = 1.0f;
      for (std::size_t j = 0; j < inputs; ++j) {
        x(i, j) = std::clamp(prototypes(c, j) + noise(rng), 0.0f, 1.0f);
      }
    }
  };
  Dataset d;
  make(train, d.train_x, d.train_y);
  make(test, d.test_x, d.test_y);
  return d;
}

}  // namespace ecad::nn
