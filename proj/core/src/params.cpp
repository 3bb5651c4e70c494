#include "ecad/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ecad {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts need byte swapping");

std::string dims_text(const std::int32_t (&d)[4]) {
  return "[" + std::to_string(d[0]) + "," + std::to_string(d[1]) + "," + std::to_string(d[2]) +
         "," + std::to_string(d[3]) + "]";
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const std::int32_t (&dims)[4],
                  const std::vector<float>& values) {
  std::int64_t count = 1;
  for (auto d : dims) count *= d;
  if (count != static_cast<std::int64_t>(values.size())) {
    throw ParamsError(path.string() + ": dims " + dims_text(dims) + " do not match " +
                      std::to_string(values.size()) + " values");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParamsError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) throw ParamsError("write failed: " + path.string());
}

std::vector<float> read_tensor(const std::filesystem::path& path, std::int32_t (&dims)[4]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParamsError("cannot open " + path.string());
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in) throw ParamsError(path.string() + ": truncated header");
  std::int64_t count = 1;
  for (auto d : dims) {
    if (d < 1) throw ParamsError(path.string() + ": bad dims " + dims_text(dims));
    count *= d;
  }
  std::vector<float> values(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(values.size() * sizeof(float))) {
    throw ParamsError(path.string() + ": truncated body");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParamsError(path.string() + ": trailing bytes");
  }
  return values;
}

std::vector<std::filesystem::path> save_params(const std::vector<LayerParams>& layers,
                                               const std::vector<std::string>& cell_names,
                                               const std::filesystem::path& dir) {
  if (layers.size() != cell_names.size()) {
    throw ParamsError("save_params: " + std::to_string(layers.size()) + " layers but " +
                      std::to_string(cell_names.size()) + " names");
  }
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const auto in = static_cast<std::int32_t>(l.weights.rows());
    const auto out = static_cast<std::int32_t>(l.weights.cols());
    const auto w = dir / (cell_names[i] + "_weights.bin");
    const auto b = dir / (cell_names[i] + "_biases.bin");
    write_tensor(w, {in, out, 1, 1}, l.weights.data());
    write_tensor(b, {static_cast<std::int32_t>(l.bias.size()), 1, 1, 1}, l.bias);
    files.push_back(w);
    files.push_back(b);
  }
  return files;
}

std::vector<LayerParams> load_params(const NetworkDescription& desc,
                                     const std::filesystem::path& dir) {
  std::vector<LayerParams> layers;
  for (const auto& ld : desc.layers) {
    std::int32_t wd[4];
    std::int32_t bd[4];
    auto w = read_tensor(dir / (ld.name + "_weights.bin"), wd);
    auto b = read_tensor(dir / (ld.name + "_biases.bin"), bd);
    if (wd[0] != ld.in || wd[1] != ld.out || wd[2] != 1 || wd[3] != 1) {
      throw ParamsError(ld.name + "_weights.bin: dims " + dims_text(wd) + " do not match layer " +
                        std::to_string(ld.in) + "x" + std::to_string(ld.out));
    }
    if (bd[0] != ld.out || bd[1] != 1 || bd[2] != 1 || bd[3] != 1) {
      throw ParamsError(ld.name + "_biases.bin: dims " + dims_text(bd) + " do not match layer");
    }
    layers.push_back({Matrix<float>(wd[0], wd[1], std::move(w)), std::move(b)});
  }
  return layers;
}

void check_params(const NetworkDescription& desc, const std::vector<LayerParams>& layers) {
  if (layers.size() != desc.layers.size()) {
    throw std::invalid_argument("expected " + std::to_string(desc.layers.size()) +
                                " layers of parameters, got " + std::to_string(layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& d = desc.layers[i];
    const auto& p = layers[i];
    if (static_cast<std::int64_t>(p.weights.rows()) != d.in ||
        static_cast<std::int64_t>(p.weights.cols()) != d.out ||
        static_cast<std::int64_t>(p.bias.size()) != d.out) {
      throw std::invalid_argument("layer " + d.name + ": parameter shape mismatch");
    }
  }
}

}  // namespace ecad
