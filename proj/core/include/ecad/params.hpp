#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecad/matrix.hpp"
#include "ecad/network.hpp"

namespace ecad {

// Weights are stored in x out; the simulator transposes on load.
struct LayerParams {
  Matrix<float> weights;
  std::vector<float> bias;

  bool operator==(const LayerParams&) const = default;
};

class ParamsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On-disk tensor: four little-endian int32 dims, then float32 row-major.
void write_tensor(const std::filesystem::path& path, const std::int32_t (&dims)[4],
                  const std::vector<float>& values);
std::vector<float> read_tensor(const std::filesystem::path& path, std::int32_t (&dims)[4]);

// Writes <name>_weights.bin ([in,out,1,1]) and <name>_biases.bin ([out,1,1,1])
// for every layer and returns the paths in that order.
std::vector<std::filesystem::path> save_params(const std::vector<LayerParams>& layers,
                                               const std::vector<std::string>& cell_names,
                                               const std::filesystem::path& dir);
std::vector<LayerParams> load_params(const NetworkDescription& desc,
                                     const std::filesystem::path& dir);

// Checks shapes against the description.
void check_params(const NetworkDescription& desc, const std::vector<LayerParams>& layers);

}  // namespace ecad
