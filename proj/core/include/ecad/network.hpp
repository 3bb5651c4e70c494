#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecad/config.hpp"

namespace ecad {

// (rows, cols, vector width, interleave, scale): one systolic array permutation.
struct SystolicConfig {
  std::int64_t rows = 1;
  std::int64_t cols = 1;
  std::int64_t vec = 1;
  std::int64_t interleave = 1;
  std::int64_t scale = 1;

  // "R,C,V,I,S"
  std::string to_string() const;
  static SystolicConfig parse(std::string_view text);
  void validate() const;

  bool operator==(const SystolicConfig&) const = default;
};

enum class Activation { kNone, kRelu };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct LayerDesc {
  std::string name;
  std::int64_t in = 0;
  std::int64_t out = 0;
  Activation activation = Activation::kNone;
  bool bias = true;

  bool operator==(const LayerDesc&) const = default;
};

// Self-contained description of one network instance, exchanged between the
// engine, workers, the store and the command line tools.
struct NetworkDescription {
  std::string id;
  std::int64_t batch = 1;
  std::vector<LayerDesc> layers;
  std::optional<SystolicConfig> systolic;

  // Throws std::invalid_argument when layer dimensions do not chain.
  void validate() const;
  std::int64_t input_size() const { return layers.empty() ? 0 : layers.front().in; }
  std::int64_t output_size() const { return layers.empty() ? 0 : layers.back().out; }
  // Multiply-accumulate count for one sample (sum of in * out).
  std::int64_t macs_per_sample() const;

  bool operator==(const NetworkDescription&) const = default;
};

Json to_json(const SystolicConfig& cfg);
SystolicConfig systolic_from_json(const Json& j);
Json to_json(const NetworkDescription& desc);
NetworkDescription description_from_json(const Json& j);

NetworkDescription load_description(const std::filesystem::path& path);
void save_description(const NetworkDescription& desc, const std::filesystem::path& path);

}  // namespace ecad
