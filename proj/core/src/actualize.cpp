#include "ecad/actualize.hpp"

#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ecad {
namespace {

constexpr std::array<const char*, 5> kMacroNames{"SYS_ROWS", "SYS_COLS", "SYS_VEC", "INTERLEAVE",
                                                 "SCALE"};

}  // namespace

std::string macro_text(const SystolicConfig& cfg) {
  cfg.validate();
  const std::array<std::int64_t, 5> values{cfg.rows, cfg.cols, cfg.vec, cfg.interleave, cfg.scale};
  std::string out;
  for (std::size_t i = 0; i < kMacroNames.size(); ++i) {
    out += "#define " + std::string(kMacroNames[i]) + " " + std::to_string(values[i]) + "\n";
  }
  return out;
}

void write_macros(const NetworkDescription& desc, const std::filesystem::path& out) {
  if (!desc.systolic) {
    throw std::invalid_argument("network " + desc.id + " has no systolic section");
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + out.string());
  f << macro_text(*desc.systolic);
  if (!f) throw std::runtime_error("write failed: " + out.string());
}

SystolicConfig parse_macros(std::string_view text) {
  std::map<std::string, std::int64_t> found;
  std::istringstream in{std::string(text)};
  std::string directive, name;
  std::int64_t value = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    if (ls >> directive >> name >> value && directive == "#define") found[name] = value;
  }
  auto get = [&](const char* key) {
    auto it = found.find(key);
    if (it == found.end()) throw std::invalid_argument(std::string("macro ") + key + " missing");
    return it->second;
  };
  SystolicConfig cfg{get("SYS_ROWS"), get("SYS_COLS"), get("SYS_VEC"), get("INTERLEAVE"),
                     get("SCALE")};
  cfg.validate();
  return cfg;
}

}  // namespace ecad
