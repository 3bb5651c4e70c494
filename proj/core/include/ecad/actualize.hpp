#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ecad/network.hpp"

namespace ecad {

// Five "#define NAME value" lines: SYS_ROWS, SYS_COLS, SYS_VEC, INTERLEAVE, SCALE.
std::string macro_text(const SystolicConfig& cfg);
// Throws std::invalid_argument when the description has no systolic section.
void write_macros(const NetworkDescription& desc, const std::filesystem::path& out);
// Reads the five macros back; any missing one is an error.
SystolicConfig parse_macros(std::string_view text);

}  // namespace ecad
