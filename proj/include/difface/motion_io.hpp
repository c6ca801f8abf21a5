#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "difface/seq_data.hpp"

namespace difface {

// Binary motion container, little endian:
//   "DFMO" | u32 version | u8 kind | 3 pad bytes | u32 N | u32 D | f64 fps |
//   u32 len + subject bytes | u32 len + sentence bytes | N*D float32 row-major
void write_motion(const std::filesystem::path& path, const AnimationSequence& seq);
AnimationSequence read_motion(const std::filesystem::path& path);

// Rig CSV: one header line of control names, then one row of C values per frame.
// A header is optional on read (detected by a non-numeric first field).
void write_rig_csv(const std::filesystem::path& path, const AnimationSequence& seq,
                   const std::vector<std::string>& control_names = {});
AnimationSequence read_rig_csv(const std::filesystem::path& path);

// Dispatches on extension: ".csv" -> rig CSV, anything else -> container.
AnimationSequence read_motion_any(const std::filesystem::path& path);
void write_motion_any(const std::filesystem::path& path, const AnimationSequence& seq);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace difface
