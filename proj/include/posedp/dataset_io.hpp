#pragma once

#include <filesystem>
#include <string>

#include "posedp/env.hpp"

namespace posedp {

// Dataset file layout (all integers u32/u64 little-endian, floats float32):
//
//   "PDPDATA\0"                       8-byte magic
//   u32 version                       kDatasetVersion
//   u32 len + header JSON             see dataset_header_json()
//   u32 episode count
//   per episode:
//     u64 seed, u32 frame count
//     per frame, each as u32 length + floats:
//       robot_state (d_s), gt poses (8J), est poses (8J),
//       grid (R*R), action (d_a)
//
// A sidecar "<path>.jsonl" repeats the header on its first line followed by
// one {"episode", "seed", "frames"} line per episode.
inline constexpr std::uint32_t kDatasetVersion = 1;

std::string dataset_header_json(const Dataset& dataset);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace posedp
