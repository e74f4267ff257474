#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "sdfgen/nn/layers.hpp"

namespace sdfgen::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Decoded checkpoint: the JSON architecture header and the named blocks.
struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor>> blocks;
};

/// Layout: "CKPT", u32 version, u32 header length, UTF-8 JSON header, then raw
/// little-endian f64 blocks in declaration order. The header's "blocks" array
/// lists each block's name and shape.
std::vector<std::byte> encode_checkpoint(nlohmann::json header, std::span<const NamedTensor> tensors);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      std::span<const NamedTensor> tensors);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies blocks into `tensors`, requiring identical names, order and shapes.
void restore(const Checkpoint& checkpoint, std::span<const NamedTensor> tensors);

}  // namespace sdfgen::nn
