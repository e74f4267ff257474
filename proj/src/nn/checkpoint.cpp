#include "sdfgen/nn/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace sdfgen::nn {

namespace {

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xFF));
}

std::uint64_t get_u64(std::span<const std::byte> in, std::size_t off) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | std::to_integer<std::uint64_t>(in[off + b]);
  return v;
}

std::uint32_t get_u32(std::span<const std::byte> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | std::to_integer<std::uint32_t>(in[off + b]);
  return v;
}

}  // namespace

std::vector<std::byte> encode_checkpoint(nlohmann::json header, std::span<const NamedTensor> tensors) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& nt : tensors) blocks.push_back({{"name", nt.name}, {"shape", nt.tensor->shape()}});
  header["blocks"] = std::move(blocks);
  const std::string text = header.dump();

  std::vector<std::byte> out;
  for (char c : std::string_view("CKPT")) out.push_back(static_cast<std::byte>(c));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  for (const auto& nt : tensors) {
    for (double v : nt.tensor->data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::byte>((bits >> (8 * b)) & 0xFF));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  if (bytes.size() < 12) throw Error("checkpoint: truncated header");
  const char magic[4] = {'C', 'K', 'P', 'T'};
  for (int i = 0; i < 4; ++i) {
    if (std::to_integer<char>(bytes[i]) != magic[i]) throw Error("checkpoint: bad magic");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t len = get_u32(bytes, 8);
  if (bytes.size() < 12 + std::size_t{len}) throw Error("checkpoint: truncated JSON header");
  std::string text(len, '\0');
  for (std::uint32_t i = 0; i < len; ++i) text[i] = std::to_integer<char>(bytes[12 + i]);

  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: invalid JSON header: ") + e.what());
  }
  std::size_t off = 12 + len;
  for (const auto& block : ck.header.at("blocks")) {
    Shape shape = block.at("shape").get<Shape>();
    const std::size_t count = shape_numel(shape);
    if (bytes.size() < off + count * 8) throw Error("checkpoint: truncated parameter block");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<double>(get_u64(bytes, off + 8 * i));
    off += count * 8;
    ck.blocks.emplace_back(block.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
  }
  if (off != bytes.size()) throw Error("checkpoint: trailing bytes after last block");
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      std::span<const NamedTensor> tensors) {
  const auto bytes = encode_checkpoint(std::move(header), tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(std::as_bytes(std::span(raw.data(), raw.size())));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": malformed checkpoint header: " + e.what());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void restore(const Checkpoint& checkpoint, std::span<const NamedTensor> tensors) {
  if (checkpoint.blocks.size() != tensors.size()) {
    throw Error("checkpoint holds " + std::to_string(checkpoint.blocks.size()) + " blocks, model expects " +
                std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& [name, value] = checkpoint.blocks[i];
    if (name != tensors[i].name || value.shape() != tensors[i].tensor->shape()) {
      throw Error("checkpoint block " + name + shape_string(value.shape()) + " does not match " +
                  tensors[i].name + shape_string(tensors[i].tensor->shape()));
    }
    *tensors[i].tensor = value;
  }
}

}  // namespace sdfgen::nn
