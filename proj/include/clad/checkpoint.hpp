#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "clad/param_store.hpp"

namespace clad {

// Binary layout (all integers little-endian):
//   "CLADCKPT" | version u32 | count u32 |
//   per tensor: name_len u32, name bytes (UTF-8), rank u32, extents u64[rank],
//               payload f64[prod(extents)]
inline constexpr std::array<char, 8> kCheckpointMagic = {'C', 'L', 'A', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

  std::uint64_t read_uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string read_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(source_ + ": truncated checkpoint");
  }
  std::string bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Writes via a temporary file and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, value] : tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<std::uint32_t>(value.rank()));
    for (std::size_t e : value.shape()) detail::put_u64(out, e);
    for (double v : value.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      detail::put_u64(out, bits);
    }
  }
  return out;
}

inline std::vector<NamedTensor> decode_checkpoint(const std::string& bytes, const std::string& source = "checkpoint") {
  detail::ByteReader in(bytes, source);
  const std::string magic = in.read_bytes(kCheckpointMagic.size());
  if (magic != std::string(kCheckpointMagic.begin(), kCheckpointMagic.end())) {
    throw FormatError(source + ": bad magic, not a checkpoint file");
  }
  const auto version = in.read_uint(4);
  if (version != kCheckpointVersion) throw FormatError(source + ": unsupported version " + std::to_string(version));
  const auto count = in.read_uint(4);
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor entry;
    entry.name = in.read_bytes(in.read_uint(4));
    const auto rank = in.read_uint(4);
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(in.read_uint(8));
    std::vector<double> data(numel_of(shape));
    for (double& v : data) {
      const std::uint64_t bits = in.read_uint(8);
      std::memcpy(&v, &bits, sizeof v);
    }
    entry.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(entry));
  }
  if (!in.at_end()) throw FormatError(source + ": trailing bytes after last tensor");
  return out;
}

inline std::vector<NamedTensor> to_named(const ParamStore& store) {
  std::vector<NamedTensor> out;
  for (const auto& [name, t] : store) out.push_back({name, t.detach()});
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  write_file_atomic(path, encode_checkpoint(tensors));
}

inline std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

/// Copies checkpoint values into an existing store. Every store parameter must
/// be present with a matching shape; extra entries (metadata) are ignored.
inline void restore_params(ParamStore& store, const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  for (const auto& [name, param] : store) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing parameter '" + name + "'");
    store.assign(name, it->second->value.data(), it->second->value.shape());
  }
}

inline const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw FormatError("checkpoint has no entry '" + name + "'");
}

}  // namespace clad
