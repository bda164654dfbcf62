#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mdcnn/model.hpp"

namespace mdcnn {

/// Binary model file, little-endian throughout:
///   magic "MDCNN1" (4D 44 43 4E 4E 31), format version u16 = 1,
///   tensor count u16; then per tensor: name length u16 + UTF-8 name,
///   rank u8, each extent u32, payload as 32-bit IEEE-754 values in
///   row-major order.
inline constexpr char kModelMagic[6] = {'M', 'D', 'C', 'N', 'N', '1'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct ByteReader {
  const unsigned char* cur;
  const unsigned char* end;
  std::string context;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - cur) < n) {
      throw std::runtime_error(context + ": truncated file");
    }
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(cur[0] | (cur[1] << 8));
    cur += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = static_cast<std::uint32_t>(cur[0]) |
                            (static_cast<std::uint32_t>(cur[1]) << 8) |
                            (static_cast<std::uint32_t>(cur[2]) << 16) |
                            (static_cast<std::uint32_t>(cur[3]) << 24);
    cur += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return *cur++;
  }
};

}  // namespace detail

/// Serializes the eight named tensors in their fixed order. The file is
/// written to <path>.tmp and renamed into place so a failed save never
/// leaves a partial model behind.
template <typename T>
void save_model(const ModelParamsT<T>& params, const std::string& path) {
  if (!params.all_finite()) {
    throw std::runtime_error("save_model: parameters contain non-finite values");
  }
  const auto tensors = params.named_tensors();
  std::string blob;
  blob.append(kModelMagic, sizeof(kModelMagic));
  detail::put_u16(blob, kModelFormatVersion);
  detail::put_u16(blob, static_cast<std::uint16_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    detail::put_u16(blob, static_cast<std::uint16_t>(name.size()));
    blob.append(name);
    blob.push_back(static_cast<char>(tensor->rank()));
    for (const int e : tensor->shape()) {
      detail::put_u32(blob, static_cast<std::uint32_t>(e));
    }
    for (std::int64_t i = 0; i < tensor->size(); ++i) {
      detail::put_u32(blob, std::bit_cast<std::uint32_t>(static_cast<float>((*tensor)[i])));
    }
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error(tmp + ": cannot open for writing");
    }
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error(tmp + ": write failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

inline ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(path + ": cannot open model file");
  }
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  detail::ByteReader r{bytes.data(), bytes.data() + bytes.size(), path};
  r.need(sizeof(kModelMagic));
  if (!std::equal(kModelMagic, kModelMagic + sizeof(kModelMagic),
                  reinterpret_cast<const char*>(r.cur))) {
    throw std::runtime_error(path + ": bad magic, not a model file");
  }
  r.cur += sizeof(kModelMagic);
  const std::uint16_t version = r.u16();
  if (version != kModelFormatVersion) {
    throw std::runtime_error(path + ": unsupported format version " + std::to_string(version));
  }
  const std::uint16_t count = r.u16();

  ModelParams params;
  const std::vector<std::string> expected = {"conv1.weight", "conv1.bias", "conv2.weight",
                                             "conv2.bias",   "conv3.weight", "conv3.bias",
                                             "head.weight",  "head.bias"};
  if (count != expected.size()) {
    throw std::runtime_error(path + ": expected " + std::to_string(expected.size()) +
                             " tensors, file declares " + std::to_string(count));
  }
  std::vector<Tensor> loaded;
  for (std::size_t t = 0; t < expected.size(); ++t) {
    const std::uint16_t name_len = r.u16();
    r.need(name_len);
    const std::string name(reinterpret_cast<const char*>(r.cur), name_len);
    r.cur += name_len;
    if (name != expected[t]) {
      throw std::runtime_error(path + ": tensor " + std::to_string(t) + " is named '" + name +
                               "', expected '" + expected[t] + "'");
    }
    const std::uint8_t rank = r.u8();
    if (rank < 1 || rank > 4) {
      throw std::runtime_error(path + ": " + name + ": rank " + std::to_string(rank) +
                               " is outside 1..4");
    }
    std::vector<int> shape;
    std::int64_t n = 1;
    for (int a = 0; a < rank; ++a) {
      const std::uint32_t e = r.u32();
      if (e == 0 || e > (1u << 30)) {
        throw std::runtime_error(path + ": " + name + ": bad extent");
      }
      shape.push_back(static_cast<int>(e));
      n *= e;
    }
    r.need(static_cast<std::size_t>(n) * 4);
    std::vector<float> data(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint32_t bits = r.u32();
      data[static_cast<std::size_t>(i)] = std::bit_cast<float>(bits);
    }
    loaded.emplace_back(std::move(shape), std::span<const float>(data));
  }
  if (r.cur != r.end) {
    throw std::runtime_error(path + ": trailing bytes after declared tensors");
  }

  const auto conv_from = [&](std::size_t w_idx, const std::string& which) {
    Tensor& w = loaded[w_idx];
    Tensor& b = loaded[w_idx + 1];
    if (w.rank() != 4) {
      throw std::runtime_error(path + ": " + which + ".weight must have rank 4");
    }
    const int out_c = w.extent(0), in_c = w.extent(1), kh = w.extent(2), kw = w.extent(3);
    return ConvSpec(out_c, in_c, kh, kw, std::move(w), std::move(b));
  };
  try {
    params.conv1 = conv_from(0, "conv1");
    params.conv2 = conv_from(2, "conv2");
    params.conv3 = conv_from(4, "conv3");
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (loaded[6].rank() != 1 || loaded[7].shape() != std::vector<int>{1}) {
    throw std::runtime_error(path + ": head.weight must be rank 1 and head.bias length 1");
  }
  params.head_weights = std::move(loaded[6]);
  params.head_bias = std::move(loaded[7]);
  return params;
}

}  // namespace mdcnn
