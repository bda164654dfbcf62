#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "mdcnn/augment.hpp"

namespace mdcnn {

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

/// Provenance of a sample: either an original file or a transform of one.
/// Augmented samples always record their source path.
struct Origin {
  enum class Kind { original, rotated, cropped };
  Kind kind = Kind::original;
  int rotate_k = 0;
  CropRegion crop;
  std::string source;

  static Origin original() { return {}; }
  static Origin rotated(int k, std::string src) {
    Origin o;
    o.kind = Kind::rotated;
    o.rotate_k = k;
    o.source = std::move(src);
    return o;
  }
  static Origin cropped(CropRegion r, std::string src) {
    Origin o;
    o.kind = Kind::cropped;
    o.crop = r;
    o.source = std::move(src);
    return o;
  }
};

/// One labeled image reference. `path` is relative to the manifest's
/// directory; for augmented samples it names the source file to decode.
struct Sample {
  std::string path;
  int label = 0;  // 0 = Animals, 1 = Litter
  Split split = Split::train;
  Origin origin;

  /// Key used to keep a source image and all of its augments on the same
  /// side of a split.
  const std::string& source_key() const {
    return origin.kind == Origin::Kind::original ? path : origin.source;
  }
};

/// Labeled file list with split tags and the seed that produced it.
struct SampleManifest {
  std::uint64_t seed = 0;
  std::vector<Sample> samples;

  std::int64_t count(Split split, int label) const {
    std::int64_t n = 0;
    for (const Sample& s : samples) {
      if (s.split == split && s.label == label) ++n;
    }
    return n;
  }

  std::int64_t count(Split split) const { return count(split, 0) + count(split, 1); }

  std::vector<Sample> split_samples(Split split) const {
    std::vector<Sample> out;
    for (const Sample& s : samples) {
      if (s.split == split) out.push_back(s);
    }
    return out;
  }
};

namespace detail {

inline std::string encode_origin(const Origin& o) {
  switch (o.kind) {
    case Origin::Kind::original:
      return "original";
    case Origin::Kind::rotated:
      return "rot90=" + std::to_string(o.rotate_k) + ";src=" + o.source;
    default:
      return "crop=" + std::to_string(o.crop.top) + "," + std::to_string(o.crop.left) + "," +
             std::to_string(o.crop.height) + "," + std::to_string(o.crop.width) +
             ";src=" + o.source;
  }
}

inline Origin parse_origin(std::string_view text, int line_no) {
  const auto fail = [&](const std::string& why) -> Origin {
    throw std::runtime_error("manifest line " + std::to_string(line_no) + ": " + why);
  };
  if (text == "original") return Origin::original();
  const auto src_pos = text.find(";src=");
  if (src_pos == std::string_view::npos) {
    return fail("origin is missing its ;src= field");
  }
  std::string source(text.substr(src_pos + 5));
  if (source.empty()) return fail("origin has an empty source path");
  const std::string_view head = text.substr(0, src_pos);
  if (head.starts_with("rot90=")) {
    int k = 0;
    const auto body = head.substr(6);
    const auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), k);
    if (ec != std::errc{} || p != body.data() + body.size() || k < 1 || k > 3) {
      return fail("rotation count must be 1, 2 or 3");
    }
    return Origin::rotated(k, std::move(source));
  }
  if (head.starts_with("crop=")) {
    int vals[4] = {};
    const char* cur = head.data() + 5;
    const char* end = head.data() + head.size();
    for (int i = 0; i < 4; ++i) {
      const auto [p, ec] = std::from_chars(cur, end, vals[i]);
      if (ec != std::errc{}) return fail("crop region is not four integers");
      cur = p;
      if (i < 3) {
        if (cur == end || *cur != ',') return fail("crop region is not four integers");
        ++cur;
      }
    }
    if (cur != end) return fail("crop region has trailing characters");
    return Origin::cropped({vals[0], vals[1], vals[2], vals[3]}, std::move(source));
  }
  return fail("unknown origin '" + std::string(head) + "'");
}

}  // namespace detail

/// Manifest text format, one record per line after the header:
///   manifest-v1 seed=<u64>
///   <split>\t<label>\t<origin>\t<path>
/// Fields may not contain tabs; paths are relative to the manifest file.
inline void write_manifest(const SampleManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error(path + ": cannot open for writing");
  }
  out << "manifest-v1 seed=" << manifest.seed << "\n";
  for (const Sample& s : manifest.samples) {
    const std::string origin = detail::encode_origin(s.origin);
    if (s.path.find('\t') != std::string::npos || origin.find('\t') != std::string::npos) {
      throw std::runtime_error("manifest fields may not contain tabs: " + s.path);
    }
    out << to_string(s.split) << '\t' << s.label << '\t' << origin << '\t' << s.path << "\n";
  }
  out.flush();
  if (!out) {
    throw std::runtime_error(path + ": write failed");
  }
}

inline SampleManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(path + ": cannot open manifest");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": empty manifest");
  }
  SampleManifest manifest;
  constexpr std::string_view header = "manifest-v1 seed=";
  if (!line.starts_with(header)) {
    throw std::runtime_error(path + ": line 1: expected 'manifest-v1 seed=<u64>' header");
  }
  {
    const std::string_view seed_text = std::string_view(line).substr(header.size());
    const auto [p, ec] = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(),
                                         manifest.seed);
    if (ec != std::errc{} || p != seed_text.data() + seed_text.size()) {
      throw std::runtime_error(path + ": line 1: bad seed value");
    }
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": expected 4 tab-separated fields, got " +
                               std::to_string(fields.size()));
    }
    Sample s;
    if (fields[0] == "train") s.split = Split::train;
    else if (fields[0] == "val") s.split = Split::val;
    else if (fields[0] == "test") s.split = Split::test;
    else {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": unknown split '" + fields[0] + "'");
    }
    if (fields[1] == "0") s.label = 0;
    else if (fields[1] == "1") s.label = 1;
    else {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": label must be 0 or 1, got '" + fields[1] + "'");
    }
    s.origin = detail::parse_origin(fields[2], line_no);
    s.path = fields[3];
    if (s.path.empty()) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": empty path");
    }
    manifest.samples.push_back(std::move(s));
  }
  return manifest;
}

/// Decodes a sample and applies its recorded transform, yielding the
/// standard [3,140,140] tensor.
inline TensorT<float> load_sample(const Sample& sample, const std::filesystem::path& base_dir) {
  const std::string file = (base_dir / sample.path).string();
  switch (sample.origin.kind) {
    case Origin::Kind::original:
      return load_image(file);
    case Origin::Kind::rotated:
      return resize_bilinear(augment_rotate(decode_image(file), sample.origin.rotate_k),
                             kImageSize, kImageSize);
    default:
      return augment_crop(decode_image(file), sample.origin.crop);
  }
}

}  // namespace mdcnn
