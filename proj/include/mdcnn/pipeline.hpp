#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mdcnn/loss.hpp"
#include "mdcnn/manifest.hpp"
#include "mdcnn/rng.hpp"

namespace mdcnn {

namespace fs = std::filesystem;

/// Uniformly subsamples the majority class (seeded) until both classes have
/// exactly equal counts; the minority class is untouched. The combined list
/// is re-shuffled before returning.
inline std::vector<Sample> balance_classes(const std::vector<Sample>& samples, Rng& rng) {
  std::vector<Sample> animals, litter;
  for (const Sample& s : samples) {
    (s.label == kAnimalClass ? animals : litter).push_back(s);
  }
  if (animals.empty() || litter.empty()) {
    throw std::runtime_error("balance_classes: a class has zero samples");
  }
  std::vector<Sample>& majority = animals.size() >= litter.size() ? animals : litter;
  const std::size_t keep = std::min(animals.size(), litter.size());
  rng_shuffle(rng, majority);
  majority.resize(keep);
  std::vector<Sample> out = std::move(animals);
  out.insert(out.end(), litter.begin(), litter.end());
  rng_shuffle(rng, out);
  return out;
}

namespace detail {

/// Smallest integer >= fraction * n, with a tolerance so that an exactly
/// representable product (0.1 * 10 = 1) is not pushed up by rounding noise.
inline std::int64_t ceil_fraction(double fraction, std::int64_t n) {
  return static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

struct SourceGroup {
  std::vector<std::size_t> members;  // indices into the input sample list
};

/// Greedy group packing: take groups in order while they fit under `target`;
/// if short, add the smallest remaining group (first such in order).
/// Returns selected group indices; `packed` is the resulting sample count.
inline std::vector<std::size_t> pack_groups(const std::vector<SourceGroup>& groups,
                                            std::int64_t target, std::int64_t& packed) {
  std::vector<std::size_t> chosen;
  std::vector<bool> used(groups.size(), false);
  packed = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto size = static_cast<std::int64_t>(groups[g].members.size());
    if (packed + size <= target) {
      chosen.push_back(g);
      used[g] = true;
      packed += size;
      if (packed == target) return chosen;
    }
  }
  if (packed < target) {
    std::size_t best = groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (used[g]) continue;
      if (best == groups.size() || groups[g].members.size() < groups[best].members.size()) {
        best = g;
      }
    }
    if (best < groups.size()) {
      chosen.push_back(best);
      packed += static_cast<std::int64_t>(groups[best].members.size());
    }
  }
  return chosen;
}

}  // namespace detail

struct TrainValSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

/// Seeded stratified split. Per class the validation target is
/// ceil(fraction * class_count); a source image and every augment derived
/// from it always land on the same side, and group granularity may push a
/// class past its target, in which case the other class is topped up so that
/// the remaining train classes stay exactly equal.
inline TrainValSplit split_train_val(const std::vector<Sample>& samples, double fraction,
                                     Rng& rng) {
  if (!(fraction > 0.0) || !(fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must be in (0, 1)");
  }
  std::vector<Sample> order = samples;
  rng_shuffle(rng, order);

  // Group by source, preserving shuffled first-appearance order, per class.
  std::array<std::vector<detail::SourceGroup>, 2> groups;
  std::array<std::int64_t, 2> class_counts{0, 0};
  for (int label = 0; label < 2; ++label) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (order[i].label != label) continue;
      ++class_counts[static_cast<std::size_t>(label)];
      auto [it, fresh] = index.try_emplace(order[i].source_key(), groups[label].size());
      if (fresh) groups[label].emplace_back();
      groups[label][it->second].members.push_back(i);
    }
  }
  if (class_counts[0] == 0 || class_counts[1] == 0) {
    throw std::runtime_error("split_train_val: a class has zero samples");
  }
  if (class_counts[0] != class_counts[1]) {
    throw std::runtime_error("split_train_val: classes are not balanced (" +
                             std::to_string(class_counts[0]) + " vs " +
                             std::to_string(class_counts[1]) + ")");
  }

  std::array<std::vector<std::size_t>, 2> chosen;
  std::array<std::int64_t, 2> val_counts{0, 0};
  const std::int64_t target = detail::ceil_fraction(fraction, class_counts[0]);
  for (int label = 0; label < 2; ++label) {
    chosen[label] = detail::pack_groups(groups[label], target, val_counts[label]);
    if (val_counts[label] < target) {
      throw std::runtime_error("split_train_val: class " + std::to_string(label) +
                               " is too small to stratify");
    }
  }

  // Group granularity can leave the classes unequal; top up the smaller one.
  for (int guard = 0; val_counts[0] != val_counts[1]; ++guard) {
    if (guard > 1000) {
      throw std::runtime_error("split_train_val: cannot equalize validation classes "
                               "under source grouping");
    }
    const int small = val_counts[0] < val_counts[1] ? 0 : 1;
    const std::int64_t deficit = std::abs(val_counts[0] - val_counts[1]);
    std::set<std::size_t> taken(chosen[small].begin(), chosen[small].end());
    std::size_t pick = groups[small].size();
    for (std::size_t g = 0; g < groups[small].size(); ++g) {
      if (taken.count(g)) continue;
      const auto size = static_cast<std::int64_t>(groups[small][g].members.size());
      if (size <= deficit) {
        pick = g;
        break;
      }
      if (pick == groups[small].size() ||
          groups[small][g].members.size() < groups[small][pick].members.size()) {
        pick = g;
      }
    }
    if (pick == groups[small].size()) {
      throw std::runtime_error("split_train_val: class " + std::to_string(small) +
                               " is too small to stratify");
    }
    chosen[small].push_back(pick);
    val_counts[small] += static_cast<std::int64_t>(groups[small][pick].members.size());
  }
  if (val_counts[0] >= class_counts[0]) {
    throw std::runtime_error("split_train_val: validation would consume an entire class");
  }

  std::vector<bool> in_val(order.size(), false);
  for (int label = 0; label < 2; ++label) {
    for (const std::size_t g : chosen[label]) {
      for (const std::size_t i : groups[label][g].members) in_val[i] = true;
    }
  }
  TrainValSplit result;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (in_val[i] ? result.val : result.train).push_back(order[i]);
  }
  return result;
}

struct PrepareConfig {
  std::string data_root;
  std::uint64_t seed = 1;
  int augment_rotations = 0;  // rotated copies per image, 0..3
  int augment_crops = 0;      // random crops per image
  double val_fraction = 0.1;
};

namespace detail {

inline bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// Seeded crop region covering 60-90% of each axis; null when the image is
/// too small to crop at the 8px minimum.
inline std::optional<CropRegion> random_crop_region(Rng& rng, int h, int w) {
  if (h < 8 || w < 8) return std::nullopt;
  const auto span = [&](int extent) {
    const double f = 0.6 + 0.3 * rng.next_real();
    return std::max(8, static_cast<int>(std::lround(f * extent)));
  };
  CropRegion r;
  r.height = std::min(span(h), h);
  r.width = std::min(span(w), w);
  r.top = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(h - r.height + 1)));
  r.left = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(w - r.width + 1)));
  return r;
}

}  // namespace detail

/// Full preparation pass: scan <root>/animals and <root>/litter (plus the
/// optional <root>/test/... directories), decode every file to validate it,
/// expand the manifest with the configured rotations and crops, balance the
/// train classes exactly, split train/val, and return samples with paths
/// relative to `manifest_dir`. Every stage is a pure function of the inputs
/// and the seed.
inline SampleManifest prepare_dataset(const PrepareConfig& config, const fs::path& manifest_dir) {
  const fs::path root(config.data_root);
  if (!fs::is_directory(root)) {
    throw std::runtime_error(config.data_root + ": data root is not a directory");
  }
  const std::array<std::pair<fs::path, int>, 2> class_dirs{
      std::pair{root / "animals", kAnimalClass}, std::pair{root / "litter", kLitterClass}};
  for (const auto& [dir, label] : class_dirs) {
    if (!fs::is_directory(dir)) {
      throw std::runtime_error(dir.string() + ": class directory is missing");
    }
  }

  Rng rng(config.seed);
  std::vector<std::string> undecodable;
  std::vector<Sample> pool;

  const auto rel = [&](const fs::path& p) {
    return fs::relative(p, manifest_dir).generic_string();
  };

  for (const auto& [dir, label] : class_dirs) {
    const auto files = detail::list_images(dir);
    if (files.empty()) {
      throw std::runtime_error(dir.string() + ": class directory holds no PNG or JPEG files");
    }
    for (const fs::path& file : files) {
      int h = 0, w = 0;
      try {
        const auto img = decode_image(file.string());
        h = img.extent(1);
        w = img.extent(2);
      } catch (const std::exception& e) {
        undecodable.push_back(e.what());
        continue;
      }
      const std::string rel_path = rel(file);
      pool.push_back(Sample{rel_path, label, Split::train, Origin::original()});
      for (int k = 1; k <= config.augment_rotations; ++k) {
        pool.push_back(Sample{rel_path, label, Split::train, Origin::rotated(k, rel_path)});
      }
      for (int i = 0; i < config.augment_crops; ++i) {
        if (const auto region = detail::random_crop_region(rng, h, w)) {
          pool.push_back(Sample{rel_path, label, Split::train, Origin::cropped(*region, rel_path)});
        }
      }
    }
  }
  if (!undecodable.empty()) {
    std::string msg = "undecodable image files:";
    for (const std::string& e : undecodable) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }

  const std::vector<Sample> balanced = balance_classes(pool, rng);
  TrainValSplit split = split_train_val(balanced, config.val_fraction, rng);

  SampleManifest manifest;
  manifest.seed = config.seed;
  for (Sample& s : split.train) {
    s.split = Split::train;
    manifest.samples.push_back(std::move(s));
  }
  for (Sample& s : split.val) {
    s.split = Split::val;
    manifest.samples.push_back(std::move(s));
  }

  // Optional held-out test set; listed as-is, neither balanced nor augmented.
  for (const auto& [subdir, label] :
       {std::pair{fs::path("test") / "animals", kAnimalClass},
        std::pair{fs::path("test") / "litter", kLitterClass}}) {
    const fs::path dir = root / subdir;
    if (!fs::is_directory(dir)) continue;
    for (const fs::path& file : detail::list_images(dir)) {
      try {
        decode_image(file.string());
      } catch (const std::exception& e) {
        throw std::runtime_error(std::string("undecodable image files:\n  ") + e.what());
      }
      manifest.samples.push_back(Sample{rel(file), label, Split::test, Origin::original()});
    }
  }
  return manifest;
}

}  // namespace mdcnn
