#pragma once

// Directory-layout reader: <root>/Images/<stem>.{jpg,jpeg,png} paired with
// <root>/GT/<stem>.png, ordered by stem.

#include <algorithm>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/data/image_io.hpp"
#include "bicamo/data/sample.hpp"

namespace bicamo {

inline constexpr double kMaskThreshold = 128.0 / 255.0;

inline Grid binarize_mask(const Grid& g) {
  return map(g, [](double v) { return v >= kMaskThreshold ? 1.0 : 0.0; });
}

inline bool is_image_file(const std::filesystem::path& p) {
  const std::string ext = lowercase_extension(p.string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Stem -> path for every image file in `dir`; duplicate stems are an error.
inline std::map<std::string, std::filesystem::path> index_images(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    if (!out.emplace(stem, entry.path()).second) {
      throw std::runtime_error("duplicate image stem '" + stem + "' in " + dir.string());
    }
  }
  return out;
}

inline std::vector<Sample> load_dataset(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw std::runtime_error("dataset root '" + root.string() + "' is not a directory");
  }
  const auto images = index_images(root / "Images");
  std::vector<Sample> out;
  for (const auto& [stem, image_path] : images) {
    const std::filesystem::path gt_path = root / "GT" / (stem + ".png");
    if (!std::filesystem::is_regular_file(gt_path)) {
      throw std::runtime_error("image '" + stem + "' has no ground-truth partner (expected " +
                               gt_path.string() + ")");
    }
    ImageRGB image = read_image_rgb(image_path.string());
    Grid mask = binarize_mask(read_image_gray(gt_path.string()));
    if (mask.height() != image.height() || mask.width() != image.width()) {
      throw std::runtime_error("size mismatch for '" + stem + "': image is " +
                               std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                               ", ground truth is " + shape_string(mask));
    }
    out.emplace_back(stem, std::move(image), std::move(mask));
  }
  return out;
}

// Writes samples in the same layout (PNG images and masks).
inline void save_dataset(const std::vector<Sample>& samples, const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "Images");
  std::filesystem::create_directories(root / "GT");
  for (const Sample& s : samples) {
    write_png(s.image(), (root / "Images" / (s.id() + ".png")).string());
    write_png(s.mask(), (root / "GT" / (s.id() + ".png")).string());
  }
}

}  // namespace bicamo
