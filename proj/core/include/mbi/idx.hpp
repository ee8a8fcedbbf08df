#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mbi/image.hpp"

namespace mbi {

/// Images scaled to [0, 1] with one label per image.
struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
};

// Big-endian IDX containers: images 0x00000803 (N, H, W) or 0x00000804
// (N, H, W, C), labels 0x00000801 (N), unsigned bytes throughout.
std::vector<Image> parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);

Dataset parse_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Pixels are scaled by 255 and rounded. Three-dim magic when channels == 1.
std::vector<std::uint8_t> encode_idx_images(std::span<const Image> images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels);

void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// First `count` images (all when count is 0 or exceeds the size).
Dataset take(const Dataset& data, std::size_t count);

}  // namespace mbi
