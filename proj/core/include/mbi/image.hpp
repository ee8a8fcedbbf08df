#pragma once

#include <cstddef>
#include <vector>

namespace mbi {

/// Dense H x W x C image with channel-minor layout and values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> pixels;

  float at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float& at(int y, int x, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

inline Image make_image(int height, int width, int channels = 1, float value = 0.0f) {
  return Image{height, width, channels,
               std::vector<float>(static_cast<std::size_t>(height) * width * channels, value)};
}

}  // namespace mbi
