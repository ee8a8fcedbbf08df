#include "mbi/idx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mbi/error.hpp"
#include "mbi/text.hpp"

namespace mbi {

namespace {

constexpr std::uint32_t kLabelMagic = 0x00000801;
constexpr std::uint32_t kImageMagic3 = 0x00000803;
constexpr std::uint32_t kImageMagic4 = 0x00000804;

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  if (at + 4 > b.size()) throw_error(Errc::truncated, "IDX header ends early");
  return (static_cast<std::uint32_t>(b[at]) << 24) | (static_cast<std::uint32_t>(b[at + 1]) << 16) |
         (static_cast<std::uint32_t>(b[at + 2]) << 8) | static_cast<std::uint32_t>(b[at + 3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(Errc::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_error(Errc::io, "write failed for " + path.string());
}

}  // namespace

std::vector<Image> parse_idx_images(std::span<const std::uint8_t> bytes) {
  const auto magic = be32(bytes, 0);
  if (magic != kImageMagic3 && magic != kImageMagic4)
    throw_error(Errc::wrong_magic, "expected IDX image magic, found " + hex(magic));
  const auto n = be32(bytes, 4);
  const auto h = be32(bytes, 8);
  const auto w = be32(bytes, 12);
  const std::uint32_t c = magic == kImageMagic4 ? be32(bytes, 16) : 1;
  const std::size_t header = magic == kImageMagic4 ? 20 : 16;
  if (h == 0 || w == 0 || c == 0 || h > 65535 || w > 65535 || c > 65535)
    throw_error(Errc::dim_mismatch, "image dimensions out of range");
  const std::size_t per = static_cast<std::size_t>(h) * w * c;
  const std::size_t need = header + per * n;
  if (bytes.size() < need)
    throw_error(Errc::truncated, "IDX images: " + std::to_string(bytes.size()) + " bytes, header needs " +
                                     std::to_string(need));
  if (bytes.size() > need) throw_error(Errc::dim_mismatch, "IDX images: trailing bytes beyond declared dimensions");

  std::vector<Image> images;
  images.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Image img = make_image(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    const auto* src = bytes.data() + header + per * i;
    std::transform(src, src + per, img.pixels.begin(), [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  const auto magic = be32(bytes, 0);
  if (magic != kLabelMagic) throw_error(Errc::wrong_magic, "expected IDX label magic, found " + hex(magic));
  const auto n = be32(bytes, 4);
  if (bytes.size() < 8 + static_cast<std::size_t>(n))
    throw_error(Errc::truncated, "IDX labels: " + std::to_string(n) + " declared, " +
                                     std::to_string(bytes.size() - 8) + " present");
  if (bytes.size() > 8 + static_cast<std::size_t>(n))
    throw_error(Errc::dim_mismatch, "IDX labels: trailing bytes beyond declared count");
  return {bytes.begin() + 8, bytes.end()};
}

Dataset parse_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  Dataset d;
  d.images = parse_idx_images(read_file(images_path));
  d.labels = parse_idx_labels(read_file(labels_path));
  if (d.images.size() != d.labels.size())
    throw_error(Errc::dim_mismatch, std::to_string(d.images.size()) + " images but " +
                                        std::to_string(d.labels.size()) + " labels");
  return d;
}

std::vector<std::uint8_t> encode_idx_images(std::span<const Image> images) {
  require(!images.empty(), "cannot encode an empty image list");
  const auto& first = images.front();
  std::vector<std::uint8_t> out;
  put_be32(out, first.channels == 1 ? kImageMagic3 : kImageMagic4);
  put_be32(out, static_cast<std::uint32_t>(images.size()));
  put_be32(out, static_cast<std::uint32_t>(first.height));
  put_be32(out, static_cast<std::uint32_t>(first.width));
  if (first.channels != 1) put_be32(out, static_cast<std::uint32_t>(first.channels));
  for (const auto& img : images) {
    require(img.height == first.height && img.width == first.width && img.channels == first.channels,
            "images differ in shape");
    for (float p : img.pixels)
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    require(l >= 0 && l <= 255, "label out of byte range");
    out.push_back(static_cast<std::uint8_t>(l));
  }
  return out;
}

void write_idx(const Dataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  require(data.images.size() == data.labels.size(), "image/label count mismatch");
  write_bytes(images_path, encode_idx_images(data.images));
  write_bytes(labels_path, encode_idx_labels(data.labels));
}

Dataset take(const Dataset& data, std::size_t count) {
  if (count == 0 || count >= data.size()) return data;
  Dataset out;
  out.images.assign(data.images.begin(), data.images.begin() + static_cast<std::ptrdiff_t>(count));
  out.labels.assign(data.labels.begin(), data.labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

}  // namespace mbi
