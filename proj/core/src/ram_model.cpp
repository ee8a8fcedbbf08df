#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mbi/error.hpp"
#include "mbi/ram_runtime.hpp"
#include "mbi/text.hpp"

namespace mbi {

namespace {

constexpr const char* kFormat = "mbi-ram-v1";

std::string shape_string(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s;
}

}  // namespace

void GlimpseConfig::validate() const {
  require(patch_size >= 1 && glimpse_scale >= 1 && n_patches >= 1, "glimpse geometry must be positive");
  require(n_glimpses >= 1 && hidden_size >= 1 && added_layers >= 0, "invalid recurrence dimensions");
  require(glimpse_hidden >= 1 && glimpse_size >= 1, "invalid glimpse network widths");
  require(image_height >= 1 && image_width >= 1 && channels >= 1, "invalid image dims");
  require(n_classes >= 1, "need at least one class");
  require(patch_quant_bits >= 0 && patch_quant_bits <= 8, "patch_quant_bits must be in [0,8]");
}

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

const Tensor& RamModel::tensor(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw_error(Errc::topology_incomplete, "missing tensor " + name);
  return it->second;
}

std::uint64_t RamModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : tensors) {
    mix(name.data(), name.size());
    for (int d : t.shape) mix(&d, sizeof d);
    for (float v : t.data) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      mix(&bits, sizeof bits);
    }
  }
  return h;
}

std::map<std::string, std::vector<int>> expected_topology(const GlimpseConfig& c) {
  std::map<std::string, std::vector<int>> t;
  t["glimpse.patch.weight"] = {c.glimpse_hidden, c.patch_length()};
  t["glimpse.patch.bias"] = {c.glimpse_hidden};
  t["glimpse.loc.weight"] = {c.glimpse_hidden, 2};
  t["glimpse.loc.bias"] = {c.glimpse_hidden};
  t["glimpse.out.weight"] = {c.glimpse_size, 2 * c.glimpse_hidden};
  t["glimpse.out.bias"] = {c.glimpse_size};
  t["core.input.weight"] = {c.hidden_size, c.glimpse_size};
  t["core.hidden.weight"] = {c.hidden_size, c.hidden_size};
  t["core.bias"] = {c.hidden_size};
  for (int i = 0; i < c.added_layers; ++i) {
    t["core.added." + std::to_string(i) + ".weight"] = {c.hidden_size, c.hidden_size};
    t["core.added." + std::to_string(i) + ".bias"] = {c.hidden_size};
  }
  t["location.weight"] = {2, c.hidden_size};
  t["location.bias"] = {2};
  t["classifier.weight"] = {c.n_classes, c.hidden_size};
  t["classifier.bias"] = {c.n_classes};
  return t;
}

RamModel zero_model(const GlimpseConfig& cfg) {
  cfg.validate();
  RamModel m;
  m.config = cfg;
  for (const auto& [name, shape] : expected_topology(cfg)) {
    Tensor t{shape, {}};
    t.data.assign(t.numel(), 0.0f);
    m.tensors.emplace(name, std::move(t));
  }
  return m;
}

RamModel random_model(const GlimpseConfig& cfg, std::uint64_t seed, float scale) {
  RamModel m = zero_model(cfg);
  Rng rng(mix_seed(seed));
  std::uniform_real_distribution<float> dist(-scale, scale);
  for (auto& [name, t] : m.tensors)
    for (auto& v : t.data) v = dist(rng);
  return m;
}

RamModel parse_model(const std::string& manifest_text, std::span<const std::uint8_t> blob) {
  const auto kv = parse_key_values(manifest_text);
  if (auto f = find_value(kv, "format"); f && *f != kFormat)
    throw_error(Errc::parse, "unsupported model format '" + *f + "'");
  if (auto enc = find_value(kv, "loc_encoding"); enc && *enc != "normalized")
    throw_error(Errc::parse, "unsupported loc_encoding '" + *enc + "'");

  GlimpseConfig c;
  auto get = [&](const char* key, int& field) {
    if (auto v = find_value(kv, key)) field = static_cast<int>(parse_int(*v));
  };
  get("patch_size", c.patch_size);
  get("glimpse_scale", c.glimpse_scale);
  get("n_patches", c.n_patches);
  get("n_glimpses", c.n_glimpses);
  get("hidden_size", c.hidden_size);
  get("added_layers", c.added_layers);
  get("glimpse_hidden", c.glimpse_hidden);
  get("glimpse_size", c.glimpse_size);
  get("image_height", c.image_height);
  get("image_width", c.image_width);
  get("channels", c.channels);
  get("n_classes", c.n_classes);
  get("patch_quant_bits", c.patch_quant_bits);
  c.validate();

  RamModel model;
  model.config = c;
  std::size_t consumed = 0;
  for (const auto& [key, value] : kv) {
    if (key != "tensor") continue;
    std::istringstream is(value);
    std::string name, shape_text;
    std::size_t offset = 0, length = 0;
    if (!(is >> name >> shape_text >> offset >> length))
      throw_error(Errc::parse, "malformed tensor record '" + value + "'");
    Tensor t;
    for (const auto& d : split(shape_text, ',')) t.shape.push_back(static_cast<int>(parse_int(d)));
    if (length != t.numel() * sizeof(float))
      throw_error(Errc::blob_length_mismatch,
                  name + " declares " + std::to_string(length) + " bytes for shape [" + shape_text + "]");
    if (offset != consumed)
      throw_error(Errc::blob_length_mismatch, name + " offset " + std::to_string(offset) + " is not contiguous");
    if (offset + length > blob.size())
      throw_error(Errc::blob_length_mismatch,
                  name + " needs bytes up to " + std::to_string(offset + length) + ", blob has " +
                      std::to_string(blob.size()));
    t.data.resize(t.numel());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const auto* p = blob.data() + offset + 4 * i;
      const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                 (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
      t.data[i] = std::bit_cast<float>(bits);
    }
    consumed += length;
    if (!model.tensors.emplace(name, std::move(t)).second) throw_error(Errc::parse, "duplicate tensor " + name);
  }
  if (consumed != blob.size())
    throw_error(Errc::blob_length_mismatch, "manifest covers " + std::to_string(consumed) + " bytes, blob has " +
                                                std::to_string(blob.size()));

  for (const auto& [name, shape] : expected_topology(c)) {
    const auto it = model.tensors.find(name);
    if (it == model.tensors.end()) throw_error(Errc::topology_incomplete, "missing tensor " + name);
    if (it->second.shape != shape)
      throw_error(Errc::shape_mismatch, name + " has shape [" + shape_string(it->second.shape) + "], expected [" +
                                            shape_string(shape) + "]");
  }
  return model;
}

RamModel load_model(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path) {
  return parse_model(read_text_file(manifest_path), read_file(blob_path));
}

void export_model(const RamModel& model, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& blob_path) {
  const auto& c = model.config;
  std::ostringstream m;
  m << "# recurrent attention model weights\n"
    << "format = " << kFormat << '\n'
    << "loc_encoding = normalized\n"
    << "patch_size = " << c.patch_size << '\n'
    << "glimpse_scale = " << c.glimpse_scale << '\n'
    << "n_patches = " << c.n_patches << '\n'
    << "n_glimpses = " << c.n_glimpses << '\n'
    << "hidden_size = " << c.hidden_size << '\n'
    << "added_layers = " << c.added_layers << '\n'
    << "glimpse_hidden = " << c.glimpse_hidden << '\n'
    << "glimpse_size = " << c.glimpse_size << '\n'
    << "image_height = " << c.image_height << '\n'
    << "image_width = " << c.image_width << '\n'
    << "channels = " << c.channels << '\n'
    << "n_classes = " << c.n_classes << '\n'
    << "patch_quant_bits = " << c.patch_quant_bits << '\n';

  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) throw_error(Errc::io, "cannot write " + blob_path.string());
  std::size_t offset = 0;
  for (const auto& [name, t] : model.tensors) {
    const std::size_t length = t.data.size() * sizeof(float);
    m << "tensor = " << name << ' ' << shape_string(t.shape) << ' ' << offset << ' ' << length << '\n';
    for (float v : t.data) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      const char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>(bits >> 24)};
      blob.write(b, 4);
    }
    offset += length;
  }
  if (!blob) throw_error(Errc::io, "write failed for " + blob_path.string());

  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw_error(Errc::io, "cannot write " + manifest_path.string());
  out << m.str();
}

}  // namespace mbi
