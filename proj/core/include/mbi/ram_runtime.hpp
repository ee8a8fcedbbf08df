#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mbi/image.hpp"
#include "mbi/quantization.hpp"
#include "mbi/random.hpp"
#include "mbi/table.hpp"

namespace mbi {

/// Glimpse sensor and network dimensions of a recurrent attention model.
struct GlimpseConfig {
  int patch_size = 4;
  int glimpse_scale = 4;
  int n_patches = 3;
  int n_glimpses = 5;
  int hidden_size = 64;
  int added_layers = 1;
  int glimpse_hidden = 128;
  int glimpse_size = 256;
  int image_height = 28;
  int image_width = 28;
  int channels = 1;
  int n_classes = 10;
  // 0 feeds the raw patch vector to the network.
  int patch_quant_bits = 2;

  int patch_length() const { return patch_size * patch_size * n_patches * channels; }
  void validate() const;

  bool operator==(const GlimpseConfig&) const = default;
};

/// Patch vector of the k multi-resolution windows centred on loc: window j
/// has side g*s^j, starts at loc - side/2 on each axis (even sides lean
/// top-left), is zero-padded outside the image and average-pooled to g x g.
/// Output is row-major, channel-minor, windows in increasing j.
std::vector<double> extract_patches(const Image& image, Location loc, const GlimpseConfig& cfg);

struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  std::size_t numel() const;
};

/// Trained weights plus hyperparameters. Topology (all weights row-major
/// [out, in]):
///   glimpse.patch:  N_p -> glimpse_hidden, ReLU
///   glimpse.loc:    2 -> glimpse_hidden, ReLU   (loc normalized to [-1, 1])
///   glimpse.out:    2*glimpse_hidden -> glimpse_size, ReLU
///   core:           ReLU(core.input.weight g + core.hidden.weight h + core.bias)
///   core.added.i:   hidden -> hidden, ReLU, for i < added_layers
///   location:       hidden -> 2, tanh
///   classifier:     hidden -> n_classes
struct RamModel {
  GlimpseConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& tensor(const std::string& name) const;

  /// FNV-1a over tensor names, shapes and raw float bits.
  std::uint64_t checksum() const;
};

/// Expected name -> shape map for a config.
std::map<std::string, std::vector<int>> expected_topology(const GlimpseConfig& cfg);

/// Model with every weight and bias zero.
RamModel zero_model(const GlimpseConfig& cfg);

/// Weights drawn uniformly from [-scale, scale]; test and benchmark fixture.
RamModel random_model(const GlimpseConfig& cfg, std::uint64_t seed, float scale = 0.2f);

// Manifest: UTF-8 `key = value` lines with the GlimpseConfig fields,
// `format = mbi-ram-v1`, `loc_encoding = normalized`, and one
// `tensor = <name> <d0,d1,...> <byte offset> <byte length>` line per tensor.
// Blob: little-endian float32 tensors in manifest order.
RamModel load_model(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path);
RamModel parse_model(const std::string& manifest_text, std::span<const std::uint8_t> blob);
void export_model(const RamModel& model, const std::filesystem::path& manifest_path,
                  const std::filesystem::path& blob_path);

struct StepOutput {
  std::vector<double> hidden;
  Location loc_next;
  std::vector<double> logits;
};

/// One full-precision glimpse. The patch fed to the network is the dequantized
/// patch when patch_quant_bits > 0.
StepOutput ram_step(const RamModel& model, const Image& image, std::span<const double> hidden_prev, Location loc);

struct GlimpseRecord {
  std::vector<double> hidden_prev;
  Location loc;
  std::vector<double> patch;
  QuantizedVector patch_q;
  QuantizedVector hidden_prev_q;
  std::vector<double> hidden_next;
  QuantizedVector hidden_next_q;
  Location loc_next;
  std::vector<double> logits;
  int pred = 0;
};

using GlimpseTrace = std::vector<GlimpseRecord>;

struct RamResult {
  int prediction = 0;
  GlimpseTrace trace;
};

/// Quantizer for hidden states at table/query boundaries: Relu1 then 1 bit.
QuantSpec hidden_quant_spec(int bits = 1);

/// Patch quantization used for keys: per-vector min/max.
QuantizedVector quantize_patch(std::span<const double> patch, int bits);

/// Draws a uniform initial location.
Location random_location(const GlimpseConfig& cfg, Rng& rng);

/// Bit widths used for the quantized copies recorded in a trace.
struct TraceBits {
  int hidden = 1;
  int patch = 2;
};

/// h_0 = 0, then n_glimpses steps carrying the full-precision hidden state;
/// the prediction is the argmax of the final glimpse's logits.
RamResult ram_infer(const RamModel& model, const Image& image, Location initial, TraceBits bits = {});
RamResult ram_infer(const RamModel& model, const Image& image, Rng& rng, TraceBits bits = {});

/// Argmax with lowest-index tie-break.
int argmax(std::span<const double> values);

}  // namespace mbi
