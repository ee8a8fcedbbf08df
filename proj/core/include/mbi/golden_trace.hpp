#pragma once

#include <filesystem>
#include <vector>

#include "mbi/image.hpp"
#include "mbi/ram_runtime.hpp"

namespace mbi {

// Reference per-glimpse outputs exported alongside a trained model. CSV with
// header image,glimpse,loc_x,loc_y,next_x,next_y,pred,h0..h{N-1},logit0..logit{C-1};
// h* are the full-precision hidden outputs of that glimpse.
struct GoldenStep {
  int image = 0;
  int glimpse = 0;
  Location loc;
  Location loc_next;
  int pred = 0;
  std::vector<double> hidden;
  std::vector<double> logits;
};

std::vector<GoldenStep> read_golden_trace(const std::filesystem::path& path);
void write_golden_trace(const std::filesystem::path& path, const std::vector<GoldenStep>& steps);

/// Golden rows for one image's trace.
std::vector<GoldenStep> to_golden(int image_index, const GlimpseTrace& trace);

struct TraceComparison {
  std::size_t steps = 0;
  std::size_t location_mismatches = 0;
  std::size_t prediction_mismatches = 0;
  double max_abs_error = 0.0;
};

/// Replays every traced image from its recorded first location and compares
/// hidden states and logits elementwise.
TraceComparison compare_golden(const RamModel& model, const std::vector<Image>& images,
                               const std::vector<GoldenStep>& golden);

}  // namespace mbi
