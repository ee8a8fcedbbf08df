#pragma once

#include <cstdint>
#include <span>

#include "mbi/image.hpp"
#include "mbi/ram_runtime.hpp"
#include "mbi/table.hpp"

namespace mbi {

/// Table config matching a model's glimpse geometry with baseline bit widths.
TableConfig table_config_for(const GlimpseConfig& glimpse, std::uint64_t seed);

/// Throws unless model hyperparameters agree with the table config.
void check_compatible(const GlimpseConfig& glimpse, const TableConfig& config);

/// Runs deterministic inference over every image and records one row per
/// glimpse, in image order then glimpse order. Image i starts from a uniform
/// location drawn from stream_rng(config.seed, i), so the output does not
/// depend on the thread count.
LookupTable distill(const RamModel& model, std::span<const Image> images, const TableConfig& config,
                    unsigned threads = 1);

/// Initial location used for image `index` by distillation and seeded queries.
Location initial_location(const GlimpseConfig& glimpse, std::uint64_t run_seed, std::size_t index);

}  // namespace mbi
