#include "mbi/distill.hpp"

#include "mbi/error.hpp"
#include "mbi/parallel.hpp"

namespace mbi {

TableConfig table_config_for(const GlimpseConfig& g, std::uint64_t seed) {
  TableConfig c;
  c.n_hidden = g.hidden_size;
  c.n_patch = g.patch_length();
  c.n_glimpses = g.n_glimpses;
  c.patch_size = g.patch_size;
  c.glimpse_scale = g.glimpse_scale;
  c.n_patches = g.n_patches;
  c.channels = g.channels;
  c.image_height = g.image_height;
  c.image_width = g.image_width;
  c.n_classes = g.n_classes;
  if (g.patch_quant_bits > 0) c.bits_patch = g.patch_quant_bits;
  c.seed = seed;
  return c;
}

void check_compatible(const GlimpseConfig& g, const TableConfig& c) {
  auto same = [](int a, int b, const char* what) {
    require(a == b, std::string("model/table mismatch in ") + what + ": " + std::to_string(a) + " vs " +
                        std::to_string(b));
  };
  same(g.hidden_size, c.n_hidden, "hidden size");
  same(g.patch_length(), c.n_patch, "patch length");
  same(g.n_glimpses, c.n_glimpses, "glimpse count");
  same(g.patch_size, c.patch_size, "patch size");
  same(g.glimpse_scale, c.glimpse_scale, "glimpse scale");
  same(g.n_patches, c.n_patches, "patch count");
  same(g.channels, c.channels, "channels");
  same(g.image_height, c.image_height, "image height");
  same(g.image_width, c.image_width, "image width");
  same(g.n_classes, c.n_classes, "class count");
}

Location initial_location(const GlimpseConfig& glimpse, std::uint64_t run_seed, std::size_t index) {
  auto rng = stream_rng(run_seed, index);
  return random_location(glimpse, rng);
}

LookupTable distill(const RamModel& model, std::span<const Image> images, const TableConfig& config,
                    unsigned threads) {
  config.validate();
  check_compatible(model.config, config);

  std::vector<GlimpseTrace> traces(images.size());
  const TraceBits bits{config.bits_hidden, config.bits_patch};
  parallel_for(images.size(), threads, [&](std::size_t i) {
    traces[i] = ram_infer(model, images[i], initial_location(model.config, config.seed, i), bits).trace;
  });

  LookupTable table(config);
  table.reserve(images.size() * static_cast<std::size_t>(config.n_glimpses));
  for (const auto& trace : traces) {
    for (const auto& rec : trace) {
      table.add(TableRow{KeyVector{rec.hidden_prev_q.levels, rec.loc, rec.patch_q.levels}, rec.hidden_next_q.levels,
                         rec.loc_next, static_cast<std::uint8_t>(rec.pred)});
    }
  }
  return table;
}

}  // namespace mbi
