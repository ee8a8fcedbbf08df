#include "mbi/ram_runtime.hpp"

#include <algorithm>
#include <cmath>

#include "mbi/error.hpp"

namespace mbi {

namespace {

// y = act(W x + b) for row-major W [out, in]
template <typename Act>
std::vector<double> dense(const Tensor& w, const Tensor& b, std::span<const double> x, Act act) {
  const int out = w.shape[0], in = w.shape[1];
  require(static_cast<int>(x.size()) == in, "dense layer input size mismatch");
  std::vector<double> y(out);
  for (int o = 0; o < out; ++o) {
    const float* row = w.data.data() + static_cast<std::size_t>(o) * in;
    double acc = b.data[o];
    for (int i = 0; i < in; ++i) acc += static_cast<double>(row[i]) * x[i];
    y[o] = act(acc);
  }
  return y;
}

void accumulate(const Tensor& w, std::span<const double> x, std::vector<double>& y) {
  const int out = w.shape[0], in = w.shape[1];
  require(static_cast<int>(x.size()) == in, "dense layer input size mismatch");
  for (int o = 0; o < out; ++o) {
    const float* row = w.data.data() + static_cast<std::size_t>(o) * in;
    double acc = 0.0;
    for (int i = 0; i < in; ++i) acc += static_cast<double>(row[i]) * x[i];
    y[o] += acc;
  }
}

double relu(double v) { return v > 0.0 ? v : 0.0; }
double identity(double v) { return v; }

double normalize_coord(int v, int dim) { return dim > 1 ? 2.0 * v / (dim - 1) - 1.0 : 0.0; }

int denormalize_coord(double t, int dim) {
  const double v = std::round((t + 1.0) / 2.0 * (dim - 1));
  return std::clamp(static_cast<int>(v), 0, dim - 1);
}

}  // namespace

std::vector<double> extract_patches(const Image& image, Location loc, const GlimpseConfig& cfg) {
  require(image.channels == cfg.channels, "image channel count does not match the glimpse config");
  require(loc.x >= 0 && loc.x < image.width && loc.y >= 0 && loc.y < image.height,
          "glimpse location (" + std::to_string(loc.x) + ", " + std::to_string(loc.y) + ") out of bounds");
  const int g = cfg.patch_size, ch = cfg.channels;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(cfg.patch_length()));
  int block = 1;
  for (int j = 0; j < cfg.n_patches; ++j, block *= cfg.glimpse_scale) {
    const int side = g * block;
    const int y0 = loc.y - side / 2, x0 = loc.x - side / 2;
    const double inv_area = 1.0 / (static_cast<double>(block) * block);
    for (int r = 0; r < g; ++r) {
      for (int c = 0; c < g; ++c) {
        for (int k = 0; k < ch; ++k) {
          double sum = 0.0;
          for (int dy = 0; dy < block; ++dy) {
            const int y = y0 + r * block + dy;
            if (y < 0 || y >= image.height) continue;
            for (int dx = 0; dx < block; ++dx) {
              const int x = x0 + c * block + dx;
              if (x < 0 || x >= image.width) continue;
              sum += image.at(y, x, k);
            }
          }
          out.push_back(sum * inv_area);
        }
      }
    }
  }
  return out;
}

QuantSpec hidden_quant_spec(int bits) { return QuantSpec{bits, 0.0, 1.0}; }

QuantizedVector quantize_patch(std::span<const double> patch, int bits) { return quantize_minmax(patch, bits); }

int argmax(std::span<const double> values) {
  require(!values.empty(), "argmax of empty vector");
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

StepOutput ram_step(const RamModel& model, const Image& image, std::span<const double> hidden_prev, Location loc) {
  const auto& c = model.config;
  require(static_cast<int>(hidden_prev.size()) == c.hidden_size, "hidden state size mismatch");
  require(image.height == c.image_height && image.width == c.image_width, "image dims do not match the model");

  auto patch = extract_patches(image, loc, c);
  if (c.patch_quant_bits > 0) {
    const auto q = quantize_patch(patch, c.patch_quant_bits);
    for (std::size_t i = 0; i < patch.size(); ++i) patch[i] = dequantize(q.levels[i], q.spec);
  }
  const double loc_in[2] = {normalize_coord(loc.x, c.image_width), normalize_coord(loc.y, c.image_height)};

  const auto hp = dense(model.tensor("glimpse.patch.weight"), model.tensor("glimpse.patch.bias"), patch, relu);
  const auto hl = dense(model.tensor("glimpse.loc.weight"), model.tensor("glimpse.loc.bias"), loc_in, relu);
  std::vector<double> cat(hp);
  cat.insert(cat.end(), hl.begin(), hl.end());
  const auto g = dense(model.tensor("glimpse.out.weight"), model.tensor("glimpse.out.bias"), cat, relu);

  const auto& bias = model.tensor("core.bias");
  std::vector<double> h(bias.data.begin(), bias.data.end());
  accumulate(model.tensor("core.input.weight"), g, h);
  accumulate(model.tensor("core.hidden.weight"), hidden_prev, h);
  for (auto& v : h) v = relu(v);
  for (int i = 0; i < c.added_layers; ++i) {
    const auto prefix = "core.added." + std::to_string(i);
    h = dense(model.tensor(prefix + ".weight"), model.tensor(prefix + ".bias"), h, relu);
  }

  const auto l = dense(model.tensor("location.weight"), model.tensor("location.bias"), h,
                       [](double v) { return std::tanh(v); });
  auto logits = dense(model.tensor("classifier.weight"), model.tensor("classifier.bias"), h, identity);
  return StepOutput{std::move(h), Location{denormalize_coord(l[0], c.image_width), denormalize_coord(l[1], c.image_height)},
                    std::move(logits)};
}

Location random_location(const GlimpseConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<int> xs(0, cfg.image_width - 1);
  std::uniform_int_distribution<int> ys(0, cfg.image_height - 1);
  const int x = xs(rng);
  const int y = ys(rng);
  return Location{x, y};
}

RamResult ram_infer(const RamModel& model, const Image& image, Location initial, TraceBits bits) {
  const auto& c = model.config;
  const auto hspec = hidden_quant_spec(bits.hidden);
  RamResult result;
  result.trace.reserve(static_cast<std::size_t>(c.n_glimpses));
  std::vector<double> h(static_cast<std::size_t>(c.hidden_size), 0.0);
  Location loc = initial;
  for (int t = 0; t < c.n_glimpses; ++t) {
    GlimpseRecord rec;
    rec.hidden_prev = h;
    rec.hidden_prev_q = quantize_hidden(h, hspec);
    rec.loc = loc;
    rec.patch = extract_patches(image, loc, c);
    rec.patch_q = quantize_patch(rec.patch, bits.patch);
    auto step = ram_step(model, image, h, loc);
    rec.hidden_next = step.hidden;
    rec.hidden_next_q = quantize_hidden(step.hidden, hspec);
    rec.loc_next = step.loc_next;
    rec.pred = argmax(step.logits);
    rec.logits = std::move(step.logits);
    h = std::move(step.hidden);
    loc = step.loc_next;
    result.trace.push_back(std::move(rec));
  }
  result.prediction = result.trace.back().pred;
  return result;
}

RamResult ram_infer(const RamModel& model, const Image& image, Rng& rng, TraceBits bits) {
  const auto initial = random_location(model.config, rng);
  return ram_infer(model, image, initial, bits);
}

}  // namespace mbi
