#include "mbi/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mbi/error.hpp"

namespace mbi {

void QuantSpec::validate() const {
  require(bits >= 1 && bits <= 8, "quantization bits must be in [1,8], got " + std::to_string(bits));
  require(std::isfinite(min) && std::isfinite(max) && min < max,
          "degenerate quantization range [" + std::to_string(min) + ", " + std::to_string(max) + "]");
}

double relu1(double x) {
  require(std::isfinite(x), "relu1 input is not finite");
  return std::clamp(x, 0.0, 1.0);
}

std::uint32_t quantize_linear(double x, const QuantSpec& spec) {
  spec.validate();
  require(!std::isnan(x), "cannot quantize NaN");
  const double clamped = std::clamp(x, spec.min, spec.max);
  const double scaled = (clamped - spec.min) / (spec.max - spec.min) * spec.top_level();
  // std::round is half-away-from-zero
  const auto level = static_cast<std::uint32_t>(std::round(scaled));
  return std::min(level, spec.top_level());
}

double dequantize(std::uint32_t level, const QuantSpec& spec) {
  require(level <= spec.top_level(), "level exceeds quantizer range");
  return spec.min + static_cast<double>(level) * spec.step();
}

QuantizedVector quantize_vector(std::span<const double> values, const QuantSpec& spec) {
  spec.validate();
  QuantizedVector out;
  out.spec = spec;
  out.levels.reserve(values.size());
  for (double v : values) {
    require(std::isfinite(v), "cannot quantize non-finite element");
    out.levels.push_back(static_cast<std::uint8_t>(quantize_linear(v, spec)));
  }
  return out;
}

QuantizedVector quantize_hidden(std::span<const double> values, const QuantSpec& spec) {
  spec.validate();
  QuantizedVector out;
  out.spec = spec;
  out.levels.reserve(values.size());
  for (double v : values) out.levels.push_back(static_cast<std::uint8_t>(quantize_linear(relu1(v), spec)));
  return out;
}

QuantizedVector quantize_minmax(std::span<const double> values, int bits) {
  QuantizedVector out;
  out.spec = QuantSpec{bits, 0.0, 1.0};
  out.levels.assign(values.size(), 0);
  if (values.empty()) {
    out.spec.validate();
    return out;
  }
  for (double v : values) require(std::isfinite(v), "cannot quantize non-finite element");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo < *hi) {
    out.spec = QuantSpec{bits, *lo, *hi};
    for (std::size_t i = 0; i < values.size(); ++i)
      out.levels[i] = static_cast<std::uint8_t>(quantize_linear(values[i], out.spec));
  } else {
    out.spec = QuantSpec{bits, *lo, *lo + 1.0};
  }
  out.spec.validate();
  return out;
}

void BitWriter::write(std::uint32_t value, int bits) {
  for (int b = 0; b < bits; ++b, ++bits_written_) {
    if (bits_written_ % 8 == 0) out_.push_back(0);
    if ((value >> b) & 1u) out_.back() |= static_cast<std::uint8_t>(1u << (bits_written_ % 8));
  }
}

std::uint32_t BitReader::read(int bits) {
  std::uint32_t value = 0;
  for (int b = 0; b < bits; ++b, ++bits_read_) {
    const std::size_t byte = bits_read_ / 8;
    if (byte >= in_.size()) throw_error(Errc::truncated, "bit stream ended early");
    if ((in_[byte] >> (bits_read_ % 8)) & 1u) value |= 1u << b;
  }
  return value;
}

std::vector<std::uint8_t> pack(const QuantizedVector& qv) {
  qv.spec.validate();
  std::vector<std::uint8_t> out;
  out.reserve(bytes_for_bits(qv.bit_size()));
  BitWriter writer(out);
  for (auto level : qv.levels) {
    require(level <= qv.spec.top_level(), "level exceeds quantizer range");
    writer.write(level, qv.spec.bits);
  }
  return out;
}

QuantizedVector unpack(std::span<const std::uint8_t> bytes, const QuantSpec& spec, std::size_t length) {
  spec.validate();
  const std::size_t need = bytes_for_bits(length * static_cast<std::size_t>(spec.bits));
  if (bytes.size() < need)
    throw_error(Errc::truncated, "need " + std::to_string(need) + " bytes, got " + std::to_string(bytes.size()));
  QuantizedVector out;
  out.spec = spec;
  out.levels.reserve(length);
  BitReader reader(bytes);
  for (std::size_t i = 0; i < length; ++i)
    out.levels.push_back(static_cast<std::uint8_t>(reader.read(spec.bits)));
  return out;
}

}  // namespace mbi
