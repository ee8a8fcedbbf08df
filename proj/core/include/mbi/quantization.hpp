#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mbi {

/// Uniform linear quantizer over [min, max] with 2^bits reconstruction levels.
struct QuantSpec {
  int bits = 1;
  double min = 0.0;
  double max = 1.0;

  std::uint32_t levels() const { return 1u << bits; }
  std::uint32_t top_level() const { return levels() - 1; }
  double step() const { return (max - min) / static_cast<double>(top_level()); }

  /// Throws Errc::invalid_argument unless 1 <= bits <= 8 and min < max.
  void validate() const;

  bool operator==(const QuantSpec&) const = default;
};

/// Relu1 clamp to [0, 1]. Rejects NaN and infinities.
double relu1(double x);

/// Level for x after clamping to [spec.min, spec.max]; ties round away from zero.
std::uint32_t quantize_linear(double x, const QuantSpec& spec);

double dequantize(std::uint32_t level, const QuantSpec& spec);

struct QuantizedVector {
  std::vector<std::uint8_t> levels;
  QuantSpec spec;

  std::size_t size() const { return levels.size(); }
  std::size_t bit_size() const { return levels.size() * static_cast<std::size_t>(spec.bits); }

  bool operator==(const QuantizedVector&) const = default;
};

QuantizedVector quantize_vector(std::span<const double> values, const QuantSpec& spec);

/// Relu1 followed by quantization; the hidden-state path.
QuantizedVector quantize_hidden(std::span<const double> values, const QuantSpec& spec);

/// Quantizes against the vector's own min/max. A constant vector maps to all
/// zero levels.
QuantizedVector quantize_minmax(std::span<const double> values, int bits);

// Packed layout: element-major, each level written LSB first, bits appended
// contiguously, last byte zero-padded.
std::vector<std::uint8_t> pack(const QuantizedVector& qv);
QuantizedVector unpack(std::span<const std::uint8_t> bytes, const QuantSpec& spec,
                       std::size_t length);

constexpr std::size_t bytes_for_bits(std::size_t bits) { return (bits + 7) / 8; }

/// Appends fixed-width fields LSB-first into a byte buffer.
class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void write(std::uint32_t value, int bits);
  std::size_t bit_count() const { return bits_written_; }

 private:
  std::vector<std::uint8_t>& out_;
  std::size_t bits_written_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t read(int bits);
  std::size_t bit_count() const { return bits_read_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t bits_read_ = 0;
};

}  // namespace mbi
