#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mbi/quantization.hpp"
#include "mbi/random.hpp"

namespace mbi {

/// Integer pixel coordinate of a glimpse centre; x indexes columns, y rows.
struct Location {
  int x = 0;
  int y = 0;

  bool operator==(const Location&) const = default;
};

/// Shape and bit widths of every row component, plus the glimpse geometry the
/// rows were distilled with.
struct TableConfig {
  int n_hidden = 64;
  int n_loc = 2;
  int n_patch = 48;
  int n_pred = 1;
  int bits_hidden = 1;
  int bits_loc = 5;
  int bits_patch = 2;
  int bits_pred = 4;

  int n_glimpses = 5;
  int patch_size = 4;
  int glimpse_scale = 4;
  int n_patches = 3;
  int channels = 1;
  int image_height = 28;
  int image_width = 28;
  int n_classes = 10;

  // Run seed used to draw per-image initial locations during distillation.
  std::uint64_t seed = 0;

  static TableConfig baseline() { return {}; }

  int key_elements() const { return n_hidden + n_loc + n_patch; }

  /// Throws unless the patch length equals g^2 * k * channels and every field
  /// fits its bit width.
  void validate() const;

  bool operator==(const TableConfig&) const = default;
};

/// 2*b_h*N_h + 2*b_l*N_l + b_p*N_p + b_a*N_a. No validation, so degenerate
/// widths are allowed.
std::size_t row_size_bits(const TableConfig& config);

/// Bytes per row on disk (row bits padded to a byte boundary).
std::size_t row_size_bytes(const TableConfig& config);

struct KeyView {
  std::span<const std::uint8_t> hidden;
  Location loc;
  std::span<const std::uint8_t> patch;
};

struct KeyVector {
  std::vector<std::uint8_t> hidden;
  Location loc;
  std::vector<std::uint8_t> patch;

  KeyView view() const { return {hidden, loc, patch}; }
  bool operator==(const KeyVector&) const = default;
};

struct TableRow {
  KeyVector key;
  std::vector<std::uint8_t> hidden_next;
  Location loc_next;
  std::uint8_t pred = 0;

  bool operator==(const TableRow&) const = default;
};

/// The distilled table. Rows live in flat component arrays so that key scans
/// touch contiguous memory; row(i) materializes a copy.
class LookupTable {
 public:
  LookupTable() = default;
  explicit LookupTable(TableConfig config);

  const TableConfig& config() const { return config_; }
  std::size_t size() const { return pred_.size(); }
  bool empty() const { return pred_.empty(); }

  /// Validates the row against the config before appending.
  void add(const TableRow& row);
  void reserve(std::size_t rows);

  KeyView key(std::size_t i) const;
  std::span<const std::uint8_t> hidden_next(std::size_t i) const;
  Location loc_next(std::size_t i) const { return loc_next_[i]; }
  std::uint8_t pred(std::size_t i) const { return pred_[i]; }
  TableRow row(std::size_t i) const;

  bool operator==(const LookupTable&) const = default;

 private:
  TableConfig config_;
  std::vector<std::uint8_t> hidden_prev_;
  std::vector<Location> loc_;
  std::vector<std::uint8_t> patch_;
  std::vector<std::uint8_t> hidden_next_;
  std::vector<Location> loc_next_;
  std::vector<std::uint8_t> pred_;
};

/// N_r * row_size_bits.
std::size_t table_size_bits(const LookupTable& table);

/// Uniform sample without replacement of round(fraction * N_r) rows (at least
/// one), keeping the original row order. Deterministic under seed.
LookupTable subsample(const LookupTable& table, double fraction, std::uint64_t seed);

/// Drops exact duplicate rows, keeping the first occurrence.
LookupTable deduplicate(const LookupTable& table);

/// Key with every level and coordinate drawn uniformly from its valid range.
KeyVector random_key(const TableConfig& config, Rng& rng);

/// Uniformly random rows; synthetic fixture for tests and benchmarks.
LookupTable random_table(const TableConfig& config, std::size_t rows, std::uint64_t seed);

// Binary table file: "MBI1" magic, u16 version, u32 length-prefixed key=value
// config text, then rows packed back to back, each padded to a byte boundary.
inline constexpr std::uint16_t kTableFormatVersion = 1;

std::vector<std::uint8_t> serialize(const LookupTable& table);
LookupTable deserialize(std::span<const std::uint8_t> bytes);
void save(const LookupTable& table, const std::filesystem::path& path);
LookupTable load_table(const std::filesystem::path& path);

void pack_row(const TableConfig& config, const TableRow& row, std::vector<std::uint8_t>& out);
TableRow unpack_row(const TableConfig& config, std::span<const std::uint8_t> bytes);

std::string config_to_text(const TableConfig& config);
TableConfig config_from_text(const std::string& text);

}  // namespace mbi
