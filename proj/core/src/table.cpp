#include "mbi/table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mbi/error.hpp"
#include "mbi/random.hpp"

namespace mbi {

namespace {

bool fits(long long value, int bits) { return value >= 0 && value < (1LL << bits); }

void check_levels(std::span<const std::uint8_t> levels, int n, int bits, const char* what) {
  if (static_cast<int>(levels.size()) != n)
    throw Error(Errc::invalid_argument, std::string(what) + " has " + std::to_string(levels.size()) +
                                            " elements, expected " + std::to_string(n));
  for (auto l : levels)
    if (!fits(l, bits)) throw Error(Errc::invalid_argument, std::string(what) + " level exceeds bit width");
}

void check_location(const TableConfig& c, Location loc, const char* what) {
  if (loc.x < 0 || loc.x >= c.image_width || loc.y < 0 || loc.y >= c.image_height)
    throw Error(Errc::invalid_argument, std::string(what) + " outside the image");
}

}  // namespace

void TableConfig::validate() const {
  require(n_hidden >= 1 && n_patch >= 1, "hidden and patch vectors must be non-empty");
  require(n_loc == 2, "location vector must have 2 elements");
  require(n_pred == 1, "prediction must be a scalar");
  for (int b : {bits_hidden, bits_loc, bits_patch, bits_pred})
    require(b >= 1 && b <= 8, "bit widths must be in [1,8]");
  require(patch_size >= 1 && glimpse_scale >= 1 && n_patches >= 1 && channels >= 1,
          "glimpse geometry must be positive");
  require(n_glimpses >= 1, "need at least one glimpse");
  require(n_patch == patch_size * patch_size * n_patches * channels,
          "patch length " + std::to_string(n_patch) + " != patch_size^2 * n_patches * channels");
  require(image_height >= 1 && image_width >= 1, "image dims must be positive");
  require(fits(image_height - 1, bits_loc) && fits(image_width - 1, bits_loc),
          "image coordinates do not fit the location bit width");
  require(n_classes >= 1 && fits(n_classes - 1, bits_pred), "classes do not fit the prediction bit width");
}

std::size_t row_size_bits(const TableConfig& c) {
  auto s = [](int bits, int n) { return static_cast<std::size_t>(bits) * static_cast<std::size_t>(n); };
  return 2 * s(c.bits_hidden, c.n_hidden) + 2 * s(c.bits_loc, c.n_loc) + s(c.bits_patch, c.n_patch) +
         s(c.bits_pred, c.n_pred);
}

std::size_t row_size_bytes(const TableConfig& config) { return bytes_for_bits(row_size_bits(config)); }

LookupTable::LookupTable(TableConfig config) : config_(config) { config_.validate(); }

void LookupTable::reserve(std::size_t rows) {
  hidden_prev_.reserve(rows * config_.n_hidden);
  loc_.reserve(rows);
  patch_.reserve(rows * config_.n_patch);
  hidden_next_.reserve(rows * config_.n_hidden);
  loc_next_.reserve(rows);
  pred_.reserve(rows);
}

void LookupTable::add(const TableRow& row) {
  const auto& c = config_;
  check_levels(row.key.hidden, c.n_hidden, c.bits_hidden, "h_prev");
  check_levels(row.key.patch, c.n_patch, c.bits_patch, "patch");
  check_levels(row.hidden_next, c.n_hidden, c.bits_hidden, "h_next");
  check_location(c, row.key.loc, "loc");
  check_location(c, row.loc_next, "loc_next");
  require(row.pred < c.n_classes, "prediction exceeds class count");

  hidden_prev_.insert(hidden_prev_.end(), row.key.hidden.begin(), row.key.hidden.end());
  loc_.push_back(row.key.loc);
  patch_.insert(patch_.end(), row.key.patch.begin(), row.key.patch.end());
  hidden_next_.insert(hidden_next_.end(), row.hidden_next.begin(), row.hidden_next.end());
  loc_next_.push_back(row.loc_next);
  pred_.push_back(row.pred);
}

KeyView LookupTable::key(std::size_t i) const {
  const std::size_t nh = config_.n_hidden, np = config_.n_patch;
  return {std::span(hidden_prev_).subspan(i * nh, nh), loc_[i], std::span(patch_).subspan(i * np, np)};
}

std::span<const std::uint8_t> LookupTable::hidden_next(std::size_t i) const {
  const std::size_t nh = config_.n_hidden;
  return std::span(hidden_next_).subspan(i * nh, nh);
}

TableRow LookupTable::row(std::size_t i) const {
  const auto k = key(i);
  const auto hn = hidden_next(i);
  return TableRow{KeyVector{{k.hidden.begin(), k.hidden.end()}, k.loc, {k.patch.begin(), k.patch.end()}},
                  {hn.begin(), hn.end()},
                  loc_next_[i],
                  pred_[i]};
}

std::size_t table_size_bits(const LookupTable& table) { return table.size() * row_size_bits(table.config()); }

LookupTable subsample(const LookupTable& table, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0, 1]");
  require(!table.empty(), "cannot subsample an empty table");
  const auto n = table.size();
  const auto want = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));

  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(want);
  Rng rng(mix_seed(seed));
  std::sample(ids.begin(), ids.end(), std::back_inserter(picked), want, rng);

  LookupTable out(table.config());
  out.reserve(want);
  for (auto i : picked) out.add(table.row(i));
  return out;
}

LookupTable deduplicate(const LookupTable& table) {
  std::set<std::vector<std::uint8_t>> seen;
  LookupTable out(table.config());
  std::vector<std::uint8_t> packed;
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto row = table.row(i);
    packed.clear();
    pack_row(table.config(), row, packed);
    if (seen.insert(packed).second) out.add(row);
  }
  return out;
}

KeyVector random_key(const TableConfig& c, Rng& rng) {
  auto levels = [&](int n, int bits) {
    std::uniform_int_distribution<int> d(0, (1 << bits) - 1);
    std::vector<std::uint8_t> v(static_cast<std::size_t>(n));
    for (auto& l : v) l = static_cast<std::uint8_t>(d(rng));
    return v;
  };
  KeyVector k;
  k.hidden = levels(c.n_hidden, c.bits_hidden);
  std::uniform_int_distribution<int> xs(0, c.image_width - 1), ys(0, c.image_height - 1);
  k.loc.x = xs(rng);
  k.loc.y = ys(rng);
  k.patch = levels(c.n_patch, c.bits_patch);
  return k;
}

LookupTable random_table(const TableConfig& config, std::size_t rows, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed));
  std::uniform_int_distribution<int> cls(0, config.n_classes - 1);
  LookupTable t(config);
  t.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    TableRow row;
    row.key = random_key(config, rng);
    const auto next = random_key(config, rng);
    row.hidden_next = next.hidden;
    row.loc_next = next.loc;
    row.pred = static_cast<std::uint8_t>(cls(rng));
    t.add(row);
  }
  return t;
}

}  // namespace mbi
