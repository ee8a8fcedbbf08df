#include "mbi/cim_sim.hpp"

#include <cmath>

#include "mbi/csv.hpp"
#include "mbi/error.hpp"

namespace mbi {

void CimConfig::validate() const {
  require(array_rows >= 1 && array_cols >= 1, "array dimensions must be positive");
  require(v_max > 0.0, "v_max must be positive");
  require(adc_bits >= 1 && adc_bits <= 24, "adc_bits must lie in [1, 24]");
  require(sigma_cell >= 0.0, "sigma_cell must be non-negative");
  require(e_compare >= 0.0, "e_compare must be non-negative");
  const double parts[] = {fractions.adc, fractions.peripheral, fractions.precharge, fractions.logic};
  double sum = 0.0;
  for (double p : parts) {
    require(p >= 0.0, "energy fractions must be non-negative");
    sum += p;
  }
  require(std::abs(sum - 1.0) < 1e-6, "energy fractions must sum to 1");
}

std::vector<double> precharge_levels(int p, double v_max) {
  require(p >= 1 && p <= 16, "bits per element must lie in [1, 16]");
  std::vector<double> v(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) v[j] = v_max / std::ldexp(1.0, p - j - 1);
  return v;
}

double sense_voltage(std::uint64_t d, int n, int p, double v_max) {
  // Every differing bit drains exactly one of BL/BLB, so the sum over both
  // lines loses v_max * 2^j / 2^(p-1) per differing bit of significance j.
  const auto v = precharge_levels(p, v_max);
  double full = 0.0;
  for (double x : v) full += x;
  const double columns = static_cast<double>(n) * p;
  const double mean_precharge = full * n / columns;
  return mean_precharge - v_max * static_cast<double>(d) / (std::ldexp(1.0, p) * columns);
}

int adc_code(double v, double v_max, int bits) {
  const int top = (1 << bits) - 1;
  if (!(v > 0.0)) return 0;
  const double code = std::floor(v / v_max * std::ldexp(1.0, bits));
  return code >= top ? top : static_cast<int>(code);
}

double adc_lsb_distance(int n, int p, const CimConfig& cfg) {
  return static_cast<double>(n) * p * std::ldexp(1.0, p) / std::ldexp(1.0, cfg.adc_bits);
}

std::uint64_t invert_code(int code, int n, int p, const CimConfig& cfg) {
  const std::uint64_t full = static_cast<std::uint64_t>(n) * ((std::uint64_t{1} << p) - 1);
  auto digitize = [&](std::uint64_t d) { return adc_code(sense_voltage(d, n, p, cfg.v_max), cfg.v_max, cfg.adc_bits); };
  if (digitize(full) > code) return full;
  std::uint64_t lo = 0, hi = full;  // codes are non-increasing in distance
  while (lo < hi) {
    const auto mid = lo + (hi - lo) / 2;
    if (digitize(mid) <= code)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

CimResult simulate_compare(std::span<const std::uint8_t> key, std::span<const std::uint8_t> query, int p,
                           const CimConfig& cfg, Rng& rng) {
  require(key.size() == query.size(), "key and query lengths differ");
  require(!key.empty(), "empty comparison");
  const auto n = static_cast<int>(key.size());
  require(static_cast<long long>(n) * p <= cfg.array_cols,
          "vector of " + std::to_string(n) + " x " + std::to_string(p) + " bits exceeds " +
              std::to_string(cfg.array_cols) + " array columns");
  const auto v = precharge_levels(p, cfg.v_max);
  std::normal_distribution<double> noise(0.0, cfg.sigma_cell > 0.0 ? cfg.sigma_cell : 1.0);

  double bl = 0.0, blb = 0.0;
  for (int i = 0; i < n; ++i) {
    require((key[i] >> p) == 0 && (query[i] >> p) == 0, "level does not fit the bit width");
    for (int j = 0; j < p; ++j) {
      const bool k = (key[i] >> j) & 1u;
      const bool q = (query[i] >> j) & 1u;
      double line = (k && !q) ? 0.0 : v[j];
      double line_b = (!k && q) ? 0.0 : v[j];
      if (cfg.sigma_cell > 0.0) {
        line += noise(rng);
        line_b += noise(rng);
      }
      bl += line;
      blb += line_b;
    }
  }
  const double columns = static_cast<double>(n) * p;
  CimResult r;
  r.v_slp = bl / columns;
  r.v_sln = blb / columns;
  r.adc_code = adc_code((r.v_slp + r.v_sln) / 2.0, cfg.v_max, cfg.adc_bits);
  r.distance_estimate = invert_code(r.adc_code, n, p, cfg);
  r.energy = cfg.e_compare;
  return r;
}

namespace {

int elements_per_slice(int p, const CimConfig& cfg) {
  const int e = cfg.array_cols / p;
  require(e >= 1, "array narrower than one element");
  return e;
}

int slices_for(std::size_t n, int p, const CimConfig& cfg) {
  const auto per = static_cast<std::size_t>(elements_per_slice(p, cfg));
  return static_cast<int>((n + per - 1) / per);
}

// Sums per-slice estimates over one component; returns the slice count.
int compare_component(std::span<const std::uint8_t> key, std::span<const std::uint8_t> query, int p,
                      const CimConfig& cfg, Rng& rng, double& distance) {
  const auto per = static_cast<std::size_t>(elements_per_slice(p, cfg));
  int slices = 0;
  for (std::size_t at = 0; at < key.size(); at += per) {
    const auto len = std::min(per, key.size() - at);
    distance += static_cast<double>(simulate_compare(key.subspan(at, len), query.subspan(at, len), p, cfg, rng).distance_estimate);
    ++slices;
  }
  return slices;
}

}  // namespace

int slice_count(const TableConfig& config, const CimConfig& cfg) {
  return slices_for(static_cast<std::size_t>(config.n_hidden), config.bits_hidden, cfg) +
         slices_for(2, config.bits_loc, cfg) +
         slices_for(static_cast<std::size_t>(config.n_patch), config.bits_patch, cfg);
}

CimDistance split_and_combine(const KeyView& key, const KeyView& query, const DistanceWeights& w, const KeyBits& bits,
                              const CimConfig& cfg, Rng& rng) {
  require(key.hidden.size() == query.hidden.size() && key.patch.size() == query.patch.size(),
          "key and query shapes differ");
  const std::uint8_t kl[2] = {static_cast<std::uint8_t>(key.loc.x), static_cast<std::uint8_t>(key.loc.y)};
  const std::uint8_t ql[2] = {static_cast<std::uint8_t>(query.loc.x), static_cast<std::uint8_t>(query.loc.y)};
  CimDistance out;
  out.slices += compare_component(key.hidden, query.hidden, bits.hidden, cfg, rng, out.components.hidden);
  out.slices += compare_component(kl, ql, bits.loc, cfg, rng, out.components.location);
  out.slices += compare_component(key.patch, query.patch, bits.patch, cfg, rng, out.components.patch);
  out.distance = combine(out.components, w);
  out.energy = out.slices * cfg.e_compare;
  return out;
}

double energy_per_inference(double n_glimpses, double avg_levels, double keys_per_leaf, double splits,
                            double e_compare) {
  require(n_glimpses > 0 && avg_levels > 0 && keys_per_leaf > 0 && splits > 0 && e_compare > 0,
          "energy factors must be positive");
  return n_glimpses * avg_levels * keys_per_leaf * splits * e_compare;
}

std::vector<EnergyShare> energy_breakdown(const EnergyFractions& f, double total) {
  return {
      {"adc", f.adc, f.adc * total},
      {"peripheral", f.peripheral, f.peripheral * total},
      {"precharge", f.precharge, f.precharge * total},
      {"logic", f.logic, f.logic * total},
      {"total", f.adc + f.peripheral + f.precharge + f.logic, total},
  };
}

void write_energy_csv(std::ostream& out, const std::vector<EnergyShare>& shares, bool timestamp) {
  CsvWriter csv(out, timestamp);
  csv.header({"component", "fraction", "joules"});
  for (const auto& s : shares) {
    csv << s.component << s.fraction << s.joules;
    csv.end_row();
  }
}

}  // namespace mbi
