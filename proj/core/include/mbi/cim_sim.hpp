#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mbi/metric.hpp"
#include "mbi/random.hpp"
#include "mbi/table.hpp"

namespace mbi {

/// Shares of one comparison's energy, reported only.
struct EnergyFractions {
  double adc = 0.25;
  double peripheral = 0.25;
  double precharge = 0.25;
  double logic = 0.25;
};

struct CimConfig {
  int array_rows = 32;
  int array_cols = 32;
  double v_max = 1.0;      // normalized precharge ceiling, volts
  int adc_bits = 5;
  double sigma_cell = 0.0;  // per-column voltage noise, volts
  double e_compare = 4.7e-12;  // joules per key/query comparison on one array
  EnergyFractions fractions;

  void validate() const;
};

struct CimResult {
  double v_slp = 0.0;
  double v_sln = 0.0;
  int adc_code = 0;
  std::uint64_t distance_estimate = 0;
  double energy = 0.0;
};

/// Precharge voltage per bit significance j in [0, p): v_max / 2^(p-j-1).
std::vector<double> precharge_levels(int p, double v_max);

/// Noiseless (V_SLP + V_SLN) / 2 for n elements of p bits at bit-significance
/// distance d. Affine and strictly decreasing in d.
double sense_voltage(std::uint64_t d, int n, int p, double v_max);

/// Uniform ADC over [0, v_max]: floor(v / v_max * 2^bits), clipped to the top code.
int adc_code(double v, double v_max, int bits);

/// Distance units spanned by one ADC code for n elements of p bits.
double adc_lsb_distance(int n, int p, const CimConfig& cfg);

/// Smallest distance whose noiseless sense voltage digitizes at or below
/// `code`; the full-scale distance when none does.
std::uint64_t invert_code(int code, int n, int p, const CimConfig& cfg);

/// One array comparison. Columns are element-major with bit j of element i at
/// column i*p + j. Requires n*p <= array_cols.
CimResult simulate_compare(std::span<const std::uint8_t> key, std::span<const std::uint8_t> query, int p,
                           const CimConfig& cfg, Rng& rng);

struct CimDistance {
  ComponentDistances components;
  double distance = 0.0;
  double energy = 0.0;
  int slices = 0;
};

/// Number of arrays needed for a key when each component is sliced on its own.
int slice_count(const TableConfig& config, const CimConfig& cfg);

/// Slices each key component to array width, compares slice by slice, sums
/// estimates per component and applies the distance weights.
CimDistance split_and_combine(const KeyView& key, const KeyView& query, const DistanceWeights& w, const KeyBits& bits,
                              const CimConfig& cfg, Rng& rng);

/// Product of the five factors.
double energy_per_inference(double n_glimpses, double avg_levels, double keys_per_leaf, double splits,
                            double e_compare);

struct EnergyShare {
  std::string component;
  double fraction = 0.0;
  double joules = 0.0;
};

/// Per-component breakdown of `total`, followed by a "total" line.
std::vector<EnergyShare> energy_breakdown(const EnergyFractions& f, double total);

void write_energy_csv(std::ostream& out, const std::vector<EnergyShare>& shares, bool timestamp);

}  // namespace mbi
