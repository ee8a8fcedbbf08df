#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "mbi/metric.hpp"

namespace mbi {

/// Search box is fixed to [1, 100] on each weight.
struct TunerConfig {
  int init_points = 10;
  int iterations = 50;
  int candidate_pool = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr double kWeightLow = 1.0;
inline constexpr double kWeightHigh = 100.0;

struct Observation {
  DistanceWeights weights;
  double score = 0.0;
};

struct TuneResult {
  DistanceWeights best;
  double best_score = 0.0;
  std::vector<Observation> history;  // initial design first, then one per iteration
};

using Objective = std::function<double(const DistanceWeights&)>;

/// Closed-form EI for maximization; max(mean - best, 0) when std == 0.
double expected_improvement(double mean, double std, double best_so_far);

/// Gaussian-process surrogate over the unit cube with a squared-exponential
/// kernel; hyperparameters picked from a grid by marginal likelihood.
class GaussianProcess {
 public:
  void fit(const std::vector<std::vector<double>>& x, std::span<const double> y);

  struct Prediction {
    double mean = 0.0;
    double std = 0.0;
  };
  /// In the caller's units of y.
  Prediction predict(std::span<const double> x) const;

  double length_scale() const { return length_; }
  double noise() const { return noise_; }

 private:
  std::vector<std::vector<double>> x_;
  std::vector<double> alpha_;
  std::vector<double> chol_;  // lower factor, row-major n x n
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  double length_ = 0.3;
  double noise_ = 1e-6;
};

/// Latin-hypercube initial design, then EI maximized over uniform candidates.
/// Proposals are rounded to 3 decimals and repeated proposals reuse the
/// cached score. Objective failures are rethrown naming the weights.
TuneResult tune(const Objective& objective, const TunerConfig& config);

/// Same evaluation budget spent on uniform samples; comparison baseline.
TuneResult random_search(const Objective& objective, int evaluations, std::uint64_t seed);

/// Columns: iteration, a, b, c, score, best_so_far (a = patch, b = hidden, c = location).
void write_history_csv(std::ostream& out, const std::vector<Observation>& history, bool timestamp);

}  // namespace mbi
