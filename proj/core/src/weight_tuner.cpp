#include "mbi/weight_tuner.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>

#include "mbi/csv.hpp"
#include "mbi/error.hpp"
#include "mbi/random.hpp"

namespace mbi {

namespace {

constexpr double kLengthGrid[] = {0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.8, 1.2};
constexpr double kNoiseGrid[] = {1e-6, 1e-4, 1e-3, 1e-2, 1e-1};

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

DistanceWeights from_unit(const std::vector<double>& u) {
  auto scale = [](double t) { return round3(kWeightLow + t * (kWeightHigh - kWeightLow)); };
  return {scale(u[0]), scale(u[1]), scale(u[2])};
}

std::vector<double> to_unit(const DistanceWeights& w) {
  auto unit = [](double v) { return (v - kWeightLow) / (kWeightHigh - kWeightLow); };
  return {unit(w.patch), unit(w.hidden), unit(w.location)};
}

Eigen::MatrixXd kernel(const std::vector<std::vector<double>>& x, double length) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < x[i].size(); ++c) d2 += (x[i][c] - x[j][c]) * (x[i][c] - x[j][c]);
      k(i, j) = k(j, i) = std::exp(-0.5 * d2 / (length * length));
    }
  return k;
}

class Evaluator {
 public:
  explicit Evaluator(const Objective& f) : f_(f) {}

  double operator()(const DistanceWeights& w) {
    const std::tuple key{w.patch, w.hidden, w.location};
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    double score = 0.0;
    try {
      score = f_(w);
    } catch (const std::exception& e) {
      const auto* err = dynamic_cast<const Error*>(&e);
      throw_error(err ? err->code() : Errc::invalid_argument, "objective failed at " + describe(w) + ": " + e.what());
    }
    if (!std::isfinite(score)) throw_error(Errc::invalid_argument, "objective returned non-finite score at " + describe(w));
    cache_.emplace(key, score);
    return score;
  }

 private:
  static std::string describe(const DistanceWeights& w) {
    std::ostringstream os;
    os << "(a=" << w.patch << ", b=" << w.hidden << ", c=" << w.location << ")";
    return os.str();
  }

  const Objective& f_;
  std::map<std::tuple<double, double, double>, double> cache_;
};

void record(TuneResult& r, const DistanceWeights& w, double score) {
  r.history.push_back({w, score});
  if (r.history.size() == 1 || score > r.best_score) {
    r.best_score = score;
    r.best = w;
  }
}

}  // namespace

void TunerConfig::validate() const {
  require(init_points >= 2, "init_points must be at least 2");
  require(iterations >= 1, "iterations must be at least 1");
  require(candidate_pool >= 1, "candidate_pool must be positive");
}

double expected_improvement(double mean, double std, double best_so_far) {
  require(std >= 0.0, "standard deviation must be non-negative");
  const double gain = mean - best_so_far;
  if (std == 0.0) return std::max(gain, 0.0);
  const double z = gain / std;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return gain * cdf + std * pdf;
}

void GaussianProcess::fit(const std::vector<std::vector<double>>& x, std::span<const double> y) {
  require(!x.empty() && x.size() == y.size(), "GP needs matching, non-empty inputs and targets");
  const auto n = static_cast<Eigen::Index>(x.size());
  x_ = x;
  y_mean_ = 0.0;
  for (double v : y) y_mean_ += v;
  y_mean_ /= static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += (v - y_mean_) * (v - y_mean_);
  y_scale_ = var > 0.0 ? std::sqrt(var / static_cast<double>(n)) : 1.0;
  Eigen::VectorXd ys(n);
  for (Eigen::Index i = 0; i < n; ++i) ys(i) = (y[i] - y_mean_) / y_scale_;

  double best_lml = -std::numeric_limits<double>::infinity();
  for (double length : kLengthGrid) {
    const Eigen::MatrixXd k = kernel(x, length);
    for (double noise : kNoiseGrid) {
      Eigen::MatrixXd kn = k;
      kn.diagonal().array() += noise;
      Eigen::LLT<Eigen::MatrixXd> llt(kn);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::VectorXd alpha = llt.solve(ys);
      const Eigen::MatrixXd l = llt.matrixL();
      const double lml = -0.5 * ys.dot(alpha) - l.diagonal().array().log().sum() -
                         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
      if (lml > best_lml) {
        best_lml = lml;
        length_ = length;
        noise_ = noise;
        alpha_.assign(alpha.data(), alpha.data() + n);
        chol_.resize(static_cast<std::size_t>(n * n));
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(chol_.data(), n, n) = l;
      }
    }
  }
  if (alpha_.size() != static_cast<std::size_t>(n)) throw_error(Errc::invalid_argument, "GP covariance never factored");
}

GaussianProcess::Prediction GaussianProcess::predict(std::span<const double> q) const {
  require(!alpha_.empty(), "GP used before fit");
  const auto n = static_cast<Eigen::Index>(x_.size());
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < q.size(); ++c) d2 += (x_[i][c] - q[c]) * (x_[i][c] - q[c]);
    ks(i) = std::exp(-0.5 * d2 / (length_ * length_));
  }
  const Eigen::Map<const Eigen::VectorXd> alpha(alpha_.data(), n);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> l(chol_.data(), n, n);
  const Eigen::VectorXd v = l.triangularView<Eigen::Lower>().solve(ks);
  const double var = std::max(1.0 - v.squaredNorm(), 0.0);
  return {y_mean_ + y_scale_ * ks.dot(alpha), y_scale_ * std::sqrt(var)};
}

TuneResult tune(const Objective& objective, const TunerConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Evaluator eval(objective);
  TuneResult result;

  const int m = config.init_points;
  std::vector<std::vector<double>> design(static_cast<std::size_t>(m), std::vector<double>(3));
  for (int d = 0; d < 3; ++d) {
    std::vector<int> strata(static_cast<std::size_t>(m));
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    for (int i = 0; i < m; ++i) design[i][d] = (strata[i] + unit(rng)) / m;
  }
  for (const auto& u : design) {
    const auto w = from_unit(u);
    record(result, w, eval(w));
  }

  GaussianProcess gp;
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int it = 0; it < config.iterations; ++it) {
    xs.clear();
    ys.clear();
    for (const auto& o : result.history) {
      xs.push_back(to_unit(o.weights));
      ys.push_back(o.score);
    }
    gp.fit(xs, ys);
    DistanceWeights proposal;
    double best_ei = -1.0;
    std::vector<double> u(3);
    for (int c = 0; c < config.candidate_pool; ++c) {
      for (auto& v : u) v = unit(rng);
      const auto w = from_unit(u);
      const auto p = gp.predict(to_unit(w));
      const double ei = expected_improvement(p.mean, p.std, result.best_score);
      if (ei > best_ei) {
        best_ei = ei;
        proposal = w;
      }
    }
    record(result, proposal, eval(proposal));
  }
  return result;
}

TuneResult random_search(const Objective& objective, int evaluations, std::uint64_t seed) {
  require(evaluations >= 1, "random search needs at least one evaluation");
  Rng rng(mix_seed(seed) ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Evaluator eval(objective);
  TuneResult result;
  for (int i = 0; i < evaluations; ++i) {
    const auto w = from_unit({unit(rng), unit(rng), unit(rng)});
    record(result, w, eval(w));
  }
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<Observation>& history, bool timestamp) {
  CsvWriter csv(out, timestamp);
  csv.header({"iteration", "a", "b", "c", "score", "best_so_far"});
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& o = history[i];
    best = std::max(best, o.score);
    csv << i << o.weights.patch << o.weights.hidden << o.weights.location << o.score << best;
    csv.end_row();
  }
}

}  // namespace mbi
