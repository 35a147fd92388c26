#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "declmi/numerics.hpp"

namespace declmi::hyperopt {

using numerics::Matrix;
using numerics::Vector;

enum class DimType { IntegerRange, LogUniformReal, Categorical };

struct Dimension {
  std::string name;
  DimType type = DimType::IntegerRange;
  double lo = 0.0, hi = 0.0;          // bounds (inclusive for integers)
  std::vector<std::string> choices;   // categorical only
};

// Search space with a normalized view: every configuration maps to a point
// in the unit cube. Integer and categorical dimensions round the relaxed
// coordinate to the nearest valid value.
struct SearchSpace {
  std::vector<Dimension> dims;

  void validate() const;
  std::size_t size() const { return dims.size(); }
  nlohmann::json config_from_unit(const std::vector<double>& x) const;
  std::vector<double> unit_from_config(const nlohmann::json& config) const;
};

struct TrialRecord {
  int index = -1;
  std::vector<double> unit;
  nlohmann::json config;
  double value = 0.0;  // validation loss (nats); minimized
  bool ok = false;
  std::string error;

  nlohmann::json to_json() const;
  static TrialRecord from_json(const nlohmann::json& j);
};

struct KernelParams {
  Vector log_lengthscales;  // per dimension
  double log_signal = 0.0;
  double log_noise = std::log(0.1);
};

// RBF-ARD Gaussian-process regression posterior over the unit cube.
// Targets are standardized internally; predictions are in raw units.
class GPPosterior {
 public:
  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;  // latent (noise-free), clamped at 0
  };

  static GPPosterior with_kernel(const Matrix& X, const Vector& y, const KernelParams& kp);
  Prediction predict(const Vector& x) const;
  double log_marginal_likelihood() const { return lml_; }
  const KernelParams& kernel() const { return kp_; }

 private:
  friend GPPosterior gp_fit(const std::vector<TrialRecord>&, std::uint64_t);
  Matrix X_;
  Matrix chol_lower_;
  Vector alpha_;
  KernelParams kp_;
  double y_mean_ = 0.0, y_std_ = 1.0;
  double lml_ = 0.0;
  double jitter_ = 0.0;
};

// Kernel hyperparameters set by maximizing the marginal likelihood with
// multi-start gradient ascent; needs at least two completed trials.
GPPosterior gp_fit(const std::vector<TrialRecord>& trials, std::uint64_t seed);

// Closed-form expected improvement for minimization.
double expected_improvement(const GPPosterior& gp, const Vector& x, double best);

struct BayesOptions {
  std::function<void(const TrialRecord&)> on_trial;
  std::vector<TrialRecord> resume;  // completed prefix from a trial log
};

struct BayesResult {
  nlohmann::json best_config;
  double best_value = 0.0;
  int best_index = -1;
  std::vector<TrialRecord> trials;
};

// Sequential optimization: min(5, budget) scrambled low-discrepancy
// starts, then EI maximized over 1024 seeded candidates per trial.
// Deterministic given (space, seed, deterministic objective); per-trial
// randomness depends only on (seed, trial index), so resumed runs replay
// identically.
BayesResult bayes_optimize(const std::function<double(const nlohmann::json&)>& objective,
                           const SearchSpace& space, int budget, std::uint64_t seed,
                           const BayesOptions& options = {});

}  // namespace declmi::hyperopt
