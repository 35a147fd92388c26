#include "declmi/hyperopt.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "declmi/rng.hpp"

namespace declmi::hyperopt {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

int first_primes[8] = {2, 3, 5, 7, 11, 13, 17, 19};

double halton(std::size_t index, int base) {
  double f = 1.0, r = 0.0;
  std::size_t i = index;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % static_cast<std::size_t>(base));
    i /= static_cast<std::size_t>(base);
  }
  return r;
}

// Cranley-Patterson rotation of the Halton sequence: per-dimension random
// shifts make the low-discrepancy points seed-dependent.
std::vector<double> scrambled_halton(std::size_t index, std::size_t dims, std::uint64_t seed) {
  std::vector<double> x(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    Rng shift_rng(derive_seed(seed, 0x68616c74 /* "halt" */, d));
    const double shift = shift_rng.uniform01();
    const double v = halton(index + 1, first_primes[d % 8]) + shift;
    x[d] = v - std::floor(v);
  }
  return x;
}

struct KernelBounds {
  double log_len_lo = std::log(0.03), log_len_hi = std::log(30.0);
  double log_sig_lo = std::log(0.05), log_sig_hi = std::log(10.0);
  double log_noise_lo = std::log(1e-4), log_noise_hi = std::log(2.0);
};

Matrix kernel_matrix(const Matrix& X, const KernelParams& kp, double extra_diag) {
  const Eigen::Index n = X.rows(), D = X.cols();
  const double sf2 = std::exp(2.0 * kp.log_signal);
  const double sn2 = std::exp(2.0 * kp.log_noise);
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double d2 = 0.0;
      for (Eigen::Index d = 0; d < D; ++d) {
        const double len = std::exp(kp.log_lengthscales[d]);
        const double delta = (X(i, d) - X(j, d)) / len;
        d2 += delta * delta;
      }
      const double v = sf2 * std::exp(-0.5 * d2);
      K(i, j) = v;
      K(j, i) = v;
    }
    K(i, i) += sn2 + extra_diag;
  }
  return K;
}

struct FitResult {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
  double lml = 0.0;
  Vector alpha;
};

// Cholesky with escalating jitter until the factorization succeeds.
FitResult factorize(const Matrix& X, const Vector& y, const KernelParams& kp) {
  FitResult out;
  double jitter = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Matrix K = kernel_matrix(X, kp, jitter);
    out.llt.compute(K);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = jitter;
      out.alpha = out.llt.solve(y);
      const Matrix& L = out.llt.matrixLLT();
      double log_det_half = 0.0;
      for (Eigen::Index i = 0; i < L.rows(); ++i) log_det_half += std::log(L(i, i));
      out.lml = -0.5 * y.dot(out.alpha) - log_det_half -
                0.5 * static_cast<double>(y.size()) * std::log(2.0 * kPi);
      return out;
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
  }
  throw std::runtime_error("gp_fit: kernel matrix could not be factorized");
}

double lml_and_gradient(const Matrix& X, const Vector& y, const KernelParams& kp,
                        Vector& grad) {
  const Eigen::Index n = X.rows(), D = X.cols();
  const FitResult fit = factorize(X, y, kp);
  const Matrix Kinv = fit.llt.solve(Matrix::Identity(n, n));
  const Matrix A = fit.alpha * fit.alpha.transpose() - Kinv;

  const double sf2 = std::exp(2.0 * kp.log_signal);
  const double sn2 = std::exp(2.0 * kp.log_noise);
  Matrix signal(n, n);  // noise-free kernel block
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (Eigen::Index d = 0; d < D; ++d) {
        const double len = std::exp(kp.log_lengthscales[d]);
        const double delta = (X(i, d) - X(j, d)) / len;
        d2 += delta * delta;
      }
      signal(i, j) = sf2 * std::exp(-0.5 * d2);
    }

  grad.resize(D + 2);
  for (Eigen::Index d = 0; d < D; ++d) {
    const double len = std::exp(kp.log_lengthscales[d]);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double delta = (X(i, d) - X(j, d)) / len;
        acc += A(i, j) * signal(i, j) * delta * delta;
      }
    grad[d] = 0.5 * acc;
  }
  grad[D] = (A.array() * signal.array()).sum();              // d/dlog_signal: 2*signal, halved
  grad[D + 1] = sn2 * A.trace();                             // d/dlog_noise: 2*sn2*I, halved
  return fit.lml;
}

KernelParams unpack(const Vector& theta, Eigen::Index D) {
  KernelParams kp;
  kp.log_lengthscales = theta.head(D);
  kp.log_signal = theta[D];
  kp.log_noise = theta[D + 1];
  return kp;
}

Vector clamp_theta(Vector theta, Eigen::Index D, const KernelBounds& b) {
  for (Eigen::Index d = 0; d < D; ++d)
    theta[d] = std::clamp(theta[d], b.log_len_lo, b.log_len_hi);
  theta[D] = std::clamp(theta[D], b.log_sig_lo, b.log_sig_hi);
  theta[D + 1] = std::clamp(theta[D + 1], b.log_noise_lo, b.log_noise_hi);
  return theta;
}

}  // namespace

void SearchSpace::validate() const {
  if (dims.empty()) throw std::invalid_argument("SearchSpace: no dimensions");
  if (dims.size() > 8) throw std::invalid_argument("SearchSpace: too many dimensions");
  std::vector<std::string> names;
  for (const auto& d : dims) {
    if (d.name.empty()) throw std::invalid_argument("SearchSpace: unnamed dimension");
    if (std::find(names.begin(), names.end(), d.name) != names.end())
      throw std::invalid_argument("SearchSpace: duplicate dimension name " + d.name);
    names.push_back(d.name);
    switch (d.type) {
      case DimType::IntegerRange:
        if (d.hi < d.lo) throw std::invalid_argument("SearchSpace: empty integer range " + d.name);
        break;
      case DimType::LogUniformReal:
        if (!(d.lo > 0.0) || d.hi < d.lo)
          throw std::invalid_argument("SearchSpace: bad log-uniform bounds for " + d.name);
        break;
      case DimType::Categorical:
        if (d.choices.empty())
          throw std::invalid_argument("SearchSpace: empty categorical choices for " + d.name);
        break;
    }
  }
}

nlohmann::json SearchSpace::config_from_unit(const std::vector<double>& x) const {
  if (x.size() != dims.size())
    throw std::invalid_argument("SearchSpace: unit point dimension mismatch");
  nlohmann::json config;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const Dimension& dim = dims[d];
    const double u = std::clamp(x[d], 0.0, 1.0);
    switch (dim.type) {
      case DimType::IntegerRange: {
        const auto v = static_cast<std::int64_t>(
            std::llround(dim.lo + u * (dim.hi - dim.lo)));
        config[dim.name] = v;
        break;
      }
      case DimType::LogUniformReal: {
        const double lv = std::log(dim.lo) + u * (std::log(dim.hi) - std::log(dim.lo));
        config[dim.name] = std::exp(lv);
        break;
      }
      case DimType::Categorical: {
        const auto m = dims[d].choices.size();
        const auto idx = std::min(static_cast<std::size_t>(u * static_cast<double>(m)), m - 1);
        config[dim.name] = dim.choices[idx];
        break;
      }
    }
  }
  return config;
}

std::vector<double> SearchSpace::unit_from_config(const nlohmann::json& config) const {
  std::vector<double> x(dims.size(), 0.5);
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const Dimension& dim = dims[d];
    switch (dim.type) {
      case DimType::IntegerRange: {
        const double v = config.at(dim.name).get<double>();
        x[d] = dim.hi > dim.lo ? (v - dim.lo) / (dim.hi - dim.lo) : 0.5;
        break;
      }
      case DimType::LogUniformReal: {
        const double v = config.at(dim.name).get<double>();
        x[d] = (std::log(v) - std::log(dim.lo)) / (std::log(dim.hi) - std::log(dim.lo));
        break;
      }
      case DimType::Categorical: {
        const auto v = config.at(dim.name).get<std::string>();
        const auto it = std::find(dim.choices.begin(), dim.choices.end(), v);
        if (it == dim.choices.end())
          throw std::invalid_argument("SearchSpace: unknown choice " + v);
        const auto idx = static_cast<std::size_t>(it - dim.choices.begin());
        x[d] = (static_cast<double>(idx) + 0.5) / static_cast<double>(dim.choices.size());
        break;
      }
    }
    x[d] = std::clamp(x[d], 0.0, 1.0);
  }
  return x;
}

nlohmann::json TrialRecord::to_json() const {
  nlohmann::json j;
  j["trial"] = index;
  j["unit"] = unit;
  j["config"] = config;
  j["status"] = ok ? "ok" : "failed";
  if (ok) j["value"] = value;
  if (!error.empty()) j["error"] = error;
  return j;
}

TrialRecord TrialRecord::from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.index = j.at("trial").get<int>();
  r.unit = j.at("unit").get<std::vector<double>>();
  r.config = j.at("config");
  r.ok = j.at("status").get<std::string>() == "ok";
  if (r.ok) r.value = j.at("value").get<double>();
  r.error = j.value("error", "");
  return r;
}

GPPosterior GPPosterior::with_kernel(const Matrix& X, const Vector& y, const KernelParams& kp) {
  if (X.rows() != y.size() || X.rows() < 1)
    throw std::invalid_argument("GPPosterior: shape mismatch");
  GPPosterior gp;
  gp.X_ = X;
  gp.kp_ = kp;
  gp.y_mean_ = y.mean();
  double var = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) var += (y[i] - gp.y_mean_) * (y[i] - gp.y_mean_);
  gp.y_std_ = y.size() > 1 ? std::sqrt(var / static_cast<double>(y.size() - 1)) : 1.0;
  if (gp.y_std_ <= 0.0) gp.y_std_ = 1.0;
  Vector ny = (y.array() - gp.y_mean_) / gp.y_std_;
  const FitResult fit = factorize(X, ny, kp);
  gp.alpha_ = fit.alpha;
  gp.chol_lower_ = fit.llt.matrixL();
  gp.jitter_ = fit.jitter;
  gp.lml_ = fit.lml;
  return gp;
}

GPPosterior::Prediction GPPosterior::predict(const Vector& x) const {
  const Eigen::Index n = X_.rows(), D = X_.cols();
  if (x.size() != D) throw std::invalid_argument("GPPosterior::predict: dimension mismatch");
  const double sf2 = std::exp(2.0 * kp_.log_signal);
  Vector k_star(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double len = std::exp(kp_.log_lengthscales[d]);
      const double delta = (X_(i, d) - x[d]) / len;
      d2 += delta * delta;
    }
    k_star[i] = sf2 * std::exp(-0.5 * d2);
  }
  Prediction out;
  out.mean = y_mean_ + y_std_ * k_star.dot(alpha_);
  const Vector v = chol_lower_.triangularView<Eigen::Lower>().solve(k_star);
  out.variance = std::max(0.0, (sf2 - v.squaredNorm()) * y_std_ * y_std_);
  return out;
}

GPPosterior gp_fit(const std::vector<TrialRecord>& trials, std::uint64_t seed) {
  std::vector<const TrialRecord*> ok;
  for (const auto& t : trials)
    if (t.ok) ok.push_back(&t);
  if (ok.size() < 2) throw std::invalid_argument("gp_fit: need at least 2 completed trials");
  const Eigen::Index n = static_cast<Eigen::Index>(ok.size());
  const Eigen::Index D = static_cast<Eigen::Index>(ok.front()->unit.size());
  Matrix X(n, D);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(ok[static_cast<std::size_t>(i)]->unit.size()) != D)
      throw std::invalid_argument("gp_fit: inconsistent unit-point dimensions");
    for (Eigen::Index d = 0; d < D; ++d)
      X(i, d) = ok[static_cast<std::size_t>(i)]->unit[static_cast<std::size_t>(d)];
    y[i] = ok[static_cast<std::size_t>(i)]->value;
  }

  const double ym = y.mean();
  double var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) var += (y[i] - ym) * (y[i] - ym);
  double ystd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 1.0;
  if (ystd <= 0.0) ystd = 1.0;
  Vector ny = (y.array() - ym) / ystd;

  // Multi-start Adam ascent on the log marginal likelihood.
  const KernelBounds bounds;
  constexpr int kStarts = 4, kIters = 120;
  Rng rng(derive_seed(seed, 0x67706669 /* "gpfi" */));
  Vector best_theta;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < kStarts; ++s) {
    Vector theta(D + 2);
    if (s == 0) {
      theta.head(D).setConstant(std::log(0.3));
      theta[D] = 0.0;
      theta[D + 1] = std::log(0.1);
    } else {
      for (Eigen::Index d = 0; d < D; ++d) theta[d] = rng.uniform(bounds.log_len_lo, bounds.log_len_hi);
      theta[D] = rng.uniform(bounds.log_sig_lo, bounds.log_sig_hi);
      theta[D + 1] = rng.uniform(bounds.log_noise_lo, bounds.log_noise_hi);
    }
    theta = clamp_theta(theta, D, bounds);

    Vector m = Vector::Zero(D + 2), v = Vector::Zero(D + 2);
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int it = 1; it <= kIters; ++it) {
      Vector grad;
      try {
        lml_and_gradient(X, ny, unpack(theta, D), grad);
      } catch (const std::runtime_error&) {
        break;  // hopeless corner of the hyperparameter space
      }
      m = b1 * m + (1.0 - b1) * grad;
      v = b2 * v.array().matrix() + (1.0 - b2) * grad.array().square().matrix();
      const double bc1 = 1.0 - std::pow(b1, it), bc2 = 1.0 - std::pow(b2, it);
      // Ascent on the likelihood.
      theta.array() += lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
      theta = clamp_theta(theta, D, bounds);
    }
    try {
      Vector grad;
      const double lml = lml_and_gradient(X, ny, unpack(theta, D), grad);
      if (lml > best_lml) {
        best_lml = lml;
        best_theta = theta;
      }
    } catch (const std::runtime_error&) {
    }
  }
  if (best_theta.size() == 0) throw std::runtime_error("gp_fit: every start failed");
  return GPPosterior::with_kernel(X, y, unpack(best_theta, D));
}

double expected_improvement(const GPPosterior& gp, const Vector& x, double best) {
  const auto pred = gp.predict(x);
  const double sigma = std::sqrt(pred.variance);
  const double gap = best - pred.mean;
  if (sigma <= 0.0) return std::max(gap, 0.0);
  const double z = gap / sigma;
  return std::max(0.0, gap * normal_cdf(z) + sigma * normal_pdf(z));
}

BayesResult bayes_optimize(const std::function<double(const nlohmann::json&)>& objective,
                           const SearchSpace& space, int budget, std::uint64_t seed,
                           const BayesOptions& options) {
  space.validate();
  if (budget < 1) throw std::invalid_argument("bayes_optimize: budget must be >= 1");
  const std::size_t D = space.size();

  std::vector<TrialRecord> trials = options.resume;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].index != static_cast<int>(i) || trials[i].unit.size() != D)
      throw std::invalid_argument("bayes_optimize: resume log does not match this search");

  const int quasi = std::min(5, budget);
  constexpr int kCandidates = 1024;

  for (int i = static_cast<int>(trials.size()); i < budget; ++i) {
    std::vector<double> x;
    std::size_t completed = 0;
    for (const auto& t : trials) completed += t.ok ? 1 : 0;
    if (i < quasi || completed < 2) {
      x = scrambled_halton(static_cast<std::size_t>(i), D, seed);
    } else {
      const GPPosterior gp = gp_fit(trials, derive_seed(seed, 0x6770 /* "gp" */,
                                                        static_cast<std::uint64_t>(i)));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& t : trials)
        if (t.ok) best = std::min(best, t.value);
      Rng cand_rng(derive_seed(seed, 0x63616e64 /* "cand" */, static_cast<std::uint64_t>(i)));
      double best_ei = -1.0;
      for (int c = 0; c < kCandidates; ++c) {
        Vector point(D);
        for (std::size_t d = 0; d < D; ++d) point[static_cast<Eigen::Index>(d)] = cand_rng.uniform01();
        const double ei = expected_improvement(gp, point, best);
        if (ei > best_ei) {
          best_ei = ei;
          x.assign(point.data(), point.data() + point.size());
        }
      }
    }

    TrialRecord rec;
    rec.index = i;
    rec.unit = x;
    rec.config = space.config_from_unit(x);
    try {
      const double v = objective(rec.config);
      if (!std::isfinite(v)) throw std::runtime_error("objective returned a non-finite value");
      rec.value = v;
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    trials.push_back(rec);
    if (options.on_trial) options.on_trial(rec);
  }

  BayesResult out;
  out.trials = trials;
  out.best_value = std::numeric_limits<double>::infinity();
  for (const auto& t : trials) {
    if (t.ok && t.value < out.best_value) {
      out.best_value = t.value;
      out.best_index = t.index;
      out.best_config = t.config;
    }
  }
  if (out.best_index < 0) throw std::runtime_error("bayes_optimize: every trial failed");
  return out;
}

}  // namespace declmi::hyperopt
