#include "declmi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace declmi::stats {

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

double sample_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student_t_two_sided_p: df must be positive");
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

TestResult welch_t_test(const SurprisalSample& a, const SurprisalSample& b) {
  const std::size_t na = a.values.size(), nb = b.values.size();
  if (na < 2 || nb < 2) throw std::invalid_argument("welch_t_test: need at least 2 values per sample");
  for (const auto* s : {&a, &b})
    for (double v : s->values)
      if (!std::isfinite(v)) throw std::invalid_argument("welch_t_test: non-finite value");

  const double ma = sample_mean(a.values), mb = sample_mean(b.values);
  const double va = sample_variance(a.values, ma), vb = sample_variance(b.values, mb);
  if (va <= 0.0 && vb <= 0.0)
    throw std::invalid_argument("welch_t_test: both samples have zero variance");

  const double sa = va / static_cast<double>(na);
  const double sb = vb / static_cast<double>(nb);
  const double se = std::sqrt(sa + sb);

  TestResult out;
  out.t = (ma - mb) / se;
  out.df = (sa + sb) * (sa + sb) /
           (sa * sa / static_cast<double>(na - 1) + sb * sb / static_cast<double>(nb - 1));
  out.p = student_t_two_sided_p(out.t, out.df);
  return out;
}

BHResult benjamini_hochberg(const std::vector<double>& pvals, double alpha) {
  if (pvals.empty()) throw std::invalid_argument("benjamini_hochberg: empty p-value list");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("benjamini_hochberg: alpha outside (0,1)");
  for (double p : pvals)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("benjamini_hochberg: p outside [0,1]");

  const std::size_t m = pvals.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pvals[i] < pvals[j]; });

  // Step-up: largest i with p_(i) <= i * alpha / m rejects hypotheses 1..i.
  std::size_t cutoff = 0;  // number of rejections
  for (std::size_t i = m; i >= 1; --i) {
    if (pvals[order[i - 1]] <= static_cast<double>(i) * alpha / static_cast<double>(m)) {
      cutoff = i;
      break;
    }
  }

  BHResult out;
  out.reject.assign(m, false);
  for (std::size_t i = 0; i < cutoff; ++i) out.reject[order[i]] = true;

  out.adjusted.assign(m, 1.0);
  double running = 1.0;
  for (std::size_t i = m; i >= 1; --i) {
    const double candidate =
        pvals[order[i - 1]] * static_cast<double>(m) / static_cast<double>(i);
    running = std::min(running, std::min(1.0, candidate));
    out.adjusted[order[i - 1]] = running;
  }
  return out;
}

void significance_suite(std::vector<estimation::MIReport*>& family, double alpha) {
  if (family.empty()) throw std::invalid_argument("significance_suite: empty family");
  std::vector<double> pvals;
  std::vector<TestResult> tests;
  pvals.reserve(family.size());
  for (const auto* report : family) {
    SurprisalSample weak{report->contrast_weak, report->name + "/weak"};
    SurprisalSample strong{report->contrast_strong, report->name + "/strong"};
    const TestResult tr = welch_t_test(weak, strong);
    tests.push_back(tr);
    pvals.push_back(tr.p);
  }
  const BHResult bh = benjamini_hochberg(pvals, alpha);
  for (std::size_t i = 0; i < family.size(); ++i) {
    estimation::SignificanceResult s;
    s.t = tests[i].t;
    s.df = tests[i].df;
    s.p_raw = tests[i].p;
    s.p_adjusted = bh.adjusted[i];
    s.reject = bh.reject[i];
    family[i]->significance = s;
  }
}

}  // namespace declmi::stats
