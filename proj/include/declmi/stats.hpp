#pragma once

#include <string>
#include <vector>

#include "declmi/estimation.hpp"

namespace declmi::stats {

struct SurprisalSample {
  std::vector<double> values;  // bits
  std::string provenance;
};

struct TestResult {
  double t = 0.0;
  double df = 0.0;   // Welch-Satterthwaite, real-valued
  double p = 1.0;    // two-sided
};

// Unequal-variance t-test. Requires two or more values per sample and a
// nonzero variance on at least one side.
TestResult welch_t_test(const SurprisalSample& a, const SurprisalSample& b);

struct BHResult {
  std::vector<bool> reject;
  std::vector<double> adjusted;  // monotone min-adjusted p-values
};

// Step-up false-discovery-rate control at level alpha.
BHResult benjamini_hochberg(const std::vector<double>& pvals, double alpha);

// Welch test per report (contrast_weak vs contrast_strong), then BH across
// the family; fills each report's significance field.
void significance_suite(std::vector<estimation::MIReport*>& family, double alpha);

// Two-sided tail probability of Student's t distribution, via the
// regularized incomplete beta continued fraction (accurate to ~1e-10).
double student_t_two_sided_p(double t, double df);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

}  // namespace declmi::stats
