#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "declmi/corpus.hpp"
#include "declmi/count_table.hpp"

namespace declmi::estimation {

using corpus::Lexeme;
using numerics::Vector;

enum class EstimatorKind { PluginEntropy, HeldoutCrossEntropy };

struct EntropyEstimate {
  double value_bits = 0.0;
  EstimatorKind kind = EstimatorKind::PluginEntropy;
  std::vector<double> per_item_bits;   // held-out kind only
  std::vector<double> per_fold_bits;   // populated by pool_folds
  std::vector<std::size_t> fold_sizes;
  std::uint64_t fold_signature = 0;    // 0 = not tied to a fold plan
};

// A classifier viewed as a conditional distribution: probabilities over
// classes for one lexeme's conditioning variables.
using Predictor = std::function<Vector(const Lexeme&)>;

// H(C) of the class marginal, plug-in, in bits; 0 log 0 = 0.
EntropyEstimate plugin_entropy(const CountTable& t);

// H(C|G) = sum_g p(g) H(C | G=g), plug-in, in bits.
EntropyEstimate plugin_conditional_entropy(const CountTable& t);

// Mean surprisal -log2 q(c_i | .) over the held-out list; stores the
// per-item values. Throws if the model assigns exactly zero to an
// observed class.
EntropyEstimate heldout_cross_entropy(const Predictor& q, const std::vector<Lexeme>& test);

// Size-weighted mean over folds; concatenates per-item samples in fold
// order. All inputs must share the fold signature when they carry one.
EntropyEstimate pool_folds(const std::vector<EntropyEstimate>& folds);

struct SignificanceResult {
  double t = 0.0;
  double df = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool reject = false;
};

enum class MIKind { Bipartite, ConditionalBipartite, JointBipartite, Tripartite };

struct MIReport {
  MIKind kind = MIKind::Bipartite;
  std::string name;                    // e.g. "mi_c_w_given_g"
  double value_bits = 0.0;
  bool negative_estimate = false;      // flagged, never clipped
  std::map<std::string, double> components;  // entropies the value combines
  std::optional<double> uncertainty;   // fraction, set by uncertainty_coefficient
  std::vector<std::optional<double>> per_class_bits;
  std::map<std::string, std::vector<double>> fold_values;  // e.g. per-fold hq
  // Pointwise samples for the significance test: surprisals (or pointwise
  // MI terms) under the weaker and stronger conditioning.
  std::vector<double> contrast_weak;
  std::vector<double> contrast_strong;
  std::optional<SignificanceResult> significance;
  std::uint64_t fold_signature = 0;

  nlohmann::json to_json() const;
  static MIReport from_json(const nlohmann::json& j);
};

// MI = h - hq in bits. h is the conditioning-appropriate plug-in entropy,
// hq the matching model cross-entropy. Negative values are legal (the
// estimator is a lower bound) and flagged.
MIReport mi_bipartite(const EntropyEstimate& h, const EntropyEstimate& hq);

struct TripartiteReports {
  MIReport tripartite;            // MI(C;W;V|G)
  MIReport conditional_bipartite; // MI(C;W|V,G)
  MIReport joint_bipartite;       // MI(C;W,V|G)
};

// Four-term assembly; throws if the estimates carry mismatched fold plans.
TripartiteReports mi_tripartite(const EntropyEstimate& h_cg, const EntropyEstimate& hq_cwg,
                                const EntropyEstimate& hq_cvg, const EntropyEstimate& hq_cwvg);

// U = MI / h, as a fraction of the conditioning entropy. Throws when h = 0.
double uncertainty_coefficient(MIReport& mi, const EntropyEstimate& h);

struct PerClassMI {
  std::vector<std::optional<double>> value_bits;  // missing when class absent from test
  std::vector<std::size_t> class_counts;
  double weighted_total_bits = 0.0;  // equals the overall MI estimate on the same items
};

// Per-class mean of log2 q(c|.) - log2 p(c|g); the class-frequency-weighted
// sum recovers the total estimate exactly.
PerClassMI per_class_pointwise_mi(const Predictor& q, const std::vector<Lexeme>& test,
                                  const CountTable& t);

struct SurprisalEntry {
  std::string form;
  int class_id = -1;
  int gender_id = -1;
  double bits = 0.0;
};

struct SurprisalTable {
  std::vector<SurprisalEntry> highest;
  std::vector<SurprisalEntry> lowest;
};

// n highest / n lowest per-item surprisals; ties broken by lexicographic
// form order.
SurprisalTable surprisal_table(const Predictor& q, const std::vector<Lexeme>& test, std::size_t n);

}  // namespace declmi::estimation
