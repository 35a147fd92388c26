#include "declmi/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace declmi::estimation {

namespace {
double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double surprisal_bits(const Predictor& q, const Lexeme& lx) {
  const Vector probs = q(lx);
  if (lx.class_id < 0 || lx.class_id >= probs.size())
    throw std::runtime_error("heldout estimator: class id outside model output");
  const double p = probs[lx.class_id];
  if (!(p > 0.0))
    throw std::runtime_error("heldout estimator: model assigned zero probability to an observed class");
  return -std::log2(p);
}
}  // namespace

double CountTable::class_given_gender(std::size_t c, std::size_t g) const {
  const std::int64_t ng = gender_total(g);
  if (ng <= 0) throw std::runtime_error("CountTable: unobserved gender");
  return static_cast<double>(count(c, g)) / static_cast<double>(ng);
}

EntropyEstimate plugin_entropy(const CountTable& t) {
  if (t.total() <= 0) throw std::invalid_argument("plugin_entropy: empty table");
  const double n = static_cast<double>(t.total());
  double h = 0.0;
  for (std::size_t c = 0; c < t.n_classes(); ++c)
    h -= xlog2x(static_cast<double>(t.class_total(c)) / n);
  EntropyEstimate e;
  e.value_bits = h;
  e.kind = EstimatorKind::PluginEntropy;
  return e;
}

EntropyEstimate plugin_conditional_entropy(const CountTable& t) {
  if (t.total() <= 0) throw std::invalid_argument("plugin_conditional_entropy: empty table");
  const double n = static_cast<double>(t.total());
  double h = 0.0;
  for (std::size_t g = 0; g < t.n_genders(); ++g) {
    const double ng = static_cast<double>(t.gender_total(g));
    if (ng <= 0.0) continue;
    double hg = 0.0;
    for (std::size_t c = 0; c < t.n_classes(); ++c)
      hg -= xlog2x(static_cast<double>(t.count(c, g)) / ng);
    h += (ng / n) * hg;
  }
  EntropyEstimate e;
  e.value_bits = h;
  e.kind = EstimatorKind::PluginEntropy;
  return e;
}

EntropyEstimate heldout_cross_entropy(const Predictor& q, const std::vector<Lexeme>& test) {
  if (test.empty()) throw std::invalid_argument("heldout_cross_entropy: empty test list");
  EntropyEstimate e;
  e.kind = EstimatorKind::HeldoutCrossEntropy;
  e.per_item_bits.reserve(test.size());
  double sum = 0.0;
  for (const Lexeme& lx : test) {
    const double s = surprisal_bits(q, lx);
    e.per_item_bits.push_back(s);
    sum += s;
  }
  e.value_bits = sum / static_cast<double>(test.size());
  return e;
}

EntropyEstimate pool_folds(const std::vector<EntropyEstimate>& folds) {
  if (folds.empty()) throw std::invalid_argument("pool_folds: no folds");
  EntropyEstimate out;
  out.kind = folds.front().kind;
  out.fold_signature = folds.front().fold_signature;
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& f : folds) {
    if (f.fold_signature != out.fold_signature)
      throw std::invalid_argument("pool_folds: mixed fold plans");
    const std::size_t m = f.per_item_bits.size();
    if (m == 0) throw std::invalid_argument("pool_folds: fold without per-item samples");
    out.per_fold_bits.push_back(f.value_bits);
    out.fold_sizes.push_back(m);
    out.per_item_bits.insert(out.per_item_bits.end(), f.per_item_bits.begin(), f.per_item_bits.end());
    weighted += f.value_bits * static_cast<double>(m);
    total += m;
  }
  out.value_bits = weighted / static_cast<double>(total);
  return out;
}

nlohmann::json MIReport::to_json() const {
  nlohmann::json j;
  j["kind"] = static_cast<int>(kind);
  j["name"] = name;
  j["value_bits"] = value_bits;
  j["negative_estimate"] = negative_estimate;
  j["components"] = components;
  if (uncertainty) j["uncertainty"] = *uncertainty;
  if (!per_class_bits.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : per_class_bits) {
      if (v) arr.push_back(*v); else arr.push_back(nullptr);
    }
    j["per_class_bits"] = arr;
  }
  if (!fold_values.empty()) j["fold_values"] = fold_values;
  j["contrast_weak"] = contrast_weak;
  j["contrast_strong"] = contrast_strong;
  if (significance) {
    j["significance"] = {{"t", significance->t},
                         {"df", significance->df},
                         {"p_raw", significance->p_raw},
                         {"p_adjusted", significance->p_adjusted},
                         {"reject", significance->reject}};
  }
  j["fold_signature"] = fold_signature;
  return j;
}

MIReport MIReport::from_json(const nlohmann::json& j) {
  MIReport r;
  r.kind = static_cast<MIKind>(j.at("kind").get<int>());
  r.name = j.at("name").get<std::string>();
  r.value_bits = j.at("value_bits").get<double>();
  r.negative_estimate = j.at("negative_estimate").get<bool>();
  r.components = j.at("components").get<std::map<std::string, double>>();
  if (j.contains("uncertainty")) r.uncertainty = j.at("uncertainty").get<double>();
  if (j.contains("per_class_bits")) {
    for (const auto& v : j.at("per_class_bits")) {
      if (v.is_null()) r.per_class_bits.push_back(std::nullopt);
      else r.per_class_bits.push_back(v.get<double>());
    }
  }
  if (j.contains("fold_values"))
    r.fold_values = j.at("fold_values").get<std::map<std::string, std::vector<double>>>();
  r.contrast_weak = j.at("contrast_weak").get<std::vector<double>>();
  r.contrast_strong = j.at("contrast_strong").get<std::vector<double>>();
  if (j.contains("significance")) {
    SignificanceResult s;
    const auto& js = j.at("significance");
    s.t = js.at("t").get<double>();
    s.df = js.at("df").get<double>();
    s.p_raw = js.at("p_raw").get<double>();
    s.p_adjusted = js.at("p_adjusted").get<double>();
    s.reject = js.at("reject").get<bool>();
    r.significance = s;
  }
  r.fold_signature = j.at("fold_signature").get<std::uint64_t>();
  return r;
}

namespace {
void check_same_plan(const EntropyEstimate& a, const EntropyEstimate& b, const char* what) {
  if (a.fold_signature != 0 && b.fold_signature != 0 && a.fold_signature != b.fold_signature)
    throw std::invalid_argument(std::string(what) + ": estimates come from different fold plans");
}
}  // namespace

MIReport mi_bipartite(const EntropyEstimate& h, const EntropyEstimate& hq) {
  check_same_plan(h, hq, "mi_bipartite");
  MIReport r;
  r.kind = MIKind::Bipartite;
  r.value_bits = h.value_bits - hq.value_bits;
  r.negative_estimate = r.value_bits < 0.0;
  r.components["h"] = h.value_bits;
  r.components["hq"] = hq.value_bits;
  r.fold_signature = hq.fold_signature != 0 ? hq.fold_signature : h.fold_signature;
  return r;
}

TripartiteReports mi_tripartite(const EntropyEstimate& h_cg, const EntropyEstimate& hq_cwg,
                                const EntropyEstimate& hq_cvg, const EntropyEstimate& hq_cwvg) {
  const EntropyEstimate* all[] = {&h_cg, &hq_cwg, &hq_cvg, &hq_cwvg};
  std::uint64_t sig = 0;
  for (const auto* e : all) {
    if (e->fold_signature == 0) continue;
    if (sig == 0) sig = e->fold_signature;
    else if (sig != e->fold_signature)
      throw std::invalid_argument("mi_tripartite: estimates come from different fold plans");
  }

  TripartiteReports out;

  out.joint_bipartite.kind = MIKind::JointBipartite;
  out.joint_bipartite.value_bits = h_cg.value_bits - hq_cwvg.value_bits;
  out.joint_bipartite.components["h_cg"] = h_cg.value_bits;
  out.joint_bipartite.components["hq_cwvg"] = hq_cwvg.value_bits;

  out.conditional_bipartite.kind = MIKind::ConditionalBipartite;
  out.conditional_bipartite.value_bits = hq_cvg.value_bits - hq_cwvg.value_bits;
  out.conditional_bipartite.components["hq_cvg"] = hq_cvg.value_bits;
  out.conditional_bipartite.components["hq_cwvg"] = hq_cwvg.value_bits;

  out.tripartite.kind = MIKind::Tripartite;
  // Canonical evaluation: bipartite minus conditional bipartite, so the
  // two algebraic routes through the stored components agree bit-exactly.
  out.tripartite.value_bits = (h_cg.value_bits - hq_cwg.value_bits) -
                              out.conditional_bipartite.value_bits;
  out.tripartite.components["h_cg"] = h_cg.value_bits;
  out.tripartite.components["hq_cwg"] = hq_cwg.value_bits;
  out.tripartite.components["hq_cvg"] = hq_cvg.value_bits;
  out.tripartite.components["hq_cwvg"] = hq_cwvg.value_bits;
  out.tripartite.components["mi_cw_g"] = h_cg.value_bits - hq_cwg.value_bits;
  out.tripartite.components["mi_cw_vg"] = out.conditional_bipartite.value_bits;

  for (MIReport* r : {&out.joint_bipartite, &out.conditional_bipartite, &out.tripartite}) {
    r->negative_estimate = r->value_bits < 0.0;
    r->fold_signature = sig;
  }
  return out;
}

double uncertainty_coefficient(MIReport& mi, const EntropyEstimate& h) {
  if (!(h.value_bits > 0.0))
    throw std::invalid_argument("uncertainty_coefficient: zero conditioning entropy");
  const double u = mi.value_bits / h.value_bits;
  mi.uncertainty = u;
  return u;
}

PerClassMI per_class_pointwise_mi(const Predictor& q, const std::vector<Lexeme>& test,
                                  const CountTable& t) {
  if (test.empty()) throw std::invalid_argument("per_class_pointwise_mi: empty test list");
  const std::size_t K = t.n_classes();
  std::vector<double> sums(K, 0.0);
  std::vector<std::size_t> counts(K, 0);
  for (const Lexeme& lx : test) {
    const double model_bits = -surprisal_bits(q, lx);  // log2 q(c|.)
    const double baseline =
        t.class_given_gender(static_cast<std::size_t>(lx.class_id),
                             static_cast<std::size_t>(lx.gender_id));
    if (!(baseline > 0.0))
      throw std::runtime_error("per_class_pointwise_mi: empirical p(c|g) is zero for a test item");
    const double pointwise = model_bits - std::log2(baseline);
    sums[static_cast<std::size_t>(lx.class_id)] += pointwise;
    counts[static_cast<std::size_t>(lx.class_id)] += 1;
  }
  PerClassMI out;
  out.class_counts = counts;
  out.value_bits.resize(K);
  double weighted = 0.0;
  for (std::size_t c = 0; c < K; ++c) {
    if (counts[c] == 0) {
      out.value_bits[c] = std::nullopt;
      continue;
    }
    const double mean = sums[c] / static_cast<double>(counts[c]);
    out.value_bits[c] = mean;
    weighted += mean * (static_cast<double>(counts[c]) / static_cast<double>(test.size()));
  }
  out.weighted_total_bits = weighted;
  return out;
}

SurprisalTable surprisal_table(const Predictor& q, const std::vector<Lexeme>& test, std::size_t n) {
  if (n > test.size()) throw std::invalid_argument("surprisal_table: n exceeds test size");
  std::vector<SurprisalEntry> entries;
  entries.reserve(test.size());
  for (const Lexeme& lx : test)
    entries.push_back({lx.form, lx.class_id, lx.gender_id, surprisal_bits(q, lx)});

  auto desc = [](const SurprisalEntry& a, const SurprisalEntry& b) {
    if (a.bits != b.bits) return a.bits > b.bits;
    return a.form < b.form;
  };
  auto asc = [](const SurprisalEntry& a, const SurprisalEntry& b) {
    if (a.bits != b.bits) return a.bits < b.bits;
    return a.form < b.form;
  };
  SurprisalTable out;
  std::vector<SurprisalEntry> sorted = entries;
  std::sort(sorted.begin(), sorted.end(), desc);
  out.highest.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(sorted.begin(), sorted.end(), asc);
  out.lowest.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace declmi::estimation
