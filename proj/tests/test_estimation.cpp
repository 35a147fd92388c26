#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "declmi/corpus.hpp"
#include "declmi/estimation.hpp"
#include "declmi/rng.hpp"
#include "fixtures.hpp"

using namespace declmi;
using estimation::CountTable;
using estimation::EntropyEstimate;
using estimation::Predictor;
using numerics::Vector;

namespace {

CountTable table_from_sizes(const std::vector<std::int64_t>& sizes) {
  CountTable t(sizes.size(), 1);
  for (std::size_t c = 0; c < sizes.size(); ++c) t.add(c, 0, sizes[c]);
  return t;
}

CountTable czech_table() {
  return corpus::build_count_table(fixtures::make_czech_dataset());
}

EntropyEstimate held(double v, std::uint64_t sig = 0) {
  EntropyEstimate e;
  e.value_bits = v;
  e.kind = estimation::EstimatorKind::HeldoutCrossEntropy;
  e.fold_signature = sig;
  return e;
}

// Oracle predictor: probability 1 on the true class.
Predictor oracle_predictor(int K) {
  return [K](const corpus::Lexeme& lx) {
    Vector p = Vector::Zero(K);
    p[lx.class_id] = 1.0;
    return p;
  };
}

Predictor uniform_predictor(int K) {
  return [K](const corpus::Lexeme&) { return Vector::Constant(K, 1.0 / K); };
}

}  // namespace

TEST_CASE("plug-in entropy: uniform over 4 classes is 2 bits") {
  const auto t = table_from_sizes({10, 10, 10, 10});
  CHECK(estimation::plugin_entropy(t).value_bits == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("plug-in entropy: a single class has zero entropy") {
  const auto t = table_from_sizes({42});
  CHECK(estimation::plugin_entropy(t).value_bits == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("plug-in entropy on the Czech counts reproduces the published 2.75 bits") {
  const double h = estimation::plugin_entropy(czech_table()).value_bits;
  CHECK(std::abs(h - 2.75) < 0.01);
}

TEST_CASE("conditional entropy equals unconditional under independence") {
  // Same class distribution in both genders.
  CountTable t(3, 2);
  const int base[3] = {6, 3, 1};
  for (std::size_t c = 0; c < 3; ++c) {
    t.add(c, 0, base[c] * 2);
    t.add(c, 1, base[c] * 5);
  }
  const double h = estimation::plugin_entropy(t).value_bits;
  const double hg = estimation::plugin_conditional_entropy(t).value_bits;
  CHECK(hg == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("conditional entropy is zero when gender determines class") {
  CountTable t(2, 2);
  t.add(0, 0, 10);
  t.add(1, 1, 30);
  CHECK(estimation::plugin_conditional_entropy(t).value_bits ==
        doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("Czech gender-conditioned entropy and MI match the published values") {
  const auto t = czech_table();
  const auto h = estimation::plugin_entropy(t);
  const auto hg = estimation::plugin_conditional_entropy(t);
  CHECK(std::abs(hg.value_bits - 1.35) < 0.01);
  const auto mi = estimation::mi_bipartite(h, hg);
  CHECK(std::abs(mi.value_bits - 1.40) < 0.02);
}

TEST_CASE("plug-in bounds and conditioning-reduces-entropy over random tables") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = 2 + rng.uniform_index(6);
    const std::size_t G = 1 + rng.uniform_index(3);
    CountTable t(K, G);
    for (std::size_t c = 0; c < K; ++c)
      for (std::size_t g = 0; g < G; ++g) t.add(c, g, static_cast<std::int64_t>(rng.uniform_index(20)));
    if (t.total() == 0) continue;
    const double h = estimation::plugin_entropy(t).value_bits;
    const double hg = estimation::plugin_conditional_entropy(t).value_bits;
    CHECK(h >= -1e-12);
    CHECK(h <= std::log2(static_cast<double>(K)) + 1e-12);
    CHECK(hg <= h + 1e-12);
  }
}

TEST_CASE("held-out cross entropy: oracle model scores zero bits") {
  const auto d = fixtures::make_dataset({{"aa", "c0", "f", Vector::Zero(2)},
                                         {"ab", "c1", "f", Vector::Zero(2)}});
  const auto e = estimation::heldout_cross_entropy(oracle_predictor(2), d.lexemes);
  CHECK(e.value_bits == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("held-out cross entropy: uniform model over 13 classes scores log2 13") {
  std::vector<fixtures::Row> rows;
  for (int i = 0; i < 26; ++i)
    rows.push_back({fixtures::spelled_index(i), "c" + std::to_string(i % 13), "f", Vector::Zero(2)});
  const auto d = fixtures::make_dataset(rows);
  const auto e = estimation::heldout_cross_entropy(uniform_predictor(13), d.lexemes);
  CHECK(e.value_bits == doctest::Approx(std::log2(13.0)).epsilon(1e-12));
  CHECK(e.value_bits == doctest::Approx(3.700).epsilon(1e-3));
}

TEST_CASE("held-out cross entropy refuses zero-probability outputs") {
  const auto d = fixtures::make_dataset({{"aa", "c0", "f", Vector::Zero(2)},
                                         {"ab", "c1", "f", Vector::Zero(2)}});
  Predictor broken = [](const corpus::Lexeme&) {
    Vector p(2);
    p << 1.0, 0.0;
    return p;
  };
  CHECK_THROWS(estimation::heldout_cross_entropy(broken, d.lexemes));
}

TEST_CASE("pool_folds takes the size-weighted mean and keeps per-fold values") {
  EntropyEstimate a = held(1.0, 7);
  a.per_item_bits = {1.0, 1.0};
  EntropyEstimate b = held(2.0, 7);
  b.per_item_bits = {2.0, 2.0, 2.0, 2.0, 2.0, 2.0};
  const auto pooled = estimation::pool_folds({a, b});
  CHECK(pooled.value_bits == doctest::Approx((2.0 * 1.0 + 6.0 * 2.0) / 8.0).epsilon(1e-15));
  CHECK(pooled.per_fold_bits.size() == 2);
  CHECK(pooled.per_item_bits.size() == 8);

  EntropyEstimate c = held(1.0, 8);
  c.per_item_bits = {1.0};
  CHECK_THROWS(estimation::pool_folds({a, c}));
}

TEST_CASE("mi_bipartite reproduces the published Czech and German form rows") {
  const auto cz = estimation::mi_bipartite(held(1.35), held(0.56));
  CHECK(cz.value_bits == doctest::Approx(0.79).epsilon(1e-12));
  const auto de = estimation::mi_bipartite(held(2.17), held(1.88));
  CHECK(de.value_bits == doctest::Approx(0.29).epsilon(1e-12));
}

TEST_CASE("mi_bipartite: an uninformative model gives zero and negatives are flagged") {
  const auto zero = estimation::mi_bipartite(held(1.35), held(1.35));
  CHECK(zero.value_bits == doctest::Approx(0.0));
  CHECK_FALSE(zero.negative_estimate);
  const auto neg = estimation::mi_bipartite(held(1.35), held(1.50));
  CHECK(neg.value_bits < 0.0);
  CHECK(neg.negative_estimate);
}

TEST_CASE("mi_tripartite reproduces the published Czech and German assemblies") {
  const auto cz = estimation::mi_tripartite(held(1.35), held(0.56), held(0.82), held(0.37));
  CHECK(std::abs(cz.tripartite.value_bits - 0.34) < 1e-12);
  CHECK(std::abs(cz.conditional_bipartite.value_bits - 0.45) < 1e-12);
  CHECK(std::abs(cz.joint_bipartite.value_bits - 0.98) < 1e-12);

  const auto de = estimation::mi_tripartite(held(2.17), held(1.60), held(1.88), held(1.50));
  CHECK(std::abs(de.tripartite.value_bits - 0.19) < 1e-12);
  CHECK(std::abs(de.conditional_bipartite.value_bits - 0.38) < 1e-12);
  CHECK(std::abs(de.joint_bipartite.value_bits - 0.67) < 1e-12);
}

TEST_CASE("mi_tripartite: form carrying no information gives exactly zero") {
  const auto r = estimation::mi_tripartite(held(1.2), held(1.2), held(0.9), held(0.9));
  CHECK(r.tripartite.value_bits == 0.0);
}

TEST_CASE("mi_tripartite agrees with the bipartite-minus-conditional route bit-exactly") {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.0, 3.0), b = rng.uniform(0.0, 3.0);
    const double c = rng.uniform(0.0, 3.0), d = rng.uniform(0.0, 3.0);
    const auto r = estimation::mi_tripartite(held(a), held(b), held(c), held(d));
    const auto bip = estimation::mi_bipartite(held(a), held(b));
    CHECK(r.tripartite.value_bits == bip.value_bits - r.conditional_bipartite.value_bits);
    // and the four-term form agrees to rounding
    CHECK(std::abs(r.tripartite.value_bits - (a - b - c + d)) < 1e-12);
  }
}

TEST_CASE("mi_tripartite rejects estimates from different fold plans") {
  CHECK_THROWS(estimation::mi_tripartite(held(1.0, 1), held(0.5, 1), held(0.5, 2), held(0.3, 1)));
  CHECK_NOTHROW(estimation::mi_tripartite(held(1.0, 1), held(0.5, 1), held(0.5, 1), held(0.3, 1)));
}

TEST_CASE("uncertainty coefficient reproduces the published Czech percentages") {
  auto joint = estimation::mi_bipartite(held(1.35), held(0.37));
  CHECK(joint.value_bits == doctest::Approx(0.98).epsilon(1e-9));
  const double u = estimation::uncertainty_coefficient(joint, held(1.35));
  CHECK(std::abs(u * 100.0 - 72.6) < 0.05);

  auto tri = estimation::mi_bipartite(held(0.35 + 1.0), held(1.0));  // value 0.35
  const double u2 = estimation::uncertainty_coefficient(tri, held(1.35));
  CHECK(std::abs(u2 * 100.0 - 25.9) < 0.05);

  auto zero = estimation::mi_bipartite(held(1.0), held(1.0));
  CHECK(estimation::uncertainty_coefficient(zero, held(1.35)) == doctest::Approx(0.0));
  CHECK_THROWS(estimation::uncertainty_coefficient(zero, held(0.0)));
}

TEST_CASE("per-class pointwise MI is zero for the empirical-baseline model") {
  const auto d = fixtures::make_czech_dataset();
  const auto t = corpus::build_count_table(d);
  Predictor baseline = [&](const corpus::Lexeme& lx) {
    Vector p(t.n_classes());
    for (std::size_t c = 0; c < t.n_classes(); ++c)
      p[static_cast<Eigen::Index>(c)] =
          t.class_given_gender(c, static_cast<std::size_t>(lx.gender_id));
    return p;
  };
  const auto pc = estimation::per_class_pointwise_mi(baseline, d.lexemes, t);
  for (const auto& v : pc.value_bits) {
    REQUIRE(v.has_value());
    CHECK(std::abs(*v) < 1e-12);
  }
  CHECK(std::abs(pc.weighted_total_bits) < 1e-12);
}

TEST_CASE("per-class pointwise MI of the oracle model is the baseline surprisal") {
  const auto d = fixtures::make_czech_dataset();
  const auto t = corpus::build_count_table(d);
  const auto pc =
      estimation::per_class_pointwise_mi(oracle_predictor(d.n_classes()), d.lexemes, t);
  for (std::size_t c = 0; c < t.n_classes(); ++c) {
    // All members of class c share one gender in this fixture.
    const auto& lx = *std::find_if(d.lexemes.begin(), d.lexemes.end(), [&](const auto& l) {
      return l.class_id == static_cast<int>(c);
    });
    const double expect =
        -std::log2(t.class_given_gender(c, static_cast<std::size_t>(lx.gender_id)));
    REQUIRE(pc.value_bits[c].has_value());
    CHECK(*pc.value_bits[c] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("per-class decomposition recovers the total estimate exactly") {
  const auto d = fixtures::make_czech_dataset();
  const auto t = corpus::build_count_table(d);
  Rng rng(5);
  // Arbitrary fixed stochastic model keyed off the form length and gender.
  Predictor q = [&](const corpus::Lexeme& lx) {
    Vector p(d.n_classes());
    for (int c = 0; c < d.n_classes(); ++c)
      p[c] = 1.0 + ((static_cast<int>(lx.graphemes.size()) * 7 + c * 3 + lx.gender_id) % 11);
    p /= p.sum();
    return p;
  };
  const auto pc = estimation::per_class_pointwise_mi(q, d.lexemes, t);

  // Direct route: mean pointwise MI over all items.
  double direct = 0.0;
  for (const auto& lx : d.lexemes) {
    const Vector p = q(lx);
    direct += std::log2(p[lx.class_id]) -
              std::log2(t.class_given_gender(static_cast<std::size_t>(lx.class_id),
                                             static_cast<std::size_t>(lx.gender_id)));
  }
  direct /= static_cast<double>(d.size());
  CHECK(std::abs(pc.weighted_total_bits - direct) < 1e-9);
}

TEST_CASE("per-class values are missing for classes absent from the test list") {
  const auto d = fixtures::make_dataset({{"aa", "c0", "f", Vector::Zero(2)},
                                         {"ab", "c1", "f", Vector::Zero(2)}});
  CountTable t(3, 1);
  t.add(0, 0, 2);
  t.add(1, 0, 2);
  t.add(2, 0, 2);
  const auto pc = estimation::per_class_pointwise_mi(uniform_predictor(3), d.lexemes, t);
  CHECK(pc.value_bits[0].has_value());
  CHECK(pc.value_bits[1].has_value());
  CHECK_FALSE(pc.value_bits[2].has_value());
}

TEST_CASE("surprisal table: hand-built three-item case gives 1, 2, 3 bits") {
  const auto d = fixtures::make_dataset({{"one", "c0", "f", Vector::Zero(2)},
                                         {"two", "c1", "f", Vector::Zero(2)},
                                         {"three", "c2", "f", Vector::Zero(2)}});
  Predictor q = [](const corpus::Lexeme& lx) {
    Vector p = Vector::Constant(3, 0.1);
    if (lx.class_id == 0) p[0] = 0.5;
    if (lx.class_id == 1) p[1] = 0.25;
    if (lx.class_id == 2) p[2] = 0.125;
    return p;
  };
  const auto table = estimation::surprisal_table(q, d.lexemes, 3);
  REQUIRE(table.highest.size() == 3);
  CHECK(table.highest[0].bits == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(table.highest[0].form == "three");
  CHECK(table.highest[2].bits == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(table.lowest[0].bits == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(table.lowest[0].form == "one");
}

TEST_CASE("surprisal table breaks ties lexicographically and caps n") {
  const auto d = fixtures::make_dataset({{"bb", "c0", "f", Vector::Zero(2)},
                                         {"aa", "c0", "f", Vector::Zero(2)},
                                         {"cc", "c1", "f", Vector::Zero(2)}});
  const auto table = estimation::surprisal_table(oracle_predictor(2), d.lexemes, 3);
  CHECK(table.lowest[0].form == "aa");
  CHECK(table.lowest[1].form == "bb");
  CHECK(table.lowest[2].form == "cc");
  CHECK_THROWS(estimation::surprisal_table(oracle_predictor(2), d.lexemes, 4));
}

TEST_CASE("MIReport JSON round trip preserves every field") {
  auto r = estimation::mi_bipartite(held(1.35, 9), held(0.56, 9));
  r.name = "mi_c_w_given_g";
  estimation::uncertainty_coefficient(r, held(1.35));
  r.per_class_bits = {0.5, std::nullopt, 1.25};
  r.contrast_weak = {1.0, 2.0};
  r.contrast_strong = {0.5, 0.25};
  estimation::SignificanceResult s;
  s.t = 3.2;
  s.df = 17.5;
  s.p_raw = 0.004;
  s.p_adjusted = 0.008;
  s.reject = true;
  r.significance = s;

  const auto j = r.to_json();
  const auto back = estimation::MIReport::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.value_bits == r.value_bits);
  CHECK(back.per_class_bits.size() == 3);
  CHECK_FALSE(back.per_class_bits[1].has_value());
  CHECK(back.significance->reject);
}
