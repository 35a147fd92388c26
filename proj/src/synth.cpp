#include "declmi/synth.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "declmi/rng.hpp"
#include "declmi/utf8.hpp"

namespace declmi::synth {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr std::size_t kMaxJointSupport = 100'000'000;

void check_rows(const std::vector<std::vector<double>>& table, std::size_t rows,
                std::size_t cols, const std::string& what) {
  if (table.size() != rows) throw std::invalid_argument(what + ": wrong row count");
  for (const auto& row : table) {
    if (row.size() != cols) throw std::invalid_argument(what + ": wrong column count");
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw std::invalid_argument(what + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw std::invalid_argument(what + ": row does not normalize to 1");
  }
}

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

std::vector<double> cumulative(const std::vector<double>& probs) {
  std::vector<double> out(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    out[i] = acc;
  }
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (genders.empty() || classes.empty() || strings.empty() || tags.empty())
    throw std::invalid_argument("SynthSpec: empty component");
  if (gender_probs.size() != genders.size())
    throw std::invalid_argument("SynthSpec: gender_probs size mismatch");
  double gsum = 0.0;
  for (double p : gender_probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("SynthSpec: negative gender probability");
    gsum += p;
  }
  if (std::abs(gsum - 1.0) > kRowSumTol)
    throw std::invalid_argument("SynthSpec: gender_probs do not normalize");
  check_rows(class_given_gender, genders.size(), classes.size(), "class_given_gender");
  check_rows(string_probs_given_class, classes.size(), strings.size(),
             "string_probs_given_class");
  check_rows(tag_probs_given_class, classes.size(), tags.size(), "tag_probs_given_class");
  if (tag_vectors.size() != tags.size())
    throw std::invalid_argument("SynthSpec: tag_vectors size mismatch");
  for (const auto& v : tag_vectors) {
    if (v.size() != tag_vectors[0].size())
      throw std::invalid_argument("SynthSpec: tag vectors have mixed dimensions");
    if (!v.allFinite()) throw std::invalid_argument("SynthSpec: non-finite tag vector");
  }
  for (std::size_t a = 0; a < tag_vectors.size(); ++a)
    for (std::size_t b = a + 1; b < tag_vectors.size(); ++b)
      if ((tag_vectors[a] - tag_vectors[b]).cwiseAbs().maxCoeff() == 0.0)
        throw std::invalid_argument("SynthSpec: distinct tags must have distinct vectors");
  for (const auto& s : strings)
    if (s.empty()) throw std::invalid_argument("SynthSpec: empty string in support");
  // Every support string must be reachable from some class.
  for (std::size_t s = 0; s < strings.size(); ++s) {
    double any = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) any += string_probs_given_class[c][s];
    if (any <= 0.0)
      throw std::invalid_argument("SynthSpec: string '" + strings[s] + "' has zero probability everywhere");
  }
}

nlohmann::json SynthSpec::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["version"] = version;
  j["genders"] = genders;
  j["gender_probs"] = gender_probs;
  j["classes"] = classes;
  j["class_given_gender"] = class_given_gender;
  j["strings"] = strings;
  j["string_probs_given_class"] = string_probs_given_class;
  j["tags"] = tags;
  j["tag_probs_given_class"] = tag_probs_given_class;
  nlohmann::json vecs = nlohmann::json::array();
  for (const auto& v : tag_vectors) {
    std::vector<double> row(v.data(), v.data() + v.size());
    vecs.push_back(row);
  }
  j["tag_vectors"] = vecs;
  j["seed"] = seed;
  return j;
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  s.name = j.at("name").get<std::string>();
  s.version = j.value("version", 1);
  s.genders = j.at("genders").get<std::vector<std::string>>();
  s.gender_probs = j.at("gender_probs").get<std::vector<double>>();
  s.classes = j.at("classes").get<std::vector<std::string>>();
  s.class_given_gender = j.at("class_given_gender").get<std::vector<std::vector<double>>>();
  s.strings = j.at("strings").get<std::vector<std::string>>();
  s.string_probs_given_class =
      j.at("string_probs_given_class").get<std::vector<std::vector<double>>>();
  s.tags = j.at("tags").get<std::vector<std::string>>();
  s.tag_probs_given_class = j.at("tag_probs_given_class").get<std::vector<std::vector<double>>>();
  for (const auto& row : j.at("tag_vectors")) {
    const auto vals = row.get<std::vector<double>>();
    Vector v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
    s.tag_vectors.push_back(std::move(v));
  }
  s.seed = j.value("seed", std::uint64_t{0});
  s.validate();
  return s;
}

nlohmann::json ExactQuantities::to_json() const {
  return {{"h_c", h_c},           {"h_c_g", h_c_g},       {"h_c_w", h_c_w},
          {"h_c_v", h_c_v},       {"h_c_wg", h_c_wg},     {"h_c_vg", h_c_vg},
          {"h_c_wv", h_c_wv},     {"h_c_wvg", h_c_wvg},   {"mi_cg", mi_cg},
          {"mi_cw", mi_cw},       {"mi_cv", mi_cv},       {"mi_cwv", mi_cwv},
          {"mi_cw_v", mi_cw_v},   {"mi_cw_g", mi_cw_g},   {"mi_cv_g", mi_cv_g},
          {"mi_cwv_g", mi_cwv_g}, {"mi_cw_vg", mi_cw_vg}, {"mi_cv_wg", mi_cv_wg},
          {"mi3_cwv", mi3_cwv},   {"mi3_cwv_g", mi3_cwv_g}};
}

ExactQuantities ExactQuantities::from_json(const nlohmann::json& j) {
  ExactQuantities q;
  q.h_c = j.at("h_c");
  q.h_c_g = j.at("h_c_g");
  q.h_c_w = j.at("h_c_w");
  q.h_c_v = j.at("h_c_v");
  q.h_c_wg = j.at("h_c_wg");
  q.h_c_vg = j.at("h_c_vg");
  q.h_c_wv = j.at("h_c_wv");
  q.h_c_wvg = j.at("h_c_wvg");
  q.mi_cg = j.at("mi_cg");
  q.mi_cw = j.at("mi_cw");
  q.mi_cv = j.at("mi_cv");
  q.mi_cwv = j.at("mi_cwv");
  q.mi_cw_v = j.at("mi_cw_v");
  q.mi_cw_g = j.at("mi_cw_g");
  q.mi_cv_g = j.at("mi_cv_g");
  q.mi_cwv_g = j.at("mi_cwv_g");
  q.mi_cw_vg = j.at("mi_cw_vg");
  q.mi_cv_wg = j.at("mi_cv_wg");
  q.mi3_cwv = j.at("mi3_cwv");
  q.mi3_cwv_g = j.at("mi3_cwv_g");
  return q;
}

Dataset synth_generate(const SynthSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  Dataset d;
  d.class_names = spec.classes;
  d.gender_names = spec.genders;
  d.dim = spec.dim();

  // Alphabet over the whole string support, so any sample is covered.
  std::vector<char32_t> graphemes;
  std::vector<std::vector<char32_t>> decoded;
  for (const auto& s : spec.strings) {
    decoded.push_back(utf8::decode_nfc(s));
    graphemes.insert(graphemes.end(), decoded.back().begin(), decoded.back().end());
  }
  d.alphabet = corpus::Alphabet::from_graphemes(graphemes);

  const auto cum_gender = cumulative(spec.gender_probs);
  std::vector<std::vector<double>> cum_class, cum_string, cum_tag;
  for (const auto& row : spec.class_given_gender) cum_class.push_back(cumulative(row));
  for (const auto& row : spec.string_probs_given_class) cum_string.push_back(cumulative(row));
  for (const auto& row : spec.tag_probs_given_class) cum_tag.push_back(cumulative(row));

  Rng rng(derive_seed(seed, 0x73796e7468 /* "synth" */));
  d.lexemes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = rng.categorical(cum_gender);
    const std::size_t c = rng.categorical(cum_class[g]);
    const std::size_t w = rng.categorical(cum_string[c]);
    const std::size_t t = rng.categorical(cum_tag[c]);
    corpus::Lexeme lx;
    lx.form = spec.strings[w];
    lx.graphemes = decoded[w];
    lx.vector = spec.tag_vectors[t];
    lx.class_id = static_cast<int>(c);
    lx.gender_id = static_cast<int>(g);
    d.lexemes.push_back(std::move(lx));
  }
  d.validate();
  return d;
}

ExactQuantities exact_quantities(const SynthSpec& spec) {
  spec.validate();
  if (spec.joint_support_size() > kMaxJointSupport)
    throw std::invalid_argument("exact_quantities: joint support too large (" +
                                std::to_string(spec.joint_support_size()) + " states)");

  const std::size_t G = spec.genders.size(), K = spec.classes.size();
  const std::size_t S = spec.strings.size(), T = spec.tags.size();
  const auto& pg = spec.gender_probs;
  const auto& pcg = spec.class_given_gender;       // [g][c]
  const auto& pw = spec.string_probs_given_class;  // [c][s]
  const auto& pt = spec.tag_probs_given_class;     // [c][t]

  // p(c) and p(g, c).
  std::vector<double> pc(K, 0.0);
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t c = 0; c < K; ++c) pc[c] += pg[g] * pcg[g][c];

  // H(C | conditioning set). The generative factorization keeps every
  // conditional distribution a short sum, so each entropy is one pass over
  // the relevant cells; summation order is fixed for bit-determinism.
  ExactQuantities q;

  for (std::size_t c = 0; c < K; ++c) q.h_c -= xlog2x(pc[c]);

  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t c = 0; c < K; ++c) q.h_c_g -= pg[g] * xlog2x(pcg[g][c]);

  // H(C|W): p(c, w) = p(c) p(w|c).
  for (std::size_t s = 0; s < S; ++s) {
    double pw_marginal = 0.0;
    for (std::size_t c = 0; c < K; ++c) pw_marginal += pc[c] * pw[c][s];
    if (pw_marginal <= 0.0) continue;
    for (std::size_t c = 0; c < K; ++c) {
      const double joint = pc[c] * pw[c][s];
      if (joint > 0.0) q.h_c_w -= joint * std::log2(joint / pw_marginal);
    }
  }

  // H(C|V) = H(C|Tag): p(c, t) = p(c) p(t|c).
  for (std::size_t t = 0; t < T; ++t) {
    double pt_marginal = 0.0;
    for (std::size_t c = 0; c < K; ++c) pt_marginal += pc[c] * pt[c][t];
    if (pt_marginal <= 0.0) continue;
    for (std::size_t c = 0; c < K; ++c) {
      const double joint = pc[c] * pt[c][t];
      if (joint > 0.0) q.h_c_v -= joint * std::log2(joint / pt_marginal);
    }
  }

  // H(C|W,G): p(g, c, w) = p(g) p(c|g) p(w|c).
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t s = 0; s < S; ++s) {
      double denom = 0.0;
      for (std::size_t c = 0; c < K; ++c) denom += pg[g] * pcg[g][c] * pw[c][s];
      if (denom <= 0.0) continue;
      for (std::size_t c = 0; c < K; ++c) {
        const double joint = pg[g] * pcg[g][c] * pw[c][s];
        if (joint > 0.0) q.h_c_wg -= joint * std::log2(joint / denom);
      }
    }
  }

  // H(C|V,G).
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t t = 0; t < T; ++t) {
      double denom = 0.0;
      for (std::size_t c = 0; c < K; ++c) denom += pg[g] * pcg[g][c] * pt[c][t];
      if (denom <= 0.0) continue;
      for (std::size_t c = 0; c < K; ++c) {
        const double joint = pg[g] * pcg[g][c] * pt[c][t];
        if (joint > 0.0) q.h_c_vg -= joint * std::log2(joint / denom);
      }
    }
  }

  // H(C|W,V): p(c, w, t) = p(c) p(w|c) p(t|c).
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      double denom = 0.0;
      for (std::size_t c = 0; c < K; ++c) denom += pc[c] * pw[c][s] * pt[c][t];
      if (denom <= 0.0) continue;
      for (std::size_t c = 0; c < K; ++c) {
        const double joint = pc[c] * pw[c][s] * pt[c][t];
        if (joint > 0.0) q.h_c_wv -= joint * std::log2(joint / denom);
      }
    }
  }

  // H(C|W,V,G).
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t t = 0; t < T; ++t) {
        double denom = 0.0;
        for (std::size_t c = 0; c < K; ++c) denom += pg[g] * pcg[g][c] * pw[c][s] * pt[c][t];
        if (denom <= 0.0) continue;
        for (std::size_t c = 0; c < K; ++c) {
          const double joint = pg[g] * pcg[g][c] * pw[c][s] * pt[c][t];
          if (joint > 0.0) q.h_c_wvg -= joint * std::log2(joint / denom);
        }
      }
    }
  }

  q.mi_cg = q.h_c - q.h_c_g;
  q.mi_cw = q.h_c - q.h_c_w;
  q.mi_cv = q.h_c - q.h_c_v;
  q.mi_cwv = q.h_c - q.h_c_wv;
  q.mi_cw_v = q.h_c_v - q.h_c_wv;
  q.mi_cw_g = q.h_c_g - q.h_c_wg;
  q.mi_cv_g = q.h_c_g - q.h_c_vg;
  q.mi_cwv_g = q.h_c_g - q.h_c_wvg;
  q.mi_cw_vg = q.h_c_vg - q.h_c_wvg;
  q.mi_cv_wg = q.h_c_wg - q.h_c_wvg;
  q.mi3_cwv = q.mi_cw - q.mi_cw_v;
  q.mi3_cwv_g = q.mi_cw_g - q.mi_cw_vg;
  return q;
}

namespace detail {
// Defined in the generated synth_reference_data.cpp.
const char* reference_language_json(const std::string& name);
}  // namespace detail

ReferenceLanguage reference_language(const std::string& name) {
  const char* raw = detail::reference_language_json(name);
  if (raw == nullptr)
    throw std::invalid_argument(
        "reference_language: unknown name '" + name +
        "' (expected L0-independent, L1-formful, L2-meaningful or L3-redundant)");
  const nlohmann::json j = nlohmann::json::parse(raw);
  ReferenceLanguage out;
  out.spec = SynthSpec::from_json(j);
  out.expected = ExactQuantities::from_json(j.at("expected_bits"));
  return out;
}

void write_lexicon_tsv(const Dataset& d, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "lemma\tclass\tgender\n";
  for (const auto& lx : d.lexemes)
    os << lx.form << "\t" << d.class_names[static_cast<std::size_t>(lx.class_id)] << "\t"
       << d.gender_names[static_cast<std::size_t>(lx.gender_id)] << "\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_embedding_text(const Dataset& d, const std::string& path) {
  // One vector per distinct form: the modal vector among its occurrences
  // (deterministic tie-break), since the interchange format keys by token.
  std::map<std::string, std::map<std::string, std::pair<std::size_t, const Vector*>>> counts;
  std::vector<std::string> order;
  for (const auto& lx : d.lexemes) {
    auto [it, fresh] = counts.try_emplace(lx.form);
    if (fresh) order.push_back(lx.form);
    std::string key(reinterpret_cast<const char*>(lx.vector.data()),
                    sizeof(double) * static_cast<std::size_t>(lx.vector.size()));
    auto& slot = it->second[key];
    slot.first += 1;
    slot.second = &lx.vector;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << order.size() << " " << d.dim << "\n";
  os.precision(17);
  for (const auto& form : order) {
    const Vector* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [key, slot] : counts[form]) {
      if (slot.first > best_count) {
        best_count = slot.first;
        best = slot.second;
      }
    }
    os << form;
    for (Eigen::Index i = 0; i < best->size(); ++i) os << " " << (*best)[i];
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace declmi::synth
