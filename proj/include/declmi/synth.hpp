#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "declmi/corpus.hpp"

namespace declmi::synth {

using corpus::Dataset;
using numerics::Vector;

// A fully enumerable generative joint over (gender, class, form, meaning):
//   g ~ p(g), c ~ p(c|g), w ~ p(w|c), tag ~ p(tag|c), vector = embed(tag).
// Meaning is a deterministic embedding of a discrete tag so every quantity
// involving V is exactly computable.
struct SynthSpec {
  std::string name;
  int version = 1;
  std::vector<std::string> genders;
  std::vector<double> gender_probs;
  std::vector<std::string> classes;
  std::vector<std::vector<double>> class_given_gender;      // [gender][class]
  std::vector<std::string> strings;                         // union support
  std::vector<std::vector<double>> string_probs_given_class;  // [class][string]
  std::vector<std::string> tags;
  std::vector<std::vector<double>> tag_probs_given_class;   // [class][tag]
  std::vector<Vector> tag_vectors;                          // [tag], shared dim
  std::uint64_t seed = 0;

  void validate() const;
  int dim() const { return tag_vectors.empty() ? 0 : static_cast<int>(tag_vectors[0].size()); }
  std::size_t joint_support_size() const {
    return genders.size() * classes.size() * strings.size() * tags.size();
  }

  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

// Closed-form entropies and mutual information, all in bits.
struct ExactQuantities {
  double h_c = 0, h_c_g = 0, h_c_w = 0, h_c_v = 0;
  double h_c_wg = 0, h_c_vg = 0, h_c_wv = 0, h_c_wvg = 0;
  double mi_cg = 0;
  double mi_cw = 0, mi_cv = 0, mi_cwv = 0, mi_cw_v = 0;
  double mi_cw_g = 0, mi_cv_g = 0, mi_cwv_g = 0, mi_cw_vg = 0, mi_cv_wg = 0;
  double mi3_cwv = 0, mi3_cwv_g = 0;

  nlohmann::json to_json() const;
  static ExactQuantities from_json(const nlohmann::json& j);
};

// n i.i.d. draws; deterministic given the seed. Repeated (form, class)
// pairs are expected and legal here.
Dataset synth_generate(const SynthSpec& spec, std::size_t n, std::uint64_t seed);

// Exact computation by direct summation over the joint support. Throws
// when the support exceeds the enumerable budget.
ExactQuantities exact_quantities(const SynthSpec& spec);

struct ReferenceLanguage {
  SynthSpec spec;
  ExactQuantities expected;  // checked-in values, re-verified in tests
};

// Frozen, versioned reference specs:
//   L0-independent  all MI zero
//   L1-formful      form signal only
//   L2-meaningful   meaning signal only
//   L3-redundant    overlapping form/meaning signal, tripartite MI > 0
ReferenceLanguage reference_language(const std::string& name);

// Emission in the corpus interchange formats. The embedding file keys
// vectors by form, so a form that occurs with several tags exports the
// vector of its most frequent tag (deterministic tie-break).
void write_lexicon_tsv(const Dataset& d, const std::string& path);
void write_embedding_text(const Dataset& d, const std::string& path);

}  // namespace declmi::synth
