#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "declmi/corpus.hpp"
#include "declmi/estimation.hpp"
#include "declmi/hyperopt.hpp"
#include "declmi/models.hpp"

namespace declmi::experiment {

// The measurable quantities: "gender" is plug-in only (class vs gender);
// the rest contrast a trained model against the gender-conditioned
// baseline; "tripartite" is assembled from form, meaning and both.
inline const std::vector<std::string>& all_quantities() {
  static const std::vector<std::string> q{"gender", "form", "meaning", "both", "tripartite"};
  return q;
}

struct SynthSource {
  std::string reference;  // e.g. "L1-formful"
  std::size_t samples = 50000;
};

struct HyperoptConfig {
  int budget = 50;
  // Bounds searched for every model-based quantity. These are artifact
  // defaults; the published setup names the dimensions but not the ranges.
  int epochs_lo = 5, epochs_hi = 100;
  int hidden_lo = 32, hidden_hi = 512;
  int layers_lo = 1, layers_hi = 2;
  int pca_lo = 2, pca_hi = 300;
  double lr_lo = 1e-4, lr_hi = 1e-2;

  nlohmann::json to_json() const;
  static HyperoptConfig from_json(const nlohmann::json& j);
};

struct ExperimentConfig {
  std::string language = "default";
  std::string lexicon_path;     // file source...
  std::string embedding_path;
  std::optional<SynthSource> synth;  // ...or synthetic source
  int folds = 10;
  int min_class_size = 20;
  bool stratified_folds = false;
  bool allow_duplicate_rows = false;
  std::uint64_t seed = 1;
  std::vector<std::string> quantities = all_quantities();
  HyperoptConfig hyperopt;
  double alpha = 0.01;
  // Fixed (non-searched) knobs.
  int batch_size = 64;
  int grapheme_embed = 16;
  int gender_embed = 16;
  bool condition_on_gender = true;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
};

struct QuantityResult {
  std::string name;
  bool ok = false;
  std::string error;
  estimation::MIReport report;
  nlohmann::json best_hyper;  // model-based quantities only

  nlohmann::json to_json() const;
  static QuantityResult from_json(const nlohmann::json& j);
};

struct SurprisalRow {
  std::string form, class_name, gender_name;
  double bits = 0.0;
};

struct ExperimentResult {
  nlohmann::json config_echo;
  std::vector<std::string> class_names;
  std::vector<std::string> gender_names;
  std::vector<std::size_t> class_sizes;
  std::vector<QuantityResult> quantities;
  // Five highest / five lowest surprisal items per model-based quantity.
  std::map<std::string, std::vector<SurprisalRow>> surprisal_highest;
  std::map<std::string, std::vector<SurprisalRow>> surprisal_lowest;
  std::map<std::string, double> timings_seconds;

  const QuantityResult* find(const std::string& name) const;
  nlohmann::json to_json() const;          // timings under a separate key
  static ExperimentResult from_json(const nlohmann::json& j);
};

struct RunOptions {
  std::string out_dir;     // trial logs land here; empty = no logs written
  int threads = 0;         // 0 = hardware concurrency; DECLMI_THREADS overrides
};

// Search stage alone: hyperopt for one model-based quantity on round 0's
// train/validation split. Writes/extends the trial log when out_dir is
// set; returns {"best_config", "best_value_nats", "trials"}.
nlohmann::json run_hyperopt_stage(const ExperimentConfig& cfg, const std::string& quantity,
                                  const RunOptions& options = {});

// load -> filter -> fold -> per quantity (hyperopt once on round 0, then
// one training per cross-validation round) -> MI assembly -> significance.
// A failed quantity is recorded and the rest continue. Deterministic given
// config + seed.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

}  // namespace declmi::experiment
