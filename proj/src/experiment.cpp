#include "declmi/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "declmi/jsonl_log.hpp"
#include "declmi/rng.hpp"
#include "declmi/stats.hpp"
#include "declmi/synth.hpp"

namespace declmi::experiment {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("DECLMI_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(0..n-1) on up to `threads` concurrent std::async tasks; results
// land by index, so scheduling cannot affect the output.
template <typename Fn>
void parallel_rounds(int n, int threads, Fn&& fn) {
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  for (int start = 0; start < n; start += threads) {
    std::vector<std::future<void>> batch;
    const int end = std::min(n, start + threads);
    for (int i = start; i < end; ++i)
      batch.push_back(std::async(std::launch::async, [&fn, i] { fn(i); }));
    for (auto& f : batch) f.get();
  }
}

}  // namespace

nlohmann::json HyperoptConfig::to_json() const {
  return {{"budget", budget},
          {"epochs", {epochs_lo, epochs_hi}},
          {"hidden", {hidden_lo, hidden_hi}},
          {"layers", {layers_lo, layers_hi}},
          {"pca_k", {pca_lo, pca_hi}},
          {"learning_rate", {lr_lo, lr_hi}}};
}

HyperoptConfig HyperoptConfig::from_json(const nlohmann::json& j) {
  HyperoptConfig h;
  h.budget = j.value("budget", 50);
  auto pair = [&](const char* key, auto& lo, auto& hi) {
    if (j.contains(key)) {
      lo = j.at(key).at(0);
      hi = j.at(key).at(1);
    }
  };
  pair("epochs", h.epochs_lo, h.epochs_hi);
  pair("hidden", h.hidden_lo, h.hidden_hi);
  pair("layers", h.layers_lo, h.layers_hi);
  pair("pca_k", h.pca_lo, h.pca_hi);
  pair("learning_rate", h.lr_lo, h.lr_hi);
  return h;
}

void ExperimentConfig::validate() const {
  if (folds < 3) throw std::invalid_argument("config: folds must be >= 3");
  if (min_class_size < 1) throw std::invalid_argument("config: min_class_size must be >= 1");
  if (hyperopt.budget < 1) throw std::invalid_argument("config: hyperopt budget must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha outside (0,1)");
  if (quantities.empty()) throw std::invalid_argument("config: no quantities requested");
  for (const auto& q : quantities) {
    const auto& all = all_quantities();
    if (std::find(all.begin(), all.end(), q) == all.end())
      throw std::invalid_argument("config: unknown quantity '" + q + "'");
  }
  const bool has_files = !lexicon_path.empty() && !embedding_path.empty();
  if (has_files == synth.has_value())
    throw std::invalid_argument("config: exactly one of file paths or a synth source required");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["language"] = language;
  if (!lexicon_path.empty()) j["lexicon"] = lexicon_path;
  if (!embedding_path.empty()) j["embeddings"] = embedding_path;
  if (synth) j["synth"] = {{"reference", synth->reference}, {"samples", synth->samples}};
  j["folds"] = folds;
  j["min_class_size"] = min_class_size;
  j["stratified_folds"] = stratified_folds;
  j["allow_duplicate_rows"] = allow_duplicate_rows;
  j["seed"] = seed;
  j["quantities"] = quantities;
  j["hyperopt"] = hyperopt.to_json();
  j["alpha"] = alpha;
  j["batch_size"] = batch_size;
  j["grapheme_embed"] = grapheme_embed;
  j["gender_embed"] = gender_embed;
  j["condition_on_gender"] = condition_on_gender;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.language = j.value("language", "default");
  c.lexicon_path = j.value("lexicon", "");
  c.embedding_path = j.value("embeddings", "");
  if (j.contains("synth")) {
    SynthSource s;
    s.reference = j.at("synth").at("reference").get<std::string>();
    s.samples = j.at("synth").value("samples", std::size_t{50000});
    c.synth = s;
  }
  c.folds = j.value("folds", 10);
  c.min_class_size = j.value("min_class_size", 20);
  c.stratified_folds = j.value("stratified_folds", false);
  c.allow_duplicate_rows = j.value("allow_duplicate_rows", false);
  c.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("quantities")) c.quantities = j.at("quantities").get<std::vector<std::string>>();
  if (j.contains("hyperopt")) c.hyperopt = HyperoptConfig::from_json(j.at("hyperopt"));
  c.alpha = j.value("alpha", 0.01);
  c.batch_size = j.value("batch_size", 64);
  c.grapheme_embed = j.value("grapheme_embed", 16);
  c.gender_embed = j.value("gender_embed", 16);
  c.condition_on_gender = j.value("condition_on_gender", true);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path);
  nlohmann::json j;
  is >> j;
  return from_json(j);
}

nlohmann::json QuantityResult::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["ok"] = ok;
  if (!error.empty()) j["error"] = error;
  if (ok) j["report"] = report.to_json();
  if (!best_hyper.is_null()) j["best_hyper"] = best_hyper;
  return j;
}

QuantityResult QuantityResult::from_json(const nlohmann::json& j) {
  QuantityResult q;
  q.name = j.at("name").get<std::string>();
  q.ok = j.at("ok").get<bool>();
  q.error = j.value("error", "");
  if (j.contains("report")) q.report = estimation::MIReport::from_json(j.at("report"));
  if (j.contains("best_hyper")) q.best_hyper = j.at("best_hyper");
  return q;
}

const QuantityResult* ExperimentResult::find(const std::string& name) const {
  for (const auto& q : quantities)
    if (q.name == name) return &q;
  return nullptr;
}

namespace {

nlohmann::json surprisal_rows_to_json(const std::vector<SurprisalRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"form", r.form}, {"class", r.class_name}, {"gender", r.gender_name},
                   {"bits", r.bits}});
  return arr;
}

std::vector<SurprisalRow> surprisal_rows_from_json(const nlohmann::json& arr) {
  std::vector<SurprisalRow> rows;
  for (const auto& j : arr)
    rows.push_back({j.at("form").get<std::string>(), j.at("class").get<std::string>(),
                    j.at("gender").get<std::string>(), j.at("bits").get<double>()});
  return rows;
}

}  // namespace

nlohmann::json ExperimentResult::to_json() const {
  nlohmann::json j;
  j["config"] = config_echo;
  // Methodological choices the numbers depend on but the configuration
  // cannot express.
  j["interpretation_notes"] = {
      "hyperparameters are searched once per quantity on round 0's split and reused "
      "for every cross-validation round",
      "significance compares per-item surprisal samples under the weaker vs the stronger "
      "conditioning (tripartite: the two pointwise conditional-MI samples) with Welch's "
      "t-test, two-sided, BH-corrected across the run's whole family of quantities"};
  j["class_names"] = class_names;
  j["gender_names"] = gender_names;
  j["class_sizes"] = class_sizes;
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& q : quantities) qs.push_back(q.to_json());
  j["quantities"] = qs;
  nlohmann::json hi, lo;
  for (const auto& [k, v] : surprisal_highest) hi[k] = surprisal_rows_to_json(v);
  for (const auto& [k, v] : surprisal_lowest) lo[k] = surprisal_rows_to_json(v);
  j["surprisal_highest"] = hi.is_null() ? nlohmann::json::object() : hi;
  j["surprisal_lowest"] = lo.is_null() ? nlohmann::json::object() : lo;
  j["timings"] = timings_seconds;
  return j;
}

ExperimentResult ExperimentResult::from_json(const nlohmann::json& j) {
  ExperimentResult r;
  r.config_echo = j.at("config");
  r.class_names = j.at("class_names").get<std::vector<std::string>>();
  r.gender_names = j.at("gender_names").get<std::vector<std::string>>();
  r.class_sizes = j.at("class_sizes").get<std::vector<std::size_t>>();
  for (const auto& q : j.at("quantities")) r.quantities.push_back(QuantityResult::from_json(q));
  for (const auto& [k, v] : j.at("surprisal_highest").items())
    r.surprisal_highest[k] = surprisal_rows_from_json(v);
  for (const auto& [k, v] : j.at("surprisal_lowest").items())
    r.surprisal_lowest[k] = surprisal_rows_from_json(v);
  r.timings_seconds = j.at("timings").get<std::map<std::string, double>>();
  return r;
}

namespace {

using corpus::Dataset;
using corpus::FoldPlan;
using estimation::EntropyEstimate;
using estimation::MIReport;

struct UnionItem {
  std::size_t dataset_index;
  int class_id;
  int gender_id;
};

// Per-item surprisals over the cross-validation union for one model family,
// in (round, within-round) order.
struct ModelRun {
  EntropyEstimate pooled;
  std::vector<double> item_bits;  // aligned with the union order
  nlohmann::json best_hyper;
  double search_best_value = 0.0;
};

models::ConditioningSpec spec_for(const std::string& quantity, bool gender, int pca_k) {
  models::ConditioningSpec s;
  s.use_gender = gender;
  s.pca_k = pca_k;
  if (quantity == "form") {
    s.use_form = true;
  } else if (quantity == "meaning") {
    s.use_meaning = true;
  } else if (quantity == "both") {
    s.use_form = true;
    s.use_meaning = true;
  } else {
    throw std::logic_error("spec_for: not a model quantity");
  }
  return s;
}

models::TrainHyper hyper_from_config(const ExperimentConfig& cfg, const nlohmann::json& j) {
  models::TrainHyper h;
  h.epochs = static_cast<int>(j.at("epochs").get<std::int64_t>());
  h.hidden = static_cast<int>(j.at("hidden").get<std::int64_t>());
  h.layers = static_cast<int>(j.at("layers").get<std::int64_t>());
  h.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("pca_k")) h.pca_k = static_cast<int>(j.at("pca_k").get<std::int64_t>());
  h.batch_size = cfg.batch_size;
  h.grapheme_embed = cfg.grapheme_embed;
  h.gender_embed = cfg.gender_embed;
  return h;
}

hyperopt::SearchSpace space_for(const ExperimentConfig& cfg, const std::string& quantity,
                                int dim) {
  using hyperopt::DimType;
  using hyperopt::Dimension;
  const auto& hc = cfg.hyperopt;
  hyperopt::SearchSpace space;
  space.dims.push_back({"epochs", DimType::IntegerRange, double(hc.epochs_lo),
                        double(hc.epochs_hi), {}});
  space.dims.push_back({"hidden", DimType::IntegerRange, double(hc.hidden_lo),
                        double(hc.hidden_hi), {}});
  space.dims.push_back({"layers", DimType::IntegerRange, double(hc.layers_lo),
                        double(hc.layers_hi), {}});
  space.dims.push_back({"learning_rate", DimType::LogUniformReal, hc.lr_lo, hc.lr_hi, {}});
  if (quantity == "both") {
    const int hi = std::min(hc.pca_hi, dim);
    const int lo = std::min(hc.pca_lo, hi);
    space.dims.push_back({"pca_k", DimType::IntegerRange, double(lo), double(hi), {}});
  }
  return space;
}

nlohmann::json trial_log_header(const ExperimentConfig& cfg, const std::string& quantity,
                                const hyperopt::SearchSpace& space) {
  std::vector<std::string> names;
  for (const auto& d : space.dims) names.push_back(d.name);
  return {{"log_header", true},
          {"quantity", quantity},
          {"seed", cfg.seed},
          {"dimensions", names}};
}

// Reads a trial log, validating its header against the current search; a
// log written under a different seed or space cannot be replayed.
std::vector<hyperopt::TrialRecord> read_trial_log(const std::string& path,
                                                  const nlohmann::json& header) {
  std::vector<hyperopt::TrialRecord> records;
  std::ifstream is(path);
  if (!is) return records;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (first) {
      first = false;
      if (j.value("log_header", false)) {
        for (const char* key : {"quantity", "seed", "dimensions"})
          if (j.at(key) != header.at(key))
            throw std::runtime_error("trial log " + path +
                                     " was written by a different search configuration");
        continue;
      }
    }
    records.push_back(hyperopt::TrialRecord::from_json(j));
  }
  return records;
}

ModelRun run_model_quantity(const ExperimentConfig& cfg, const std::string& quantity,
                            const Dataset& data, const FoldPlan& plan,
                            const std::vector<UnionItem>& union_items,
                            const RunOptions& options, bool search_only = false) {
  const std::uint64_t qhash = fnv1a(quantity);
  const auto space = space_for(cfg, quantity, data.dim);

  // Hyperparameter search on round 0's split; the winner is reused for
  // every round so the trial budget stays at cfg.hyperopt.budget total.
  const auto ho_train = corpus::gather(data, plan.train_indices(0));
  const auto ho_valid = corpus::gather(data, plan.validation_indices(0));
  auto objective = [&](const nlohmann::json& config) {
    const auto spec = spec_for(quantity, cfg.condition_on_gender,
                               config.contains("pca_k")
                                   ? static_cast<int>(config.at("pca_k").get<std::int64_t>())
                                   : 2);
    const auto hyper = hyper_from_config(cfg, config);
    const std::uint64_t train_seed =
        derive_seed(cfg.seed, qhash, fnv1a(config.dump()));
    const auto model = models::train_classifier(ho_train, ho_valid, data, spec, hyper, train_seed);
    return model.meta.best_validation_nats;
  };

  hyperopt::BayesOptions bo;
  std::string log_path;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log_path = (std::filesystem::path(options.out_dir) / ("trials_" + quantity + ".jsonl")).string();
    const auto header = trial_log_header(cfg, quantity, space);
    bo.resume = read_trial_log(log_path, header);
    if (static_cast<int>(bo.resume.size()) > cfg.hyperopt.budget) {
      bo.resume.resize(static_cast<std::size_t>(cfg.hyperopt.budget));
    }
    if (bo.resume.empty()) {
      std::ofstream os(log_path, std::ios::trunc);
      os << header.dump() << "\n";
    }
    bo.on_trial = [log_path](const hyperopt::TrialRecord& rec) {
      std::ofstream os(log_path, std::ios::app);
      nlohmann::json j = rec.to_json();
      j["time"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
      os << j.dump() << "\n";
    };
  }
  const auto search = hyperopt::bayes_optimize(objective, space, cfg.hyperopt.budget,
                                               derive_seed(cfg.seed, qhash), bo);
  log::emit({{"event", "hyperopt_done"},
             {"quantity", quantity},
             {"best_value_nats", search.best_value},
             {"best_config", search.best_config}});
  if (search_only) {
    ModelRun run;
    run.best_hyper = search.best_config;
    run.search_best_value = search.best_value;
    return run;
  }

  // One training per cross-validation round with the winning configuration.
  const int best_pca_k =
      search.best_config.contains("pca_k")
          ? static_cast<int>(search.best_config.at("pca_k").get<std::int64_t>())
          : 2;
  const auto spec = spec_for(quantity, cfg.condition_on_gender, best_pca_k);
  const auto hyper = hyper_from_config(cfg, search.best_config);
  std::vector<EntropyEstimate> fold_estimates(static_cast<std::size_t>(cfg.folds));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.folds));
  parallel_rounds(cfg.folds, resolve_threads(options.threads), [&](int r) {
    try {
      const auto train = corpus::gather(data, plan.train_indices(r));
      const auto valid = corpus::gather(data, plan.validation_indices(r));
      const auto test = corpus::gather(data, plan.test_indices(r));
      const auto model = models::train_classifier(
          train, valid, data, spec, hyper,
          derive_seed(cfg.seed, qhash, static_cast<std::uint64_t>(r)));
      auto est = estimation::heldout_cross_entropy(model.predictor(), test);
      est.fold_signature = plan.signature;
      fold_estimates[static_cast<std::size_t>(r)] = std::move(est);
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ModelRun run;
  run.best_hyper = search.best_config;
  run.search_best_value = search.best_value;
  run.pooled = estimation::pool_folds(fold_estimates);
  run.item_bits = run.pooled.per_item_bits;
  if (run.item_bits.size() != union_items.size())
    throw std::logic_error("run_model_quantity: union size mismatch");
  return run;
}

std::vector<std::optional<double>> per_class_means(const std::vector<UnionItem>& items,
                                                   const std::vector<double>& pointwise,
                                                   std::size_t n_classes) {
  std::vector<double> sums(n_classes, 0.0);
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    sums[static_cast<std::size_t>(items[i].class_id)] += pointwise[i];
    counts[static_cast<std::size_t>(items[i].class_id)] += 1;
  }
  std::vector<std::optional<double>> out(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c)
    if (counts[c] > 0) out[c] = sums[c] / static_cast<double>(counts[c]);
  return out;
}

}  // namespace

namespace {

Dataset load_experiment_data(const ExperimentConfig& cfg) {
  Dataset data;
  if (cfg.synth) {
    const auto ref = synth::reference_language(cfg.synth->reference);
    data = synth::synth_generate(ref.spec, cfg.synth->samples, derive_seed(cfg.seed, 0xda7a));
  } else {
    corpus::LoadOptions lo;
    lo.allow_duplicate_rows = cfg.allow_duplicate_rows;
    data = corpus::load_lexicon(cfg.lexicon_path, cfg.embedding_path, lo);
  }
  data = corpus::filter_min_class_size(data, cfg.min_class_size);
  if (data.n_classes() < 2)
    throw std::runtime_error("run_experiment: fewer than 2 classes after filtering");
  return data;
}

}  // namespace

nlohmann::json run_hyperopt_stage(const ExperimentConfig& cfg, const std::string& quantity,
                                  const RunOptions& options) {
  cfg.validate();
  if (quantity != "form" && quantity != "meaning" && quantity != "both")
    throw std::invalid_argument("run_hyperopt_stage: '" + quantity + "' is not a model quantity");
  const Dataset data = load_experiment_data(cfg);
  const FoldPlan plan =
      corpus::make_folds(data, cfg.folds, derive_seed(cfg.seed, 0x666f6c64), cfg.stratified_folds);
  std::vector<UnionItem> union_items;  // unused by the search itself
  union_items.reserve(data.size());
  for (int r = 0; r < cfg.folds; ++r)
    for (std::size_t i : plan.test_indices(r))
      union_items.push_back({i, data.lexemes[i].class_id, data.lexemes[i].gender_id});
  const ModelRun run = run_model_quantity(cfg, quantity, data, plan, union_items, options,
                                          /*search_only=*/true);
  return {{"quantity", quantity}, {"best_config", run.best_hyper},
          {"best_value_nats", run.search_best_value}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  ExperimentResult result;
  result.config_echo = cfg.to_json();
  const auto t_start = std::chrono::steady_clock::now();

  // Stage: data.
  auto t0 = std::chrono::steady_clock::now();
  Dataset data = load_experiment_data(cfg);
  result.class_names = data.class_names;
  result.gender_names = data.gender_names;
  result.timings_seconds["load"] = seconds_since(t0);

  // Stage: folds and plug-in tables.
  t0 = std::chrono::steady_clock::now();
  const FoldPlan plan =
      corpus::make_folds(data, cfg.folds, derive_seed(cfg.seed, 0x666f6c64), cfg.stratified_folds);
  const auto table = corpus::build_count_table(data);
  result.class_sizes.resize(static_cast<std::size_t>(data.n_classes()));
  for (std::size_t c = 0; c < result.class_sizes.size(); ++c)
    result.class_sizes[c] = static_cast<std::size_t>(table.class_total(c));

  auto h_c = estimation::plugin_entropy(table);
  auto h_cg = estimation::plugin_conditional_entropy(table);
  h_c.fold_signature = plan.signature;
  h_cg.fold_signature = plan.signature;

  // Union of the test folds in (round, index) order; with k folds it is a
  // permutation of the whole dataset.
  std::vector<UnionItem> union_items;
  union_items.reserve(data.size());
  for (int r = 0; r < cfg.folds; ++r)
    for (std::size_t i : plan.test_indices(r))
      union_items.push_back({i, data.lexemes[i].class_id, data.lexemes[i].gender_id});

  std::vector<double> baseline_marginal_bits, baseline_gender_bits;
  baseline_marginal_bits.reserve(union_items.size());
  baseline_gender_bits.reserve(union_items.size());
  const double total = static_cast<double>(table.total());
  for (const auto& item : union_items) {
    const double pc = static_cast<double>(table.class_total(static_cast<std::size_t>(item.class_id))) / total;
    baseline_marginal_bits.push_back(-std::log2(pc));
    baseline_gender_bits.push_back(-std::log2(table.class_given_gender(
        static_cast<std::size_t>(item.class_id), static_cast<std::size_t>(item.gender_id))));
  }
  result.timings_seconds["folds"] = seconds_since(t0);

  const bool gender_conditioned = cfg.condition_on_gender && data.n_genders() > 1;
  const EntropyEstimate& baseline_entropy = gender_conditioned ? h_cg : h_c;
  const std::vector<double>& baseline_bits =
      gender_conditioned ? baseline_gender_bits : baseline_marginal_bits;

  std::map<std::string, ModelRun> runs;
  auto ensure_model_run = [&](const std::string& q) -> const ModelRun& {
    auto it = runs.find(q);
    if (it == runs.end()) {
      const auto tq = std::chrono::steady_clock::now();
      it = runs.emplace(q, run_model_quantity(cfg, q, data, plan, union_items, options)).first;
      result.timings_seconds["quantity." + q] = seconds_since(tq);
    }
    return it->second;
  };

  auto add_surprisal_tables = [&](const std::string& q, const std::vector<double>& bits) {
    std::vector<std::size_t> idx(union_items.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto form_of = [&](std::size_t i) -> const std::string& {
      return data.lexemes[union_items[i].dataset_index].form;
    };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (bits[a] != bits[b]) return bits[a] > bits[b];
      return form_of(a) < form_of(b);
    });
    const std::size_t n = std::min<std::size_t>(5, idx.size());
    auto row = [&](std::size_t i) {
      return SurprisalRow{form_of(i),
                          data.class_names[static_cast<std::size_t>(union_items[i].class_id)],
                          data.gender_names[static_cast<std::size_t>(union_items[i].gender_id)],
                          bits[i]};
    };
    for (std::size_t i = 0; i < n; ++i) result.surprisal_highest[q].push_back(row(idx[i]));
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (bits[a] != bits[b]) return bits[a] < bits[b];
      return form_of(a) < form_of(b);
    });
    for (std::size_t i = 0; i < n; ++i) result.surprisal_lowest[q].push_back(row(idx[i]));
  };

  for (const std::string& quantity : cfg.quantities) {
    QuantityResult qr;
    qr.name = quantity;
    try {
      if (quantity == "gender") {
        MIReport report = estimation::mi_bipartite(h_c, h_cg);
        report.name = "mi_c_g";
        estimation::uncertainty_coefficient(report, h_c);
        report.contrast_weak = baseline_marginal_bits;
        report.contrast_strong = baseline_gender_bits;
        qr.report = std::move(report);
      } else if (quantity == "form" || quantity == "meaning" || quantity == "both") {
        const ModelRun& run = ensure_model_run(quantity);
        MIReport report = estimation::mi_bipartite(baseline_entropy, run.pooled);
        report.name = quantity == "form" ? "mi_c_w_given_g"
                      : quantity == "meaning" ? "mi_c_v_given_g"
                                              : "mi_c_wv_given_g";
        estimation::uncertainty_coefficient(report, baseline_entropy);
        std::vector<double> pointwise(union_items.size());
        for (std::size_t i = 0; i < union_items.size(); ++i)
          pointwise[i] = baseline_bits[i] - run.item_bits[i];
        report.per_class_bits = per_class_means(union_items, pointwise,
                                                static_cast<std::size_t>(data.n_classes()));
        report.contrast_weak = baseline_bits;
        report.contrast_strong = run.item_bits;
        report.fold_values["hq"] = run.pooled.per_fold_bits;
        qr.best_hyper = run.best_hyper;
        qr.report = std::move(report);
        add_surprisal_tables(quantity, run.item_bits);
      } else {  // tripartite
        const ModelRun& form_run = ensure_model_run("form");
        const ModelRun& meaning_run = ensure_model_run("meaning");
        const ModelRun& both_run = ensure_model_run("both");
        auto reports = estimation::mi_tripartite(baseline_entropy, form_run.pooled,
                                                 meaning_run.pooled, both_run.pooled);
        MIReport report = std::move(reports.tripartite);
        report.name = "mi_c_w_v_given_g";
        estimation::uncertainty_coefficient(report, baseline_entropy);
        // Pointwise MI(C;W|G) against pointwise MI(C;W|V,G).
        std::vector<double> a(union_items.size()), b(union_items.size()), diff(union_items.size());
        for (std::size_t i = 0; i < union_items.size(); ++i) {
          a[i] = baseline_bits[i] - form_run.item_bits[i];
          b[i] = meaning_run.item_bits[i] - both_run.item_bits[i];
          diff[i] = a[i] - b[i];
        }
        report.per_class_bits =
            per_class_means(union_items, diff, static_cast<std::size_t>(data.n_classes()));
        report.contrast_weak = a;
        report.contrast_strong = b;
        qr.report = std::move(report);
      }
      qr.ok = true;
    } catch (const std::exception& e) {
      qr.ok = false;
      qr.error = e.what();
      log::emit({{"event", "quantity_failed"}, {"quantity", quantity}, {"error", e.what()}});
    }
    result.quantities.push_back(std::move(qr));
  }

  // Family-wide significance across every successful quantity.
  std::vector<MIReport*> family;
  for (auto& q : result.quantities)
    if (q.ok && q.report.contrast_weak.size() >= 2) family.push_back(&q.report);
  if (!family.empty()) stats::significance_suite(family, cfg.alpha);

  result.timings_seconds["total"] = seconds_since(t_start);
  return result;
}

}  // namespace declmi::experiment
