// declmi: measures, in bits, how much a noun's written form and its
// distributional meaning vector predict its declension class, controlling
// for grammatical gender.
#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "declmi/corpus.hpp"
#include "declmi/experiment.hpp"
#include "declmi/jsonl_log.hpp"
#include "declmi/report.hpp"
#include "declmi/synth.hpp"

namespace {

using declmi::experiment::ExperimentConfig;
using declmi::experiment::RunOptions;

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

void setup_file_log(const std::string& out_dir) {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  const std::string path = (std::filesystem::path(out_dir) / "log.jsonl").string();
  auto sink = std::make_shared<std::ofstream>(path, std::ios::app);
  declmi::log::set_sink([sink](const std::string& line) {
    *sink << line << "\n";
    sink->flush();
  });
}

ExperimentConfig load_config(const std::string& path, std::uint64_t* seed_override,
                             const std::vector<std::string>& quantities) {
  ExperimentConfig cfg = ExperimentConfig::from_file(path);
  if (seed_override != nullptr) cfg.seed = *seed_override;
  if (!quantities.empty()) cfg.quantities = quantities;
  cfg.validate();
  return cfg;
}

int run_and_emit(const ExperimentConfig& cfg, const std::string& out_dir, int threads) {
  RunOptions options;
  options.out_dir = out_dir;
  options.threads = threads;
  setup_file_log(out_dir);
  const auto result = declmi::experiment::run_experiment(cfg, options);
  for (const char* fmt : {"json", "csv", "markdown"})
    for (const auto& path : declmi::report::emit_report(result, fmt, out_dir))
      std::cout << "wrote " << path << "\n";
  bool all_ok = true;
  for (const auto& q : result.quantities) {
    std::cout << q.name << ": ";
    if (q.ok) {
      std::cout << q.report.value_bits << " bits";
      if (q.report.significance)
        std::cout << (q.report.significance->reject ? " (significant)" : " (not significant)");
      std::cout << "\n";
    } else {
      std::cout << "FAILED: " << q.error << "\n";
      all_ok = false;
    }
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information shared between declension class, form and meaning"};
  app.require_subcommand(1);

  std::string config_path, out_dir = env_or("DECLMI_OUT_DIR", "declmi-out");
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::vector<std::string> quantities;

  // run: the full pipeline.
  auto* run = app.add_subcommand("run", "End-to-end experiment");
  run->add_option("--config", config_path, "Experiment config JSON")->required();
  run->add_option("--seed", seed, "Override the config seed")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--out-dir", out_dir, "Output directory");
  run->add_option("--threads", threads, "Parallel cross-validation rounds");
  run->add_option("--quantity", quantities, "Restrict to these quantities");

  // ingest: validate and summarize a lexicon.
  auto* ingest = app.add_subcommand("ingest", "Load, validate and filter a lexicon");
  std::string lexicon_path, embedding_path;
  int min_class_size = 20;
  bool allow_duplicates = false;
  ingest->add_option("--lexicon", lexicon_path, "TSV lexicon path")->required();
  ingest->add_option("--embeddings", embedding_path, "Embedding text path")->required();
  ingest->add_option("--min-class-size", min_class_size, "Class-size floor");
  ingest->add_flag("--allow-duplicates", allow_duplicates, "Allow repeated lemma+class rows");

  // synth: materialize a reference language.
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic reference corpus");
  std::string synth_name = "L1-formful";
  std::size_t synth_samples = 50000;
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("--name", synth_name, "Reference language name");
  synth_cmd->add_option("--samples", synth_samples, "Number of lexemes to draw");
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--out-dir", out_dir, "Output directory");

  // hyperopt: search stage only.
  auto* hopt = app.add_subcommand("hyperopt", "Hyperparameter search for one quantity");
  std::string hopt_quantity = "form";
  hopt->add_option("--config", config_path, "Experiment config JSON")->required();
  hopt->add_option("--quantity", hopt_quantity, "form, meaning or both")->required();
  hopt->add_option("--out-dir", out_dir, "Output directory (trial log)");
  hopt->add_option("--seed", seed, "Override the config seed")->each([&](const std::string&) {
    seed_set = true;
  });

  // estimate: train/estimate stage, reusing existing trial logs.
  auto* estimate = app.add_subcommand("estimate", "Estimate MI reusing existing trial logs");
  estimate->add_option("--config", config_path, "Experiment config JSON")->required();
  estimate->add_option("--out-dir", out_dir, "Output directory with trial logs");
  estimate->add_option("--threads", threads, "Parallel cross-validation rounds");
  estimate->add_option("--quantity", quantities, "Restrict to these quantities");
  estimate->add_option("--seed", seed, "Override the config seed")->each([&](const std::string&) {
    seed_set = true;
  });

  // report: reformat an existing result.
  auto* report_cmd = app.add_subcommand("report", "Re-emit a stored result");
  std::string result_path, format = "markdown";
  report_cmd->add_option("--result", result_path, "result.json path")->required();
  report_cmd->add_option("--format", format, "json, csv or markdown");
  report_cmd->add_option("--out-dir", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed() || estimate->parsed()) {
      const auto cfg = load_config(config_path, seed_set ? &seed : nullptr, quantities);
      if (estimate->parsed()) {
        // The stage split: estimation refuses to start a search from nothing.
        auto needs_model = [&](const std::string& q) {
          return q == "form" || q == "meaning" || q == "both" || q == "tripartite";
        };
        std::vector<std::string> required;
        for (const auto& q : cfg.quantities) {
          if (q == "tripartite") {
            required.insert(required.end(), {"form", "meaning", "both"});
          } else if (needs_model(q)) {
            required.push_back(q);
          }
        }
        for (const auto& q : required) {
          const auto path = std::filesystem::path(out_dir) / ("trials_" + q + ".jsonl");
          if (!std::filesystem::exists(path))
            throw std::runtime_error("estimate: no trial log for '" + q +
                                     "'; run the hyperopt subcommand first (" + path.string() + ")");
        }
      }
      return run_and_emit(cfg, out_dir, threads);
    }

    if (ingest->parsed()) {
      declmi::corpus::LoadOptions lo;
      lo.allow_duplicate_rows = allow_duplicates;
      declmi::corpus::LoadStats stats;
      auto data = declmi::corpus::load_lexicon(lexicon_path, embedding_path, lo, &stats);
      data = declmi::corpus::filter_min_class_size(data, min_class_size);
      nlohmann::json summary{{"rows", stats.lexicon_rows},
                             {"retained", stats.retained},
                             {"dropped_no_embedding", stats.dropped_no_embedding},
                             {"after_min_class_size", data.size()},
                             {"classes", data.class_names},
                             {"genders", data.gender_names},
                             {"dim", data.dim}};
      std::cout << summary.dump(1) << "\n";
      return 0;
    }

    if (synth_cmd->parsed()) {
      const auto ref = declmi::synth::reference_language(synth_name);
      const auto data = declmi::synth::synth_generate(ref.spec, synth_samples, synth_seed);
      std::filesystem::create_directories(out_dir);
      const auto dir = std::filesystem::path(out_dir);
      declmi::synth::write_lexicon_tsv(data, (dir / "lexicon.tsv").string());
      declmi::synth::write_embedding_text(data, (dir / "embeddings.vec").string());
      nlohmann::json spec_json = ref.spec.to_json();
      spec_json["expected_bits"] = ref.expected.to_json();
      std::ofstream spec_os(dir / "spec.json");
      spec_os << spec_json.dump(1) << "\n";
      std::ofstream exact_os(dir / "exact.json");
      exact_os << declmi::synth::exact_quantities(ref.spec).to_json().dump(1) << "\n";
      std::cout << "wrote " << (dir / "lexicon.tsv").string() << " (+embeddings, spec, exact)\n";
      return 0;
    }

    if (hopt->parsed()) {
      auto cfg = ExperimentConfig::from_file(config_path);
      if (seed_set) cfg.seed = seed;
      RunOptions options;
      options.out_dir = out_dir;
      setup_file_log(out_dir);
      const auto best = declmi::experiment::run_hyperopt_stage(cfg, hopt_quantity, options);
      std::cout << best.dump(1) << "\n";
      return 0;
    }

    if (report_cmd->parsed()) {
      std::ifstream is(result_path);
      if (!is) throw std::runtime_error("cannot read " + result_path);
      nlohmann::json j;
      is >> j;
      const auto result = declmi::experiment::ExperimentResult::from_json(j);
      for (const auto& path : declmi::report::emit_report(result, format, out_dir))
        std::cout << "wrote " << path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
