#pragma once

// Experiment configuration, the end-to-end adversarial training loop, and the
// multi-run comparison / estimator sweep drivers behind the CLI.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdan/analysis.hpp"
#include "cdan/conditioning.hpp"
#include "cdan/datagen.hpp"
#include "cdan/networks.hpp"
#include "cdan/objectives.hpp"
#include "cdan/optim.hpp"

namespace cdan {

struct ExperimentConfig {
  // Dataset: a generator spec, or two CSV files when source_csv is set.
  ShiftSpec data = default_spec(Generator::RotatedBlobs);
  std::string source_csv;
  std::string target_csv;
  // Fixed dataset seed; when unset the run seed is used.
  std::optional<std::uint64_t> data_seed;

  std::size_t feature_hidden = 64;
  std::size_t feature_width = 64;
  std::size_t disc_hidden = 64;

  // When `auto_strategy` is set the tag is chosen by select_strategy with
  // `threshold`; otherwise strategy.tag is used as is.
  bool auto_strategy = true;
  ConditioningStrategy strategy;
  std::size_t threshold = 4096;
  bool entropy = false;
  GraphOptions graph;

  ScheduleParams schedule;
  double lr_mult_F = 1.0;
  double lr_mult_G = 1.0;
  double lr_mult_D = 1.0;

  std::size_t batch_size = 64;
  std::size_t steps = 3000;
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir;
  bool a_distance = true;

  void validate() const;
};

// Parses `key = value` lines with '#' comments. Throws ConfigError naming the
// line or key.
std::map<std::string, std::string> parse_config_text(const std::string& text);
// Applies one key. Throws ConfigError for unknown keys or bad values.
void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv, ExperimentConfig base = {});
// Every recognised key with a one-line description, in documentation order.
const std::vector<std::pair<std::string, std::string>>& config_keys();
// The config rendered back as key = value lines.
std::string to_config_text(const ExperimentConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;  // last step index of the epoch
  double lr = 0.0;
  double lambda_eff = 0.0;
  double loss_cls = 0.0;
  double loss_D = 0.0;
  double acc_src = 0.0;
  double acc_tgt = 0.0;
  std::optional<double> mean_w_correct;
  std::optional<double> mean_w_incorrect;
};

struct MetricsRecord {
  std::vector<EpochMetrics> epochs;
  double final_acc_src = 0.0;
  double final_acc_tgt = 0.0;
  std::optional<double> a_distance;
  EntropyCorrectness entropy_report;
  StrategyTag strategy = StrategyTag::Multilinear;
};

struct RunOutput {
  MetricsRecord metrics;
  ModelBundle model;
  std::optional<RandomProjection> projection;
  LabeledSet source;
  LabeledSet target;
};

// Loads or generates the datasets for a seed.
std::pair<LabeledSet, LabeledSet> load_datasets(const ExperimentConfig& cfg, std::uint64_t seed);

// Trains F, G, D from scratch and evaluates. Writes metrics.csv, model.txt,
// features.csv, summary.csv (and projection.txt when randomized) into
// cfg.out_dir if it is non-empty. Throws NumericError on a non-finite loss.
RunOutput run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

std::string metrics_csv(const MetricsRecord& m);

// A named method preset: source-only, dann, dann-g, dann-fg, cdan, cdan+e,
// cdan-m, cdan-m+e, cdan-rm, cdan-rm+e, optionally suffixed with
// ":gaussian" or ":uniform" to pick the sampler.
ExperimentConfig apply_method(ExperimentConfig cfg, const std::string& method);
std::vector<std::string> method_names();

struct CompareRow {
  std::string method;
  std::uint64_t seed = 0;
  double acc_src = 0.0;
  double acc_tgt = 0.0;
  double a_distance = 0.0;
  double mean_w_correct = 0.0;
  double mean_w_incorrect = 0.0;
};

struct MethodSummary {
  std::string method;
  double acc_tgt_mean = 0.0, acc_tgt_std = 0.0;
  double a_distance_mean = 0.0, a_distance_std = 0.0;
  std::size_t runs = 0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::vector<MethodSummary> summaries;
};

// Runs every (method, seed) pair; each run writes into
// <out>/<method>/seed_<seed>/ and the table goes to <out>/summary.csv.
// Independent runs execute on up to `jobs` threads; results do not depend on
// the thread count.
CompareResult compare(const ExperimentConfig& cfg, const std::vector<std::string>& methods,
                      const std::vector<std::uint64_t>& seeds, unsigned jobs = 1);
std::string summary_csv(const CompareResult& r);

struct SweepOptions {
  std::vector<std::size_t> dims{64, 128, 256};
  std::size_t resamples = 20000;
  Sampler sampler = Sampler::Gaussian;
  std::uint64_t seed = 0;
  std::size_t d_f = 8;
  std::size_t d_g = 4;
  unsigned threads = 1;
};

struct SweepResult {
  std::vector<EstimatorReport> reports;
  bool all_unbiased = false;
  bool variance_nonincreasing = false;
};

// Random unit-norm f, g, f', g' from the seed, then the estimator check at
// every dimension. Throws UsageError for resamples below the minimum.
SweepResult verify_theorem1(const SweepOptions& opt);
std::string sweep_table(const SweepResult& r);

}  // namespace cdan
