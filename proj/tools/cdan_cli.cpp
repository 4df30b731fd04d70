// cdan: train and analyse conditional domain adversarial networks.
//
//   cdan run --seed 1 --out runs/a [--config exp.cfg] [--<config.key> value ...]
//   cdan compare --methods source-only,dann,cdan,cdan+e --seeds 1,2,3 --out runs/cmp
//   cdan verify-theorem1 --dims 64,128,256 --resamples 20000 --sampler gaussian
//   cdan export-features --model runs/a/model.txt --seed 1 --out feats.csv
//
// Exit codes: 0 ok, 2 configuration error, 3 numeric abort, 4 verification
// gate failure, 1 anything else.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdan/error.hpp"
#include "cdan/runner.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitGate = 4;

// One --<key> option per config key; values override the config file.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    for (const auto& [key, help] : cdan::config_keys()) {
      if (key == "out" || key == "seeds") continue;
      app->add_option("--" + key, values[key], help);
    }
  }

  cdan::ExperimentConfig build(CLI::App* app) const {
    cdan::ExperimentConfig cfg = config_path.empty() ? cdan::ExperimentConfig{} : cdan::load_config_file(config_path);
    std::map<std::string, std::string> given;
    for (const auto& [key, value] : values)
      if (app->count("--" + key) > 0) given[key] = value;
    return cdan::config_from_map(given, cfg);
  }
};

std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& toks) {
  std::vector<std::uint64_t> out;
  for (const auto& t : toks) {
    cdan::ExperimentConfig tmp;
    cdan::apply_config_value(tmp, "seeds", t);
    out.insert(out.end(), tmp.seeds.begin(), tmp.seeds.end());
  }
  return out;
}

void print_summary(const cdan::MetricsRecord& m, std::uint64_t seed) {
  std::printf("seed %llu  strategy %s  acc_src %.4f  acc_tgt %.4f", static_cast<unsigned long long>(seed),
              cdan::to_string(m.strategy).c_str(), m.final_acc_src, m.final_acc_tgt);
  if (m.a_distance) std::printf("  a_distance %.4f", *m.a_distance);
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional domain adversarial networks on synthetic shift problems"};
  app.require_subcommand(1);

  // run
  CLI::App* run = app.add_subcommand("run", "train one (config, seed) and write metrics, model and features");
  ConfigFlags run_flags;
  run_flags.attach(run);
  std::uint64_t run_seed = 0;
  std::string run_out;
  run->add_option("--seed", run_seed, "run seed")->required();
  run->add_option("--out", run_out, "output directory")->required();

  // compare
  CLI::App* cmp = app.add_subcommand("compare", "run several methods over several seeds and tabulate");
  ConfigFlags cmp_flags;
  cmp_flags.attach(cmp);
  std::vector<std::string> methods{"source-only", "dann", "cdan", "cdan+e"};
  std::vector<std::string> cmp_seeds;
  std::string cmp_out;
  unsigned jobs = 1;
  cmp->add_option("--methods", methods, "comma list of method presets")->delimiter(',');
  cmp->add_option("--seeds", cmp_seeds, "comma list of seeds (default: config seeds)")->delimiter(',');
  cmp->add_option("--out", cmp_out, "output directory")->required();
  cmp->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);

  // verify-theorem1
  CLI::App* ver = app.add_subcommand("verify-theorem1", "Monte-Carlo check of the randomized multilinear estimator");
  cdan::SweepOptions sweep;
  std::string sampler = "gaussian";
  ver->add_option("--dims", sweep.dims, "randomized map dimensions")->delimiter(',');
  ver->add_option("--resamples", sweep.resamples, "independent projections per dimension");
  ver->add_option("--sampler", sampler, "gaussian | uniform");
  ver->add_option("--seed", sweep.seed, "master seed");
  ver->add_option("--d-f", sweep.d_f, "length of f");
  ver->add_option("--d-g", sweep.d_g, "length of g");
  ver->add_option("--threads", sweep.threads, "worker threads")->check(CLI::PositiveNumber);

  // export-features
  CLI::App* exp = app.add_subcommand("export-features", "write F(x) for both domains using a saved model");
  ConfigFlags exp_flags;
  exp_flags.attach(exp);
  std::string model_path, exp_out;
  std::uint64_t exp_seed = 0;
  exp->add_option("--model", model_path, "model.txt written by run")->required()->check(CLI::ExistingFile);
  exp->add_option("--seed", exp_seed, "seed the datasets were generated with")->required();
  exp->add_option("--out", exp_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      cdan::ExperimentConfig cfg = run_flags.build(run);
      cfg.out_dir = run_out;
      const cdan::RunOutput out = cdan::run_experiment(cfg, run_seed);
      print_summary(out.metrics, run_seed);
    } else if (*cmp) {
      cdan::ExperimentConfig cfg = cmp_flags.build(cmp);
      cfg.out_dir = cmp_out;
      const auto seeds = cmp_seeds.empty() ? cfg.seeds : parse_seeds(cmp_seeds);
      const cdan::CompareResult r = cdan::compare(cfg, methods, seeds, jobs);
      std::cout << cdan::summary_csv(r);
    } else if (*ver) {
      sweep.sampler = cdan::parse_sampler(sampler);
      const cdan::SweepResult r = cdan::verify_theorem1(sweep);
      std::cout << cdan::sweep_table(r);
      std::cout << "variance_nonincreasing," << (r.variance_nonincreasing ? "yes" : "no") << "\n";
      if (!r.all_unbiased) {
        std::cerr << "unbiasedness gate failed (|mean - exact| >= 3 SE)\n";
        return kExitGate;
      }
    } else if (*exp) {
      const cdan::ExperimentConfig cfg = exp_flags.build(exp);
      const cdan::ModelBundle model = cdan::load_model(model_path);
      const auto [src, tgt] = cdan::load_datasets(cfg, exp_seed);
      cdan::export_features(model, src, tgt, exp_out);
    }
  } catch (const cdan::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cdan::UsageError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cdan::NumericError& e) {
    std::cerr << "numeric abort at step " << e.step() << ": " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
