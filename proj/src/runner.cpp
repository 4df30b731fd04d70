#include "cdan/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "cdan/error.hpp"
#include "cdan/objectives.hpp"
#include "cdan/random.hpp"

namespace cdan {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Endless stream of target indices: consecutive shuffled epochs.
class IndexStream {
 public:
  IndexStream(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) { refill(); }

  std::vector<std::size_t> take(std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    while (out.size() < k) {
      if (pos_ == order_.size()) refill();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void refill() {
    order_.clear();
    for (auto& b : batch_iter(n_, n_, seed_, epoch_++)) order_.insert(order_.end(), b.begin(), b.end());
    pos_ = 0;
  }
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

bool finite(double v) { return std::isfinite(v); }

}  // namespace

std::pair<LabeledSet, LabeledSet> load_datasets(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.source_csv.empty()) {
    for (const auto& p : {cfg.source_csv, cfg.target_csv})
      if (!fs::exists(p)) throw ConfigError("dataset file does not exist: " + p);
    LabeledSet src = load_csv(cfg.source_csv, Domain::Source);
    LabeledSet tgt = load_csv(cfg.target_csv, Domain::Target, src.classes());
    if (src.dim() != tgt.dim()) throw ConfigError("source and target CSV feature widths differ");
    return {std::move(src), std::move(tgt)};
  }
  ShiftSpec spec = cfg.data;
  spec.seed = cfg.data_seed.value_or(seed);
  return make_shift(spec);
}

RunOutput run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RunOutput run;
  std::tie(run.source, run.target) = load_datasets(cfg, seed);
  const LabeledSet& src = run.source;
  const LabeledSet& tgt_eval = run.target;
  const UnlabeledView tgt(run.target);
  const std::size_t C = src.classes();

  ConditioningStrategy strategy = cfg.strategy;
  if (cfg.auto_strategy) strategy.tag = select_strategy(cfg.feature_width, C, cfg.threshold);
  const std::size_t cond_width = conditioned_width(strategy, cfg.feature_width, C);
  if (strategy.tag == StrategyTag::RandomizedMultilinear)
    run.projection = sample_projection(strategy.dim, cfg.feature_width, C, strategy.sampler, derive_seed(seed, 7));
  const RandomProjection* proj = run.projection ? &*run.projection : nullptr;

  run.model = init_model(MlpSpec{{src.dim(), cfg.feature_hidden, cfg.feature_width}, OutputHead::Linear},
                         MlpSpec{{cfg.feature_width, C}, OutputHead::Softmax},
                         MlpSpec{{cond_width, cfg.disc_hidden, cfg.disc_hidden, 1}, OutputHead::Sigmoid}, cond_width,
                         derive_seed(seed, 11));
  ModelBundle& model = run.model;

  SgdMomentum opt(cfg.schedule.momentum);
  opt.add_group(model.params_F(), cfg.lr_mult_F);
  opt.add_group(model.params_G(), cfg.lr_mult_G);
  opt.add_group(model.params_D(), cfg.lr_mult_D);

  MetricsRecord& rec = run.metrics;
  rec.strategy = strategy.tag;

  const std::uint64_t src_seed = derive_seed(seed, 21), tgt_seed = derive_seed(seed, 22);
  IndexStream tgt_stream(tgt.size(), tgt_seed);
  std::size_t epoch = 0;
  auto batches = batch_iter(src.size(), cfg.batch_size, src_seed, epoch);
  std::size_t next_batch = 0;
  double sum_cls = 0.0, sum_d = 0.0;
  std::size_t in_epoch = 0;

  auto close_epoch = [&](std::size_t last_step) {
    EpochMetrics m;
    m.epoch = epoch;
    m.step = last_step;
    const double p = static_cast<double>(last_step) / static_cast<double>(cfg.steps);
    m.lr = lr_schedule(p, cfg.schedule);
    m.lambda_eff = effective_lambda(p, cfg.schedule);
    m.loss_cls = sum_cls / static_cast<double>(in_epoch);
    m.loss_D = sum_d / static_cast<double>(in_epoch);
    m.acc_src = accuracy(eval_probs(model, src.x()), src.labels());
    const Tensor pt = eval_probs(model, tgt_eval.x());
    m.acc_tgt = accuracy(pt, tgt_eval.labels());
    const EntropyCorrectness ec = entropy_correctness_report(pt, tgt_eval.labels());
    m.mean_w_correct = ec.mean_correct;
    m.mean_w_incorrect = ec.mean_incorrect;
    rec.epochs.push_back(m);
    sum_cls = sum_d = 0.0;
    in_epoch = 0;
  };

  Tape tape;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    if (next_batch == batches.size()) {
      close_epoch(t - 1);
      batches = batch_iter(src.size(), cfg.batch_size, src_seed, ++epoch);
      next_batch = 0;
    }
    const std::vector<std::size_t>& sidx = batches[next_batch++];
    const std::vector<std::size_t> tidx = tgt_stream.take(sidx.size());

    const double p = static_cast<double>(t) / static_cast<double>(cfg.steps);
    const double lr = lr_schedule(p, cfg.schedule);
    const double lam = effective_lambda(p, cfg.schedule);

    const Tensor xs = src.x().gather_rows(sidx);
    std::vector<int> ys(sidx.size());
    for (std::size_t i = 0; i < sidx.size(); ++i) ys[i] = src.labels()[sidx[i]];
    const Tensor xt = tgt.x().gather_rows(tidx);

    tape.reset();
    opt.zero_grad();
    const LossBreakdown lb = cdan_step_losses(tape, StepInputs{xs, ys, xt}, model, strategy, proj, lam, cfg.entropy, cfg.graph);
    if (!finite(lb.classifier_loss) || !finite(lb.discriminator_loss))
      throw NumericError("non-finite loss at step " + std::to_string(t) + " (classifier " + fmt(lb.classifier_loss) +
                             ", discriminator " + fmt(lb.discriminator_loss) + ")",
                         static_cast<long>(t));
    tape.backward(lb.objective);
    opt.step(lr);
    sum_cls += lb.classifier_loss;
    sum_d += lb.discriminator_loss;
    ++in_epoch;
  }
  if (in_epoch > 0) close_epoch(cfg.steps - 1);

  for (const Parameter* p : model.all_params())
    for (double v : p->value.values())
      if (!finite(v)) throw NumericError("non-finite parameter " + p->name + " after training", static_cast<long>(cfg.steps));

  const Tensor ps = eval_probs(model, src.x());
  const Tensor pt = eval_probs(model, tgt_eval.x());
  rec.final_acc_src = accuracy(ps, src.labels());
  rec.final_acc_tgt = accuracy(pt, tgt_eval.labels());
  rec.entropy_report = entropy_correctness_report(pt, tgt_eval.labels());
  if (cfg.a_distance)
    rec.a_distance =
        proxy_a_distance(eval_features(model, src.x()), eval_features(model, tgt.x()), derive_seed(seed, 31)).distance;

  if (!cfg.out_dir.empty()) {
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_file(dir / "metrics.csv", metrics_csv(rec));
    save_model(model, (dir / "model.txt").string());
    export_features(model, src, tgt_eval, (dir / "features.csv").string());
    if (proj) {
      std::ofstream out(dir / "projection.txt");
      save_projection(*proj, out);
    }
    std::string summary = "strategy,entropy,seed,acc_src,acc_tgt,a_distance,mean_w_correct,mean_w_incorrect\n";
    summary += to_string(rec.strategy) + "," + (cfg.entropy ? "true" : "false") + "," + std::to_string(seed) + "," +
               fmt(rec.final_acc_src) + "," + fmt(rec.final_acc_tgt) + "," + fmt(rec.a_distance) + "," +
               fmt(rec.entropy_report.mean_correct) + "," + fmt(rec.entropy_report.mean_incorrect) + "\n";
    write_file(dir / "summary.csv", summary);
    write_file(dir / "config.txt", to_config_text(cfg));
  }
  return run;
}

std::string metrics_csv(const MetricsRecord& m) {
  std::string out = "epoch,step,lr,lambda_eff,loss_cls,loss_D,acc_src,acc_tgt,mean_w_correct,mean_w_incorrect\n";
  for (const EpochMetrics& e : m.epochs)
    out += std::to_string(e.epoch) + "," + std::to_string(e.step) + "," + fmt(e.lr) + "," + fmt(e.lambda_eff) + "," +
           fmt(e.loss_cls) + "," + fmt(e.loss_D) + "," + fmt(e.acc_src) + "," + fmt(e.acc_tgt) + "," +
           fmt(e.mean_w_correct) + "," + fmt(e.mean_w_incorrect) + "\n";
  return out;
}

std::vector<std::string> method_names() {
  return {"source-only", "dann", "dann-g", "dann-fg", "cdan", "cdan+e", "cdan-m", "cdan-m+e", "cdan-rm", "cdan-rm+e"};
}

ExperimentConfig apply_method(ExperimentConfig cfg, const std::string& method) {
  std::string name = method;
  if (const auto colon = name.find(':'); colon != std::string::npos) {
    const std::string sampler = name.substr(colon + 1);
    try {
      cfg.strategy.sampler = parse_sampler(sampler);
    } catch (const UsageError&) {
      throw ConfigError("method '" + method + "': unknown sampler '" + sampler + "'");
    }
    name.erase(colon);
  }
  cfg.entropy = false;
  auto fixed = [&](StrategyTag t) {
    cfg.auto_strategy = false;
    cfg.strategy.tag = t;
  };
  if (name == "source-only") {
    fixed(StrategyTag::FeatureOnly);
    cfg.schedule.lambda = 0.0;
  } else if (name == "dann") {
    fixed(StrategyTag::FeatureOnly);
  } else if (name == "dann-g") {
    fixed(StrategyTag::PredictionOnly);
  } else if (name == "dann-fg") {
    fixed(StrategyTag::Concat);
  } else if (name == "cdan" || name == "cdan+e") {
    cfg.auto_strategy = true;
    cfg.entropy = name == "cdan+e";
  } else if (name == "cdan-m" || name == "cdan-m+e") {
    fixed(StrategyTag::Multilinear);
    cfg.entropy = name == "cdan-m+e";
  } else if (name == "cdan-rm" || name == "cdan-rm+e") {
    fixed(StrategyTag::RandomizedMultilinear);
    cfg.entropy = name == "cdan-rm+e";
  } else {
    throw ConfigError("unknown method '" + method + "'");
  }
  return cfg;
}

CompareResult compare(const ExperimentConfig& cfg, const std::vector<std::string>& methods,
                      const std::vector<std::uint64_t>& seeds, unsigned jobs) {
  if (methods.empty()) throw ConfigError("compare: at least one method is required");
  if (seeds.empty()) throw ConfigError("compare: at least one seed is required");
  struct Job {
    std::string method;
    std::uint64_t seed;
    ExperimentConfig cfg;
  };
  std::vector<Job> work;
  for (const auto& m : methods) {
    ExperimentConfig c = apply_method(cfg, m);
    c.validate();
    for (auto s : seeds) {
      Job j{m, s, c};
      if (!cfg.out_dir.empty()) {
        std::string dirname = m;
        for (char& ch : dirname)
          if (ch == ':') ch = '_';
        j.cfg.out_dir = (fs::path(cfg.out_dir) / dirname / ("seed_" + std::to_string(s))).string();
      }
      work.push_back(std::move(j));
    }
  }

  CompareResult res;
  res.rows.resize(work.size());
  std::vector<std::exception_ptr> errors(work.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next == work.size()) return;
        i = next++;
      }
      try {
        const RunOutput out = run_experiment(work[i].cfg, work[i].seed);
        const MetricsRecord& m = out.metrics;
        res.rows[i] = {work[i].method, work[i].seed, m.final_acc_src, m.final_acc_tgt, m.a_distance.value_or(NAN),
                       m.entropy_report.mean_correct.value_or(NAN), m.entropy_report.mean_incorrect.value_or(NAN)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& m : methods) {
    MethodSummary s;
    s.method = m;
    std::vector<double> acc, ad;
    for (const auto& r : res.rows)
      if (r.method == m) {
        acc.push_back(r.acc_tgt);
        ad.push_back(r.a_distance);
      }
    auto mean_std = [](const std::vector<double>& v) {
      const double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mu) * (x - mu);
      return std::pair{mu, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
    };
    std::tie(s.acc_tgt_mean, s.acc_tgt_std) = mean_std(acc);
    std::tie(s.a_distance_mean, s.a_distance_std) = mean_std(ad);
    s.runs = acc.size();
    res.summaries.push_back(s);
  }
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "summary.csv", summary_csv(res));
  }
  return res;
}

std::string summary_csv(const CompareResult& r) {
  std::string out = "method,seed,acc_src,acc_tgt,a_distance,mean_w_correct,mean_w_incorrect,acc_tgt_std,a_distance_std\n";
  for (const auto& row : r.rows)
    out += row.method + "," + std::to_string(row.seed) + "," + fmt(row.acc_src) + "," + fmt(row.acc_tgt) + "," +
           fmt(row.a_distance) + "," + fmt(row.mean_w_correct) + "," + fmt(row.mean_w_incorrect) + ",,\n";
  for (const auto& s : r.summaries)
    out += s.method + ",mean,," + fmt(s.acc_tgt_mean) + "," + fmt(s.a_distance_mean) + ",,," + fmt(s.acc_tgt_std) +
           "," + fmt(s.a_distance_std) + "\n";
  return out;
}

SweepResult verify_theorem1(const SweepOptions& opt) {
  if (opt.resamples < kMinResamples)
    throw UsageError("--resamples must be at least " + std::to_string(kMinResamples));
  if (opt.dims.empty()) throw UsageError("at least one dimension is required");
  if (opt.d_f < 1 || opt.d_g < 1) throw UsageError("input dimensions must be >= 1");
  Rng rng(derive_seed(opt.seed, 0x71));
  std::normal_distribution<double> n(0.0, 1.0);
  auto unit = [&](std::size_t len) {
    std::vector<double> v(len);
    double s = 0.0;
    for (double& x : v) {
      x = n(rng);
      s += x * x;
    }
    for (double& x : v) x /= std::sqrt(s);
    return v;
  };
  const auto f = unit(opt.d_f), g = unit(opt.d_g), f2 = unit(opt.d_f), g2 = unit(opt.d_g);
  SweepResult res;
  res.all_unbiased = true;
  res.variance_nonincreasing = true;
  for (std::size_t d : opt.dims) {
    if (d < 1) throw UsageError("dimensions must be >= 1");
    res.reports.push_back(theorem1_verify(f, g, f2, g2, d, opt.resamples, opt.sampler, opt.seed, opt.threads));
    res.all_unbiased = res.all_unbiased && res.reports.back().unbiased_within(3.0);
    if (res.reports.size() > 1 && res.reports.back().mc_var > res.reports[res.reports.size() - 2].mc_var)
      res.variance_nonincreasing = false;
  }
  return res;
}

std::string sweep_table(const SweepResult& r) {
  std::string out = "d,resamples,mc_mean,exact,mc_var,standard_error,z,unbiased\n";
  for (const auto& e : r.reports)
    out += std::to_string(e.dim) + "," + std::to_string(e.resamples) + "," + fmt(e.mc_mean) + "," + fmt(e.exact) +
           "," + fmt(e.mc_var) + "," + fmt(e.standard_error) + "," + fmt(e.z()) + "," +
           (e.unbiased_within(3.0) ? "pass" : "FAIL") + "\n";
  return out;
}

}  // namespace cdan
