#include "cdan/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "cdan/error.hpp"
#include "cdan/objectives.hpp"
#include "cdan/optim.hpp"
#include "cdan/random.hpp"

namespace cdan {

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

double accuracy(const Tensor& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size())
    throw ShapeError("accuracy: " + std::to_string(labels.size()) + " labels for " + probs.shape().str());
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    hits += static_cast<int>(argmax(probs.row_span(i))) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ADistanceResult proxy_a_distance(const Tensor& f_src, const Tensor& f_tgt, std::uint64_t seed,
                                 const ADistanceOptions& opt) {
  if (f_src.rows() < 40 || f_tgt.rows() < 40)
    throw UsageError("proxy A-distance needs at least 40 rows per domain");
  if (f_src.cols() != f_tgt.cols()) throw ShapeError("proxy A-distance: feature widths differ, " + f_src.shape().str() + " and " + f_tgt.shape().str());
  const std::size_t dim = f_src.cols();

  Rng rng(derive_seed(seed, 0xad));
  auto split = [&](std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = n / 2;
    return std::pair{std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half)),
                     std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(half), order.end())};
  };
  auto [src_train, src_test] = split(f_src.rows());
  auto [tgt_train, tgt_test] = split(f_tgt.rows());

  // Domain label 1 = source.
  const std::size_t n_train = src_train.size() + tgt_train.size();
  Tensor x_train({n_train, dim});
  std::vector<double> y_train(n_train);
  for (std::size_t i = 0; i < src_train.size(); ++i) {
    std::copy_n(f_src.row_span(src_train[i]).begin(), dim, x_train.row_span(i).begin());
    y_train[i] = 1.0;
  }
  for (std::size_t i = 0; i < tgt_train.size(); ++i)
    std::copy_n(f_tgt.row_span(tgt_train[i]).begin(), dim, x_train.row_span(src_train.size() + i).begin());

  // Standardize with training statistics.
  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (std::size_t i = 0; i < n_train; ++i)
    for (std::size_t k = 0; k < dim; ++k) mu[k] += x_train(i, k);
  for (double& m : mu) m /= static_cast<double>(n_train);
  for (std::size_t i = 0; i < n_train; ++i)
    for (std::size_t k = 0; k < dim; ++k) sd[k] += (x_train(i, k) - mu[k]) * (x_train(i, k) - mu[k]);
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(n_train));
  auto standardize = [&](std::span<double> row) {
    for (std::size_t k = 0; k < dim; ++k) row[k] = sd[k] > 1e-12 ? (row[k] - mu[k]) / sd[k] : 0.0;
  };
  for (std::size_t i = 0; i < n_train; ++i) standardize(x_train.row_span(i));

  Mlp net = init_mlp(MlpSpec{{dim, opt.hidden, 1}, OutputHead::Sigmoid}, "A", derive_seed(seed, 0xae));
  std::vector<Parameter*> params;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    params.push_back(&net.weights[l]);
    params.push_back(&net.biases[l]);
  }
  SgdMomentum opt_sgd(opt.momentum);
  opt_sgd.add_group(params, 1.0);

  Tape tape;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    for (const auto& idx : batch_iter(n_train, opt.batch_size, derive_seed(seed, 0xaf), epoch)) {
      tape.reset();
      opt_sgd.zero_grad();
      Tensor xb = x_train.gather_rows(idx);
      Tensor yb({idx.size(), 1});
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y_train[idx[i]];
      Var p = forward_mlp(tape, net, tape.constant(std::move(xb)));
      Var y = tape.constant(yb);
      // Binary cross-entropy: -mean(y log p + (1 - y) log(1 - p)).
      Var ll = add(mul(y, log(p)), mul(add_scalar(scale(y, -1.0), 1.0), log(add_scalar(scale(p, -1.0), 1.0))));
      tape.backward(scale(mean(ll), -1.0));
      opt_sgd.step(opt.lr);
    }
  }

  std::size_t errors = 0, total = 0;
  auto score = [&](const Tensor& f, const std::vector<std::size_t>& rows, bool is_source) {
    Tensor x = f.gather_rows(rows);
    for (std::size_t i = 0; i < x.rows(); ++i) standardize(x.row_span(i));
    Tensor p = eval_mlp(net, x);
    for (std::size_t i = 0; i < p.rows(); ++i) errors += (p[i] > 0.5) != is_source;
    total += p.rows();
  };
  score(f_src, src_test, true);
  score(f_tgt, tgt_test, false);
  ADistanceResult r;
  r.test_error = static_cast<double>(errors) / static_cast<double>(total);
  r.distance = a_distance_from_error(r.test_error);
  return r;
}

double EstimatorReport::z() const {
  const double diff = std::abs(mc_mean - exact);
  if (standard_error == 0.0) return diff == 0.0 ? 0.0 : INFINITY;
  return diff / standard_error;
}

EstimatorReport theorem1_verify(std::span<const double> f, std::span<const double> g, std::span<const double> f2,
                                std::span<const double> g2, std::size_t d, std::size_t n_resamples, Sampler sampler,
                                std::uint64_t seed, unsigned threads) {
  if (n_resamples < kMinResamples)
    throw UsageError("theorem1_verify needs at least " + std::to_string(kMinResamples) + " resamples");
  if (f.size() != f2.size() || g.size() != g2.size()) throw ShapeError("theorem1_verify: input pairs differ in length");
  std::vector<double> est(n_resamples);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const RandomProjection proj = sample_projection(d, f.size(), g.size(), sampler, derive_seed(seed, d, r));
      const Tensor a = randomized_multilinear_map(f, g, proj);
      const Tensor b = randomized_multilinear_map(f2, g2, proj);
      est[r] = dot(a.data(), b.data());
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, n_resamples);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_resamples + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk, e = std::min(n_resamples, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  EstimatorReport rep;
  rep.dim = d;
  rep.resamples = n_resamples;
  rep.exact = dot(f, f2) * dot(g, g2);
  const double n = static_cast<double>(n_resamples);
  rep.mc_mean = std::accumulate(est.begin(), est.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : est) ss += (e - rep.mc_mean) * (e - rep.mc_mean);
  rep.mc_var = ss / (n - 1.0);
  rep.standard_error = std::sqrt(rep.mc_var / n);
  return rep;
}

EntropyCorrectness entropy_correctness_report(const Tensor& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size())
    throw ShapeError("entropy report: " + std::to_string(labels.size()) + " labels for " + probs.shape().str());
  double sc = 0.0, si = 0.0;
  EntropyCorrectness out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double w = std::exp(-entropy(probs.row_span(i)));
    if (static_cast<int>(argmax(probs.row_span(i))) == labels[i]) {
      sc += w;
      ++out.n_correct;
    } else {
      si += w;
      ++out.n_incorrect;
    }
  }
  if (out.n_correct) out.mean_correct = sc / static_cast<double>(out.n_correct);
  if (out.n_incorrect) out.mean_incorrect = si / static_cast<double>(out.n_incorrect);
  return out;
}

namespace {

void write_feature_rows(std::FILE* f, const ModelBundle& m, const LabeledSet& set) {
  const Tensor feats = eval_features(m, set.x());
  const char* dom = set.domain() == Domain::Source ? "source" : "target";
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (double v : feats.row_span(i)) std::fprintf(f, "%.17g,", v);
    std::fprintf(f, "%d,%s\n", set.labels()[i], dom);
  }
}

std::FILE* open_with_header(const std::string& path, std::size_t d_f) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (std::size_t k = 0; k < d_f; ++k) std::fprintf(f, "f%zu,", k);
  std::fprintf(f, "label,domain\n");
  return f;
}

}  // namespace

void export_features(const ModelBundle& m, const LabeledSet& set, const std::string& path) {
  std::FILE* f = open_with_header(path, m.d_f);
  write_feature_rows(f, m, set);
  if (std::fclose(f) != 0) throw std::runtime_error("write failed: " + path);
}

void export_features(const ModelBundle& m, const LabeledSet& source, const LabeledSet& target,
                     const std::string& path) {
  std::FILE* f = open_with_header(path, m.d_f);
  write_feature_rows(f, m, source);
  write_feature_rows(f, m, target);
  if (std::fclose(f) != 0) throw std::runtime_error("write failed: " + path);
}

}  // namespace cdan
