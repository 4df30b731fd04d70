#include "cdan/conditioning.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cdan/error.hpp"
#include "cdan/networks.hpp"
#include "cdan/random.hpp"

namespace cdan {

std::string to_string(StrategyTag t) {
  switch (t) {
    case StrategyTag::FeatureOnly: return "feature";
    case StrategyTag::PredictionOnly: return "prediction";
    case StrategyTag::Concat: return "concat";
    case StrategyTag::Multilinear: return "multilinear";
    case StrategyTag::RandomizedMultilinear: return "randomized";
  }
  return "?";
}

std::string to_string(Sampler s) { return s == Sampler::Gaussian ? "gaussian" : "uniform"; }

StrategyTag parse_strategy(const std::string& s) {
  if (s == "feature") return StrategyTag::FeatureOnly;
  if (s == "prediction") return StrategyTag::PredictionOnly;
  if (s == "concat") return StrategyTag::Concat;
  if (s == "multilinear") return StrategyTag::Multilinear;
  if (s == "randomized") return StrategyTag::RandomizedMultilinear;
  throw UsageError("unknown conditioning strategy '" + s + "'");
}

Sampler parse_sampler(const std::string& s) {
  if (s == "gaussian") return Sampler::Gaussian;
  if (s == "uniform") return Sampler::Uniform;
  throw UsageError("unknown sampler '" + s + "' (expected gaussian or uniform)");
}

RandomProjection sample_projection(std::size_t d, std::size_t d_f, std::size_t d_g, Sampler sampler,
                                   std::uint64_t seed) {
  if (d < 1 || d_f < 1 || d_g < 1) throw UsageError("sample_projection: all dimensions must be >= 1");
  RandomProjection p;
  p.sampler = sampler;
  p.seed = seed;
  p.R_f = Tensor({d, d_f});
  p.R_g = Tensor({d, d_g});
  Rng rng(seed);
  if (sampler == Sampler::Gaussian) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : p.R_f.data()) v = n(rng);
    for (double& v : p.R_g.data()) v = n(rng);
  } else {
    const double h = std::sqrt(3.0);
    std::uniform_real_distribution<double> u(-h, h);
    for (double& v : p.R_f.data()) v = u(rng);
    for (double& v : p.R_g.data()) v = u(rng);
  }
  return p;
}

Tensor multilinear_map(std::span<const double> f, std::span<const double> g) {
  Tensor out({1, f.size() * g.size()});
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) out[i * g.size() + j] = f[i] * g[j];
  return out;
}

Tensor randomized_multilinear_map(std::span<const double> f, std::span<const double> g,
                                  const RandomProjection& proj) {
  if (f.size() != proj.d_f() || g.size() != proj.d_g())
    throw ShapeError("randomized map: projection is " + proj.R_f.shape().str() + "/" + proj.R_g.shape().str() +
                     " but f has " + std::to_string(f.size()) + " and g has " + std::to_string(g.size()) + " entries");
  const std::size_t d = proj.dim();
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor out({1, d});
  for (std::size_t i = 0; i < d; ++i) out[i] = s * dot(proj.R_f.row_span(i), f) * dot(proj.R_g.row_span(i), g);
  return out;
}

Var multilinear_map(Var f, Var g) {
  const Tensor& fv = f.value();
  const Tensor& gv = g.value();
  if (fv.rows() != gv.rows()) throw ShapeError("multilinear map: batch sizes differ, " + fv.shape().str() + " and " + gv.shape().str());
  const std::size_t n = fv.rows(), df = fv.cols(), dg = gv.cols();
  Tensor out({n, df * dg});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < df; ++i)
      for (std::size_t j = 0; j < dg; ++j) out(r, i * dg + j) = fv(r, i) * gv(r, j);
  return f.tape()->record(std::move(out), {f, g}, [f, g, n, df, dg](Tape& tape, const Tensor& G) {
    const Tensor& fv = f.value();
    const Tensor& gv = g.value();
    if (Tensor* gf = tape.grad_buffer(f))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < df; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < dg; ++j) s += G(r, i * dg + j) * gv(r, j);
          (*gf)(r, i) += s;
        }
    if (Tensor* gg = tape.grad_buffer(g))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < dg; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < df; ++i) s += G(r, i * dg + j) * fv(r, i);
          (*gg)(r, j) += s;
        }
  });
}

Var randomized_multilinear_map(Var f, Var g, const RandomProjection& proj) {
  if (f.shape().cols != proj.d_f() || g.shape().cols != proj.d_g())
    throw ShapeError("randomized map: projection is " + proj.R_f.shape().str() + "/" + proj.R_g.shape().str() +
                     " but inputs are " + f.shape().str() + " and " + g.shape().str());
  Tape& t = *f.tape();
  Var rf = matmul(f, t.constant(transpose(proj.R_f)));
  Var rg = matmul(g, t.constant(transpose(proj.R_g)));
  return scale(mul(rf, rg), 1.0 / std::sqrt(static_cast<double>(proj.dim())));
}

Var normalize_rows(Var a) {
  const Tensor& av = a.value();
  Tensor out = av;
  Tensor norms({av.rows(), 1});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const double nr = std::sqrt(dot(av.row_span(r), av.row_span(r)));
    norms[r] = nr;
    if (nr > 0.0)
      for (double& v : out.row_span(r)) v /= nr;
  }
  Tensor y = out;
  return a.tape()->record(std::move(out), {a}, [a, y = std::move(y), norms](Tape& tape, const Tensor& G) {
    Tensor* ga = tape.grad_buffer(a);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      if (norms[r] == 0.0) continue;
      const double proj = dot(y.row_span(r), G.row_span(r));
      for (std::size_t c = 0; c < y.cols(); ++c) (*ga)(r, c) += (G(r, c) - proj * y(r, c)) / norms[r];
    }
  });
}

StrategyTag select_strategy(std::size_t d_f, std::size_t d_g, std::size_t threshold) {
  return d_f * d_g <= threshold ? StrategyTag::Multilinear : StrategyTag::RandomizedMultilinear;
}

std::size_t conditioned_width(const ConditioningStrategy& s, std::size_t d_f, std::size_t d_g) {
  switch (s.tag) {
    case StrategyTag::FeatureOnly: return d_f;
    case StrategyTag::PredictionOnly: return d_g;
    case StrategyTag::Concat: return d_f + d_g;
    case StrategyTag::Multilinear: return d_f * d_g;
    case StrategyTag::RandomizedMultilinear:
      if (s.dim < 1) throw ConfigError("randomized conditioning needs dim >= 1");
      return s.dim;
  }
  return 0;
}

Var condition(Var f, Var g, const ConditioningStrategy& s, const RandomProjection* proj) {
  const bool randomized = s.tag == StrategyTag::RandomizedMultilinear;
  if (randomized && proj == nullptr) throw UsageError("randomized conditioning requires a projection");
  if (!randomized && proj != nullptr) throw UsageError("projection supplied to non-randomized strategy " + to_string(s.tag));
  switch (s.tag) {
    case StrategyTag::FeatureOnly: return f;
    case StrategyTag::PredictionOnly: return g;
    case StrategyTag::Concat: return concat(f, g, 1);
    case StrategyTag::Multilinear: return multilinear_map(f, g);
    case StrategyTag::RandomizedMultilinear:
      return randomized_multilinear_map(s.normalize_f ? normalize_rows(f) : f, g, *proj);
  }
  return f;
}

Tensor condition(const Tensor& f, const Tensor& g, const ConditioningStrategy& s, const RandomProjection* proj) {
  Tape tape;
  return condition(tape.constant(f), tape.constant(g), s, proj).value();
}

void save_projection(const RandomProjection& p, std::ostream& out) {
  out << "# sampler " << to_string(p.sampler) << "\n# seed " << p.seed << '\n';
  const Parameter rf("R_f", p.R_f), rg("R_g", p.R_g);
  save_tensors(out, {&rf, &rg});
}

RandomProjection load_projection(std::istream& in) {
  RandomProjection p;
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# sampler ", 0) == 0) p.sampler = parse_sampler(line.substr(10));
    else if (line.rfind("# seed ", 0) == 0) p.seed = std::stoull(line.substr(7));
    else body << line << '\n';
  }
  for (Parameter& t : load_tensors(body)) {
    if (t.name == "R_f") p.R_f = std::move(t.value);
    else if (t.name == "R_g") p.R_g = std::move(t.value);
    else throw FormatError("unexpected tensor " + t.name + " in projection file");
  }
  if (p.R_f.size() == 0 || p.R_g.size() == 0 || p.R_f.rows() != p.R_g.rows())
    throw FormatError("projection file must contain R_f and R_g with equal row counts");
  return p;
}

}  // namespace cdan
