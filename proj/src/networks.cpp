#include "cdan/networks.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "cdan/error.hpp"
#include "cdan/random.hpp"

namespace cdan {

void MlpSpec::validate(const std::string& name) const {
  if (widths.size() < 2) throw ConfigError(name + ": an MLP needs at least an input and an output width");
  for (std::size_t w : widths)
    if (w < 1) throw ConfigError(name + ": layer widths must be >= 1");
}

namespace {

Mlp make_mlp(const MlpSpec& spec, const std::string& prefix, Rng& rng) {
  Mlp net;
  net.spec = spec;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t fan_in = spec.widths[l], fan_out = spec.widths[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Tensor w({fan_in, fan_out});
    for (double& v : w.data()) v = u(rng);
    net.weights.emplace_back(prefix + "." + std::to_string(l) + ".weight", std::move(w));
    net.biases.emplace_back(prefix + "." + std::to_string(l) + ".bias", Tensor({1, fan_out}));
  }
  return net;
}

void collect(Mlp& net, std::vector<Parameter*>& out) {
  for (std::size_t l = 0; l < net.layers(); ++l) {
    out.push_back(&net.weights[l]);
    out.push_back(&net.biases[l]);
  }
}

Tensor apply_head(Tensor z, OutputHead head) {
  switch (head) {
    case OutputHead::Linear:
      return z;
    case OutputHead::Softmax:
      return softmax_rows(z);
    case OutputHead::Sigmoid:
      for (double& v : z.data()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      return z;
  }
  return z;
}

}  // namespace

Mlp init_mlp(const MlpSpec& spec, const std::string& prefix, std::uint64_t seed) {
  spec.validate(prefix);
  Rng rng(seed);
  return make_mlp(spec, prefix, rng);
}

std::vector<Parameter*> ModelBundle::params_F() {
  std::vector<Parameter*> out;
  collect(F, out);
  return out;
}
std::vector<Parameter*> ModelBundle::params_G() {
  std::vector<Parameter*> out;
  collect(G, out);
  return out;
}
std::vector<Parameter*> ModelBundle::params_D() {
  std::vector<Parameter*> out;
  collect(D, out);
  return out;
}
std::vector<Parameter*> ModelBundle::all_params() {
  std::vector<Parameter*> out;
  collect(F, out);
  collect(G, out);
  collect(D, out);
  return out;
}
void ModelBundle::zero_grad() {
  for (Parameter* p : all_params()) p->zero_grad();
}

ModelBundle init_model(const MlpSpec& spec_F, const MlpSpec& spec_G, const MlpSpec& spec_D,
                       std::size_t conditioned_width, std::uint64_t seed) {
  spec_F.validate("F");
  spec_G.validate("G");
  spec_D.validate("D");
  if (spec_G.input_width() != spec_F.output_width())
    throw ConfigError("G input width " + std::to_string(spec_G.input_width()) + " != F output width " +
                      std::to_string(spec_F.output_width()));
  if (spec_D.input_width() != conditioned_width)
    throw ConfigError("D input width " + std::to_string(spec_D.input_width()) + " != conditioned width " +
                      std::to_string(conditioned_width));
  if (spec_D.output_width() != 1) throw ConfigError("D must have a single output");
  ModelBundle m;
  m.F = init_mlp(spec_F, "F", derive_seed(seed, 1));
  m.G = init_mlp(spec_G, "G", derive_seed(seed, 2));
  m.D = init_mlp(spec_D, "D", derive_seed(seed, 3));
  m.d_f = spec_F.output_width();
  m.d_g = spec_G.output_width();
  return m;
}

namespace {

// All layers, ReLU between them, no output head.
Var forward_layers(Tape& tape, Mlp& net, Var x) {
  if (x.shape().cols != net.spec.input_width())
    throw ShapeError("network input expects width " + std::to_string(net.spec.input_width()) + ", got " +
                     x.shape().str());
  Var h = x;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    h = add_bias(matmul(h, tape.parameter(net.weights[l])), tape.parameter(net.biases[l]));
    if (l + 1 < net.layers()) h = relu(h);
  }
  return h;
}

}  // namespace

Var forward_mlp(Tape& tape, Mlp& net, Var x) {
  Var h = forward_layers(tape, net, x);
  switch (net.spec.head) {
    case OutputHead::Linear:
      return h;
    case OutputHead::Softmax:
      return softmax_rows(h);
    case OutputHead::Sigmoid:
      return sigmoid(h);
  }
  return h;
}

Var forward_F(Tape& tape, ModelBundle& m, Var x) { return forward_mlp(tape, m.F, x); }

ClassifierOutput forward_G(Tape& tape, ModelBundle& m, Var f) {
  Var h = forward_layers(tape, m.G, f);
  return {h, softmax_rows(h)};
}

Var forward_D(Tape& tape, ModelBundle& m, Var conditioned) { return forward_mlp(tape, m.D, conditioned); }

Var forward_D_logits(Tape& tape, ModelBundle& m, Var conditioned) { return forward_layers(tape, m.D, conditioned); }

Tensor eval_mlp(const Mlp& net, const Tensor& x) {
  if (x.cols() != net.spec.input_width())
    throw ShapeError("network input expects width " + std::to_string(net.spec.input_width()) + ", got " +
                     x.shape().str());
  Tensor h = x;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    h = matmul(h, net.weights[l].value);
    const Tensor& b = net.biases[l].value;
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t c = 0; c < h.cols(); ++c) {
        h(r, c) += b[c];
        if (l + 1 < net.layers() && h(r, c) < 0.0) h(r, c) = 0.0;
      }
  }
  return apply_head(std::move(h), net.spec.head);
}

Tensor eval_features(const ModelBundle& m, const Tensor& x) { return eval_mlp(m.F, x); }

Tensor eval_probs(const ModelBundle& m, const Tensor& x) {
  Tensor z = eval_mlp(m.G, eval_mlp(m.F, x));
  return m.G.spec.head == OutputHead::Softmax ? z : softmax_rows(z);
}

// ---- text format ----

void save_tensors(std::ostream& out, const std::vector<const Parameter*>& tensors) {
  char buf[64];
  for (const Parameter* p : tensors) {
    out << p->name << ' ' << p->value.shape().str();
    for (double v : p->value.values()) {
      std::snprintf(buf, sizeof buf, "%a", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

std::vector<Parameter> load_tensors(std::istream& in) {
  std::vector<Parameter> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, shape;
    if (!(ls >> name >> shape)) throw FormatError("line " + std::to_string(lineno) + ": expected name and shape");
    const auto x = shape.find('x');
    if (x == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": bad shape '" + shape + "'");
    char* end = nullptr;
    const unsigned long rows = std::strtoul(shape.c_str(), &end, 10);
    const unsigned long cols = std::strtoul(shape.c_str() + x + 1, &end, 10);
    if (*end != '\0' || rows == 0 || cols == 0)
      throw FormatError("line " + std::to_string(lineno) + ": bad shape '" + shape + "'");
    std::vector<double> data;
    data.reserve(rows * cols);
    std::string tok;
    while (ls >> tok) {
      const double v = std::strtod(tok.c_str(), &end);
      if (*end != '\0') throw FormatError("line " + std::to_string(lineno) + ": bad value '" + tok + "'");
      data.push_back(v);
    }
    if (data.size() != rows * cols)
      throw FormatError("line " + std::to_string(lineno) + ": " + name + " expects " + std::to_string(rows * cols) +
                        " values, found " + std::to_string(data.size()));
    out.emplace_back(name, Tensor({rows, cols}, std::move(data)));
  }
  return out;
}

void save_model(const ModelBundle& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  std::vector<const Parameter*> ps;
  for (const Mlp* net : {&m.F, &m.G, &m.D})
    for (std::size_t l = 0; l < net->layers(); ++l) {
      ps.push_back(&net->weights[l]);
      ps.push_back(&net->biases[l]);
    }
  save_tensors(out, ps);
  if (!out) throw std::runtime_error("write failed: " + path);
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::map<std::string, std::vector<Parameter>> layers;  // by prefix, in file order
  for (Parameter& p : load_tensors(in)) {
    const auto dot = p.name.find('.');
    if (dot == std::string::npos) throw FormatError("unexpected tensor name " + p.name);
    layers[p.name.substr(0, dot)].push_back(std::move(p));
  }
  auto build = [&](const std::string& prefix, OutputHead head) {
    Mlp net;
    net.spec.head = head;
    auto& ps = layers[prefix];
    if (ps.empty() || ps.size() % 2 != 0) throw FormatError("model file lacks complete layers for " + prefix);
    for (std::size_t i = 0; i < ps.size(); i += 2) {
      Parameter& w = ps[i];
      Parameter& b = ps[i + 1];
      if (b.value.rows() != 1 || b.value.cols() != w.value.cols())
        throw FormatError("bias shape mismatch for " + w.name);
      if (i == 0) net.spec.widths.push_back(w.value.rows());
      else if (w.value.rows() != net.spec.widths.back()) throw FormatError("layer chain mismatch at " + w.name);
      net.spec.widths.push_back(w.value.cols());
      net.weights.push_back(std::move(w));
      net.biases.push_back(std::move(b));
    }
    return net;
  };
  ModelBundle m;
  m.F = build("F", OutputHead::Linear);
  m.G = build("G", OutputHead::Softmax);
  m.D = build("D", OutputHead::Sigmoid);
  m.d_f = m.F.spec.output_width();
  m.d_g = m.G.spec.output_width();
  if (m.G.spec.input_width() != m.d_f) throw FormatError("G input width does not match F output width");
  return m;
}

}  // namespace cdan
