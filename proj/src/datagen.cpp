#include "cdan/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cdan/error.hpp"
#include "cdan/random.hpp"

namespace cdan {

LabeledSet::LabeledSet(Tensor x, std::vector<int> y, std::size_t classes, Domain domain)
    : x_(std::move(x)), y_(std::move(y)), classes_(classes), domain_(domain) {
  if (x_.rows() != y_.size())
    throw ShapeError(std::to_string(y_.size()) + " labels for " + std::to_string(x_.rows()) + " rows");
  for (int v : y_)
    if (v < 0 || static_cast<std::size_t>(v) >= classes_)
      throw FormatError("label " + std::to_string(v) + " outside [0, " + std::to_string(classes_) + ")");
  if (domain_ == Domain::Source) {
    std::vector<bool> seen(classes_, false);
    for (int v : y_) seen[static_cast<std::size_t>(v)] = true;
    for (std::size_t c = 0; c < classes_; ++c)
      if (!seen[c]) throw FormatError("source set has no example of class " + std::to_string(c));
  }
}

void ShiftSpec::validate() const {
  if (classes < 2) throw ConfigError("dataset.classes must be >= 2");
  if (dim < 2) throw ConfigError("dataset.dim must be >= 2");
  if (n_source < classes || n_target < classes) throw ConfigError("dataset sizes must be >= dataset.classes");
  if (!(noise >= 0.0)) throw ConfigError("dataset.noise must be >= 0");
  if (!class_rotation_deg.empty() && class_rotation_deg.size() != classes)
    throw ConfigError("dataset.class_rotation_deg needs one entry per class");
  if (generator == Generator::RotatedBlobs) {
    if (n_source % classes != 0 || n_target % classes != 0)
      throw ConfigError("rotated_blobs: dataset sizes must be divisible by dataset.classes");
    if (!(radius > 0.0)) throw ConfigError("dataset.radius must be > 0");
  } else if (classes != 2) {
    throw ConfigError("twin_moons_shift has exactly 2 classes");
  }
}

ShiftSpec default_spec(Generator g) {
  ShiftSpec s;
  s.generator = g;
  if (g == Generator::TwinMoonsShift) {
    s.classes = 2;
    s.noise = 0.1;
    s.rotation_deg = 30.0;
    s.n_source = s.n_target = 1000;
  }
  return s;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Rotates the first two coordinates of every row of class c by
// base + extra[c] degrees about the origin, then translates.
void transform(Tensor& x, const std::vector<int>& y, const ShiftSpec& spec, double base_deg) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::size_t c = static_cast<std::size_t>(y[i]);
    const double a = (base_deg + (spec.class_rotation_deg.empty() ? 0.0 : spec.class_rotation_deg[c])) * kDeg;
    const double u = x(i, 0), v = x(i, 1);
    x(i, 0) = std::cos(a) * u - std::sin(a) * v + spec.translate_x;
    x(i, 1) = std::sin(a) * u + std::cos(a) * v + spec.translate_y;
  }
}

LabeledSet blobs(const ShiftSpec& spec, std::size_t n, Domain domain, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  Tensor x({n, spec.dim});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % spec.classes;
    const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(spec.classes);
    y[i] = static_cast<int>(c);
    for (std::size_t k = 0; k < spec.dim; ++k) x(i, k) = spec.noise * noise(rng);
    x(i, 0) += spec.radius * std::cos(a);
    x(i, 1) += spec.radius * std::sin(a);
  }
  return LabeledSet(std::move(x), std::move(y), spec.classes, domain);
}

LabeledSet moons(const ShiftSpec& spec, std::size_t n, Domain domain, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> arc(0.0, std::numbers::pi);
  Tensor x({n, spec.dim});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    const double t = arc(rng);
    // Centred so that rotations act about the middle of the pair.
    const double u = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
    const double v = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
    y[i] = c;
    for (std::size_t k = 0; k < spec.dim; ++k) x(i, k) = spec.noise * noise(rng);
    x(i, 0) += u - 0.5;
    x(i, 1) += v - 0.25;
  }
  return LabeledSet(std::move(x), std::move(y), 2, domain);
}

std::pair<LabeledSet, LabeledSet> generate(const ShiftSpec& spec,
                                           LabeledSet (*draw)(const ShiftSpec&, std::size_t, Domain, Rng&)) {
  spec.validate();
  Rng rs(derive_seed(spec.seed, 101)), rt(derive_seed(spec.seed, 102));
  LabeledSet src = draw(spec, spec.n_source, Domain::Source, rs);
  LabeledSet tgt = draw(spec, spec.n_target, Domain::Target, rt);
  Tensor x = tgt.x();
  transform(x, tgt.labels(), spec, spec.rotation_deg);
  return {std::move(src), LabeledSet(std::move(x), tgt.labels(), tgt.classes(), Domain::Target)};
}

}  // namespace

std::pair<LabeledSet, LabeledSet> make_rotated_blobs(const ShiftSpec& spec) {
  if (spec.generator != Generator::RotatedBlobs) throw ConfigError("spec is not a rotated_blobs spec");
  return generate(spec, blobs);
}

std::pair<LabeledSet, LabeledSet> make_twin_moons_shift(const ShiftSpec& spec) {
  if (spec.generator != Generator::TwinMoonsShift) throw ConfigError("spec is not a twin_moons_shift spec");
  return generate(spec, moons);
}

std::pair<LabeledSet, LabeledSet> make_shift(const ShiftSpec& spec) {
  return spec.generator == Generator::RotatedBlobs ? make_rotated_blobs(spec) : make_twin_moons_shift(spec);
}

LabeledSet load_csv(const std::string& path, Domain domain, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<double> data;
  std::vector<int> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) fields.push_back(tok);
    std::vector<double> row;
    bool numeric = true;
    for (const std::string& f : fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || *end != '\0') {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw FormatError(path + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    first = false;
    if (row.size() < 2) throw FormatError(path + ":" + std::to_string(lineno) + ": need features and a label");
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw FormatError(path + ":" + std::to_string(lineno) + ": ragged row (" + std::to_string(row.size()) +
                        " fields, expected " + std::to_string(width) + ")");
    const double lab = row.back();
    if (lab != std::floor(lab) || lab < 0)
      throw FormatError(path + ":" + std::to_string(lineno) + ": label must be a nonnegative integer");
    labels.push_back(static_cast<int>(lab));
    data.insert(data.end(), row.begin(), row.end() - 1);
  }
  if (labels.empty()) throw FormatError(path + ": no data rows");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (classes == 0) classes = static_cast<std::size_t>(max_label) + 1;
  if (static_cast<std::size_t>(max_label) >= classes)
    throw FormatError(path + ": label " + std::to_string(max_label) + " >= number of classes " + std::to_string(classes));
  const std::size_t n = labels.size();
  return LabeledSet(Tensor({n, width - 1}, std::move(data)), std::move(labels), classes, domain);
}

void write_csv(const LabeledSet& set, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (double v : set.x().row_span(i)) std::fprintf(f, "%.17g,", v);
    std::fprintf(f, "%d\n", set.labels()[i]);
  }
  if (std::fclose(f) != 0) throw std::runtime_error("write failed: " + path);
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch) {
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0xba7c4, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return out;
}

}  // namespace cdan
