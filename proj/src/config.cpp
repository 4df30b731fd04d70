#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "cdan/error.hpp"
#include "cdan/runner.hpp"

namespace cdan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": invalid value '" + value + "' (expected " + expected + ")");
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) bad_value(key, v, "a number");
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  if (v.empty() || v[0] == '-') bad_value(key, v, "a nonnegative integer");
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) bad_value(key, v, "a nonnegative integer");
  return u;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Key {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define NUM(field) \
  [](ExperimentConfig& c, const std::string& v) { c.field = to_double(KEY, v); }, \
      [](const ExperimentConfig& c) { return fmt(c.field); }
#define UINT(field) \
  [](ExperimentConfig& c, const std::string& v) { c.field = to_uint(KEY, v); }, \
      [](const ExperimentConfig& c) { return std::to_string(c.field); }
#define BOOL(field) \
  [](ExperimentConfig& c, const std::string& v) { c.field = to_bool(KEY, v); }, \
      [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = [] {
    std::vector<Key> v;
    auto add = [&](std::string name, std::string help, auto set, auto get) {
      v.push_back({std::move(name), std::move(help), set, get});
    };
#define KEY "dataset.generator"
    add(KEY, "rotated_blobs | twin_moons_shift (ignored when dataset.source_csv is set)",
        [](ExperimentConfig& c, const std::string& s) {
          Generator g;
          if (s == "rotated_blobs") g = Generator::RotatedBlobs;
          else if (s == "twin_moons_shift") g = Generator::TwinMoonsShift;
          else bad_value(KEY, s, "rotated_blobs or twin_moons_shift");
          if (g != c.data.generator) {
            const std::uint64_t seed = c.data.seed;
            c.data = default_spec(g);
            c.data.seed = seed;
          }
        },
        [](const ExperimentConfig& c) {
          return std::string(c.data.generator == Generator::RotatedBlobs ? "rotated_blobs" : "twin_moons_shift");
        });
#undef KEY
#define KEY "dataset.classes"
    add(KEY, "number of categories C", UINT(data.classes));
#undef KEY
#define KEY "dataset.dim"
    add(KEY, "input dimension (extra dimensions are pure noise)", UINT(data.dim));
#undef KEY
#define KEY "dataset.radius"
    add(KEY, "radius of the circle of blob centres", NUM(data.radius));
#undef KEY
#define KEY "dataset.noise"
    add(KEY, "per-coordinate Gaussian noise scale", NUM(data.noise));
#undef KEY
#define KEY "dataset.rotation_deg"
    add(KEY, "global rotation of the target domain, degrees", NUM(data.rotation_deg));
#undef KEY
#define KEY "dataset.class_rotation_deg"
    add(KEY, "comma list of extra per-class target rotations, degrees",
        [](ExperimentConfig& c, const std::string& s) {
          c.data.class_rotation_deg.clear();
          for (const auto& t : split_list(s)) c.data.class_rotation_deg.push_back(to_double(KEY, t));
        },
        [](const ExperimentConfig& c) {
          std::string out;
          for (double d : c.data.class_rotation_deg) out += (out.empty() ? "" : ",") + fmt(d);
          return out;
        });
#undef KEY
#define KEY "dataset.translate_x"
    add(KEY, "target translation along x", NUM(data.translate_x));
#undef KEY
#define KEY "dataset.translate_y"
    add(KEY, "target translation along y", NUM(data.translate_y));
#undef KEY
#define KEY "dataset.n_source"
    add(KEY, "number of source examples", UINT(data.n_source));
#undef KEY
#define KEY "dataset.n_target"
    add(KEY, "number of target examples", UINT(data.n_target));
#undef KEY
#define KEY "dataset.seed"
    add(KEY, "fixed dataset seed (default: the run seed)",
        [](ExperimentConfig& c, const std::string& s) {
          if (s.empty()) c.data_seed.reset();
          else c.data_seed = to_uint(KEY, s);
        },
        [](const ExperimentConfig& c) { return c.data_seed ? std::to_string(*c.data_seed) : std::string(); });
#undef KEY
#define KEY "dataset.source_csv"
    add(KEY, "labeled source CSV (features..., label)",
        [](ExperimentConfig& c, const std::string& s) { c.source_csv = s; },
        [](const ExperimentConfig& c) { return c.source_csv; });
#undef KEY
#define KEY "dataset.target_csv"
    add(KEY, "target CSV; its labels are used for evaluation only",
        [](ExperimentConfig& c, const std::string& s) { c.target_csv = s; },
        [](const ExperimentConfig& c) { return c.target_csv; });
#undef KEY
#define KEY "model.feature_hidden"
    add(KEY, "hidden width of F", UINT(feature_hidden));
#undef KEY
#define KEY "model.feature_width"
    add(KEY, "output width d_f of F", UINT(feature_width));
#undef KEY
#define KEY "model.disc_hidden"
    add(KEY, "width of both hidden layers of D", UINT(disc_hidden));
#undef KEY
#define KEY "conditioning.strategy"
    add(KEY, "auto | feature | prediction | concat | multilinear | randomized",
        [](ExperimentConfig& c, const std::string& s) {
          if (s == "auto") {
            c.auto_strategy = true;
            return;
          }
          try {
            c.strategy.tag = parse_strategy(s);
          } catch (const UsageError&) {
            bad_value(KEY, s, "auto, feature, prediction, concat, multilinear or randomized");
          }
          c.auto_strategy = false;
        },
        [](const ExperimentConfig& c) { return c.auto_strategy ? std::string("auto") : to_string(c.strategy.tag); });
#undef KEY
#define KEY "conditioning.threshold"
    add(KEY, "auto picks multilinear iff d_f * C <= threshold", UINT(threshold));
#undef KEY
#define KEY "conditioning.dim"
    add(KEY, "output width d of the randomized map", UINT(strategy.dim));
#undef KEY
#define KEY "conditioning.sampler"
    add(KEY, "gaussian | uniform entries of the random matrices",
        [](ExperimentConfig& c, const std::string& s) {
          try {
            c.strategy.sampler = parse_sampler(s);
          } catch (const UsageError&) {
            bad_value(KEY, s, "gaussian or uniform");
          }
        },
        [](const ExperimentConfig& c) { return to_string(c.strategy.sampler); });
#undef KEY
#define KEY "conditioning.normalize_f"
    add(KEY, "unit-normalize f rows before the randomized map", BOOL(strategy.normalize_f));
#undef KEY
#define KEY "entropy"
    add(KEY, "weight discriminator examples by 1 + exp(-H(g)) (CDAN+E)", BOOL(entropy));
#undef KEY
#define KEY "adversarial.detach_prediction"
    add(KEY, "feed D a constant copy of g (adversarial gradient flows through f only)", BOOL(graph.detach_prediction));
#undef KEY
#define KEY "adversarial.detach_weights"
    add(KEY, "treat entropy weights as constants in the adversarial loss", BOOL(graph.detach_weights));
#undef KEY
#define KEY "schedule.eta0"
    add(KEY, "base learning rate", NUM(schedule.eta0));
#undef KEY
#define KEY "schedule.alpha"
    add(KEY, "learning-rate annealing alpha", NUM(schedule.alpha));
#undef KEY
#define KEY "schedule.beta"
    add(KEY, "learning-rate annealing beta", NUM(schedule.beta));
#undef KEY
#define KEY "schedule.delta"
    add(KEY, "adversarial ramp-up delta", NUM(schedule.delta));
#undef KEY
#define KEY "schedule.momentum"
    add(KEY, "SGD momentum", NUM(schedule.momentum));
#undef KEY
#define KEY "schedule.lambda"
    add(KEY, "adversarial trade-off lambda (0 gives source-only training)", NUM(schedule.lambda));
#undef KEY
#define KEY "schedule.lr_mult_F"
    add(KEY, "learning-rate multiplier for F", NUM(lr_mult_F));
#undef KEY
#define KEY "schedule.lr_mult_G"
    add(KEY, "learning-rate multiplier for G", NUM(lr_mult_G));
#undef KEY
#define KEY "schedule.lr_mult_D"
    add(KEY, "learning-rate multiplier for D", NUM(lr_mult_D));
#undef KEY
#define KEY "train.batch_size"
    add(KEY, "examples per domain per step", UINT(batch_size));
#undef KEY
#define KEY "train.steps"
    add(KEY, "total optimisation steps", UINT(steps));
#undef KEY
#define KEY "seeds"
    add(KEY, "comma list of seeds",
        [](ExperimentConfig& c, const std::string& s) {
          c.seeds.clear();
          for (const auto& t : split_list(s)) c.seeds.push_back(to_uint(KEY, t));
        },
        [](const ExperimentConfig& c) {
          std::string out;
          for (auto s : c.seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
          return out;
        });
#undef KEY
#define KEY "out"
    add(KEY, "output directory",
        [](ExperimentConfig& c, const std::string& s) { c.out_dir = s; },
        [](const ExperimentConfig& c) { return c.out_dir; });
#undef KEY
#define KEY "analysis.a_distance"
    add(KEY, "compute the proxy A-distance after training", BOOL(a_distance));
#undef KEY
    return v;
  }();
  return k;
}

#undef NUM
#undef UINT
#undef BOOL

}  // namespace

void ExperimentConfig::validate() const {
  if (source_csv.empty() != target_csv.empty())
    throw ConfigError("dataset.source_csv and dataset.target_csv must be given together");
  if (source_csv.empty()) data.validate();
  if (feature_hidden < 1 || feature_width < 1 || disc_hidden < 1) throw ConfigError("model widths must be >= 1");
  if (strategy.tag == StrategyTag::RandomizedMultilinear || auto_strategy)
    if (strategy.dim < 1) throw ConfigError("conditioning.dim must be >= 1");
  schedule.validate();
  if (!(lr_mult_F >= 0.0 && lr_mult_G >= 0.0 && lr_mult_D >= 0.0))
    throw ConfigError("schedule.lr_mult_* must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (steps < 1) throw ConfigError("train.steps must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const Key& k : keys())
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv, ExperimentConfig base) {
  // The generator resets dataset defaults, so apply it first.
  if (auto it = kv.find("dataset.generator"); it != kv.end()) apply_config_value(base, it->first, it->second);
  for (const auto& [k, v] : kv)
    if (k != "dataset.generator") apply_config_value(base, k, v);
  return base;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_map(parse_config_text(ss.str()));
}

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> out = [] {
    std::vector<std::pair<std::string, std::string>> v;
    for (const Key& k : keys()) v.emplace_back(k.name, k.help);
    return v;
  }();
  return out;
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

}  // namespace cdan
