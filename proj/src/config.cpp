#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mmfld/errors.hpp"
#include "mmfld/harness.hpp"

namespace mmfld {

using nlohmann::json;

namespace {

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1] ? 1 : 0)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

std::string type_name(const json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number_float()) return "number";
  return v.type_name();
}

// Reads the members of one JSON object, recording every problem under its key path.
class Section {
 public:
  Section(const json* node, std::string path, std::vector<std::string>& problems)
      : node_(node), path_(std::move(path)), problems_(problems) {
    if (node_ && !node_->is_object()) {
      problems_.push_back(fmt::format("{}: expected an object, got {}", label(), type_name(*node_)));
      node_ = nullptr;
    }
  }

  const json* find(const std::string& key) {
    known_.insert(key);
    if (!node_) return nullptr;
    auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return join_path(path_, key); }

  double number(const std::string& key, double fallback, const std::function<bool(double)>& ok, const char* range) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) {
      problems_.push_back(fmt::format("{}: expected a number, got {}", path(key), type_name(*v)));
      return fallback;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x) || !ok(x)) problems_.push_back(fmt::format("{}: must be {}, got {}", path(key), range, x));
    return x;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback, std::int64_t lo, const char* range) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) {
      problems_.push_back(fmt::format("{}: expected an integer, got {}", path(key), type_name(*v)));
      return fallback;
    }
    const std::int64_t x = v->get<std::int64_t>();
    if (x < lo) problems_.push_back(fmt::format("{}: must be {}, got {}", path(key), range, x));
    return x;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) {
      problems_.push_back(fmt::format("{}: expected a string, got {}", path(key), type_name(*v)));
      return fallback;
    }
    return v->get<std::string>();
  }

  bool flag(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) {
      problems_.push_back(fmt::format("{}: expected a boolean, got {}", path(key), type_name(*v)));
      return fallback;
    }
    return v->get<bool>();
  }

  // A list of numbers, or a single number broadcast later by the caller (returned as one element).
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (v->is_number()) return {v->get<double>()};
    if (!v->is_array() || v->empty() ||
        !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
      problems_.push_back(fmt::format("{}: expected a nonempty array of numbers", path(key)));
      return fallback;
    }
    return v->get<std::vector<double>>();
  }

  // Rejects members that were never asked for, suggesting the closest known key.
  void reject_unknown() {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      if (known_.count(it.key())) continue;
      std::string best;
      size_t best_distance = 3;
      for (const auto& k : known_) {
        const size_t d = edit_distance(it.key(), k);
        if (d < best_distance) {
          best_distance = d;
          best = k;
        }
      }
      if (best.empty())
        problems_.push_back(fmt::format("{}: unknown key", path(it.key())));
      else
        problems_.push_back(fmt::format("{}: unknown key, did you mean \"{}\"?", path(it.key()), best));
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json* node_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> known_;
};

template <class Enum>
Enum parse_enum(Section& s, const std::string& key, Enum fallback,
                const std::vector<std::pair<std::string, Enum>>& names, std::vector<std::string>& problems) {
  const std::string value = s.text(key, "");
  if (value.empty()) return fallback;
  for (const auto& [name, e] : names)
    if (name == value) return e;
  std::string options;
  for (const auto& [name, e] : names) options += (options.empty() ? "" : ", ") + name;
  problems.push_back(fmt::format("{}: unknown value \"{}\" (expected one of {})", s.path(key), value, options));
  return fallback;
}

const std::vector<std::pair<std::string, SamplerKind>> kSamplerNames{
    {"mmfld", SamplerKind::mmfld}, {"projected-mfld", SamplerKind::projected_mfld}, {"mfld", SamplerKind::mfld}};
const std::vector<std::pair<std::string, ObjectiveKind>> kObjectiveNames{
    {"linear-potential", ObjectiveKind::linear_potential},
    {"mean-match-barrier", ObjectiveKind::mean_match_barrier},
    {"mf-network-risk", ObjectiveKind::mf_network_risk}};
const std::vector<std::pair<std::string, MirrorKind>> kDomainNames{{"simplex", MirrorKind::simplex_entropy},
                                                                   {"box", MirrorKind::box_log_barrier}};
const std::vector<std::pair<std::string, MirrorKind>> kMirrorNames{
    {"simplex-entropy", MirrorKind::simplex_entropy}, {"box-log-barrier", MirrorKind::box_log_barrier}};

template <class Enum>
std::string name_of(Enum e, const std::vector<std::pair<std::string, Enum>>& names) {
  for (const auto& [name, v] : names)
    if (v == e) return name;
  return "unknown";
}

// Feature count of the dataset, or -1 with a problem recorded.
int dataset_features(const std::string& path, std::vector<std::string>& problems) {
  try {
    return static_cast<int>(Dataset::load_csv(path).features.cols());
  } catch (const std::exception& e) {
    problems.push_back(fmt::format("objective.dataset: {}", e.what()));
    return -1;
  }
}

void check_semantics(const RunConfig& cfg, std::vector<std::string>& problems) {
  const auto& d = cfg.domain;
  const auto& o = cfg.objective;
  const auto& s = cfg.sampler;
  const bool simplex = d.kind == MirrorKind::simplex_entropy;

  if (simplex) {
    if (d.dim < 2) problems.push_back(fmt::format("domain.dim: simplex needs dim >= 2, got {}", d.dim));
  } else {
    if (d.dim < 1) problems.push_back(fmt::format("domain.dim: box needs dim >= 1, got {}", d.dim));
    if (static_cast<int>(d.lower.size()) != d.dim || static_cast<int>(d.upper.size()) != d.dim) {
      problems.push_back(fmt::format("domain.lower/upper: need {} bounds each", d.dim));
    } else {
      for (int i = 0; i < d.dim; ++i)
        if (!(d.lower[i] < d.upper[i]) || !std::isfinite(d.lower[i]) || !std::isfinite(d.upper[i]))
          problems.push_back(fmt::format("domain.lower[{}]: must be finite and below domain.upper[{}]", i, i));
    }
  }

  switch (o.kind) {
    case ObjectiveKind::linear_potential:
    case ObjectiveKind::mean_match_barrier: {
      if (!simplex) problems.push_back(fmt::format("objective.kind: {} needs a simplex domain", to_string(o.kind)));
      const bool linear = o.kind == ObjectiveKind::linear_potential;
      const auto& v = linear ? o.alpha : o.target;
      const char* key = linear ? "objective.alpha" : "objective.q";
      if (static_cast<int>(v.size()) != d.dim) {
        problems.push_back(fmt::format("{}: expected {} entries, got {}", key, d.dim, v.size()));
      } else if (linear) {
        if (!std::all_of(v.begin(), v.end(), [](double a) { return a > 0.0 && std::isfinite(a); }))
          problems.push_back("objective.alpha: entries must be > 0");
        if (!(o.reference_lambda > 0.0)) problems.push_back("objective.reference_lambda: must be > 0");
      } else {
        double total = 0.0;
        for (double x : v) total += x;
        if (!std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; }) || std::abs(total - 1.0) > 1e-9)
          problems.push_back("objective.q: must be an interior simplex point (entries > 0 summing to 1)");
        if (!(o.beta >= 0.0)) problems.push_back(fmt::format("objective.beta: must be >= 0, got {}", o.beta));
      }
      break;
    }
    case ObjectiveKind::mf_network_risk: {
      if (simplex) problems.push_back("objective.kind: mf-network-risk needs a box domain");
      if (o.dataset.empty()) {
        problems.push_back("objective.dataset: required for mf-network-risk");
      } else {
        const int p = dataset_features(o.dataset, problems);
        if (p >= 0 && !simplex && d.dim != p + 1)
          problems.push_back(fmt::format("domain.dim: network with {} features needs dim {}, got {}", p, p + 1, d.dim));
      }
      break;
    }
  }

  if (!(s.eta > 0.0) || !std::isfinite(s.eta)) problems.push_back(fmt::format("sampler.eta: must be > 0, got {}", s.eta));
  if (!(s.lambda >= 0.0) || !std::isfinite(s.lambda))
    problems.push_back(fmt::format("sampler.lambda: must be >= 0, got {}", s.lambda));
  if (s.substeps < 1) problems.push_back(fmt::format("sampler.substeps: must be >= 1, got {}", s.substeps));
  if (s.steps < 0) problems.push_back(fmt::format("sampler.steps: must be >= 0, got {}", s.steps));
  if (s.particles < 1) problems.push_back(fmt::format("sampler.particles: must be >= 1, got {}", s.particles));
  if (!(s.dual_step_limit >= 0.0))
    problems.push_back(fmt::format("sampler.dual_step_limit: must be >= 0, got {}", s.dual_step_limit));
  if (!(s.boundary_floor >= 0.0 && s.boundary_floor < 0.5))
    problems.push_back(fmt::format("sampler.boundary_floor: must lie in [0, 0.5), got {}", s.boundary_floor));
  if (s.kind == SamplerKind::mfld && o.kind != ObjectiveKind::mf_network_risk)
    problems.push_back("sampler.kind: mfld runs only the mf-network-risk objective");

  if (cfg.every < 1) problems.push_back(fmt::format("diagnostics.every: must be >= 1, got {}", cfg.every));
  if (!(cfg.boundary_epsilon > 0.0))
    problems.push_back(fmt::format("diagnostics.boundary_epsilon: must be > 0, got {}", cfg.boundary_epsilon));
  if (cfg.out_dir.empty()) problems.push_back("output.dir: must not be empty");

  const auto& g = cfg.oracle;
  if (g.resolution < 8) problems.push_back(fmt::format("oracle.resolution: must be >= 8, got {}", g.resolution));
  if (!(g.margin > 0.0 && g.margin < 1.0 / (3.0 * std::max(g.resolution, 1))))
    problems.push_back(fmt::format("oracle.margin: must lie in (0, 1/(3 resolution)), got {}", g.margin));
  if (!(g.damping > 0.0 && g.damping <= 1.0))
    problems.push_back(fmt::format("oracle.damping: must lie in (0, 1], got {}", g.damping));
  if (!(g.tol > 0.0)) problems.push_back(fmt::format("oracle.tol: must be > 0, got {}", g.tol));
  if (g.max_iter < 1) problems.push_back(fmt::format("oracle.max_iter: must be >= 1, got {}", g.max_iter));
}

}  // namespace

std::string to_string(SamplerKind kind) { return name_of(kind, kSamplerNames); }
std::string to_string(ObjectiveKind kind) { return name_of(kind, kObjectiveNames); }
std::string to_string(MirrorKind kind) { return name_of(kind, kMirrorNames); }

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  std::vector<std::string> problems;
  RunConfig cfg;
  auto positive = [](double x) { return x > 0.0; };
  auto nonnegative = [](double x) { return x >= 0.0; };

  Section top(&doc, "", problems);

  Section domain(top.find("domain"), "domain", problems);
  cfg.domain.kind = parse_enum(domain, "kind", MirrorKind::simplex_entropy, kDomainNames, problems);
  const bool has_mirror = domain.find("mirror") != nullptr;
  const MirrorKind mirror = parse_enum(domain, "mirror", cfg.domain.kind, kMirrorNames, problems);
  if (has_mirror && mirror != cfg.domain.kind)
    problems.push_back(fmt::format("domain.mirror: {} does not fit a {} domain", to_string(mirror),
                                   name_of(cfg.domain.kind, kDomainNames)));
  const bool has_dim = domain.find("dim") != nullptr;
  cfg.domain.dim = static_cast<int>(domain.integer("dim", 3, 1, ">= 1"));
  cfg.domain.lower = domain.numbers("lower", {});
  cfg.domain.upper = domain.numbers("upper", {});
  domain.reject_unknown();

  Section objective(top.find("objective"), "objective", problems);
  auto& o = cfg.objective;
  o.kind = parse_enum(objective, "kind", ObjectiveKind::mean_match_barrier, kObjectiveNames, problems);
  o.target = objective.numbers("q", o.target);
  o.beta = objective.number("beta", o.beta, nonnegative, ">= 0");
  o.alpha = objective.numbers("alpha", {});
  o.reference_lambda = objective.number("reference_lambda", o.reference_lambda, positive, "> 0");
  o.dataset = objective.text("dataset", "");
  objective.reject_unknown();
  if (!o.dataset.empty()) {
    std::filesystem::path p(o.dataset);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    o.dataset = p.lexically_normal().string();
  }

  Section sampler(top.find("sampler"), "sampler", problems);
  auto& s = cfg.sampler;
  s.kind = parse_enum(sampler, "kind", s.kind, kSamplerNames, problems);
  s.eta = sampler.number("eta", s.eta, positive, "> 0");
  s.lambda = sampler.number("lambda", s.lambda, nonnegative, ">= 0");
  s.substeps = static_cast<int>(sampler.integer("substeps", s.substeps, 1, ">= 1"));
  s.steps = sampler.integer("steps", s.steps, 0, ">= 0");
  s.particles = sampler.integer("particles", s.particles, 1, ">= 1");
  s.dual_step_limit = sampler.number("dual_step_limit", s.dual_step_limit, nonnegative, ">= 0");
  s.boundary_floor = sampler.number("boundary_floor", s.boundary_floor, [](double x) { return x >= 0.0 && x < 0.5; },
                                    "in [0, 0.5)");
  sampler.reject_unknown();

  if (const json* seed = top.find("seed")) {
    if (seed->is_number_unsigned())
      cfg.seed = seed->get<std::uint64_t>();
    else if (seed->is_number_integer())
      problems.push_back(fmt::format("seed: must be >= 0, got {}", seed->get<std::int64_t>()));
    else
      problems.push_back(fmt::format("seed: expected an integer, got {}", type_name(*seed)));
  }

  Section output(top.find("output"), "output", problems);
  cfg.out_dir = output.text("dir", cfg.out_dir);
  cfg.dump_particles = output.flag("dump_particles", cfg.dump_particles);
  output.reject_unknown();

  Section diagnostics(top.find("diagnostics"), "diagnostics", problems);
  cfg.every = diagnostics.integer("every", cfg.every, 1, ">= 1");
  cfg.boundary_epsilon = diagnostics.number("boundary_epsilon", cfg.boundary_epsilon, positive, "> 0");
  diagnostics.reject_unknown();

  Section oracle(top.find("oracle"), "oracle", problems);
  auto& g = cfg.oracle;
  g.resolution = static_cast<int>(oracle.integer("resolution", g.resolution, 8, ">= 8"));
  g.margin = oracle.number("margin", g.margin, positive, "> 0");
  g.damping = oracle.number("damping", g.damping, [](double x) { return x > 0.0 && x <= 1.0; }, "in (0, 1]");
  g.tol = oracle.number("tol", g.tol, positive, "> 0");
  g.max_iter = static_cast<int>(oracle.integer("max_iter", g.max_iter, 1, ">= 1"));
  oracle.reject_unknown();

  top.reject_unknown();

  // Box defaults: the network's parameter box [-3, 3]^(p+1).
  auto& d = cfg.domain;
  if (d.kind == MirrorKind::box_log_barrier) {
    if (!has_dim && !o.dataset.empty() && o.kind == ObjectiveKind::mf_network_risk) {
      std::vector<std::string> ignored;
      const int p = dataset_features(o.dataset, ignored);
      if (p >= 0) d.dim = p + 1;
    } else if (!has_dim && !d.lower.empty() && d.lower.size() > 1) {
      d.dim = static_cast<int>(d.lower.size());
    }
    if (d.lower.empty()) d.lower = {-3.0};
    if (d.upper.empty()) d.upper = {3.0};
    if (d.lower.size() == 1) d.lower.assign(d.dim, d.lower[0]);
    if (d.upper.size() == 1) d.upper.assign(d.dim, d.upper[0]);
  } else if (!d.lower.empty() || !d.upper.empty()) {
    problems.push_back("domain.lower/upper: only a box domain takes bounds");
  }

  if (problems.empty()) check_semantics(cfg, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({fmt::format("not valid JSON: {}", e.what())});
  }
  return parse_config(doc, base_dir);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({fmt::format("cannot read config file '{}'", path.string())});
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.parent_path());
}

void validate_config(const RunConfig& cfg) {
  std::vector<std::string> problems;
  check_semantics(cfg, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

json to_json(const RunConfig& cfg) {
  json j;
  json domain{{"kind", name_of(cfg.domain.kind, kDomainNames)},
              {"mirror", to_string(cfg.domain.kind)},
              {"dim", cfg.domain.dim}};
  if (cfg.domain.kind == MirrorKind::box_log_barrier) {
    domain["lower"] = cfg.domain.lower;
    domain["upper"] = cfg.domain.upper;
  }
  j["domain"] = std::move(domain);

  const auto& o = cfg.objective;
  json objective{{"kind", to_string(o.kind)}};
  switch (o.kind) {
    case ObjectiveKind::linear_potential:
      objective["alpha"] = o.alpha;
      objective["reference_lambda"] = o.reference_lambda;
      break;
    case ObjectiveKind::mean_match_barrier:
      objective["q"] = o.target;
      objective["beta"] = o.beta;
      break;
    case ObjectiveKind::mf_network_risk:
      objective["dataset"] = o.dataset;
      break;
  }
  j["objective"] = std::move(objective);

  const auto& s = cfg.sampler;
  j["sampler"] = {{"kind", to_string(s.kind)},
                  {"eta", s.eta},
                  {"lambda", s.lambda},
                  {"substeps", s.substeps},
                  {"steps", s.steps},
                  {"particles", s.particles},
                  {"dual_step_limit", s.dual_step_limit},
                  {"boundary_floor", s.boundary_floor}};
  j["seed"] = cfg.seed;
  j["output"] = {{"dir", cfg.out_dir}, {"dump_particles", cfg.dump_particles}};
  j["diagnostics"] = {{"every", cfg.every}, {"boundary_epsilon", cfg.boundary_epsilon}};
  const auto& g = cfg.oracle;
  j["oracle"] = {{"resolution", g.resolution},
                 {"margin", g.margin},
                 {"damping", g.damping},
                 {"tol", g.tol},
                 {"max_iter", g.max_iter}};
  return j;
}

}  // namespace mmfld
