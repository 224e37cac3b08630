#include "mmfld/harness.hpp"

#include <chrono>
#include <fstream>

#include <fmt/format.h>

#include "mmfld/errors.hpp"

#ifndef MMFLD_VERSION
#define MMFLD_VERSION "0.0.0"
#endif
#ifndef MMFLD_REVISION
#define MMFLD_REVISION "unknown"
#endif

namespace mmfld {

using nlohmann::json;

std::string artifact_version() { return std::string(MMFLD_VERSION) + "+" + MMFLD_REVISION; }

MirrorMap make_map(const RunConfig& cfg) {
  const auto& d = cfg.domain;
  if (d.kind == MirrorKind::simplex_entropy) return MirrorMap::simplex(d.dim - 1);
  return MirrorMap::box(Eigen::Map<const Vector>(d.lower.data(), static_cast<Eigen::Index>(d.lower.size())),
                        Eigen::Map<const Vector>(d.upper.data(), static_cast<Eigen::Index>(d.upper.size())));
}

Objective make_objective(const RunConfig& cfg) {
  const auto& o = cfg.objective;
  auto vec = [](const std::vector<double>& v) {
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  switch (o.kind) {
    case ObjectiveKind::linear_potential:
      return Objective::linear_potential(vec(o.alpha), o.reference_lambda);
    case ObjectiveKind::mean_match_barrier:
      return Objective::mean_match(vec(o.target), o.beta);
    case ObjectiveKind::mf_network_risk:
      return Objective::mf_network(Dataset::load_csv(o.dataset));
  }
  throw std::invalid_argument("unknown objective kind");
}

SamplerConfig make_sampler(const RunConfig& cfg) {
  const auto& s = cfg.sampler;
  return {s.kind, s.eta, s.lambda, s.substeps, s.steps, s.dual_step_limit, s.boundary_floor};
}

namespace {

void append_number(fmt::memory_buffer& out, double v) { fmt::format_to(std::back_inserter(out), "{:.17g}", v); }

json row_json(const MetricsRow& row) {
  return {{"iteration", row.iteration},
          {"value", row.value},
          {"boundary_fraction", row.boundary_fraction},
          {"mean", std::vector<double>(row.mean.data(), row.mean.data() + row.mean.size())},
          {"min_coordinate", row.min_coordinate},
          {"max_coordinate", row.max_coordinate}};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
    out << content;
    out.flush();
    if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  fmt::memory_buffer out;
  const Eigen::Index d = rows.empty() ? 0 : rows.front().mean.size();
  fmt::format_to(std::back_inserter(out), "iteration,value,boundary_fraction");
  for (Eigen::Index c = 0; c < d; ++c) fmt::format_to(std::back_inserter(out), ",mean_{}", c);
  fmt::format_to(std::back_inserter(out), ",min_coordinate,max_coordinate,wall_ms\n");
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(out), "{},", r.iteration);
    append_number(out, r.value);
    out.push_back(',');
    append_number(out, r.boundary_fraction);
    for (Eigen::Index c = 0; c < d; ++c) {
      out.push_back(',');
      append_number(out, r.mean[c]);
    }
    out.push_back(',');
    append_number(out, r.min_coordinate);
    out.push_back(',');
    append_number(out, r.max_coordinate);
    fmt::format_to(std::back_inserter(out), ",{:.3f}\n", r.wall_ms);
  }
  return fmt::to_string(out);
}

std::string particles_csv(const ParticleEnsemble& ensemble) {
  fmt::memory_buffer out;
  const Eigen::Index d = ensemble.ambient_dim();
  for (Eigen::Index c = 0; c < d; ++c) fmt::format_to(std::back_inserter(out), "{}x{}", c ? "," : "", c);
  out.push_back('\n');
  for (Eigen::Index i = 0; i < ensemble.size(); ++i) {
    for (Eigen::Index c = 0; c < d; ++c) {
      if (c) out.push_back(',');
      append_number(out, ensemble.points()(i, c));
    }
    out.push_back('\n');
  }
  return fmt::to_string(out);
}

RunResult run_experiment(const RunConfig& cfg, int workers, bool write) {
  validate_config(cfg);
  const MirrorMap map = make_map(cfg);
  const Objective obj = make_objective(cfg);
  const SamplerConfig sampler = make_sampler(cfg);

  RunResult result;
  result.final_ensemble = ParticleEnsemble::uniform(map, cfg.sampler.particles, cfg.seed);
  ParticleEnsemble& ensemble = result.final_ensemble;
  const auto start = std::chrono::steady_clock::now();
  result.rows.push_back(measure(ensemble, map, obj, sampler.kind, cfg.boundary_epsilon));

  json error;
  try {
    auto rows = run_sampler(ensemble, map, obj, sampler, {workers, cfg.every, cfg.boundary_epsilon});
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  } catch (const SamplerError& e) {
    result.ok = false;
    error = {{"message", e.what()}, {"iteration", e.iteration()}};
  }
  const double runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  json& summary = result.summary;
  summary["version"] = artifact_version();
  summary["status"] = result.ok ? "ok" : "failed";
  if (!result.ok) summary["error"] = error;
  summary["sampler"] = to_string(sampler.kind);
  summary["initial"] = row_json(result.rows.front());
  summary["final"] = row_json(result.rows.back());
  summary["runtime_ms"] = runtime_ms;
  summary["config"] = to_json(cfg);

  if (write) {
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "metrics.csv", metrics_csv(result.rows));
    if (cfg.dump_particles) write_file(dir / "particles.csv", particles_csv(ensemble));
    write_file(dir / "summary.json", summary.dump(2) + "\n");
  }
  return result;
}

json compare_runs(const std::vector<json>& summaries, const std::vector<std::string>& labels) {
  if (summaries.size() < 2) throw std::invalid_argument("compare needs at least two summaries");
  if (labels.size() != summaries.size()) throw std::invalid_argument("one label per summary");
  auto spec = [](const json& s) {
    if (!s.contains("config") || !s.contains("final")) throw std::invalid_argument("not a run summary");
    return json{{"domain", s["config"]["domain"]}, {"objective", s["config"]["objective"]}};
  };
  const json reference = spec(summaries.front());
  for (size_t i = 1; i < summaries.size(); ++i)
    if (spec(summaries[i]) != reference)
      throw std::invalid_argument(fmt::format("run '{}' optimizes a different objective than '{}'", labels[i],
                                              labels.front()));

  json out;
  out["objective"] = reference;
  json runs = json::array();
  json deltas = json::array();
  const double v0 = summaries.front()["final"]["value"].get<double>();
  const double b0 = summaries.front()["final"]["boundary_fraction"].get<double>();
  for (size_t i = 0; i < summaries.size(); ++i) {
    const json& f = summaries[i]["final"];
    const double v = f["value"].get<double>();
    const double b = f["boundary_fraction"].get<double>();
    runs.push_back({{"label", labels[i]},
                    {"sampler", summaries[i].value("sampler", "")},
                    {"status", summaries[i].value("status", "")},
                    {"final_value", v},
                    {"boundary_fraction", b}});
    deltas.push_back({{"label", labels[i]}, {"final_value", v - v0}, {"boundary_fraction", b - b0}});
  }
  auto winner = [&](const char* key) -> json {
    size_t best = 0;
    bool tie = false;
    for (size_t i = 1; i < runs.size(); ++i) {
      const double v = runs[i][key].get<double>();
      const double b = runs[best][key].get<double>();
      if (v < b) {
        best = i;
        tie = false;
      } else if (v == b) {
        tie = true;
      }
    }
    return tie ? json("tie") : json(labels[best]);
  };
  out["winners"] = {{"final_value", winner("final_value")}, {"boundary_fraction", winner("boundary_fraction")}};
  out["runs"] = std::move(runs);
  out["deltas"] = std::move(deltas);
  return out;
}

OracleRun run_oracle(const RunConfig& cfg) {
  validate_config(cfg);
  if (cfg.domain.kind != MirrorKind::simplex_entropy || cfg.domain.dim != 3)
    throw ConfigError({"domain: the grid oracle needs the 2-simplex (simplex, dim 3)"});
  if (cfg.objective.kind == ObjectiveKind::mf_network_risk)
    throw ConfigError({"objective.kind: the grid oracle covers simplex objectives only"});
  if (!(cfg.sampler.lambda > 0.0)) throw ConfigError({"sampler.lambda: the oracle needs lambda > 0"});
  const Objective obj = make_objective(cfg);
  OracleRun out{SimplexGrid::build(cfg.oracle.resolution, cfg.oracle.margin), {}, {}};
  out.result = fixed_point_solve(out.grid, obj, cfg.sampler.lambda,
                                 {cfg.oracle.damping, cfg.oracle.tol, cfg.oracle.max_iter});
  out.functionals = grid_functionals(out.grid, obj, out.result.measure, cfg.sampler.lambda);
  return out;
}

}  // namespace mmfld
