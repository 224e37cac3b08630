#pragma once

// Experiment configuration, runs and their file outputs.
//
// A run directory holds
//   metrics.csv    iteration,value,boundary_fraction,mean_0..mean_{d-1},
//                  min_coordinate,max_coordinate,wall_ms
//   summary.json   final diagnostics, status and the canonical config echo
//   particles.csv  final ambient particle array (on request)
// Floating-point fields are written with 17 significant digits so that reruns
// of a config are byte-identical apart from wall_ms and runtime_ms.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mmfld/dynamics.hpp"
#include "mmfld/objectives.hpp"
#include "mmfld/oracle.hpp"

namespace mmfld {

std::string artifact_version();

struct DomainSpec {
  MirrorKind kind = MirrorKind::simplex_entropy;
  int dim = 3;  // ambient dimension of the simplex, or box dimension
  std::vector<double> lower, upper;
};

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::mean_match_barrier;
  std::vector<double> target{0.5, 0.3, 0.2};
  double beta = 0.0;
  std::vector<double> alpha;
  double reference_lambda = 0.1;
  std::string dataset;
};

struct SamplerSpec {
  SamplerKind kind = SamplerKind::mmfld;
  double eta = 3e-3;
  double lambda = 0.1;
  int substeps = 1;
  std::int64_t steps = 2000;
  std::int64_t particles = 10000;
  double dual_step_limit = 0.0;
  double boundary_floor = 0.0;
};

struct OracleSpec {
  int resolution = 64;
  double margin = 1e-4;
  double damping = 0.5;
  double tol = 1e-8;
  int max_iter = 10000;
};

struct RunConfig {
  DomainSpec domain;
  ObjectiveSpec objective;
  SamplerSpec sampler;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";
  bool dump_particles = false;
  std::int64_t every = 1;
  double boundary_epsilon = 1e-3;
  OracleSpec oracle;
};

// Parses and validates. Every problem is collected into one ConfigError, each
// naming its key path ("sampler.eta"). Unknown keys are rejected with the
// closest known key as a suggestion. Relative dataset paths resolve against
// `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Re-checks a config assembled or modified in code.
void validate_config(const RunConfig& cfg);

// Canonical form with every field present.
nlohmann::json to_json(const RunConfig& cfg);

std::string to_string(SamplerKind kind);
std::string to_string(ObjectiveKind kind);
std::string to_string(MirrorKind kind);

MirrorMap make_map(const RunConfig& cfg);
Objective make_objective(const RunConfig& cfg);
SamplerConfig make_sampler(const RunConfig& cfg);

struct RunResult {
  std::vector<MetricsRow> rows;
  nlohmann::json summary;
  bool ok = true;
  ParticleEnsemble final_ensemble;
};

// Runs the configured sampler and writes the run directory. When `write` is false
// nothing touches the filesystem. Sampler failures are recorded in the summary
// (status "failed") and reported through RunResult::ok; I/O failures throw.
RunResult run_experiment(const RunConfig& cfg, int workers = 1, bool write = true);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string particles_csv(const ParticleEnsemble& ensemble);

// Per-metric deltas against the first summary and the winner of each metric
// (lower is better). Throws std::invalid_argument when objectives differ.
nlohmann::json compare_runs(const std::vector<nlohmann::json>& summaries, const std::vector<std::string>& labels);

struct OracleRun {
  SimplexGrid grid;
  FixedPointResult result;
  GridFunctionals functionals;
};

OracleRun run_oracle(const RunConfig& cfg);

// Evaluates every theory calculator on one set of constants. Keys: M1, M2, lambda,
// eta, t, d, N, k, alpha, L, R, c1, c2, D (a number or "inf"), gap0 and
// proof_variant (bool). Missing keys take defaults; unknown keys are a ConfigError.
nlohmann::json bounds_report(const nlohmann::json& inputs);

struct CheckOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Fast invariant suites over every module.
std::vector<CheckOutcome> selfcheck(std::uint64_t seed = 20240601);

}  // namespace mmfld
