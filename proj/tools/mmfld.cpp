// mmfld: run samplers, solve the grid oracle, evaluate bounds, compare runs.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "mmfld/errors.hpp"
#include "mmfld/harness.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;
constexpr std::int64_t kPaperParticles = 50000;

using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mmfld::ConfigError({fmt::format("cannot read '{}'", path)});
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw mmfld::ConfigError({fmt::format("{}: not valid JSON: {}", path, e.what())});
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out << text;
}

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> particles;
  std::optional<std::int64_t> steps;
  std::optional<std::string> sampler;
  std::optional<std::string> out_dir;
  bool paper_scale = false;
  bool dump_particles = false;
  int workers = 1;
};

mmfld::RunConfig apply_flags(const RunFlags& f) {
  mmfld::RunConfig cfg = mmfld::load_config(f.config);
  if (f.paper_scale) cfg.sampler.particles = kPaperParticles;
  if (f.particles) cfg.sampler.particles = *f.particles;
  if (f.steps) cfg.sampler.steps = *f.steps;
  if (f.seed) cfg.seed = *f.seed;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  if (f.dump_particles) cfg.dump_particles = true;
  if (f.sampler) {
    json doc = mmfld::to_json(cfg);
    doc["sampler"]["kind"] = *f.sampler;
    cfg = mmfld::parse_config(doc);
  }
  mmfld::validate_config(cfg);
  return cfg;
}

int cmd_run(const RunFlags& f) {
  const mmfld::RunConfig cfg = apply_flags(f);
  const auto result = mmfld::run_experiment(cfg, f.workers);
  const auto& last = result.summary["final"];
  fmt::print("{} {}: iteration {} F={:.6g} boundary_fraction={:.4g} -> {}\n", result.summary["sampler"].get<std::string>(),
             result.ok ? "done" : "FAILED", last["iteration"].get<std::int64_t>(), last["value"].get<double>(),
             last["boundary_fraction"].get<double>(), cfg.out_dir);
  if (!result.ok) {
    fmt::print(stderr, "error: {}\n", result.summary["error"]["message"].get<std::string>());
    return kRuntimeError;
  }
  return 0;
}

int cmd_oracle(const std::string& config, const std::optional<std::string>& out_dir,
               const std::optional<int>& resolution) {
  mmfld::RunConfig cfg = mmfld::load_config(config);
  if (resolution) cfg.oracle.resolution = *resolution;
  if (out_dir) cfg.out_dir = *out_dir;
  const auto run = mmfld::run_oracle(cfg);
  json doc = mmfld::oracle_to_json(run.grid, mmfld::make_objective(cfg), cfg.sampler.lambda, run.result);
  doc["config"] = mmfld::to_json(cfg);
  doc["version"] = mmfld::artifact_version();
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_text((std::filesystem::path(*out_dir) / "oracle.json").string(), doc.dump(2) + "\n");
  }
  json brief = doc;
  brief.erase("nodes");
  fmt::print("{}\n", brief.dump(2));
  return 0;
}

int cmd_bounds(const std::optional<std::string>& file, const std::vector<std::string>& sets) {
  json inputs = file ? read_json(*file) : json::object();
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw mmfld::ConfigError({fmt::format("--set {}: expected key=value", s)});
    const std::string key = s.substr(0, eq), value = s.substr(eq + 1);
    if (value == "true" || value == "false")
      inputs[key] = value == "true";
    else if (value == "inf")
      inputs[key] = value;
    else
      try {
        inputs[key] = std::stod(value);
      } catch (const std::exception&) {
        throw mmfld::ConfigError({fmt::format("--set {}: '{}' is not a number", key, value)});
      }
  }
  fmt::print("{}\n", mmfld::bounds_report(inputs).dump(2));
  return 0;
}

int cmd_compare(const std::vector<std::string>& paths, std::vector<std::string> labels,
                const std::optional<std::string>& out) {
  std::vector<json> summaries;
  for (const auto& p : paths) {
    const std::filesystem::path path(p);
    summaries.push_back(read_json(std::filesystem::is_directory(path) ? (path / "summary.json").string() : p));
  }
  if (labels.empty()) labels = paths;
  if (labels.size() != paths.size()) throw mmfld::ConfigError({"--label: give one label per summary"});
  json report;
  try {
    report = mmfld::compare_runs(summaries, labels);
  } catch (const std::invalid_argument& e) {
    throw mmfld::ConfigError({e.what()});
  }
  if (out) write_text(*out, report.dump(2) + "\n");
  fmt::print("{}\n", report.dump(2));
  return 0;
}

int cmd_selfcheck(std::uint64_t seed) {
  bool all = true;
  for (const auto& c : mmfld::selfcheck(seed)) {
    fmt::print("{} {} {}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail);
    all = all && c.pass;
  }
  return all ? 0 : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirror mean-field Langevin dynamics: samplers, grid oracle and bounds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mmfld::artifact_version());

  RunFlags run;
  auto* run_cmd = app.add_subcommand("run", "Run a sampler from a config file");
  run_cmd->add_option("config", run.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", run.seed, "Master seed");
  run_cmd->add_option("--particles", run.particles, "Particle count N");
  run_cmd->add_option("--steps", run.steps, "Iterations T");
  run_cmd->add_option("--sampler", run.sampler, "mmfld, projected-mfld or mfld");
  run_cmd->add_flag("--paper-scale", run.paper_scale, "Use N = 50000");
  run_cmd->add_option("--out-dir", run.out_dir, "Output directory");
  run_cmd->add_flag("--dump-particles", run.dump_particles, "Write the final particles CSV");
  run_cmd->add_option("--workers", run.workers, "Worker threads")->check(CLI::Range(1, 1024));

  std::string oracle_config;
  std::optional<std::string> oracle_out;
  std::optional<int> oracle_resolution;
  auto* oracle_cmd = app.add_subcommand("oracle", "Solve the grid fixed point for a config's objective");
  oracle_cmd->add_option("config", oracle_config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  oracle_cmd->add_option("--out-dir", oracle_out, "Write oracle.json here");
  oracle_cmd->add_option("--resolution", oracle_resolution, "Grid resolution R");

  std::optional<std::string> bounds_file;
  std::vector<std::string> bounds_sets;
  auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate the convergence-bound calculators");
  bounds_cmd->add_option("inputs", bounds_file, "Constants (JSON object)")->check(CLI::ExistingFile);
  bounds_cmd->add_option("--set", bounds_sets, "Override one constant, key=value");

  std::vector<std::string> compare_paths, compare_labels;
  std::optional<std::string> compare_out;
  auto* compare_cmd = app.add_subcommand("compare", "Compare run summaries");
  compare_cmd->add_option("summaries", compare_paths, "summary.json files or run directories")
      ->required()
      ->expected(2, -1);
  compare_cmd->add_option("--label", compare_labels, "Label per summary");
  compare_cmd->add_option("--out", compare_out, "Write the comparison JSON here");

  std::uint64_t check_seed = 20240601;
  auto* check_cmd = app.add_subcommand("selfcheck", "Run the fast invariant suites");
  check_cmd->add_option("--seed", check_seed, "Seed for random test points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*oracle_cmd) return cmd_oracle(oracle_config, oracle_out, oracle_resolution);
    if (*bounds_cmd) return cmd_bounds(bounds_file, bounds_sets);
    if (*compare_cmd) return cmd_compare(compare_paths, compare_labels, compare_out);
    if (*check_cmd) return cmd_selfcheck(check_seed);
  } catch (const mmfld::ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kRuntimeError;
  }
  return 0;
}
