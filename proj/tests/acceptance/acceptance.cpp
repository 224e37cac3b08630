// Acceptance criteria 1-10. Usage: acceptance [criterion...]; no arguments runs all.
// Prints "criterion N: PASS|FAIL <details>" per criterion and exits 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mmfld/dynamics.hpp"
#include "mmfld/harness.hpp"
#include "mmfld/oracle.hpp"
#include "mmfld/theory.hpp"

using namespace mmfld;
namespace fs = std::filesystem;

namespace {

const fs::path kPresets = MMFLD_PRESETS_DIR;

// Tolerances.
constexpr double kPrimalRoundTrip = 1e-10;
constexpr double kDualRoundTrip = 1e-8;
constexpr double kHessianInverseFd = 1e-4;
constexpr double kGeometrySeconds = 5.0;
constexpr double kGradientRelErr = 1e-5;
constexpr double kLiftDeviation = 1e-5;
constexpr double kGradientSeconds = 10.0;
constexpr double kDirichletMeanTol = 0.01;
constexpr double kDirichletVarRelTol = 0.15;
constexpr double kOracleResidual = 1e-6;
constexpr double kOracleMeanTol = 0.02;
constexpr double kOracleSeconds = 120.0;
constexpr double kSandwichSeconds = 30.0;
constexpr double kBoundaryRatio = 10.0;
constexpr double kFigureSeconds = 300.0;
constexpr double kGapShrink = 0.1;
constexpr int kBurnIn = 200;
constexpr int kWindow = 10;
constexpr double kNoiseMultiple = 3.0;
constexpr double kChaosSeconds = 600.0;
constexpr double kTheoryTol = 1e-4;
constexpr double kTheorySeconds = 1.0;

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

CounterStream stream(std::uint64_t key) { return CounterStream(424242, StreamPurpose::test, key, 0); }

Vector uniform_simplex(CounterStream& rng, int ambient) {
  std::exponential_distribution<double> e(1.0);
  Vector x(ambient);
  for (auto& v : x) v = e(rng);
  return x / x.sum();
}

Vector uniform_box(CounterStream& rng, const Vector& lo, const Vector& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(lo.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double t = 0.0;
    while (t == 0.0) t = u(rng);
    x[i] = lo[i] + t * (hi[i] - lo[i]);
  }
  return x;
}

RunConfig preset(const std::string& name) { return load_config(kPresets / name); }

// Shared results, computed at most once per process.
struct Cache {
  std::map<std::string, OracleRun> oracles;
  std::map<std::string, RunResult> runs;

  const OracleRun& oracle(const std::string& name) {
    auto it = oracles.find(name);
    if (it == oracles.end()) it = oracles.emplace(name, run_oracle(preset(name))).first;
    return it->second;
  }

  const RunResult& run(const std::string& key, const RunConfig& cfg, int workers = 1) {
    auto it = runs.find(key);
    if (it == runs.end()) it = runs.emplace(key, run_experiment(cfg, workers, false)).first;
    return it->second;
  }
};

Cache cache;

// Figure-1 preset run at desk scale.
const RunResult& figure_run(const std::string& preset_name, SamplerKind kind, std::uint64_t seed,
                            std::int64_t particles = 10000) {
  RunConfig cfg = preset(preset_name);
  cfg.sampler.kind = kind;
  cfg.seed = seed;
  cfg.sampler.particles = particles;
  const std::string key = fmt::format("{}/{}/{}/{}", preset_name, to_string(kind), seed, particles);
  return cache.run(key, cfg);
}

Outcome criterion1() {
  Stopwatch clock;
  double primal = 0.0, dual = 0.0, hessian = 0.0;
  auto check_map = [&](const MirrorMap& map, auto&& sample, std::uint64_t key) {
    auto rng = stream(key);
    const int m = map.intrinsic_dim(), d = map.ambient_dim();
    std::uniform_real_distribution<double> dual_draw(-20.0, 20.0);
    Vector xa(d), y(m), back(m);
    for (int n = 0; n < 1000; ++n) {
      const Vector point = sample(rng);
      const Vector x = point.head(m);
      primal = std::max(primal, (map.backward(map.forward(x)) - x).cwiseAbs().maxCoeff());

      // Dual round trip through the ambient kernels, which keep the pinned simplex
      // coordinate instead of recomputing it as 1 - sum(x).
      for (auto& v : y) v = dual_draw(rng);
      map.backward_ambient({y.data(), static_cast<size_t>(m)}, {xa.data(), static_cast<size_t>(d)});
      map.forward_ambient({xa.data(), static_cast<size_t>(d)}, {back.data(), static_cast<size_t>(m)});
      dual = std::max(dual, (back - y).cwiseAbs().maxCoeff());

      // Metric times a central-difference Jacobian of the inverse map.
      const Vector yx = map.forward(x);
      Matrix jac(m, m);
      for (int j = 0; j < m; ++j) {
        const double h = 1e-5 * (1.0 + std::abs(yx[j]));
        Vector a = yx, b = yx;
        a[j] += h;
        b[j] -= h;
        jac.col(j) = (map.backward(a) - map.backward(b)) / (2.0 * h);
      }
      const Matrix prod = map.metric(x, 1.0).hessian * jac;
      hessian = std::max(hessian, (prod - Matrix::Identity(m, m)).cwiseAbs().maxCoeff());
    }
  };
  check_map(MirrorMap::simplex(2), [](CounterStream& r) { return uniform_simplex(r, 3); }, 1);
  check_map(MirrorMap::simplex(4), [](CounterStream& r) { return uniform_simplex(r, 5); }, 2);
  Vector lo(3), hi(3);
  lo << -3.0, 0.0, 10.0;
  hi << 3.0, 0.5, 10.25;
  check_map(MirrorMap::box(lo, hi), [&](CounterStream& r) { return uniform_box(r, lo, hi); }, 3);
  const double secs = clock.seconds();
  const bool pass =
      primal <= kPrimalRoundTrip && dual <= kDualRoundTrip && hessian <= kHessianInverseFd && secs < kGeometrySeconds;
  return {pass, fmt::format("round trip {:.2e} (<= {:.0e}), dual round trip {:.2e} (<= {:.0e}), H * dH* - I {:.2e} "
                            "(<= {:.0e}), {:.2f} s",
                            primal, kPrimalRoundTrip, dual, kDualRoundTrip, hessian, kHessianInverseFd, secs)};
}

Outcome criterion2() {
  Stopwatch clock;
  const MirrorMap simplex = MirrorMap::simplex(2);
  const MirrorMap box = MirrorMap::box(Vector::Constant(3, -3.0), Vector::Constant(3, 3.0));
  Vector q(3);
  q << 0.5, 0.3, 0.2;
  Dataset data{Matrix(3, 2), Vector(3)};
  data.features << 0.5, -1.0, 1.5, 0.2, -0.7, 0.9;
  data.labels << 0.3, -0.4, 0.8;
  Vector alpha(3);
  alpha << 2.0, 0.5, 3.0;

  struct Kind {
    std::string name;
    Objective obj;
    const MirrorMap* map;
  };
  const std::vector<Kind> kinds{{"linear-potential", Objective::linear_potential(alpha, 0.1), &simplex},
                                {"mean-match", Objective::mean_match(q, 0.0), &simplex},
                                {"mean-match-barrier", Objective::mean_match(q, 1e-2), &simplex},
                                {"mf-network", Objective::mf_network(data), &box}};
  double worst_rel = 0.0, worst_lift = 0.0;
  std::uint64_t key = 100;
  for (const auto& k : kinds) {
    for (int e = 0; e < 20; ++e) {
      auto rng = stream(++key);
      PointMatrix pts(4, k.map->ambient_dim());
      for (int i = 0; i < 4; ++i)
        pts.row(i) = (k.map->kind() == MirrorKind::simplex_entropy
                          ? uniform_simplex(rng, 3)
                          : uniform_box(rng, Vector::Constant(3, -2.5), Vector::Constant(3, 2.5)))
                         .transpose();
      const ParticleEnsemble ens(pts, key);
      const EnsembleStats stats = k.obj.stats(ens, *k.map);
      for (int i = 0; i < 4; ++i) {
        const Vector analytic = k.obj.first_variation_grad(ens.intrinsic(*k.map, i), stats, *k.map);
        // Lifted N F(mu_x) moved along each intrinsic coordinate of particle i.
        const int m = k.map->intrinsic_dim();
        const double h = 1e-4 * k.map->face_distance(ens.row(i));
        Vector fd(m);
        for (int c = 0; c < m; ++c) {
          auto lifted = [&](double s) {
            PointMatrix moved = pts;
            moved(i, c) += s;
            if (k.map->kind() == MirrorKind::simplex_entropy) moved(i, m) -= s;
            return 4.0 * k.obj.value(k.obj.stats(moved), moved);
          };
          fd[c] = (lifted(-2 * h) - 8 * lifted(-h) + 8 * lifted(h) - lifted(2 * h)) / (12 * h);
        }
        const double rel = (analytic - fd).cwiseAbs().maxCoeff() / std::max(analytic.cwiseAbs().maxCoeff(), 1e-12);
        worst_rel = std::max(worst_rel, rel);
        worst_lift = std::max(worst_lift, lift_identity_check(k.obj, ens, *k.map, i).max_deviation);
      }
    }
  }
  const double secs = clock.seconds();
  const bool pass = worst_rel <= kGradientRelErr && worst_lift <= kLiftDeviation && secs < kGradientSeconds;
  return {pass, fmt::format("max relative error vs finite differences {:.2e} (<= {:.0e}), lift identity deviation "
                            "{:.2e} (<= {:.0e}), {:.2f} s",
                            worst_rel, kGradientRelErr, worst_lift, kLiftDeviation, secs)};
}

Outcome criterion3() {
  Stopwatch clock;
  const RunConfig cfg = preset("dirichlet.json");
  const RunResult& r = cache.run("dirichlet", cfg);
  if (!r.ok) return {false, fmt::format("sampler failed: {}", r.summary["error"]["message"].get<std::string>())};
  const PointMatrix& pts = r.final_ensemble.points();
  const double target_var = 8.0 / 252.0;
  bool pass = true;
  std::string detail;
  for (int c = 0; c < 3; ++c) {
    const double mean = pts.col(c).mean();
    const double var = (pts.col(c).array() - mean).square().mean();
    pass = pass && std::abs(mean - 1.0 / 3) <= kDirichletMeanTol &&
           std::abs(var / target_var - 1.0) <= kDirichletVarRelTol;
    detail += fmt::format("x{}: mean {:.4f} var {:.5f}; ", c, mean, var);
  }
  return {pass, detail + fmt::format("targets 1/3 +- {} and {:.6f} +- {:.0f}%, N={} T={}, {:.1f} s", kDirichletMeanTol,
                                     target_var, 100 * kDirichletVarRelTol, cfg.sampler.particles, cfg.sampler.steps,
                                     clock.seconds())};
}

Outcome criterion4() {
  Stopwatch clock;
  const OracleRun& oracle = cache.oracle("figure1-beta0.json");
  const RunResult& r = figure_run("figure1-beta0.json", SamplerKind::mmfld, 1);
  if (!r.ok) return {false, "sampler failed"};
  const Vector& m = r.rows.back().mean;
  const double dev = (m - oracle.functionals.mean).cwiseAbs().maxCoeff();
  const double secs = clock.seconds();
  const bool pass = oracle.result.residual < kOracleResidual && dev <= kOracleMeanTol && secs < kOracleSeconds;
  return {pass, fmt::format("oracle residual {:.2e} (< {:.0e}) after {} iterations, oracle mean ({:.4f}, {:.4f}, "
                            "{:.4f}), MMFLD mean ({:.4f}, {:.4f}, {:.4f}), max deviation {:.4f} (<= {}), {:.1f} s",
                            oracle.result.residual, kOracleResidual, oracle.result.iterations,
                            oracle.functionals.mean[0], oracle.functionals.mean[1], oracle.functionals.mean[2], m[0],
                            m[1], m[2], dev, kOracleMeanTol, secs)};
}

Outcome criterion5() {
  Stopwatch clock;
  bool pass = true;
  int checked = 0, passed = 0;
  double worst_slack = 0.0;
  for (const char* name : {"figure1-beta0.json", "figure1-beta1e-4.json"}) {
    const RunConfig cfg = preset(name);
    const OracleRun& oracle = cache.oracle(name);
    const Objective obj = make_objective(cfg);
    auto rng = stream(500);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    for (int k = 0; k < 20; ++k) {
      Vector w(oracle.grid.size());
      for (auto& v : w) v = gamma(rng);
      const SandwichCheck c =
          entropy_sandwich_check(oracle.grid, obj, cfg.sampler.lambda, GridMeasure::from_weights(w), oracle.result.measure);
      ++checked;
      if (c.pass) ++passed;
      pass = pass && c.pass;
      const double scale = std::max(1.0, std::abs(c.mid));
      worst_slack = std::max({worst_slack, (c.lhs - c.mid) / scale, (c.mid - c.rhs) / scale});
    }
  }
  const double secs = clock.seconds();
  pass = pass && secs < kSandwichSeconds;
  return {pass, fmt::format("{}/{} measures satisfy lhs <= mid <= rhs, worst relative violation {:.2e} (tol 1e-3), "
                            "{:.1f} s",
                            passed, checked, worst_slack, secs)};
}

Outcome criterion6() {
  Stopwatch clock;
  bool pass = true;
  std::string detail;
  for (const char* name : {"figure1-beta0.json", "figure1-beta1e-4.json"}) {
    const bool beta0 = std::string(name) == "figure1-beta0.json";
    detail += beta0 ? "(a) beta=0:" : " (b) beta=1e-4:";
    for (std::uint64_t seed : kSeeds) {
      const RunResult& mm = figure_run(name, SamplerKind::mmfld, seed);
      const RunResult& pr = figure_run(name, SamplerKind::projected_mfld, seed);
      if (!mm.ok || !pr.ok) return {false, fmt::format("{} seed {}: sampler failed", name, seed)};
      const MetricsRow &a = mm.rows.back(), &b = pr.rows.back();
      const bool lower = a.value < b.value;
      const bool ratio = !beta0 || b.boundary_fraction >= kBoundaryRatio * a.boundary_fraction;
      pass = pass && lower && ratio;
      detail += fmt::format(" seed {}: F {:.6f} vs {:.6f}{}", seed, a.value, b.value, lower ? "" : " [F order FAILS]");
      if (beta0)
        detail += fmt::format(", boundary {:.4f} vs {:.4f}{}", a.boundary_fraction, b.boundary_fraction,
                              ratio ? "" : " [ratio FAILS]");
      detail += ";";
    }
  }
  const double secs = clock.seconds();
  pass = pass && secs < kFigureSeconds;
  return {pass, detail + fmt::format(" (MMFLD vs projected), {:.1f} s", secs)};
}

Outcome criterion7() {
  const OracleRun& oracle = cache.oracle("figure1-beta0.json");
  const double f_star = oracle.functionals.value;
  const RunResult& r = figure_run("figure1-beta0.json", SamplerKind::mmfld, 1);
  if (!r.ok) return {false, "sampler failed"};
  const std::vector<MetricsRow>& rows = r.rows;  // one row per iteration, starting at 0
  const double gap0 = rows.front().value - f_star;
  const double gap_end = rows.back().value - f_star;

  // Monte-Carlo standard error of F(mu_N) ~ |m - q|^2 via the delta method.
  const RunConfig cfg = preset("figure1-beta0.json");
  const PointMatrix& pts = r.final_ensemble.points();
  const Vector mean = pts.colwise().mean().transpose();
  const Matrix centered = pts.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(pts.rows());
  const Vector q = Eigen::Map<const Vector>(cfg.objective.target.data(), 3);
  const double se = std::sqrt(4.0 * (mean - q).dot(cov * (mean - q)) / static_cast<double>(pts.rows()));

  std::vector<double> ma;
  for (size_t k = kWindow - 1; k < rows.size(); ++k) {
    double s = 0.0;
    for (size_t j = k + 1 - kWindow; j <= k; ++j) s += rows[j].value - f_star;
    ma.push_back(s / kWindow);
  }
  // ma[i] averages iterations i .. i + kWindow - 1.
  double running_min = INFINITY, worst_rise = 0.0;
  for (size_t i = kBurnIn; i < ma.size(); ++i) {
    if (i > kBurnIn) worst_rise = std::max(worst_rise, ma[i] - running_min);
    running_min = std::min(running_min, ma[i]);
  }
  const bool shrink = gap_end < kGapShrink * gap0;
  const bool monotone = worst_rise <= kNoiseMultiple * se;
  return {shrink && monotone,
          fmt::format("F* {:.6f}, gap at 0 {:.3e}, gap at {} {:.3e} (< {:.0f}% required), largest rise of the "
                      "{}-iteration moving average after {} iterations {:.2e} (<= 3 SE = {:.2e})",
                      f_star, gap0, rows.back().iteration, gap_end, 100 * kGapShrink, kWindow, kBurnIn, worst_rise,
                      kNoiseMultiple * se)};
}

Outcome criterion8() {
  Stopwatch clock;
  const double f_star = cache.oracle("figure1-beta0.json").functionals.value;
  std::vector<double> gaps;
  std::string detail;
  for (std::int64_t n : {1000, 4000, 16000}) {
    double total = 0.0;
    for (std::uint64_t seed : kSeeds) {
      const RunResult& r = figure_run("figure1-beta0.json", SamplerKind::mmfld, seed, n);
      if (!r.ok) return {false, fmt::format("N={} seed {}: sampler failed", n, seed)};
      total += std::abs(r.rows.back().value - f_star);
    }
    gaps.push_back(total / static_cast<double>(kSeeds.size()));
    detail += fmt::format("N={}: mean |F - F*| {:.3e}; ", n, gaps.back());
  }
  const double secs = clock.seconds();
  const bool pass = gaps[1] <= gaps[0] && gaps[2] <= gaps[1] && secs < kChaosSeconds;
  return {pass, detail + fmt::format("{:.1f} s", secs)};
}

Outcome criterion9() {
  Stopwatch clock;
  std::string detail;
  bool pass = true;
  auto note = [&](bool ok, const std::string& what) {
    pass = pass && ok;
    detail += fmt::format("{} {}; ", what, ok ? "ok" : "FAILS");
  };
  note(theory::delta_eta(0.0, 1.0, 1.0, 0.1, 2.0, 1.0) == 0.0, "delta_eta(0) = 0");
  note(theory::delta_eta(1.0, 0.0, 1.0, 1.0, 1.0, 1.0) == 4.0, "delta_eta example = 4");
  const auto conv = theory::lemma_b6_M(0.0, 1.0, 1.0, 0.1, 1.0, 1.0);
  note(conv.expectation == 1.0 && conv.deterministic == 1.0 && conv.regime == "convention", "c1 = 0 convention");
  note(std::abs(theory::lemma_b6_M(1.0, 4.0, 1.0, 1.0, 1.0, 1.0).deterministic - std::exp(1.0)) <= kTheoryTol,
       "M_deterministic(c2 = 4) = e");
  const double small_t = theory::lemma_b6_M(1.0, 1.0, 1.0, 1e-8, 1.0, 1.0).expectation;
  note(std::abs(small_t - 1.0) <= kTheoryTol, fmt::format("M_expectation(t = 1e-8) = {:.8f} within {:.0e} of 1",
                                                          small_t, kTheoryTol));
  const double delta = theory::delta_eta(3e-3, 1.0, 1.0, 0.1, 2.0, 1.0);
  const double limit = 1.0 / (2.0 * 50000) + delta / (2.0 * 0.1);
  note(std::abs(theory::theorem8_bound(1.0, 1.0, 0.1, 3e-3, INFINITY, 50000, 1.0, 1.0, delta) - limit) <= 1e-15,
       "k -> inf limit");
  note(theory::theorem8_bound(0.7, 1.0, 0.1, 3e-3, 0, INFINITY, 1.0, 1.0, 0.0) == 0.7, "k = 0, N -> inf gives gap0");
  const double secs = clock.seconds();
  note(secs < kTheorySeconds, fmt::format("runtime {:.4f} s", secs));
  return {pass, detail};
}

Outcome criterion10() {
  RunConfig cfg = preset("figure1-beta0.json");
  const fs::path root = fs::temp_directory_path() / "mmfld_acceptance_determinism";
  fs::remove_all(root);
  auto run_to = [&](const std::string& name, int workers) {
    cfg.out_dir = (root / name).string();
    run_experiment(cfg, workers, true);
    std::ifstream in(root / name / "metrics.csv", std::ios::binary);
    std::string line, stripped;
    while (std::getline(in, line)) stripped += line.substr(0, line.rfind(',')) + "\n";
    return stripped;
  };
  const std::string a = run_to("workers1", 1), b = run_to("workers1-again", 1), c = run_to("workers8", 8);
  fs::remove_all(root);
  const bool pass = !a.empty() && a == b && a == c;
  return {pass, fmt::format("metrics CSV ({} bytes without wall_ms): rerun {}, 8 workers {}", a.size(),
                            a == b ? "identical" : "DIFFERS", a == c ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      fmt::print(stderr, "unknown criterion '{}'\n", argv[i]);
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty())
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) selected.push_back(n);

  bool all = true;
  for (int n : selected) {
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    fmt::print("criterion {}: {} {}\n", n, o.pass ? "PASS" : "FAIL", o.detail);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
