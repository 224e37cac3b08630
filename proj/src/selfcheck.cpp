#include <cmath>
#include <random>

#include <fmt/format.h>

#include "mmfld/harness.hpp"
#include "mmfld/theory.hpp"

namespace mmfld {

namespace {

Vector random_simplex_point(CounterStream& rng, int ambient) {
  std::exponential_distribution<double> e(1.0);
  Vector x(ambient);
  for (auto& v : x) v = e(rng) + 1e-3;
  return x / x.sum();
}

CheckOutcome round_trips(std::uint64_t seed) {
  CounterStream rng(seed, StreamPurpose::test, 0, 0);
  const MirrorMap simplex = MirrorMap::simplex(2);
  Vector lo(2), hi(2);
  lo << -1.0, 0.0;
  hi << 2.0, 0.5;
  const MirrorMap box = MirrorMap::box(lo, hi);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Vector xs = random_simplex_point(rng, 3).head(2);
    worst = std::max(worst, (simplex.backward(simplex.forward(xs)) - xs).cwiseAbs().maxCoeff());
    Vector xb(2);
    for (int c = 0; c < 2; ++c) xb[c] = lo[c] + u(rng) * (hi[c] - lo[c]);
    worst = std::max(worst, (box.backward(box.forward(xb)) - xb).cwiseAbs().maxCoeff());
  }
  return {"geometry.round_trip", worst <= 1e-10, fmt::format("max deviation {:.3e}", worst)};
}

CheckOutcome hessian_identity(std::uint64_t seed) {
  CounterStream rng(seed, StreamPurpose::test, 1, 0);
  const MirrorMap simplex = MirrorMap::simplex(2);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vector x = random_simplex_point(rng, 3).head(2);
    const Matrix prod = simplex.metric(x, 1.0).hessian * simplex.dual_hessian(simplex.forward(x));
    worst = std::max(worst, (prod - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff());
  }
  return {"geometry.hessian_inverse", worst <= 1e-8, fmt::format("max deviation {:.3e}", worst)};
}

CheckOutcome lift_identity(std::uint64_t seed) {
  const MirrorMap simplex = MirrorMap::simplex(2);
  CounterStream rng(seed, StreamPurpose::test, 2, 0);
  Matrix rows(4, 2);
  for (int i = 0; i < 4; ++i) rows.row(i) = random_simplex_point(rng, 3).head(2).transpose();
  const ParticleEnsemble ens = ParticleEnsemble::from_intrinsic(simplex, rows, seed);
  Vector q(3);
  q << 0.5, 0.3, 0.2;
  double worst = 0.0;
  for (const Objective& obj : {Objective::mean_match(q, 0.0), Objective::mean_match(q, 1e-2),
                               Objective::linear_potential(Vector::Constant(3, 2.0), 0.1)})
    for (int i = 0; i < 4; ++i) worst = std::max(worst, lift_identity_check(obj, ens, simplex, i).relative_error);
  return {"objectives.lift_identity", worst <= 1e-5, fmt::format("max relative error {:.3e}", worst)};
}

CheckOutcome projection() {
  Vector v(3);
  v << 1.2, 0.3, 0.1;
  Vector expected(3);
  expected << 0.95, 0.05, 0.0;
  const double dev = (project_simplex(v) - expected).cwiseAbs().maxCoeff();
  return {"dynamics.projection", dev <= 1e-12, fmt::format("deviation {:.3e}", dev)};
}

CheckOutcome sandwich(std::uint64_t seed) {
  const SimplexGrid grid = SimplexGrid::build(16, 1e-4);
  Vector q(3);
  q << 0.5, 0.3, 0.2;
  const Objective obj = Objective::mean_match(q, 0.0);
  const auto star = fixed_point_solve(grid, obj, 0.1);
  CounterStream rng(seed, StreamPurpose::test, 3, 0);
  std::exponential_distribution<double> e(1.0);
  bool pass = true;
  for (int k = 0; k < 3; ++k) {
    Vector w(grid.size());
    for (auto& v : w) v = e(rng);
    pass = pass && entropy_sandwich_check(grid, obj, 0.1, GridMeasure::from_weights(w), star.measure).pass;
  }
  return {"oracle.entropy_sandwich", pass, fmt::format("fixed-point residual {:.3e}", star.residual)};
}

CheckOutcome theory_conventions() {
  const bool convention = theory::lemma_b6_M(0.0, 1.0, 1.0, 0.1, 1.0, 1.0).expectation == 1.0;
  const bool zero_step = theory::delta_eta(0.0, 1.0, 1.0, 0.1, 3.0, 1.0) == 0.0;
  const bool unit = std::abs(theory::delta_eta(1.0, 0.0, 1.0, 1.0, 1.0, 1.0) - 4.0) < 1e-15;
  return {"theory.conventions", convention && zero_step && unit, ""};
}

CheckOutcome determinism(std::uint64_t seed) {
  RunConfig cfg;
  cfg.sampler.particles = 300;
  cfg.sampler.steps = 20;
  cfg.sampler.dual_step_limit = 0.25;
  cfg.sampler.boundary_floor = 1e-7;
  cfg.seed = seed;
  auto strip = [](std::vector<MetricsRow> rows) {
    for (auto& r : rows) r.wall_ms = 0.0;
    return metrics_csv(rows);
  };
  const std::string a = strip(run_experiment(cfg, 1, false).rows);
  const std::string b = strip(run_experiment(cfg, 4, false).rows);
  return {"harness.determinism", a == b, "workers 1 vs 4"};
}

}  // namespace

std::vector<CheckOutcome> selfcheck(std::uint64_t seed) {
  std::vector<CheckOutcome> out;
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  guarded("geometry.round_trip", [&] { return round_trips(seed); });
  guarded("geometry.hessian_inverse", [&] { return hessian_identity(seed); });
  guarded("objectives.lift_identity", [&] { return lift_identity(seed); });
  guarded("dynamics.projection", [] { return projection(); });
  guarded("oracle.entropy_sandwich", [&] { return sandwich(seed); });
  guarded("theory.conventions", [] { return theory_conventions(); });
  guarded("harness.determinism", [&] { return determinism(seed); });
  return out;
}

}  // namespace mmfld
