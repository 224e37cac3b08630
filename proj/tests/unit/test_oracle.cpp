#include <cmath>
#include <set>

#include "doctest.h"
#include "mmfld/errors.hpp"
#include "mmfld/oracle.hpp"
#include "support.hpp"

using namespace mmfld;
using doctest::Approx;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

const Vector kTarget = vec({0.5, 0.3, 0.2});

const SimplexGrid& grid64() {
  static const SimplexGrid g = SimplexGrid::build(64, 1e-4);
  return g;
}

GridMeasure random_measure(const SimplexGrid& grid, std::uint64_t key) {
  auto rng = testing::stream(key);
  std::exponential_distribution<double> e(1.0);
  Vector w(grid.size());
  for (auto& v : w) v = e(rng);
  return GridMeasure::from_weights(w);
}

double dirichlet222(const Eigen::Ref<const Vector>& x) { return 120.0 * x[0] * x[1] * x[2]; }

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("grid construction") {
    const SimplexGrid g = SimplexGrid::build(8, 1e-3);
    CHECK(g.size() == 64);
    CHECK(g.nodes().cols() == 3);
    CHECK(g.nodes().minCoeff() >= 1e-3);
    for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(g.nodes().row(i).sum() == Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(g.area() - std::pow(1 - 3e-3, 2) / 2) <= 1e-10);
    CHECK(SimplexGrid::build(64, 1e-4).size() == 64 * 64);

    // Nodes are distinct.
    std::set<std::pair<long long, long long>> seen;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      seen.insert({std::llround(g.nodes()(i, 0) * 1e9), std::llround(g.nodes()(i, 1) * 1e9)});
    CHECK(seen.size() == 64);

    CHECK_THROWS_AS(SimplexGrid::build(7, 1e-4), ConfigError);
    CHECK_THROWS_AS(SimplexGrid::build(8, 1.0 / 24), ConfigError);
    CHECK_THROWS_AS(SimplexGrid::build(8, 0.0), ConfigError);
  }

  TEST_CASE("grid adjacency is symmetric and local") {
    const SimplexGrid g = SimplexGrid::build(10, 1e-4);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const auto& nb = g.neighbors(i);
      CHECK(nb.size() >= 1);
      CHECK(nb.size() <= 3);
      for (Eigen::Index j : nb) {
        const auto& back = g.neighbors(j);
        CHECK(std::find(back.begin(), back.end(), i) != back.end());
        // Adjacent centroids of a triangulation with spacing 1/R sit 1/(sqrt(3) R) apart in
        // intrinsic coordinates up to the affine squeeze; just check they are close.
        CHECK((g.nodes().row(i) - g.nodes().row(j)).cwiseAbs().maxCoeff() <= 1.0 / 10 + 1e-12);
      }
    }
  }

  TEST_CASE("proximal Gibbs examples") {
    const SimplexGrid& g = grid64();
    const GridMeasure u = GridMeasure::uniform(g);
    const GridMeasure flat = proximal_gibbs(g, Objective::linear_potential(Vector::Ones(3), 0.1), u, 0.1);
    CHECK((flat.weights.array() - 1.0 / g.size()).abs().maxCoeff() < 1e-15);

    // Exponential tilt of the uniform law whose mean is exactly q on the grid: the
    // affine term 2 <m - q, x> vanishes, so the Gibbs measure is uniform again.
    const Objective mm = Objective::mean_match(kTarget, 0.0);
    Vector w(g.size());
    Vector theta = Vector::Zero(3);
    for (int it = 0; it < 200; ++it) {
      for (Eigen::Index i = 0; i < g.size(); ++i) w[i] = std::exp(g.nodes().row(i).dot(theta));
      w /= w.sum();
      const Vector mean = g.nodes().transpose() * w;
      theta -= 5.0 * (mean - kTarget);
    }
    const GridMeasure tilted{w};
    CHECK(((g.nodes().transpose() * w) - kTarget).cwiseAbs().maxCoeff() < 1e-12);
    const GridMeasure gibbs = proximal_gibbs(g, mm, tilted, 0.1);
    CHECK((gibbs.weights.array() * g.size() - 1.0).abs().maxCoeff() < 1e-9);

    // Dirichlet(2, 2, 2) potential at its reference temperature.
    const Objective dir = Objective::linear_potential(vec({2.0, 2.0, 2.0}), 0.1);
    const Vector dens = proximal_gibbs(g, dir, u, 0.1).density(g);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      worst = std::max(worst, std::abs(dens[i] / dirichlet222(g.nodes().row(i).transpose()) - 1.0));
    CHECK(worst <= 1e-3);
  }

  TEST_CASE("fixed point of a linear objective is reached immediately") {
    const SimplexGrid& g = grid64();
    const Objective dir = Objective::linear_potential(vec({2.0, 2.0, 2.0}), 0.1);
    const FixedPointResult r = fixed_point_solve(g, dir, 0.1, {1.0, 1e-8, 100});
    CHECK(r.iterations == 1);
    CHECK(r.residual < 1e-10);
    const GridMeasure gibbs = proximal_gibbs(g, dir, GridMeasure::uniform(g), 0.1);
    CHECK((r.measure.weights - gibbs.weights).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("fixed point of the mean-match preset") {
    const SimplexGrid& g = grid64();
    const Objective mm = Objective::mean_match(kTarget, 0.0);
    const FixedPointResult half = fixed_point_solve(g, mm, 0.1, {0.5, 1e-8, 10000});
    CHECK(half.residual < 1e-6);
    CHECK(optimality_residual(g, mm, half.measure, 0.1) == Approx(half.residual).epsilon(1e-12));
    const Vector mean = g.nodes().transpose() * half.measure.weights;
    const GridMeasure next = proximal_gibbs(g, mm, half.measure, 0.1);
    CHECK(((g.nodes().transpose() * next.weights) - mean).cwiseAbs().maxCoeff() < 1e-3);
    // Gibbs invariance of the minimizer.
    CHECK(((next.weights - half.measure.weights).array() / half.measure.weights.array()).abs().maxCoeff() < 1e-6);

    const FixedPointResult quarter = fixed_point_solve(g, mm, 0.1, {0.25, 1e-8, 10000});
    CHECK(((quarter.measure.weights - half.measure.weights).array() / half.measure.weights.array()).abs().maxCoeff() <
          1e-6);
  }

  TEST_CASE("the fixed point does not depend on the damping") {
    // Undamped iteration oscillates at lambda = 0.1 (the mean map has slope near -1),
    // so compare tau = 1 and tau = 0.5 at a temperature where both contract.
    const SimplexGrid& g = grid64();
    const Objective mm = Objective::mean_match(kTarget, 0.0);
    const FixedPointResult full = fixed_point_solve(g, mm, 1.0, {1.0, 1e-10, 10000});
    const FixedPointResult half = fixed_point_solve(g, mm, 1.0, {0.5, 1e-10, 10000});
    CHECK(((full.measure.weights - half.measure.weights).array() / half.measure.weights.array()).abs().maxCoeff() <
          1e-8);
  }

  TEST_CASE("residual decreases monotonically on the presets") {
    const SimplexGrid& g = grid64();
    for (const Objective& obj : {Objective::mean_match(kTarget, 0.0), Objective::mean_match(kTarget, 1e-4),
                                 Objective::linear_potential(vec({2.0, 2.0, 2.0}), 0.1)}) {
      const FixedPointResult r = fixed_point_solve(g, obj, 0.1);
      for (size_t k = 1; k < r.residual_history.size(); ++k)
        CHECK(r.residual_history[k] <= r.residual_history[k - 1] * (1 + 1e-12) + 1e-14);
    }
  }

  TEST_CASE("fixed-point failure reports the last residual") {
    const Objective mm = Objective::mean_match(kTarget, 0.0);
    try {
      fixed_point_solve(grid64(), mm, 0.1, {0.5, 1e-14, 3});
      FAIL("expected a ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.last_residual() > 0.0);
    }
    CHECK_THROWS_AS(fixed_point_solve(grid64(), mm, 0.1, {0.0, 1e-8, 10}), std::invalid_argument);
    CHECK_THROWS_AS(fixed_point_solve(grid64(), mm, 0.0), std::invalid_argument);
  }

  TEST_CASE("refinement shrinks the change in the minimizer's mean") {
    const Objective mm = Objective::mean_match(kTarget, 0.0);
    std::vector<Vector> means;
    for (int r : {16, 32, 64}) {
      const SimplexGrid g = SimplexGrid::build(r, 1e-4);
      means.push_back(g.nodes().transpose() * fixed_point_solve(g, mm, 0.1).measure.weights);
    }
    const double first = (means[1] - means[0]).norm(), second = (means[2] - means[1]).norm();
    CHECK(second < 4.0 * first);
    CHECK(second < first);
  }

  TEST_CASE("grid functionals") {
    const SimplexGrid& g = grid64();
    const Objective mm = Objective::mean_match(kTarget, 0.0);
    const GridFunctionals u = grid_functionals(g, mm, GridMeasure::uniform(g), 0.1);
    CHECK(u.entropy == Approx(-std::log(g.area())).epsilon(1e-12));
    CHECK((u.mean - Vector::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(u.free_energy == Approx(u.value + 0.1 * u.entropy).epsilon(1e-14));
    // Uniform law on the simplex: Var(x_c) = 1/18, Cov = -1/36 (up to quadrature).
    CHECK(u.covariance(0, 0) == Approx(1.0 / 18).epsilon(1e-2));
    CHECK(u.covariance(0, 1) == Approx(-1.0 / 36).epsilon(1e-2));

    Vector spike = Vector::Zero(g.size());
    spike[100] = 1.0;
    const GridFunctionals p = grid_functionals(g, mm, GridMeasure{spike}, 0.1);
    CHECK(p.entropy == Approx(-std::log(g.cell_volume())).epsilon(1e-12));
    CHECK(p.entropy > u.entropy);
    CHECK((p.mean - g.nodes().row(100).transpose()).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("divergences") {
    const SimplexGrid& g = grid64();
    const GridMeasure u = GridMeasure::uniform(g);
    const GridMeasure r = random_measure(g, 40);
    CHECK(grid_divergences(g, r, r).kl == 0.0);
    CHECK(std::abs(grid_divergences(g, r, r).fisher) <= 1e-6);

    Vector dw(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) dw[i] = dirichlet222(g.nodes().row(i).transpose());
    const GridMeasure dir = GridMeasure::from_weights(dw);
    const Divergences d = grid_divergences(g, u, dir);
    double direct = 0.0;
    const double uniform_density = 1.0 / g.area();
    for (Eigen::Index i = 0; i < g.size(); ++i)
      direct += g.cell_volume() * uniform_density * std::log(uniform_density / dirichlet222(g.nodes().row(i).transpose()));
    CHECK(d.kl > 0.0);
    CHECK(d.kl == Approx(direct).epsilon(1e-3));
    // Continuum value: log 2 - log 120 + 4.5, since E[log x_c] = psi(1) - psi(3) = -1.5 under the uniform law.
    CHECK(d.kl == Approx(std::log(2.0) - std::log(120.0) + 4.5).epsilon(2e-2));

    // log(mu / nu) linear in x: the stencil gradient is exact and FI has a closed form.
    const Vector a = vec({1.5, -0.5, 0.25});
    Vector tw(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) tw[i] = std::exp(g.nodes().row(i).dot(a));
    const GridMeasure tilt = GridMeasure::from_weights(tw);
    const MirrorMap s = MirrorMap::simplex(2);
    const Vector grad = vec({a[0] - a[2], a[1] - a[2]});
    double fi = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      fi += tilt.weights[i] * grad.dot(s.dual_hessian(s.forward(g.nodes().row(i).head(2).transpose())) * grad);
    CHECK(grid_divergences(g, tilt, u).fisher == Approx(fi).epsilon(1e-8));

    Vector hole = dw;
    hole[7] = 0.0;
    CHECK_THROWS_AS(grid_divergences(g, u, GridMeasure{hole / hole.sum()}), SupportError);
    CHECK_NOTHROW(grid_divergences(g, GridMeasure{hole / hole.sum()}, u));
  }

  TEST_CASE("entropy sandwich") {
    const SimplexGrid& g = grid64();
    const Objective mm = Objective::mean_match(kTarget, 0.0);
    const FixedPointResult star = fixed_point_solve(g, mm, 0.1);
    const SandwichCheck at_min = entropy_sandwich_check(g, mm, 0.1, star.measure, star.measure);
    CHECK(at_min.lhs == 0.0);
    CHECK(std::abs(at_min.mid) <= 1e-12);
    CHECK(at_min.rhs >= -1e-15);
    CHECK(at_min.pass);

    for (std::uint64_t k = 0; k < 20; ++k) {
      const SandwichCheck c = entropy_sandwich_check(g, mm, 0.1, random_measure(g, 100 + k), star.measure);
      CHECK(c.pass);
      CHECK(c.lhs <= c.mid + 1e-3 * std::max(1.0, std::abs(c.mid)));
      CHECK(c.mid <= c.rhs + 1e-3 * std::max(1.0, std::abs(c.mid)));
    }

    const Objective dir = Objective::linear_potential(vec({2.0, 3.0, 2.0}), 0.1);
    const FixedPointResult dstar = fixed_point_solve(g, dir, 0.1);
    const SandwichCheck lin = entropy_sandwich_check(g, dir, 0.1, random_measure(g, 200), dstar.measure);
    CHECK(lin.lhs == Approx(lin.rhs).epsilon(1e-10));
    CHECK(lin.mid == Approx(lin.lhs).epsilon(1e-8));
    CHECK(lin.pass);
  }

  TEST_CASE("oracle export") {
    const SimplexGrid g = SimplexGrid::build(16, 1e-4);
    const Objective mm = Objective::mean_match(kTarget, 0.0);
    const FixedPointResult r = fixed_point_solve(g, mm, 0.1);
    const nlohmann::json doc = oracle_to_json(g, mm, 0.1, r);
    for (const char* key : {"resolution", "margin", "lambda", "iterations", "residual", "value", "entropy",
                            "free_energy", "mean", "covariance", "nodes"})
      CHECK(doc.contains(key));
    CHECK(doc["resolution"] == 16);
    CHECK(doc["nodes"].size() == static_cast<size_t>(g.size()));
    CHECK(doc["nodes"][0].size() == 4);
    double total = 0.0;
    for (const auto& n : doc["nodes"]) total += n[3].get<double>();
    CHECK(total == Approx(1.0).epsilon(1e-12));
  }
}
