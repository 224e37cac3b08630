#pragma once

// Grid ground truth on the 2-simplex. Nodes are the centroids of the standard
// R x R triangulation (R(R+1)/2 upward and R(R-1)/2 downward cells), squeezed
// into the clipped simplex {x_c >= margin}. Densities are taken against the
// intrinsic Lebesgue measure dx_1 dx_2, so the clipped area is (1 - 3 margin)^2 / 2.

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

#include "mmfld/ensemble.hpp"
#include "mmfld/objectives.hpp"

namespace mmfld {

class SimplexGrid {
 public:
  // Throws ConfigError if R < 8 or margin is outside (0, 1/(3R)).
  static SimplexGrid build(int resolution, double margin);

  int resolution() const { return resolution_; }
  double margin() const { return margin_; }
  Eigen::Index size() const { return nodes_.rows(); }
  const PointMatrix& nodes() const { return nodes_; }  // ambient, size() x 3
  double cell_volume() const { return cell_volume_; }
  double area() const { return cell_volume_ * static_cast<double>(size()); }
  // Nodes sharing an edge with node i (1 to 3 of them).
  const std::vector<Eigen::Index>& neighbors(Eigen::Index i) const { return neighbors_[i]; }

 private:
  int resolution_ = 0;
  double margin_ = 0.0;
  double cell_volume_ = 0.0;
  PointMatrix nodes_;
  std::vector<std::vector<Eigen::Index>> neighbors_;
};

struct GridMeasure {
  Vector weights;  // nonnegative, sums to 1

  static GridMeasure uniform(const SimplexGrid& grid);
  // Normalizes arbitrary nonnegative weights.
  static GridMeasure from_weights(Vector w);
  Vector density(const SimplexGrid& grid) const { return weights / grid.cell_volume(); }
};

// Node values of delta F(mu) / delta mu.
Vector grid_first_variation(const SimplexGrid& grid, const Objective& obj, const GridMeasure& mu);

GridMeasure proximal_gibbs(const SimplexGrid& grid, const Objective& obj, const GridMeasure& mu, double lambda);

struct FixedPointOptions {
  double damping = 0.5;
  double tol = 1e-8;
  int max_iter = 10000;
};

struct FixedPointResult {
  GridMeasure measure;
  // sup over nodes of |lambda log density + delta F / delta mu - median|.
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
};

// Damped iteration mu <- (1 - tau) mu + tau proximal_gibbs(mu), started from the
// uniform measure, until sup |mu_hat - mu| / mu < tol. Throws ConvergenceError.
FixedPointResult fixed_point_solve(const SimplexGrid& grid, const Objective& obj, double lambda,
                                   const FixedPointOptions& options = {});

double optimality_residual(const SimplexGrid& grid, const Objective& obj, const GridMeasure& mu, double lambda);

struct GridFunctionals {
  double value = 0.0;    // F
  double entropy = 0.0;  // int log(dmu/dx) dmu
  double free_energy = 0.0;
  Vector mean;
  Matrix covariance;
};

GridFunctionals grid_functionals(const SimplexGrid& grid, const Objective& obj, const GridMeasure& mu,
                                 double lambda);

struct Divergences {
  double kl = 0.0;
  double fisher = 0.0;  // E_mu <grad log(mu/nu), H^{-1} grad log(mu/nu)>
};

// Throws SupportError if mu charges a node where nu vanishes. The Fisher term uses
// least-squares gradients of log(mu/nu) over each node's first and second ring.
Divergences grid_divergences(const SimplexGrid& grid, const GridMeasure& mu, const GridMeasure& nu);

struct SandwichCheck {
  double lhs = 0.0;  // lambda KL(mu || mu*)
  double mid = 0.0;  // L(mu) - L(mu*)
  double rhs = 0.0;  // lambda KL(mu || mu_hat)
  bool pass = false;
};

SandwichCheck entropy_sandwich_check(const SimplexGrid& grid, const Objective& obj, double lambda,
                                     const GridMeasure& mu, const GridMeasure& minimizer);

nlohmann::json oracle_to_json(const SimplexGrid& grid, const Objective& obj, double lambda,
                              const FixedPointResult& result);

}  // namespace mmfld
