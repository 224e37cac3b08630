#pragma once

// Mean-field functionals F(mu) with value and first-variation-gradient oracles.
//
//   linear-potential    F(mu) = int f dmu,  f(x) = -lambda_ref sum_c (alpha_c - 1) log x_c
//                        (its Gibbs law at temperature lambda_ref is Dirichlet(alpha))
//   mean-match-barrier  F(mu) = |int x dmu - q|^2 + beta int sum_c log(1/x_c) dmu
//   mf-network-risk     F(mu) = (1/n) sum_j (h_mu(z_j) - y_j)^2 / 2,
//                        h_mu(z) = int tanh(<w, z> + b) dmu(w, b)
//
// Ambient-coordinate gradients are pulled back to intrinsic coordinates through
// the mirror map's embedding.

#include <span>
#include <string>

#include "mmfld/ensemble.hpp"
#include "mmfld/geometry.hpp"

namespace mmfld {

enum class ObjectiveKind { linear_potential, mean_match_barrier, mf_network_risk };

struct Dataset {
  Matrix features;  // n x p
  Vector labels;    // n

  // CSV with a header row; every column but the last is a feature.
  static Dataset load_csv(const std::string& path);
};

// Sufficient statistics of a (weighted) particle cloud. `mean` is always filled;
// `predictions` only for the network risk.
struct EnsembleStats {
  Vector mean;
  Vector predictions;
};

class Objective {
 public:
  static Objective linear_potential(Vector alpha, double reference_lambda);
  static Objective mean_match(Vector target, double beta);
  static Objective mf_network(Dataset data);

  ObjectiveKind kind() const { return kind_; }
  const Vector& alpha() const { return alpha_; }
  double reference_lambda() const { return reference_lambda_; }
  const Vector& target() const { return target_; }
  double beta() const { return beta_; }
  const Dataset& dataset() const { return data_; }

  // Throws std::invalid_argument if the objective is not defined on this domain.
  void check_compatible(const MirrorMap& map) const;

  // Empty `weights` means uniform 1/N.
  EnsembleStats stats(const PointMatrix& ambient_points, std::span<const double> weights = {}) const;
  EnsembleStats stats(const ParticleEnsemble& ensemble, const MirrorMap& map) const;

  // `floor` > 0 evaluates log-barrier terms at max(x_c, floor); only the projected
  // baseline, whose particles sit on the boundary, uses it.
  double value(const EnsembleStats& stats, const PointMatrix& ambient_points, std::span<const double> weights = {},
               double floor = 0.0) const;
  double value(const EnsembleStats& stats, const ParticleEnsemble& ensemble, const MirrorMap& map) const;

  // delta F / delta mu at an ambient point, up to an additive constant.
  double first_variation(std::span<const double> xa, const EnsembleStats& stats) const;

  // Gradient of the first variation in ambient coordinates.
  void ambient_gradient(std::span<const double> xa, const EnsembleStats& stats, std::span<double> g,
                        double floor = 0.0) const;

  // grad (delta F / delta mu)(x) in intrinsic coordinates.
  Vector first_variation_grad(const Vector& x, const EnsembleStats& stats, const MirrorMap& map) const;

 private:
  Objective() = default;
  double particle_term(std::span<const double> xa, double floor) const;

  ObjectiveKind kind_ = ObjectiveKind::linear_potential;
  Vector alpha_;
  double reference_lambda_ = 0.0;
  Vector target_;
  double beta_ = 0.0;
  Dataset data_;
};

struct LiftCheck {
  Vector analytic;           // grad delta F / delta mu at particle i
  Vector finite_difference;  // grad_{x^i} of N * F(mu_x), 5-point stencil
  double max_deviation = 0.0;
  double relative_error = 0.0;  // max_deviation / max(|analytic|_inf, 1e-12)
};

// Both sides of N grad_{x^i} F(mu_x) = grad (delta F / delta mu)(x^i).
LiftCheck lift_identity_check(const Objective& obj, const ParticleEnsemble& ensemble, const MirrorMap& map,
                              Eigen::Index i);

}  // namespace mmfld
