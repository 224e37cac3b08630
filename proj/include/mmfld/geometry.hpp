#pragma once

// Mirror maps of Legendre type on two shipped domains:
//
//   simplex-entropy   the open probability simplex in R^{m+1}, handled in m
//                     reduced coordinates x = (x_1..x_m) with the last
//                     coordinate pinned to x_{m+1} = 1 - sum(x). The barrier is
//                     phi(x) = sum_{i<=m+1} x_i log x_i, so grad phi(x)_i =
//                     log(x_i / x_{m+1}) and the dual map is a softmax against
//                     an implicit zero logit.
//   box-log-barrier   a product of open intervals (a_i, b_i) with
//                     phi(x) = -sum log(x_i - a_i) + log(b_i - x_i).
//
// Two interfaces are exposed. The Eigen one works in intrinsic coordinates
// and allocates; the span kernels work in ambient coordinates (m+1 entries for
// the simplex) and never allocate. Samplers use the kernels so that a point
// whose pinned coordinate is below 1e-16 keeps full relative precision.

#include <span>

#include <Eigen/Dense>

namespace mmfld {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class MirrorKind { simplex_entropy, box_log_barrier };

struct MetricFactor {
  Matrix hessian;  // grad^2 phi(x)
  Matrix lower;    // lower * lower^T == scale * hessian
};

class MirrorMap {
 public:
  static constexpr double kDefaultInteriorMargin = 1e-12;

  static MirrorMap simplex(int intrinsic_dim, double interior_margin = kDefaultInteriorMargin);
  static MirrorMap box(Vector lower, Vector upper, double interior_margin = kDefaultInteriorMargin);

  MirrorKind kind() const { return kind_; }
  int intrinsic_dim() const { return dim_; }
  int ambient_dim() const { return kind_ == MirrorKind::simplex_entropy ? dim_ + 1 : dim_; }
  const Vector& lower_bounds() const { return lower_; }
  const Vector& upper_bounds() const { return upper_; }
  double interior_margin() const { return margin_; }

  // Intrinsic interface.
  Vector forward(const Vector& x) const;
  Vector backward(const Vector& y) const;
  MetricFactor metric(const Vector& x, double scale) const;
  // grad^2 phi*(y), in closed form.
  Matrix dual_hessian(const Vector& y) const;
  Vector embed(const Vector& x) const;
  Vector pullback(const Vector& x, const Vector& g_ambient) const;
  Vector intrinsic(const Vector& x_ambient) const;

  // Strict interiority: every ambient coordinate (or face distance) > 0.
  bool is_interior(const Vector& x) const;
  // Throws DomainError unless every constraint is met with interior_margin to spare.
  void validate(const Vector& x) const;

  // Largest t with x + s u interior for all |s| < t.
  double distance_along(const Vector& x, const Vector& u) const;

  // Ambient kernels. `xa` has ambient_dim() entries, `y` has intrinsic_dim().
  void forward_ambient(std::span<const double> xa, std::span<double> y) const;
  void backward_ambient(std::span<const double> y, std::span<double> xa) const;
  // y += sqrt(scale) * L(xa) * xi with L the Cholesky factor of grad^2 phi(xa).
  void add_diffusion(std::span<const double> xa, double scale, std::span<const double> xi,
                     std::span<double> y) const;
  // trace(grad^2 phi(xa)); bounds the largest eigenvalue of the metric.
  double metric_trace(std::span<const double> xa) const;
  // g_ambient -> intrinsic gradient (chain rule through the embedding).
  void pullback_ambient(std::span<const double> g_ambient, std::span<double> g) const;
  // Reflects, in log space, every face distance of the point with dual coordinates
  // y that fell below `floor`: log d -> min(2 log floor - log d, log floor / 2).
  // Works directly on y so points far below double-precision range are handled.
  // Returns true if y changed.
  bool reflect_dual(std::span<double> y, double floor) const;
  // Smallest distance of xa to a face of the domain (min coordinate on the simplex).
  double face_distance(std::span<const double> xa) const;

 private:
  MirrorMap(MirrorKind kind, int dim, Vector lower, Vector upper, double margin);
  void require_interior(std::span<const double> xa) const;

  MirrorKind kind_;
  int dim_;
  Vector lower_;
  Vector upper_;
  double margin_;
};

// |D^3 phi(x)[u,u,u]| / (2 <u, grad^2 phi(x) u>^{3/2}), with the third derivative
// from a 5-point central difference of s -> <u, grad^2 phi(x + s u) u>.
double self_concordance_probe(const MirrorMap& map, const Vector& x, const Vector& u);

// Same ratio for the conjugate phi* at dual point y.
double dual_self_concordance_probe(const MirrorMap& map, const Vector& y, const Vector& u);

}  // namespace mmfld
