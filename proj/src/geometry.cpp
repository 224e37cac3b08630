#include "mmfld/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "mmfld/errors.hpp"

namespace mmfld {

namespace {

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<size_t>(v.size())}; }
std::span<double> as_span(Vector& v) { return {v.data(), static_cast<size_t>(v.size())}; }

// Root in (0, 1) of -1/t + 1/(1-t) = s, rationalized so that neither branch
// subtracts nearly equal numbers.
double unit_barrier_inverse(double s) {
  const double root = std::hypot(s, 2.0);
  if (s > 0.0) return 2.0 / (2.0 + 4.0 / (root + s));
  return 2.0 / (root - s + 2.0);
}

}  // namespace

MirrorMap::MirrorMap(MirrorKind kind, int dim, Vector lower, Vector upper, double margin)
    : kind_(kind), dim_(dim), lower_(std::move(lower)), upper_(std::move(upper)), margin_(margin) {}

MirrorMap MirrorMap::simplex(int intrinsic_dim, double interior_margin) {
  if (intrinsic_dim < 1) throw std::invalid_argument("simplex intrinsic dimension must be >= 1");
  if (!(interior_margin > 0.0)) throw std::invalid_argument("interior margin must be positive");
  return MirrorMap(MirrorKind::simplex_entropy, intrinsic_dim, Vector(), Vector(), interior_margin);
}

MirrorMap MirrorMap::box(Vector lower, Vector upper, double interior_margin) {
  if (lower.size() < 1 || lower.size() != upper.size())
    throw std::invalid_argument("box bounds must be nonempty and of equal length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw std::invalid_argument(fmt::format("box bound {} is not a finite interval a < b", i));
  }
  if (!(interior_margin > 0.0)) throw std::invalid_argument("interior margin must be positive");
  const int dim = static_cast<int>(lower.size());
  return MirrorMap(MirrorKind::box_log_barrier, dim, std::move(lower), std::move(upper), interior_margin);
}

void MirrorMap::require_interior(std::span<const double> xa) const {
  if (static_cast<int>(xa.size()) != ambient_dim())
    throw std::invalid_argument(fmt::format("expected {} ambient coordinates, got {}", ambient_dim(), xa.size()));
  if (!(face_distance(xa) > 0.0)) throw DomainError("point is on or outside the domain boundary");
}

double MirrorMap::face_distance(std::span<const double> xa) const {
  double d = std::numeric_limits<double>::infinity();
  if (kind_ == MirrorKind::simplex_entropy) {
    for (double v : xa) d = std::min(d, v);
  } else {
    for (int i = 0; i < dim_; ++i) d = std::min({d, xa[i] - lower_[i], upper_[i] - xa[i]});
  }
  // NaN compares false everywhere; report it as outside.
  return std::isnan(d) ? -1.0 : d;
}

Vector MirrorMap::embed(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("embed: wrong intrinsic dimension");
  if (kind_ == MirrorKind::box_log_barrier) return x;
  Vector xa(dim_ + 1);
  xa.head(dim_) = x;
  xa[dim_] = 1.0 - x.sum();
  return xa;
}

Vector MirrorMap::intrinsic(const Vector& x_ambient) const {
  if (x_ambient.size() != ambient_dim()) throw std::invalid_argument("intrinsic: wrong ambient dimension");
  return x_ambient.head(dim_);
}

Vector MirrorMap::pullback(const Vector& /*x*/, const Vector& g_ambient) const {
  if (g_ambient.size() != ambient_dim()) throw std::invalid_argument("pullback: wrong ambient dimension");
  Vector g(dim_);
  pullback_ambient(as_span(g_ambient), as_span(g));
  return g;
}

void MirrorMap::pullback_ambient(std::span<const double> g_ambient, std::span<double> g) const {
  if (kind_ == MirrorKind::box_log_barrier) {
    std::copy(g_ambient.begin(), g_ambient.end(), g.begin());
    return;
  }
  const double pinned = g_ambient[dim_];
  for (int i = 0; i < dim_; ++i) g[i] = g_ambient[i] - pinned;
}

bool MirrorMap::is_interior(const Vector& x) const {
  if (x.size() != dim_ || !x.allFinite()) return false;
  const Vector xa = embed(x);
  return face_distance(as_span(xa)) > 0.0;
}

void MirrorMap::validate(const Vector& x) const {
  if (x.size() != dim_ || !x.allFinite()) throw DomainError("point has the wrong size or non-finite entries");
  const Vector xa = embed(x);
  if (!(face_distance(as_span(xa)) >= margin_))
    throw DomainError(fmt::format("point is within the interior margin {} of the boundary", margin_));
}

double MirrorMap::distance_along(const Vector& x, const Vector& u) const {
  const Vector xa = embed(x);
  double t = std::numeric_limits<double>::infinity();
  if (kind_ == MirrorKind::simplex_entropy) {
    for (int c = 0; c < dim_ + 1; ++c) {
      const double uc = c < dim_ ? u[c] : -u.sum();
      if (uc != 0.0) t = std::min(t, xa[c] / std::abs(uc));
    }
  } else {
    for (int i = 0; i < dim_; ++i) {
      if (u[i] != 0.0) t = std::min(t, std::min(xa[i] - lower_[i], upper_[i] - xa[i]) / std::abs(u[i]));
    }
  }
  return t;
}

void MirrorMap::forward_ambient(std::span<const double> xa, std::span<double> y) const {
  require_interior(xa);
  if (kind_ == MirrorKind::simplex_entropy) {
    const double log_pinned = std::log(xa[dim_]);
    for (int i = 0; i < dim_; ++i) y[i] = std::log(xa[i]) - log_pinned;
  } else {
    for (int i = 0; i < dim_; ++i) y[i] = -1.0 / (xa[i] - lower_[i]) + 1.0 / (upper_[i] - xa[i]);
  }
}

void MirrorMap::backward_ambient(std::span<const double> y, std::span<double> xa) const {
  for (int i = 0; i < dim_; ++i) {
    if (!std::isfinite(y[i])) throw DomainError("dual point has non-finite coordinates");
  }
  if (kind_ == MirrorKind::simplex_entropy) {
    double shift = 0.0;
    for (int i = 0; i < dim_; ++i) shift = std::max(shift, y[i]);
    double total = std::exp(-shift);
    xa[dim_] = total;
    for (int i = 0; i < dim_; ++i) {
      xa[i] = std::exp(y[i] - shift);
      total += xa[i];
    }
    for (int c = 0; c <= dim_; ++c) xa[c] /= total;
  } else {
    for (int i = 0; i < dim_; ++i) {
      const double width = upper_[i] - lower_[i];
      xa[i] = lower_[i] + width * unit_barrier_inverse(y[i] * width);
    }
  }
}

void MirrorMap::add_diffusion(std::span<const double> xa, double scale, std::span<const double> xi,
                              std::span<double> y) const {
  if (scale == 0.0) return;
  const double root_scale = std::sqrt(scale);
  if (kind_ == MirrorKind::simplex_entropy) {
    // grad^2 phi = diag(1/x_i) + 11^T / x_{m+1}. Eliminating coordinate j leaves a
    // diagonal-plus-rank-one Schur complement with weight 1/(x_{m+1} + x_1 + .. + x_j),
    // so every column below the diagonal is constant and all terms stay positive.
    double tail = xa[dim_];
    double below = 0.0;  // sum_{j<i} L_ij xi_j
    for (int i = 0; i < dim_; ++i) {
      const double rank_one = 1.0 / tail;
      const double diag = std::sqrt(1.0 / xa[i] + rank_one);
      if (!std::isfinite(diag)) throw FactorizationError("Hessian metric overflowed near the boundary");
      y[i] += root_scale * (diag * xi[i] + below);
      below += rank_one / diag * xi[i];
      tail += xa[i];
    }
  } else {
    for (int i = 0; i < dim_; ++i) {
      const double lo = xa[i] - lower_[i];
      const double hi = upper_[i] - xa[i];
      const double h = 1.0 / (lo * lo) + 1.0 / (hi * hi);
      if (!std::isfinite(h)) throw FactorizationError("Hessian metric overflowed near the boundary");
      y[i] += root_scale * std::sqrt(h) * xi[i];
    }
  }
}

bool MirrorMap::reflect_dual(std::span<double> y, double floor) const {
  const double log_floor = std::log(floor);
  auto reflect = [log_floor](double log_d) { return std::min(2.0 * log_floor - log_d, 0.5 * log_floor); };
  bool changed = false;
  if (kind_ == MirrorKind::simplex_entropy) {
    // log x_i = y_i - lse, log x_{m+1} = -lse with lse = log(1 + sum exp y).
    double shift = 0.0;
    for (int i = 0; i < dim_; ++i) shift = std::max(shift, y[i]);
    double total = std::exp(-shift);
    for (int i = 0; i < dim_; ++i) total += std::exp(y[i] - shift);
    const double lse = shift + std::log(total);
    double log_pinned = -lse;
    bool inside = log_pinned >= log_floor;
    for (int i = 0; i < dim_ && inside; ++i) inside = y[i] - lse >= log_floor;
    if (inside) return false;
    changed = true;
    if (log_pinned < log_floor) log_pinned = reflect(log_pinned);
    for (int i = 0; i < dim_; ++i) {
      double log_x = y[i] - lse;
      if (log_x < log_floor) log_x = reflect(log_x);
      y[i] = log_x - log_pinned;
    }
  } else {
    for (int i = 0; i < dim_; ++i) {
      const double width = upper_[i] - lower_[i];
      double lo = unit_barrier_inverse(y[i] * width);
      double hi = unit_barrier_inverse(-y[i] * width);
      if (lo < floor) {
        lo = std::exp(reflect(std::log(lo)));
        hi = 1.0 - lo;
      } else if (hi < floor) {
        hi = std::exp(reflect(std::log(hi)));
        lo = 1.0 - hi;
      } else {
        continue;
      }
      y[i] = (-1.0 / lo + 1.0 / hi) / width;
      changed = true;
    }
  }
  return changed;
}

double MirrorMap::metric_trace(std::span<const double> xa) const {
  double trace = 0.0;
  if (kind_ == MirrorKind::simplex_entropy) {
    for (int i = 0; i < dim_; ++i) trace += 1.0 / xa[i];
    trace += dim_ / xa[dim_];
  } else {
    for (int i = 0; i < dim_; ++i) {
      const double lo = xa[i] - lower_[i];
      const double hi = upper_[i] - xa[i];
      trace += 1.0 / (lo * lo) + 1.0 / (hi * hi);
    }
  }
  return trace;
}

Vector MirrorMap::forward(const Vector& x) const {
  if (x.size() != dim_ || !x.allFinite()) throw DomainError("point has the wrong size or non-finite entries");
  const Vector xa = embed(x);
  Vector y(dim_);
  forward_ambient(as_span(xa), as_span(y));
  return y;
}

Vector MirrorMap::backward(const Vector& y) const {
  if (y.size() != dim_) throw std::invalid_argument("backward: wrong dual dimension");
  Vector xa(ambient_dim());
  backward_ambient(as_span(y), as_span(xa));
  return xa.head(dim_);
}

MetricFactor MirrorMap::metric(const Vector& x, double scale) const {
  if (!(scale >= 0.0)) throw std::invalid_argument("metric scale must be nonnegative");
  if (x.size() != dim_ || !x.allFinite()) throw DomainError("point has the wrong size or non-finite entries");
  const Vector xa = embed(x);
  require_interior(as_span(xa));

  MetricFactor out{Matrix::Zero(dim_, dim_), Matrix::Zero(dim_, dim_)};
  const double root_scale = std::sqrt(scale);
  if (kind_ == MirrorKind::simplex_entropy) {
    out.hessian.setConstant(1.0 / xa[dim_]);
    double tail = xa[dim_];
    for (int j = 0; j < dim_; ++j) {
      out.hessian(j, j) += 1.0 / xa[j];
      const double rank_one = 1.0 / tail;
      const double diag = std::sqrt(1.0 / xa[j] + rank_one);
      out.lower(j, j) = root_scale * diag;
      for (int i = j + 1; i < dim_; ++i) out.lower(i, j) = root_scale * rank_one / diag;
      tail += xa[j];
    }
  } else {
    for (int i = 0; i < dim_; ++i) {
      const double lo = xa[i] - lower_[i];
      const double hi = upper_[i] - xa[i];
      out.hessian(i, i) = 1.0 / (lo * lo) + 1.0 / (hi * hi);
      out.lower(i, i) = root_scale * std::sqrt(out.hessian(i, i));
    }
  }
  if (!out.hessian.allFinite() || !out.lower.allFinite())
    throw FactorizationError("Hessian metric is not numerically positive definite at this point");
  return out;
}

Matrix MirrorMap::dual_hessian(const Vector& y) const {
  const Vector x = backward(y);
  if (kind_ == MirrorKind::simplex_entropy) {
    Matrix h = -x * x.transpose();
    h.diagonal() += x;
    return h;
  }
  Matrix h = Matrix::Zero(dim_, dim_);
  for (int i = 0; i < dim_; ++i) {
    const double lo = x[i] - lower_[i];
    const double hi = upper_[i] - x[i];
    h(i, i) = 1.0 / (1.0 / (lo * lo) + 1.0 / (hi * hi));
  }
  return h;
}

namespace {

template <class QuadraticForm>
double third_derivative_ratio(QuadraticForm&& q, double step) {
  const double d3 = (q(-2.0 * step) - 8.0 * q(-step) + 8.0 * q(step) - q(2.0 * step)) / (12.0 * step);
  return std::abs(d3) / (2.0 * std::pow(q(0.0), 1.5));
}

}  // namespace

double self_concordance_probe(const MirrorMap& map, const Vector& x, const Vector& u) {
  if (u.size() != map.intrinsic_dim() || u.norm() == 0.0) throw std::invalid_argument("probe direction must be nonzero");
  if (!map.is_interior(x)) throw DomainError("probe point is not interior");
  const double step = 1e-3 * map.distance_along(x, u);
  if (!std::isfinite(step)) throw DomainError("probe direction never reaches the boundary");
  auto q = [&](double s) {
    const Vector p = x + s * u;
    if (!map.is_interior(p)) throw DomainError("probe stencil left the interior");
    return u.dot(map.metric(p, 1.0).hessian * u);
  };
  return third_derivative_ratio(q, step);
}

double dual_self_concordance_probe(const MirrorMap& map, const Vector& y, const Vector& u) {
  if (u.size() != map.intrinsic_dim() || u.norm() == 0.0) throw std::invalid_argument("probe direction must be nonzero");
  const double step = 1e-3 / u.norm();
  auto q = [&](double s) {
    const Vector p = y + s * u;
    return u.dot(map.dual_hessian(p) * u);
  };
  return third_derivative_ratio(q, step);
}

}  // namespace mmfld
