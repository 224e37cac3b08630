#include "mmfld/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "mmfld/errors.hpp"

namespace mmfld {

namespace {

double weight_of(std::span<const double> weights, Eigen::Index i, Eigen::Index n) {
  return weights.empty() ? 1.0 / static_cast<double>(n) : weights[i];
}

double clamp_log(double x, double floor) { return std::log(floor > 0.0 ? std::max(x, floor) : x); }

}  // namespace

Dataset Dataset::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open dataset '{}'", path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(fmt::format("dataset '{}' is empty", path));
  std::vector<std::vector<double>> rows;
  size_t columns = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::runtime_error(fmt::format("{}:{}: '{}' is not a number", path, line_no, cell));
      }
    }
    if (columns == 0) columns = row.size();
    if (row.size() != columns || columns < 2)
      throw std::runtime_error(fmt::format("{}:{}: expected {} columns (features..., label)", path, line_no, columns));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(fmt::format("dataset '{}' has no rows", path));

  Dataset d{Matrix(rows.size(), columns - 1), Vector(rows.size())};
  for (size_t j = 0; j < rows.size(); ++j) {
    for (size_t c = 0; c + 1 < columns; ++c) d.features(j, c) = rows[j][c];
    d.labels[j] = rows[j].back();
  }
  return d;
}

Objective Objective::linear_potential(Vector alpha, double reference_lambda) {
  if (alpha.size() < 2 || (alpha.array() <= 0.0).any())
    throw std::invalid_argument("Dirichlet exponents must be positive (at least two)");
  if (!(reference_lambda > 0.0)) throw std::invalid_argument("reference temperature must be positive");
  Objective o;
  o.kind_ = ObjectiveKind::linear_potential;
  o.alpha_ = std::move(alpha);
  o.reference_lambda_ = reference_lambda;
  return o;
}

Objective Objective::mean_match(Vector target, double beta) {
  if (target.size() < 2 || (target.array() <= 0.0).any() || std::abs(target.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("mean-match target must be a strictly interior simplex point");
  if (!(beta >= 0.0)) throw std::invalid_argument("barrier weight must be nonnegative");
  Objective o;
  o.kind_ = ObjectiveKind::mean_match_barrier;
  o.target_ = std::move(target);
  o.beta_ = beta;
  return o;
}

Objective Objective::mf_network(Dataset data) {
  if (data.features.rows() < 1 || data.features.rows() != data.labels.size())
    throw std::invalid_argument("network dataset needs at least one labelled row");
  Objective o;
  o.kind_ = ObjectiveKind::mf_network_risk;
  o.data_ = std::move(data);
  return o;
}

void Objective::check_compatible(const MirrorMap& map) const {
  switch (kind_) {
    case ObjectiveKind::linear_potential:
    case ObjectiveKind::mean_match_barrier: {
      const Vector& v = kind_ == ObjectiveKind::linear_potential ? alpha_ : target_;
      if (map.kind() != MirrorKind::simplex_entropy || v.size() != map.ambient_dim())
        throw std::invalid_argument(
            fmt::format("objective is defined on the {}-simplex; map does not match", v.size()));
      break;
    }
    case ObjectiveKind::mf_network_risk:
      if (map.kind() != MirrorKind::box_log_barrier || map.intrinsic_dim() != data_.features.cols() + 1)
        throw std::invalid_argument(fmt::format("network neurons need a box of dimension {} (weights and bias)",
                                                data_.features.cols() + 1));
      break;
  }
}

EnsembleStats Objective::stats(const PointMatrix& points, std::span<const double> weights) const {
  const Eigen::Index n = points.rows();
  EnsembleStats s;
  s.mean = Vector::Zero(points.cols());
  for (Eigen::Index i = 0; i < n; ++i) s.mean += weight_of(weights, i, n) * points.row(i).transpose();

  if (kind_ == ObjectiveKind::mf_network_risk) {
    const Eigen::Index p = data_.features.cols();
    s.predictions = Vector::Zero(data_.features.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = weight_of(weights, i, n);
      const auto weight_row = points.row(i).head(p);
      const double bias = points(i, p);
      for (Eigen::Index j = 0; j < data_.features.rows(); ++j)
        s.predictions[j] += w * std::tanh(weight_row.dot(data_.features.row(j)) + bias);
    }
  }
  return s;
}

EnsembleStats Objective::stats(const ParticleEnsemble& ensemble, const MirrorMap& map) const {
  if (ensemble.size() == 0) throw std::invalid_argument("ensemble is empty");
  if (ensemble.ambient_dim() != map.ambient_dim()) throw std::invalid_argument("ensemble does not match the map");
  return stats(ensemble.points());
}

double Objective::particle_term(std::span<const double> xa, double floor) const {
  double acc = 0.0;
  switch (kind_) {
    case ObjectiveKind::linear_potential:
      for (size_t c = 0; c < xa.size(); ++c) acc -= reference_lambda_ * (alpha_[c] - 1.0) * clamp_log(xa[c], floor);
      return acc;
    case ObjectiveKind::mean_match_barrier:
      if (beta_ == 0.0) return 0.0;
      for (double v : xa) acc -= clamp_log(v, floor);
      return beta_ * acc;
    case ObjectiveKind::mf_network_risk:
      return 0.0;
  }
  return acc;
}

double Objective::value(const EnsembleStats& stats, const PointMatrix& points, std::span<const double> weights,
                        double floor) const {
  const Eigen::Index n = points.rows();
  double linear_part = 0.0;
  if (kind_ != ObjectiveKind::mf_network_risk) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::span<const double> row(points.data() + i * points.cols(), static_cast<size_t>(points.cols()));
      linear_part += weight_of(weights, i, n) * particle_term(row, floor);
    }
  }
  switch (kind_) {
    case ObjectiveKind::linear_potential:
      return linear_part;
    case ObjectiveKind::mean_match_barrier:
      return (stats.mean - target_).squaredNorm() + linear_part;
    case ObjectiveKind::mf_network_risk:
      return 0.5 * (stats.predictions - data_.labels).squaredNorm() / static_cast<double>(data_.labels.size());
  }
  return linear_part;
}

double Objective::value(const EnsembleStats& stats, const ParticleEnsemble& ensemble, const MirrorMap& map) const {
  if (ensemble.ambient_dim() != map.ambient_dim()) throw std::invalid_argument("ensemble does not match the map");
  return value(stats, ensemble.points());
}

double Objective::first_variation(std::span<const double> xa, const EnsembleStats& stats) const {
  switch (kind_) {
    case ObjectiveKind::linear_potential:
      return particle_term(xa, 0.0);
    case ObjectiveKind::mean_match_barrier: {
      double acc = particle_term(xa, 0.0);
      for (size_t c = 0; c < xa.size(); ++c) acc += 2.0 * (stats.mean[c] - target_[c]) * xa[c];
      return acc;
    }
    case ObjectiveKind::mf_network_risk: {
      const Eigen::Index p = data_.features.cols();
      const Eigen::Map<const Vector> w(xa.data(), p);
      double acc = 0.0;
      for (Eigen::Index j = 0; j < data_.features.rows(); ++j)
        acc += (stats.predictions[j] - data_.labels[j]) * std::tanh(data_.features.row(j).dot(w) + xa[p]);
      return acc / static_cast<double>(data_.labels.size());
    }
  }
  return 0.0;
}

void Objective::ambient_gradient(std::span<const double> xa, const EnsembleStats& stats, std::span<double> g,
                                 double floor) const {
  auto inv = [floor](double v) { return 1.0 / (floor > 0.0 ? std::max(v, floor) : v); };
  switch (kind_) {
    case ObjectiveKind::linear_potential:
      for (size_t c = 0; c < xa.size(); ++c) g[c] = -reference_lambda_ * (alpha_[c] - 1.0) * inv(xa[c]);
      return;
    case ObjectiveKind::mean_match_barrier:
      for (size_t c = 0; c < xa.size(); ++c) {
        g[c] = 2.0 * (stats.mean[c] - target_[c]);
        if (beta_ != 0.0) g[c] -= beta_ * inv(xa[c]);
      }
      return;
    case ObjectiveKind::mf_network_risk: {
      const Eigen::Index p = data_.features.cols();
      const Eigen::Map<const Vector> w(xa.data(), p);
      std::fill(g.begin(), g.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(data_.labels.size());
      for (Eigen::Index j = 0; j < data_.features.rows(); ++j) {
        const double t = std::tanh(data_.features.row(j).dot(w) + xa[p]);
        const double coef = scale * (stats.predictions[j] - data_.labels[j]) * (1.0 - t * t);
        for (Eigen::Index c = 0; c < p; ++c) g[c] += coef * data_.features(j, c);
        g[p] += coef;
      }
      return;
    }
  }
}

Vector Objective::first_variation_grad(const Vector& x, const EnsembleStats& stats, const MirrorMap& map) const {
  if (!map.is_interior(x)) throw DomainError("first variation requested at a non-interior point");
  const Vector xa = map.embed(x);
  Vector ga(xa.size());
  ambient_gradient({xa.data(), static_cast<size_t>(xa.size())}, stats, {ga.data(), static_cast<size_t>(ga.size())});
  return map.pullback(x, ga);
}

LiftCheck lift_identity_check(const Objective& obj, const ParticleEnsemble& ensemble, const MirrorMap& map,
                              Eigen::Index i) {
  if (ensemble.size() < 2) throw std::invalid_argument("lift identity check needs at least two particles");
  const double n = static_cast<double>(ensemble.size());
  const int m = map.intrinsic_dim();

  LiftCheck out;
  out.analytic = obj.first_variation_grad(ensemble.intrinsic(map, i), obj.stats(ensemble, map), map);
  out.finite_difference = Vector::Zero(m);

  const double step = 1e-3 * map.face_distance(ensemble.row(i));
  auto lifted = [&](int coord, double s) {
    ParticleEnsemble moved = ensemble;
    auto r = moved.row(i);
    r[coord] += s;
    if (map.kind() == MirrorKind::simplex_entropy) r[m] -= s;
    return n * obj.value(obj.stats(moved, map), moved, map);
  };
  for (int c = 0; c < m; ++c) {
    out.finite_difference[c] = (lifted(c, -2.0 * step) - 8.0 * lifted(c, -step) + 8.0 * lifted(c, step) -
                                lifted(c, 2.0 * step)) /
                               (12.0 * step);
  }
  out.max_deviation = (out.analytic - out.finite_difference).lpNorm<Eigen::Infinity>();
  out.relative_error = out.max_deviation / std::max(out.analytic.lpNorm<Eigen::Infinity>(), 1e-12);
  return out;
}

}  // namespace mmfld
