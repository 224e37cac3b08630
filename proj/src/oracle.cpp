#include "mmfld/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mmfld/errors.hpp"

namespace mmfld {

namespace {

std::span<const double> node(const SimplexGrid& grid, Eigen::Index i) {
  return {grid.nodes().data() + i * 3, 3};
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

bool measure_independent(const Objective& obj) { return obj.kind() == ObjectiveKind::linear_potential; }

void require_simplex_objective(const Objective& obj) {
  if (obj.kind() == ObjectiveKind::mf_network_risk)
    throw std::invalid_argument("the grid oracle covers simplex objectives only");
}

}  // namespace

SimplexGrid SimplexGrid::build(int resolution, double margin) {
  std::vector<std::string> problems;
  if (resolution < 8) problems.push_back(fmt::format("grid resolution must be >= 8, got {}", resolution));
  if (!(margin > 0.0) || !(margin < 1.0 / (3.0 * std::max(resolution, 1))))
    problems.push_back(fmt::format("grid margin must lie in (0, 1/(3R)), got {}", margin));
  if (!problems.empty()) throw ConfigError(std::move(problems));

  const int r = resolution;
  SimplexGrid grid;
  grid.resolution_ = r;
  grid.margin_ = margin;
  const double shrink = 1.0 - 3.0 * margin;
  grid.cell_volume_ = 0.5 * shrink * shrink / (static_cast<double>(r) * r);
  grid.nodes_.resize(static_cast<Eigen::Index>(r) * r, 3);

  // up(i, j): i + j <= r - 1; down(a, b): a + b <= r - 2.
  std::vector<Eigen::Index> up(static_cast<size_t>(r) * r, -1), down(static_cast<size_t>(r) * r, -1);
  Eigen::Index next = 0;
  auto place = [&](double b0, double b1) {
    const double b2 = 1.0 - b0 - b1;
    grid.nodes_.row(next) << margin + shrink * b0, margin + shrink * b1, margin + shrink * b2;
    return next++;
  };
  for (int i = 0; i < r; ++i)
    for (int j = 0; i + j <= r - 1; ++j) up[i * r + j] = place((i + 1.0 / 3.0) / r, (j + 1.0 / 3.0) / r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; a + b <= r - 2; ++b) down[a * r + b] = place((a + 2.0 / 3.0) / r, (b + 2.0 / 3.0) / r);

  grid.neighbors_.assign(static_cast<size_t>(next), {});
  auto link = [&](Eigen::Index u, Eigen::Index d) {
    grid.neighbors_[u].push_back(d);
    grid.neighbors_[d].push_back(u);
  };
  // down(a, b, c) shares an edge with up(a+1, b, c), up(a, b+1, c) and up(a, b, c+1).
  for (int a = 0; a < r; ++a) {
    for (int b = 0; a + b <= r - 2; ++b) {
      const Eigen::Index d = down[a * r + b];
      link(up[(a + 1) * r + b], d);
      link(up[a * r + b + 1], d);
      link(up[a * r + b], d);
    }
  }
  return grid;
}

GridMeasure GridMeasure::uniform(const SimplexGrid& grid) {
  return {Vector::Constant(grid.size(), 1.0 / static_cast<double>(grid.size()))};
}

GridMeasure GridMeasure::from_weights(Vector w) {
  if ((w.array() < 0.0).any() || !w.allFinite()) throw std::invalid_argument("weights must be finite and >= 0");
  const double total = w.sum();
  if (!(total > 0.0)) throw std::invalid_argument("weights must not all vanish");
  return {w / total};
}

Vector grid_first_variation(const SimplexGrid& grid, const Objective& obj, const GridMeasure& mu) {
  require_simplex_objective(obj);
  const EnsembleStats stats = obj.stats(grid.nodes(), {mu.weights.data(), static_cast<size_t>(mu.weights.size())});
  Vector g(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) g[i] = obj.first_variation(node(grid, i), stats);
  return g;
}

namespace {

GridMeasure gibbs_from(const Vector& g, double lambda) {
  const double shift = g.minCoeff();
  return GridMeasure::from_weights((-(g.array() - shift) / lambda).exp().matrix());
}

double residual_from(const SimplexGrid& grid, const GridMeasure& mu, const Vector& g, double lambda) {
  std::vector<double> v(static_cast<size_t>(grid.size()));
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (!(mu.weights[i] > 0.0)) return std::numeric_limits<double>::infinity();
    v[i] = lambda * std::log(mu.weights[i] / grid.cell_volume()) + g[i];
  }
  const double med = median(v);
  double worst = 0.0;
  for (double x : v) worst = std::max(worst, std::abs(x - med));
  return worst;
}

}  // namespace

GridMeasure proximal_gibbs(const SimplexGrid& grid, const Objective& obj, const GridMeasure& mu, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  return gibbs_from(grid_first_variation(grid, obj, mu), lambda);
}

double optimality_residual(const SimplexGrid& grid, const Objective& obj, const GridMeasure& mu, double lambda) {
  return residual_from(grid, mu, grid_first_variation(grid, obj, mu), lambda);
}

FixedPointResult fixed_point_solve(const SimplexGrid& grid, const Objective& obj, double lambda,
                                   const FixedPointOptions& options) {
  if (!(options.damping > 0.0 && options.damping <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
  if (!(options.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");

  FixedPointResult out;
  GridMeasure mu = GridMeasure::uniform(grid);
  if (measure_independent(obj)) {
    out.measure = proximal_gibbs(grid, obj, mu, lambda);
    out.iterations = 1;
    out.residual = optimality_residual(grid, obj, out.measure, lambda);
    out.residual_history.push_back(out.residual);
    return out;
  }

  const double tau = options.damping;
  for (int it = 1; it <= options.max_iter; ++it) {
    const Vector g = grid_first_variation(grid, obj, mu);
    out.residual_history.push_back(residual_from(grid, mu, g, lambda));
    const GridMeasure target = gibbs_from(g, lambda);
    const double defect = ((target.weights - mu.weights).array().abs() / mu.weights.array()).maxCoeff();
    mu.weights = (1.0 - tau) * mu.weights + tau * target.weights;
    mu.weights /= mu.weights.sum();
    if (defect < options.tol) {
      out.measure = mu;
      out.iterations = it;
      out.residual = optimality_residual(grid, obj, mu, lambda);
      return out;
    }
  }
  const double last = optimality_residual(grid, obj, mu, lambda);
  throw ConvergenceError(fmt::format("fixed point did not converge in {} iterations (residual {:.3e})",
                                     options.max_iter, last),
                         last);
}

GridFunctionals grid_functionals(const SimplexGrid& grid, const Objective& obj, const GridMeasure& mu,
                                 double lambda) {
  require_simplex_objective(obj);
  const std::span<const double> w(mu.weights.data(), static_cast<size_t>(mu.weights.size()));
  const EnsembleStats stats = obj.stats(grid.nodes(), w);
  GridFunctionals out;
  out.value = obj.value(stats, grid.nodes(), w);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const double wi = mu.weights[i];
    if (wi > 0.0) out.entropy += wi * std::log(wi / grid.cell_volume());
  }
  out.free_energy = out.value + lambda * out.entropy;
  out.mean = stats.mean;
  out.covariance = Matrix::Zero(3, 3);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const Vector d = grid.nodes().row(i).transpose() - out.mean;
    out.covariance += mu.weights[i] * d * d.transpose();
  }
  return out;
}

Divergences grid_divergences(const SimplexGrid& grid, const GridMeasure& mu, const GridMeasure& nu) {
  const Eigen::Index n = grid.size();
  if (mu.weights.size() != n || nu.weights.size() != n) throw std::invalid_argument("measure does not match grid");
  Divergences out;
  Vector log_ratio = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = mu.weights[i];
    if (!(a > 0.0)) continue;
    if (!(nu.weights[i] > 0.0)) throw SupportError(fmt::format("mu charges grid node {} where nu vanishes", i));
    log_ratio[i] = std::log(a / nu.weights[i]);
    out.kl += a * log_ratio[i];
  }

  const MirrorMap map = MirrorMap::simplex(2);
  std::vector<Eigen::Index> stencil;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(mu.weights[i] > 0.0)) continue;
    stencil.clear();
    for (Eigen::Index j : grid.neighbors(i)) {
      stencil.push_back(j);
      for (Eigen::Index k : grid.neighbors(j))
        if (k != i) stencil.push_back(k);
    }
    std::sort(stencil.begin(), stencil.end());
    stencil.erase(std::unique(stencil.begin(), stencil.end()), stencil.end());

    Eigen::Matrix2d normal = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (Eigen::Index j : stencil) {
      if (std::isnan(log_ratio[j])) continue;
      const Eigen::Vector2d dx(grid.nodes()(j, 0) - grid.nodes()(i, 0), grid.nodes()(j, 1) - grid.nodes()(i, 1));
      normal += dx * dx.transpose();
      rhs += dx * (log_ratio[j] - log_ratio[i]);
    }
    const Eigen::Vector2d grad = normal.ldlt().solve(rhs);
    const Vector x = grid.nodes().row(i).head(2).transpose();
    const Matrix inverse_metric = map.dual_hessian(map.forward(x));
    out.fisher += mu.weights[i] * grad.dot(inverse_metric * grad);
  }
  return out;
}

SandwichCheck entropy_sandwich_check(const SimplexGrid& grid, const Objective& obj, double lambda,
                                     const GridMeasure& mu, const GridMeasure& minimizer) {
  const GridMeasure hat = proximal_gibbs(grid, obj, mu, lambda);
  SandwichCheck out;
  out.lhs = lambda * grid_divergences(grid, mu, minimizer).kl;
  out.mid = grid_functionals(grid, obj, mu, lambda).free_energy -
            grid_functionals(grid, obj, minimizer, lambda).free_energy;
  out.rhs = lambda * grid_divergences(grid, mu, hat).kl;
  const double tol = 1e-3 * std::max(1.0, std::abs(out.mid));
  out.pass = out.lhs <= out.mid + tol && out.mid <= out.rhs + tol;
  return out;
}

nlohmann::json oracle_to_json(const SimplexGrid& grid, const Objective& obj, double lambda,
                              const FixedPointResult& result) {
  const GridFunctionals f = grid_functionals(grid, obj, result.measure, lambda);
  nlohmann::json j;
  j["resolution"] = grid.resolution();
  j["margin"] = grid.margin();
  j["lambda"] = lambda;
  j["iterations"] = result.iterations;
  j["residual"] = result.residual;
  j["value"] = f.value;
  j["entropy"] = f.entropy;
  j["free_energy"] = f.free_energy;
  j["mean"] = std::vector<double>(f.mean.data(), f.mean.data() + f.mean.size());
  std::vector<std::vector<double>> cov(3, std::vector<double>(3));
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) cov[a][b] = f.covariance(a, b);
  j["covariance"] = cov;
  nlohmann::json nodes = nlohmann::json::array();
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    nodes.push_back({grid.nodes()(i, 0), grid.nodes()(i, 1), grid.nodes()(i, 2), result.measure.weights[i]});
  j["nodes"] = std::move(nodes);
  return j;
}

}  // namespace mmfld
