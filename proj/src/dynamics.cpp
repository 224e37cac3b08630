#include "mmfld/dynamics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "mmfld/errors.hpp"
#include "parallel.hpp"

namespace mmfld {

namespace {

void fill_normals(CounterStream rng, std::span<double> xi) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : xi) v = normal(rng);
}

// Per-worker scratch buffers for one particle update.
struct Workspace {
  explicit Workspace(const MirrorMap& map)
      : dual(map.intrinsic_dim()),
        grad(map.intrinsic_dim()),
        grad_ambient(map.ambient_dim()),
        point(map.ambient_dim()),
        noise(std::max(map.intrinsic_dim(), map.ambient_dim())) {}
  std::vector<double> dual, grad, grad_ambient, point, noise, sort;
};

// Diffusion substeps in place on `y`, using ws.point and ws.noise.
template <class DrawNoise>
void diffuse(std::span<double> y, const MirrorMap& map, double lambda, double eta, int substeps,
             const DiffusionControl& control, Workspace& ws, DrawNoise&& draw) {
  if (lambda == 0.0) return;
  const std::span<double> point(ws.point);
  const std::span<double> xi(ws.noise.data(), y.size());
  const bool adaptive = control.dual_step_limit > 0.0;
  const double base = eta / substeps;
  const double variance_cap = adaptive ? control.dual_step_limit * control.dual_step_limit / (2.0 * lambda) : 0.0;
  double elapsed = 0.0;
  std::int64_t s = 0;
  while (adaptive ? elapsed < eta : s < substeps) {
    if (s == kMaxAdaptiveSubsteps) throw FactorizationError("adaptive diffusion exhausted its substep budget");
    map.backward_ambient(y, point);
    double h = base;
    if (adaptive) {
      h = std::min({base, variance_cap / map.metric_trace(point), eta - elapsed});
      if (!(h > 0.0)) throw FactorizationError("adaptive diffusion step underflowed near the boundary");
      // Snap the final substep so the window ends exactly at eta.
      elapsed = (eta - elapsed - h <= 1e-12 * eta) ? eta : elapsed + h;
    }
    draw(s, xi);
    map.add_diffusion(point, 2.0 * lambda * h, xi, y);
    if (control.boundary_floor > 0.0) map.reflect_dual(y, control.boundary_floor);
    ++s;
  }
}

}  // namespace

void validate(const SamplerConfig& cfg) {
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta)) throw std::invalid_argument("step size eta must be finite and >= 0");
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
    throw std::invalid_argument("temperature lambda must be finite and >= 0");
  if (cfg.substeps < 1) throw std::invalid_argument("inner substeps K must be >= 1");
  if (cfg.steps < 0) throw std::invalid_argument("step count must be >= 0");
  if (!(cfg.dual_step_limit >= 0.0)) throw std::invalid_argument("dual step limit must be >= 0");
  if (!(cfg.boundary_floor >= 0.0 && cfg.boundary_floor < 0.5))
    throw std::invalid_argument("boundary floor must lie in [0, 0.5)");
}

Vector inner_diffusion(const Vector& y0, const MirrorMap& map, double lambda, double eta, int substeps,
                       const NoiseSource& noise, const DiffusionControl& control) {
  if (substeps < 1) throw std::invalid_argument("inner substeps K must be >= 1");
  if (y0.size() != map.intrinsic_dim()) throw std::invalid_argument("dual point has the wrong dimension");
  Vector y = y0;
  Workspace ws(map);
  diffuse({y.data(), static_cast<size_t>(y.size())}, map, lambda, eta, substeps, control, ws, noise);
  return y;
}

Vector inner_diffusion(const Vector& y0, const MirrorMap& map, double lambda, double eta, int substeps,
                       std::uint64_t seed, std::uint64_t particle, std::uint64_t iteration,
                       const DiffusionControl& control) {
  return inner_diffusion(
      y0, map, lambda, eta, substeps,
      [&](std::int64_t s, std::span<double> xi) {
        fill_normals(CounterStream(seed, StreamPurpose::dynamics, particle, iteration, static_cast<std::uint64_t>(s)),
                     xi);
      },
      control);
}

void mmfld_step(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj, const SamplerConfig& cfg,
                int workers) {
  validate(cfg);
  const std::uint64_t k = ensemble.iteration();
  if (cfg.eta == 0.0) {
    ensemble.set_iteration(k + 1);
    return;
  }
  const EnsembleStats stats = obj.stats(ensemble, map);
  const std::uint64_t seed = ensemble.lineage().seed;
  const int m = map.intrinsic_dim();
  const DiffusionControl control{cfg.dual_step_limit, cfg.boundary_floor};

  detail::parallel_for(ensemble.size(), workers, [&](std::int64_t begin, std::int64_t end) {
    Workspace ws(map);
    const std::span<double> y(ws.dual);
    for (std::int64_t i = begin; i < end; ++i) {
      const std::span<double> x = ensemble.row(i);
      map.forward_ambient(x, y);
      obj.ambient_gradient(x, stats, ws.grad_ambient);
      map.pullback_ambient(ws.grad_ambient, ws.grad);
      for (int c = 0; c < m; ++c) y[c] -= cfg.eta * ws.grad[c];
      if (control.boundary_floor > 0.0) map.reflect_dual(y, control.boundary_floor);
      diffuse(y, map, cfg.lambda, cfg.eta, cfg.substeps, control, ws, [&](std::int64_t s, std::span<double> xi) {
        fill_normals(CounterStream(seed, StreamPurpose::dynamics, static_cast<std::uint64_t>(i), k,
                                   static_cast<std::uint64_t>(s)),
                     xi);
      });
      map.backward_ambient(y, x);
      if (!(map.face_distance(x) > 0.0))
        throw DomainError(fmt::format("particle {} underflowed onto the boundary in double precision", i));
    }
  });
  ensemble.set_iteration(k + 1);
}

namespace {

template <class Finish>
void euclidean_step(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj, const SamplerConfig& cfg,
                    int workers, double floor, Finish&& finish) {
  validate(cfg);
  const std::uint64_t k = ensemble.iteration();
  if (cfg.eta == 0.0) {
    ensemble.set_iteration(k + 1);
    return;
  }
  const EnsembleStats stats = obj.stats(ensemble.points());
  const std::uint64_t seed = ensemble.lineage().seed;
  const double noise_scale = std::sqrt(2.0 * cfg.lambda * cfg.eta);

  detail::parallel_for(ensemble.size(), workers, [&](std::int64_t begin, std::int64_t end) {
    Workspace ws(map);
    const std::span<double> xi(ws.noise.data(), static_cast<size_t>(map.ambient_dim()));
    for (std::int64_t i = begin; i < end; ++i) {
      const std::span<double> x = ensemble.row(i);
      obj.ambient_gradient(x, stats, ws.grad_ambient, floor);
      if (noise_scale > 0.0)
        fill_normals(CounterStream(seed, StreamPurpose::dynamics, static_cast<std::uint64_t>(i), k, 0), xi);
      for (size_t c = 0; c < x.size(); ++c) {
        x[c] -= cfg.eta * ws.grad_ambient[c];
        if (noise_scale > 0.0) x[c] += noise_scale * xi[c];
      }
      finish(x, ws);
    }
  });
  ensemble.set_iteration(k + 1);
}

}  // namespace

double projected_barrier_floor(const MirrorMap& map) { return map.interior_margin(); }

void projected_mfld_step(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj,
                         const SamplerConfig& cfg, int workers) {
  if (map.kind() == MirrorKind::simplex_entropy) {
    euclidean_step(ensemble, map, obj, cfg, workers, projected_barrier_floor(map),
                   [](std::span<double> x, Workspace& ws) { project_simplex_inplace(x, ws.sort); });
  } else {
    euclidean_step(ensemble, map, obj, cfg, workers, projected_barrier_floor(map),
                   [&map](std::span<double> x, Workspace&) {
                     for (size_t c = 0; c < x.size(); ++c)
                       x[c] = std::clamp(x[c], map.lower_bounds()[c], map.upper_bounds()[c]);
                   });
  }
}

void mfld_step(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj, const SamplerConfig& cfg,
               int workers) {
  if (obj.kind() != ObjectiveKind::mf_network_risk)
    throw std::invalid_argument("unconstrained MFLD needs an objective defined on all of R^m (mf-network)");
  euclidean_step(ensemble, map, obj, cfg, workers, 0.0, [](std::span<double>, Workspace&) {});
}

void project_simplex_inplace(std::span<double> v, std::vector<double>& sorted) {
  sorted.assign(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double prefix = 0.0;
  double threshold = 0.0;
  for (size_t k = 0; k < sorted.size(); ++k) {
    prefix += sorted[k];
    const double candidate = (prefix - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] > candidate) threshold = candidate;
  }
  for (double& x : v) x = std::max(x - threshold, 0.0);
}

Vector project_simplex(const Vector& v) {
  if (!v.allFinite()) throw std::invalid_argument("cannot project a non-finite vector");
  Vector out = v;
  std::vector<double> scratch;
  project_simplex_inplace({out.data(), static_cast<size_t>(out.size())}, scratch);
  return out;
}

double boundary_fraction(const ParticleEnsemble& ensemble, const MirrorMap& map, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("boundary epsilon must be positive");
  if (ensemble.size() == 0) return 0.0;
  Eigen::Index near = 0;
  for (Eigen::Index i = 0; i < ensemble.size(); ++i) {
    if (map.face_distance(ensemble.row(i)) < epsilon) ++near;
  }
  return static_cast<double>(near) / static_cast<double>(ensemble.size());
}

MetricsRow measure(const ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj, SamplerKind kind,
                   double boundary_epsilon) {
  MetricsRow row;
  row.iteration = static_cast<std::int64_t>(ensemble.iteration());
  const EnsembleStats stats = obj.stats(ensemble.points());
  const double floor = kind == SamplerKind::projected_mfld ? projected_barrier_floor(map) : 0.0;
  row.value = obj.value(stats, ensemble.points(), {}, floor);
  row.boundary_fraction = boundary_fraction(ensemble, map, boundary_epsilon);
  row.mean = stats.mean;
  row.min_coordinate = ensemble.points().minCoeff();
  row.max_coordinate = ensemble.points().maxCoeff();
  return row;
}

std::vector<MetricsRow> run_sampler(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj,
                                    const SamplerConfig& cfg, const RunOptions& options,
                                    const MetricsCallback& callback) {
  validate(cfg);
  obj.check_compatible(map);
  if (options.every < 1) throw std::invalid_argument("diagnostic cadence must be >= 1");
  if (ensemble.ambient_dim() != map.ambient_dim()) throw std::invalid_argument("ensemble does not match the map");

  const auto start = std::chrono::steady_clock::now();
  std::vector<MetricsRow> rows;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    try {
      switch (cfg.kind) {
        case SamplerKind::mmfld:
          mmfld_step(ensemble, map, obj, cfg, options.workers);
          break;
        case SamplerKind::projected_mfld:
          projected_mfld_step(ensemble, map, obj, cfg, options.workers);
          break;
        case SamplerKind::mfld:
          mfld_step(ensemble, map, obj, cfg, options.workers);
          break;
      }
    } catch (const std::exception& e) {
      throw SamplerError(e.what(), static_cast<std::int64_t>(ensemble.iteration()));
    }
    const std::int64_t done = step + 1;
    if (done % options.every == 0 || done == cfg.steps) {
      MetricsRow row = measure(ensemble, map, obj, cfg.kind, options.boundary_epsilon);
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (callback) callback(row, ensemble);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace mmfld
