#pragma once

// Particle samplers for entropy-regularized mean-field optimization:
//
//   mmfld           discretized mirror mean-field Langevin dynamics. Per particle:
//                   drift in the dual, y = grad phi(x_k) - eta grad(dF/dmu)(x_k);
//                   then K Euler-Maruyama substeps of the pure diffusion
//                   dY = sqrt(2 lambda [grad^2 phi*(Y)]^{-1}) dB over [0, eta];
//                   then x_{k+1} = grad phi*(y).
//   projected-mfld  Euclidean Langevin step in ambient coordinates followed by
//                   projection onto the simplex (clipping on a box).
//   mfld            the same Euclidean step without any projection; only for
//                   objectives defined on all of R^m.
//
// All particles of an iteration read statistics of the same frozen ensemble.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mmfld/ensemble.hpp"
#include "mmfld/geometry.hpp"
#include "mmfld/objectives.hpp"

namespace mmfld {

enum class SamplerKind { mmfld, projected_mfld, mfld };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::mmfld;
  double eta = 0.0;
  double lambda = 0.0;
  int substeps = 1;
  std::int64_t steps = 0;
  // When > 0, each diffusion substep is further shortened so that
  // 2 lambda h trace(grad^2 phi(x)) <= dual_step_limit^2, i.e. the dual increment
  // has standard deviation at most dual_step_limit. 0 keeps K fixed substeps.
  double dual_step_limit = 0.0;
  // When > 0, any face distance that drops below this floor after the drift or a
  // diffusion substep is reflected back in log space. 0 disables it.
  double boundary_floor = 0.0;
};

// Upper bound on adaptive substeps within one iteration for one particle.
inline constexpr std::int64_t kMaxAdaptiveSubsteps = std::int64_t{1} << 22;

// Throws std::invalid_argument on eta <= 0 or lambda < 0 etc.
void validate(const SamplerConfig& cfg);

// K Euler-Maruyama substeps of the dual diffusion with h = eta / K (shortened
// further when dual_step_limit > 0). `noise` fills the standard normal vector
// for a given substep index.
using NoiseSource = std::function<void(std::int64_t substep, std::span<double> xi)>;

struct DiffusionControl {
  double dual_step_limit = 0.0;
  double boundary_floor = 0.0;
};

Vector inner_diffusion(const Vector& y0, const MirrorMap& map, double lambda, double eta, int substeps,
                       const NoiseSource& noise, const DiffusionControl& control = {});
// Same, drawing from the counter stream of (seed, particle, iteration, substep).
Vector inner_diffusion(const Vector& y0, const MirrorMap& map, double lambda, double eta, int substeps,
                       std::uint64_t seed, std::uint64_t particle, std::uint64_t iteration,
                       const DiffusionControl& control = {});

void mmfld_step(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj, const SamplerConfig& cfg,
                int workers = 1);
void projected_mfld_step(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj,
                         const SamplerConfig& cfg, int workers = 1);
void mfld_step(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj, const SamplerConfig& cfg,
               int workers = 1);

// Euclidean projection onto {x >= 0, sum x = 1} by the sorted-threshold rule.
Vector project_simplex(const Vector& v);
void project_simplex_inplace(std::span<double> v, std::vector<double>& scratch);

// Smallest coordinate value used for barrier terms of particles that the projected
// baseline has put exactly on the boundary.
double projected_barrier_floor(const MirrorMap& map);

// Share of particles whose smallest face distance is below epsilon.
double boundary_fraction(const ParticleEnsemble& ensemble, const MirrorMap& map, double epsilon);

struct MetricsRow {
  std::int64_t iteration = 0;
  double value = 0.0;  // F(mu_k), no entropy term
  double boundary_fraction = 0.0;
  Vector mean;  // ambient
  double min_coordinate = 0.0;
  double max_coordinate = 0.0;
  double wall_ms = 0.0;
};

struct RunOptions {
  int workers = 1;
  std::int64_t every = 1;
  double boundary_epsilon = 1e-3;
};

MetricsRow measure(const ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj, SamplerKind kind,
                   double boundary_epsilon);

using MetricsCallback = std::function<void(const MetricsRow&, const ParticleEnsemble&)>;

// Runs cfg.steps iterations, recording a row every `every` iterations and at the
// last one. Step failures are rethrown as SamplerError carrying the iteration.
std::vector<MetricsRow> run_sampler(ParticleEnsemble& ensemble, const MirrorMap& map, const Objective& obj,
                                    const SamplerConfig& cfg, const RunOptions& options = {},
                                    const MetricsCallback& callback = {});

}  // namespace mmfld
