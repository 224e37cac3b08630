#include "mmfld/ensemble.hpp"

#include <cmath>
#include <random>

#include "mmfld/errors.hpp"

namespace mmfld {

ParticleEnsemble ParticleEnsemble::from_intrinsic(const MirrorMap& map, const Matrix& intrinsic_rows,
                                                  std::uint64_t seed) {
  if (intrinsic_rows.cols() != map.intrinsic_dim()) throw std::invalid_argument("rows do not match the map dimension");
  PointMatrix points(intrinsic_rows.rows(), map.ambient_dim());
  for (Eigen::Index i = 0; i < intrinsic_rows.rows(); ++i) {
    const Vector x = intrinsic_rows.row(i).transpose();
    map.validate(x);
    points.row(i) = map.embed(x).transpose();
  }
  return ParticleEnsemble(std::move(points), seed);
}

ParticleEnsemble ParticleEnsemble::uniform(const MirrorMap& map, Eigen::Index count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("ensemble needs at least one particle");
  PointMatrix points(count, map.ambient_dim());
  for (Eigen::Index i = 0; i < count; ++i) {
    CounterStream rng(seed, StreamPurpose::initialization, static_cast<std::uint64_t>(i), 0);
    // Open-interval uniform: reject the (vanishingly rare) endpoints.
    auto open_uniform = [&rng] {
      double u = 0.0;
      while (u <= 0.0 || u >= 1.0) u = std::generate_canonical<double, 53>(rng);
      return u;
    };
    if (map.kind() == MirrorKind::simplex_entropy) {
      double total = 0.0;
      for (Eigen::Index c = 0; c < points.cols(); ++c) {
        points(i, c) = -std::log(open_uniform());
        total += points(i, c);
      }
      points.row(i) /= total;
    } else {
      for (Eigen::Index c = 0; c < points.cols(); ++c) {
        const double a = map.lower_bounds()[c];
        const double b = map.upper_bounds()[c];
        points(i, c) = a + (b - a) * open_uniform();
      }
    }
  }
  return ParticleEnsemble(std::move(points), seed);
}

}  // namespace mmfld
