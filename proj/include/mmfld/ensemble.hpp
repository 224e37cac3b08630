#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "mmfld/geometry.hpp"
#include "mmfld/random.hpp"

namespace mmfld {

// Row-major so each particle's coordinates are contiguous.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RngLineage {
  std::uint64_t seed = 0;
  std::uint32_t protocol = kStreamProtocol;
};

// N particles stored in ambient coordinates (m+1 columns on the simplex, m on a
// box). The intrinsic point of particle i is the first m entries of row i; the
// pinned coordinate is stored rather than recomputed because 1 - sum(x) cancels
// catastrophically once it drops below machine epsilon.
class ParticleEnsemble {
 public:
  ParticleEnsemble() = default;
  ParticleEnsemble(PointMatrix ambient_points, std::uint64_t seed)
      : points_(std::move(ambient_points)), lineage_{seed, kStreamProtocol} {}

  // Builds from intrinsic rows (N x m) by completing each row with the map's embedding.
  static ParticleEnsemble from_intrinsic(const MirrorMap& map, const Matrix& intrinsic_rows, std::uint64_t seed);

  // Uniform draw on the simplex (normalized exponentials) or on the box.
  static ParticleEnsemble uniform(const MirrorMap& map, Eigen::Index count, std::uint64_t seed);

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index ambient_dim() const { return points_.cols(); }
  const PointMatrix& points() const { return points_; }
  PointMatrix& points() { return points_; }

  std::span<const double> row(Eigen::Index i) const {
    return {points_.data() + i * points_.cols(), static_cast<size_t>(points_.cols())};
  }
  std::span<double> row(Eigen::Index i) {
    return {points_.data() + i * points_.cols(), static_cast<size_t>(points_.cols())};
  }
  Vector intrinsic(const MirrorMap& map, Eigen::Index i) const {
    return points_.row(i).head(map.intrinsic_dim()).transpose();
  }

  std::uint64_t iteration() const { return iteration_; }
  void set_iteration(std::uint64_t k) { iteration_ = k; }
  const RngLineage& lineage() const { return lineage_; }

  Vector mean() const { return points_.colwise().mean().transpose(); }

 private:
  PointMatrix points_;
  std::uint64_t iteration_ = 0;
  RngLineage lineage_;
};

}  // namespace mmfld
