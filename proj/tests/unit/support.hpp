#pragma once

#include <random>

#include "mmfld/ensemble.hpp"
#include "mmfld/random.hpp"

namespace testing {

inline mmfld::CounterStream stream(std::uint64_t key) {
  return mmfld::CounterStream(977, mmfld::StreamPurpose::test, key, 0);
}

// Uniform point on the open simplex with `ambient` coordinates.
inline mmfld::Vector simplex_point(mmfld::CounterStream& rng, int ambient) {
  std::exponential_distribution<double> e(1.0);
  mmfld::Vector x(ambient);
  for (auto& v : x) v = e(rng);
  return x / x.sum();
}

inline mmfld::Vector box_point(mmfld::CounterStream& rng, const mmfld::Vector& lo, const mmfld::Vector& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mmfld::Vector x(lo.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double t = u(rng);
    while (t == 0.0) t = u(rng);
    x[i] = lo[i] + t * (hi[i] - lo[i]);
  }
  return x;
}

}  // namespace testing
