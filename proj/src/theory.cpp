#include "mmfld/theory.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "mmfld/errors.hpp"

namespace mmfld::theory {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

HessianDrift lemma_b6_M(double c1, double c2, double D, double t, double M1, double d,
                        std::optional<double> proof_lambda) {
  require(c1 >= 0.0 && c2 > 0.0 && D > 0.0 && t > 0.0 && M1 > 0.0 && d > 0.0,
          "lemma_b6_M needs c1 >= 0 and positive c2, D, t, M1, d");
  if (proof_lambda) require(*proof_lambda > 0.0, "lambda must be > 0");
  if (c1 == 0.0) return {1.0, 1.0, "convention"};

  HessianDrift out;
  const double log_det = 2.0 * c1 * D / std::sqrt(c2);
  out.deterministic = std::exp(log_det);
  const double limit = std::min(1.0 / (2.0 * c1 * M1), 1.0 / (16.0 * c1 * c1 * d));
  if (!(t <= limit)) {
    out.expectation = out.deterministic;
    out.regime = "deterministic";
    return out;
  }
  const double spread = proof_lambda ? std::sqrt(*proof_lambda * t * d) : std::sqrt(t * d);
  const double base = 1.0 - c1 * (t * M1 + 2.0 * spread);
  if (!(base > 0.0))
    throw DomainError(fmt::format("lemma_b6_M denominator {} is not positive at t = {} inside its regime", base, t));
  const double tail = 1.0 / (16.0 * c1 * c1 * t);
  // -expm1(-tail) = 1 - exp(-tail) without cancellation for small tail.
  out.expectation = -std::expm1(-tail) / (base * base) + std::exp(-tail + log_det);
  out.regime = "expectation";
  return out;
}

double delta_eta(double eta, double M1, double M2, double lambda, double d, double M) {
  require(eta >= 0.0 && M1 >= 0.0 && M2 >= 0.0 && lambda >= 0.0 && d >= 0.0 && M >= 0.0,
          "delta_eta needs nonnegative inputs");
  return 2.0 * eta * std::pow(M2, 4) * M * (eta * M1 * M1 + 2.0 * lambda * d);
}

double theorem8_bound(double gap0, double alpha, double lambda, double eta, double k, double N, double L, double R,
                      double delta) {
  require(alpha > 0.0 && lambda > 0.0 && eta > 0.0, "theorem8_bound needs alpha, lambda, eta > 0");
  require(k >= 0.0 && N > 0.0, "theorem8_bound needs k >= 0 and N > 0");
  const double decay = std::isinf(k) ? 0.0 : std::exp(-alpha * lambda * eta * k) * gap0;
  const double chaos = std::isinf(N) ? 0.0 : L * R * R / (2.0 * N);
  return decay + chaos + delta / (2.0 * alpha * lambda);
}

Envelopes convergence_envelopes(double gap0, double alpha, double lambda, double t, double L, double R, double N) {
  require(alpha > 0.0 && lambda > 0.0 && t >= 0.0 && N > 0.0, "convergence_envelopes needs positive rates");
  const double decay = std::exp(-2.0 * alpha * lambda * t);
  return {decay * gap0, decay * gap0, L * R * R / (2.0 * N)};
}

}  // namespace mmfld::theory
