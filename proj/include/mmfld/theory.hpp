#pragma once

// Calculators for the convergence guarantees of mirror mean-field Langevin
// dynamics. All constants are caller inputs; nothing is estimated from data.

#include <cstdint>
#include <optional>
#include <string>

namespace mmfld::theory {

struct HessianDrift {
  double expectation = 1.0;    // bound on M in expectation over the Brownian increment
  double deterministic = 1.0;  // exp(2 c1 D / sqrt(c2))
  std::string regime;          // "convention", "expectation" or "deterministic"
};

// Bound on the drift of the Hessian over a window of length t. Within
// t <= min(1/(2 c1 M1), 1/(16 c1^2 d)) the expectation form applies,
//   (1 - exp(-1/(16 c1^2 t))) / (1 - c1 (t M1 + 2 sqrt(t d)))^2 + exp(-1/(16 c1^2 t) + 2 c1 D / sqrt(c2)),
// otherwise only the deterministic one. Passing `proof_lambda` replaces sqrt(t d)
// by sqrt(lambda t d). c1 = 0 returns 1 for both. D may be +infinity.
// Throws DomainError if the denominator vanishes inside the regime.
HessianDrift lemma_b6_M(double c1, double c2, double D, double t, double M1, double d,
                        std::optional<double> proof_lambda = std::nullopt);

// 2 eta M2^4 M (eta M1^2 + 2 lambda d)
double delta_eta(double eta, double M1, double M2, double lambda, double d, double M);

// exp(-alpha lambda eta k) gap0 + L R^2 / (2 N) + delta_eta / (2 alpha lambda)
double theorem8_bound(double gap0, double alpha, double lambda, double eta, double k, double N, double L, double R,
                      double delta);

struct Envelopes {
  double mmfld_gap = 0.0;  // e^{-2 alpha lambda t} gap0
  double mld_kl = 0.0;     // e^{-2 alpha lambda t} KL0, with KL0 = gap0
  double chaos_gap = 0.0;  // L R^2 / (2 N)
};

Envelopes convergence_envelopes(double gap0, double alpha, double lambda, double t, double L, double R, double N);

}  // namespace mmfld::theory
