#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfld {

// A point lies on or outside the boundary of a mirror domain.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The Hessian metric is not numerically positive definite at the point.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A measure puts mass where the reference measure has none.
class SupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

// Failure of a sampler step, tagged with the iteration that produced it.
class SamplerError : public std::runtime_error {
 public:
  SamplerError(const std::string& what, std::int64_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

// Every problem found while validating a configuration, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration:";
    for (const auto& p : problems) out += "\n  " + p;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace mmfld
