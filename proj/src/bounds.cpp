#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "mmfld/errors.hpp"
#include "mmfld/harness.hpp"
#include "mmfld/theory.hpp"

namespace mmfld {

using nlohmann::json;

json bounds_report(const json& inputs) {
  std::map<std::string, double> v{{"M1", 1.0},    {"M2", 1.0},  {"lambda", 0.1}, {"eta", 3e-3}, {"t", 3e-3},
                                  {"d", 2.0},     {"N", 5e4},   {"k", 1000.0},   {"alpha", 1.0}, {"L", 1.0},
                                  {"R", 1.0},     {"c1", 0.0},  {"c2", 1.0},     {"D", 1.0},    {"gap0", 1.0}};
  bool proof_variant = false;
  std::vector<std::string> problems;
  if (!inputs.is_object()) throw ConfigError({"bounds: inputs must be a JSON object"});
  for (auto it = inputs.begin(); it != inputs.end(); ++it) {
    const std::string& key = it.key();
    if (key == "proof_variant") {
      if (it->is_boolean())
        proof_variant = it->get<bool>();
      else
        problems.push_back("bounds.proof_variant: expected a boolean");
      continue;
    }
    auto slot = v.find(key);
    if (slot == v.end()) {
      problems.push_back(fmt::format("bounds.{}: unknown key", key));
    } else if (it->is_number()) {
      slot->second = it->get<double>();
    } else if (key == "D" && it->is_string() && it->get<std::string>() == "inf") {
      slot->second = std::numeric_limits<double>::infinity();
    } else {
      problems.push_back(fmt::format("bounds.{}: expected a number", key));
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));

  auto number = [](double x) { return std::isinf(x) ? json("inf") : json(x); };
  json out;
  json echo;
  for (const auto& [k, x] : v) echo[k] = number(x);
  echo["proof_variant"] = proof_variant;
  out["inputs"] = echo;

  try {
    const auto m = theory::lemma_b6_M(v["c1"], v["c2"], v["D"], v["t"], v["M1"], v["d"],
                                      proof_variant ? std::optional<double>(v["lambda"]) : std::nullopt);
    out["lemma_b6"] = {{"M_expectation", number(m.expectation)},
                       {"M_deterministic", number(m.deterministic)},
                       {"regime", m.regime}};
    const double delta = theory::delta_eta(v["eta"], v["M1"], v["M2"], v["lambda"], v["d"], m.deterministic);
    out["delta_eta"] = number(delta);
    out["theorem8_bound"] = number(
        theory::theorem8_bound(v["gap0"], v["alpha"], v["lambda"], v["eta"], v["k"], v["N"], v["L"], v["R"], delta));
    out["theorem8_limit"] = number(theory::theorem8_bound(v["gap0"], v["alpha"], v["lambda"], v["eta"],
                                                          std::numeric_limits<double>::infinity(), v["N"], v["L"],
                                                          v["R"], delta));
    const auto env =
        theory::convergence_envelopes(v["gap0"], v["alpha"], v["lambda"], v["k"] * v["eta"], v["L"], v["R"], v["N"]);
    out["envelopes"] = {{"time", v["k"] * v["eta"]},
                        {"mmfld_gap", env.mmfld_gap},
                        {"mld_kl", env.mld_kl},
                        {"chaos_gap", env.chaos_gap}};
  } catch (const std::invalid_argument& e) {
    throw ConfigError({fmt::format("bounds: {}", e.what())});
  }
  return out;
}

}  // namespace mmfld
