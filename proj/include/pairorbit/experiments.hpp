#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pairorbit/measures.hpp"

namespace pairorbit::experiments {

using nlohmann::json;

struct Context {
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 uses every core; results do not depend on it
};

const std::vector<std::string>& names();

/// Parameter record of a pipeline before overrides.
json default_params(const std::string& name);

/// Runs a named pipeline. Every override key must name a default parameter.
/// The result holds "params", "seed" and a boolean "verdict"; pipelines that
/// run an optimizer also report "converged".
json run(const std::string& name, const json& overrides, const Context& ctx);

/// V = amplitude * (phi * phi) with phi the truncated Gaussian of width phi_eps.
/// amplitude 1 is the exact kernel, anything else a table with step phi_eps / 100.
RadialKernel pam_kernel(double phi_eps, double amplitude);

}  // namespace pairorbit::experiments
