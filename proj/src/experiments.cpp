#include "pairorbit/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "pairorbit/compactify.hpp"
#include "pairorbit/error.hpp"
#include "pairorbit/fixtures.hpp"
#include "pairorbit/io.hpp"
#include "pairorbit/simulate.hpp"
#include "pairorbit/variational.hpp"

namespace pairorbit::experiments {

namespace {

json merged(const std::string& name, const json& overrides) {
  json p = default_params(name);
  if (overrides.is_null()) return p;
  require(overrides.is_object(), ErrorKind::invalid_argument, "experiment parameters must be an object");
  for (const auto& [key, value] : overrides.items()) {
    require(p.contains(key), ErrorKind::invalid_argument, "experiment '" + name + "' has no parameter '" + key + "'");
    // Numbers may override numbers of either flavour; otherwise the type must match.
    const bool numeric = p[key].is_number() && value.is_number();
    require(numeric || p[key].type() == value.type(), ErrorKind::invalid_argument,
            "parameter '" + key + "' has the wrong type");
    p[key] = value;
  }
  return p;
}

template <typename T>
T param(const json& p, const char* key) {
  try {
    return p.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_argument, std::string("parameter '") + key + "': " + e.what());
  }
}

double positive(const json& p, const char* key) {
  const double v = param<double>(p, key);
  require(std::isfinite(v) && v > 0.0, ErrorKind::invalid_argument, std::string("parameter '") + key + "' must be > 0");
  return v;
}

std::size_t count(const json& p, const char* key) {
  const double v = param<double>(p, key);
  require(v >= 1.0 && v == std::floor(v) && v < 1e12, ErrorKind::invalid_argument,
          std::string("parameter '") + key + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

json intermittency_ordering(const json& p, const Context&) {
  const int max_p = static_cast<int>(count(p, "max_p"));
  require(max_p >= 2, ErrorKind::invalid_argument, "max_p must be >= 2");
  const double min_gap = param<double>(p, "min_gap");
  const RadialKernel V = pam_kernel(positive(p, "phi_eps"), positive(p, "amplitude"));
  SolverConfig cfg = SolverConfig::defaults(FunctionalKind::pam);
  cfg.h = positive(p, "grid_h");
  cfg.n = count(p, "grid_n");
  cfg.residual_tol = positive(p, "residual_tol");

  json rows = json::array();
  std::vector<double> normalized;
  bool converged = true;
  for (int k = 1; k <= max_p; ++k) {
    const auto r = maximize(Functional::pam(k, V), cfg);
    converged = converged && r.converged;
    normalized.push_back(r.objective / k);
    rows.push_back({{"p", k},
                    {"m_p", r.objective},
                    {"m_p_over_p", r.objective / k},
                    {"grid_objective", r.grid_objective},
                    {"clipped", r.clipped},
                    {"converged", r.converged},
                    {"residual", r.residual},
                    {"iterations", r.iterations}});
  }
  json gaps = json::array();
  bool ordered = true;
  for (std::size_t k = 1; k < normalized.size(); ++k) {
    const double g = normalized[k] - normalized[k - 1];
    gaps.push_back(g);
    ordered = ordered && g > min_gap;
  }
  return {{"kernel", V.describe()}, {"moments", rows}, {"gaps", gaps}, {"converged", converged}, {"verdict", ordered}};
}

json pam_mc_vs_variational(const json& p, const Context& ctx) {
  auto eps = param<std::vector<double>>(p, "epsilons");
  require(!eps.empty(), ErrorKind::invalid_argument, "epsilons must be nonempty");
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const double phi_eps = positive(p, "phi_eps");
  const double reference = positive(p, "reference_epsilon");
  const double tolerance = positive(p, "relative_tolerance");
  const double dt = param<double>(p, "dt");

  // The rescaled exponent uses V = phi * phi for every eps, so one variational value serves them all.
  const auto var = maximize(Functional::pam(1, pam_kernel(phi_eps, 1.0)), SolverConfig::defaults(FunctionalKind::pam));

  json rows = json::array();
  std::vector<double> gaps;
  std::optional<double> reference_gap;
  for (double e : eps) {
    PamMomentConfig cfg;
    cfg.p = 1;
    cfg.epsilon = e;
    cfg.phi = MollifierSpec::gaussian(phi_eps);
    cfg.dt = dt;
    const auto est = estimate_pam_moment(cfg, {count(p, "samples"), ctx.seed, ctx.threads});
    const double gap = std::abs(est.value - var.objective);
    gaps.push_back(gap);
    if (std::abs(e - reference) < 1e-12) reference_gap = gap;
    rows.push_back({{"epsilon", e}, {"estimate", io::to_json(est)}, {"gap", gap}});
  }
  require(reference_gap.has_value(), ErrorKind::invalid_argument, "reference_epsilon must be one of epsilons");
  bool nonincreasing = true;
  for (std::size_t k = 1; k < gaps.size(); ++k) nonincreasing = nonincreasing && gaps[k] <= gaps[k - 1];
  const bool within = *reference_gap <= tolerance * std::abs(var.objective);
  json rel = var.objective != 0.0 ? json(*reference_gap / std::abs(var.objective)) : json(nullptr);
  return {{"variational_m1", var.objective},
          {"variational_clipped", var.clipped},
          {"variational_grid_objective", var.grid_objective},
          {"sweep", rows},
          {"reference_relative_gap", rel},
          {"within_tolerance", within},
          {"gap_nonincreasing", nonincreasing},
          {"converged", var.converged},
          {"verdict", within && nonincreasing}};
}

json gibbs_localization(const json& p, const Context& ctx) {
  const double t = positive(p, "t");
  const double dt = positive(p, "dt");
  const std::vector<GibbsModel> models{GibbsModel::coulomb(t, positive(p, "delta"), dt),
                                       GibbsModel::dirac_mollified(t, MollifierSpec::gaussian(positive(p, "eps")), dt)};
  LocalizationParams lp;
  lp.decomposition = {positive(p, "window_radius"), positive(p, "mass_floor"), positive(p, "separation_factor")};
  lp.match_radius = positive(p, "match_radius");
  lp.dominance = positive(p, "dominance");
  const double z_threshold = param<double>(p, "z_threshold");
  const auto summaries = gibbs_reweighted_decomposition(models, {count(p, "samples"), ctx.seed, ctx.threads}, lp);
  json rows = json::array();
  bool all = true;
  for (const auto& s : summaries) {
    rows.push_back(io::to_json(s));
    all = all && s.z_score > z_threshold;
  }
  return {{"models", rows}, {"verdict", all}};
}

json footnote_convergence(const json& p, const Context& ctx) {
  const auto ns = param<std::vector<double>>(p, "n");
  require(ns.size() >= 2, ErrorKind::invalid_argument, "n needs at least two values");
  const DecompositionParams dp{positive(p, "window_radius"), positive(p, "mass_floor"), positive(p, "separation_factor")};
  const double D = positive(p, "match_radius");
  const std::size_t truncation = count(p, "truncation");
  const auto family = default_family();
  const auto samples = FootnoteSamples::draw(3, count(p, "per_component"), ctx.seed);
  const auto limit = footnote_limit(samples);
  const auto limit_profile = lambda_profile(family, limit, truncation, ctx.threads);

  json rows = json::array();
  std::vector<double> values;
  for (double n : ns) {
    const auto m = footnote_measures(samples, n);
    const auto xi = match_pairs(decompose(m.mu, dp), decompose(m.nu, dp), D);
    const auto prof = lambda_profile(family, xi, truncation, ctx.threads);
    const auto d = metric_from_profiles(prof, limit_profile, family, truncation);
    values.push_back(d.value);
    rows.push_back({{"n", n}, {"metric", d.value}, {"tail_bound", d.tail_bound}, {"pairs", xi.pairs.size()},
                    {"alpha_mass", xi.alpha_mass()}, {"beta_mass", xi.beta_mass()}});
  }
  bool decreasing = true;
  for (std::size_t k = 1; k < values.size(); ++k) decreasing = decreasing && values[k] < values[k - 1];
  return {{"sequence", rows}, {"verdict", decreasing}};
}

using Pipeline = json (*)(const json&, const Context&);

const std::map<std::string, std::pair<Pipeline, json>>& registry() {
  static const std::map<std::string, std::pair<Pipeline, json>> r{
      {"intermittency-ordering",
       {intermittency_ordering,
        {{"phi_eps", 1.0}, {"amplitude", 1.0}, {"grid_h", 0.05}, {"grid_n", 400}, {"max_p", 3},
         {"min_gap", 1e-4}, {"residual_tol", 1e-6}}}},
      {"pam-mc-vs-variational",
       {pam_mc_vs_variational,
        {{"epsilons", {0.5, 0.4, 0.3}}, {"samples", 10000}, {"dt", 0.0}, {"phi_eps", 1.0},
         {"reference_epsilon", 0.4}, {"relative_tolerance", 0.3}}}},
      {"gibbs-localization",
       {gibbs_localization,
        {{"samples", 10000}, {"t", 5.0}, {"dt", 0.005}, {"delta", 0.5}, {"eps", 0.5}, {"window_radius", 1.5},
         {"mass_floor", 0.05}, {"separation_factor", 4.0}, {"match_radius", 2.5}, {"dominance", 0.9},
         {"z_threshold", 3.0}}}},
      {"footnote-convergence",
       {footnote_convergence,
        {{"n", {10, 20, 40, 80}}, {"per_component", 2000}, {"window_radius", 2.0}, {"mass_floor", 0.05},
         {"separation_factor", 4.0}, {"match_radius", 2.5}, {"truncation", 18}}}},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& names() {
  static const std::vector<std::string> n = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : registry()) v.push_back(k);
    return v;
  }();
  return n;
}

json default_params(const std::string& name) {
  const auto it = registry().find(name);
  require(it != registry().end(), ErrorKind::invalid_argument, "unknown experiment '" + name + "'");
  return it->second.second;
}

json run(const std::string& name, const json& overrides, const Context& ctx) {
  const json p = merged(name, overrides);
  json out = registry().at(name).first(p, ctx);
  out["experiment"] = name;
  out["params"] = p;
  out["seed"] = ctx.seed;
  return out;
}

RadialKernel pam_kernel(double phi_eps, double amplitude) {
  const auto V = RadialKernel::mollified_delta(MollifierSpec::gaussian(phi_eps));
  if (amplitude == 1.0) return V;
  const double dr = phi_eps / 100.0;
  const double R = V.support_radius();
  std::vector<double> tab;
  for (int k = 0; k * dr <= R + 1e-9 * R; ++k) tab.push_back(amplitude * V(k * dr));
  return RadialKernel::tabulated(dr, std::move(tab));
}

}  // namespace pairorbit::experiments
