#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pairorbit/compactify.hpp"
#include "pairorbit/measures.hpp"

namespace pairorbit {

/// Independent Gaussian stream identified by (seed, replica).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t replica);

  double gaussian() { return normal_(engine_); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t replica() const noexcept { return replica_; }

 private:
  std::uint64_t seed_;
  std::uint64_t replica_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

struct BrownianPath {
  int dim = 3;
  double dt = 0.0;       // effective step, horizon / steps
  double horizon = 0.0;
  std::vector<double> positions;  // (steps + 1) x dim, row-major

  std::size_t steps() const { return positions.size() / static_cast<std::size_t>(dim) - 1; }
  std::span<const double> position(std::size_t k) const {
    return {positions.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  BrownianPath shifted(std::span<const double> z) const;
};

/// ceil(t / dt) with a 1e-9 guard, so t = k dt gives exactly k steps.
std::size_t step_count(double horizon, double dt);

BrownianPath sample_path(int dim, double horizon, double dt, std::span<const double> start, RngStream& rng);
/// Path with prescribed increments (steps x dim); for tests and rescaling.
BrownianPath path_from_increments(int dim, double horizon, std::span<const double> start,
                                  std::span<const double> increments);

/// Trapezoidal occupation measure: weights dt/t, halved at both ends.
AtomicMeasure occupation(const BrownianPath& path);

/// t^2 * pairwise_energy(L1, L2, V_eps).
double intersection_mass(const BrownianPath& p1, const BrownianPath& p2, const MollifierSpec& spec);
/// t^2 * h^3 * sum of the product of both mollified occupation densities on a grid.
double intersection_mass_grid(const BrownianPath& p1, const BrownianPath& p2, const MollifierSpec& spec,
                              double spacing);

enum class ModelKind { zero, dirac_mollified, coulomb, pam };

const char* to_string(ModelKind kind);

struct GibbsModel {
  ModelKind kind = ModelKind::zero;
  double horizon = 1.0;
  double dt = 1e-3;
  int n_paths = 2;
  RadialKernel kernel = RadialKernel::zero();
  double epsilon = 0.0;  // mollifier width (dirac) or PAM scale
  double delta = 0.0;
  MollifierSpec mollifier{};

  /// Exponent t^{-1} * l_{eps,t} = t * H(L1, L2; V_eps).
  static GibbsModel dirac_mollified(double t, const MollifierSpec& spec, double dt = 0.0);
  /// Exponent t * H(L1, L2; V_delta).
  static GibbsModel coulomb(double t, double delta, double dt = 0.0);
  /// p paths on horizon tau = eps^{-2} with exponent (tau/2) sum_{i,j} H(L^i, L^j; V), V = phi * phi.
  /// `dt` is in unit-horizon time and is rescaled by tau internally.
  static GibbsModel pam(int p, double epsilon, const MollifierSpec& phi, double dt = 0.0);
  static GibbsModel zero(double t, int n_paths = 2, double dt = 0.0);

  /// Log partition functions are divided by this (t, or tau for PAM).
  double normalization() const { return horizon; }
  std::string describe() const;
};

/// Default step min(eps^2 / 10, t / 1000).
double default_dt(double epsilon, double horizon);

/// Log-weight (the exponent) of the model for the given paths.
double gibbs_weight(const GibbsModel& model, std::span<const BrownianPath> paths);

/// PAM exponent on unit-horizon paths: (eps/2) sum_{i,j} H(L^i, L^j; V_eps) with
/// V_eps = phi_eps * phi_eps. Equals the rescaled form under Brownian scaling.
double pam_unit_horizon_weight(std::span<const BrownianPath> paths, double epsilon, const MollifierSpec& phi);

struct MCEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool log_domain = true;
  double ess = 0.0;              // (sum w)^2 / sum w^2
  double mean_log_weight = 0.0;  // divided by the normalization, like value
};

struct MonteCarloConfig {
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// (1/t) log of the sample mean of exp(log-weight), with delta-method error.
MCEstimate log_mean_exp_estimate(std::span<const double> log_weights, double normalization, std::uint64_t seed);

/// Samples model.n_paths independent paths from the origin per replica.
MCEstimate estimate_log_partition(const GibbsModel& model, const MonteCarloConfig& mc);

inline constexpr std::size_t kDefaultStepBudget = 20000;

struct PamMomentConfig {
  int p = 1;
  double epsilon = 0.5;
  MollifierSpec phi = MollifierSpec::gaussian(1.0);
  double dt = 0.0;  // unit-horizon step; 0 selects default_dt(eps, 1)
  std::size_t step_budget = kDefaultStepBudget;
  bool zero_kernel = false;
};

/// eps^2 log m_p(eps, 0). The first p paths of each replica stream are the
/// same for every p, so estimates are monotone in p for a fixed seed.
MCEstimate estimate_pam_moment(const PamMomentConfig& cfg, const MonteCarloConfig& mc);

struct LocalizationParams {
  DecompositionParams decomposition{1.5, 0.05, 4.0};
  double match_radius = 2.5;
  double dominance = 0.9;
};

struct LocalizationSummary {
  std::string model;
  double weighted_frequency = 0.0;
  double unweighted_frequency = 0.0;
  double difference = 0.0;
  double std_error = 0.0;  // of the difference, paired delta method
  double z_score = 0.0;
  double ess = 0.0;
  std::size_t n_samples = 0;
  std::size_t events = 0;
};

/// True if xi has exactly one pair holding at least `dominance` of both masses.
bool single_dominant_pair(const OrbitCollection& xi, double mass_a, double mass_b, double dominance);

/// Shares path samples across models; all models must have the same horizon, dt and path count 2.
std::vector<LocalizationSummary> gibbs_reweighted_decomposition(std::span<const GibbsModel> models,
                                                                const MonteCarloConfig& mc,
                                                                const LocalizationParams& params);

}  // namespace pairorbit
