#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pairorbit/measures.hpp"

namespace pairorbit {

/// Radial profile u_i = psi(r_i) on r_i = i h, i = 0..N, in R^3. u_N = 0 is the
/// Dirichlet edge; u_0 carries no mass and the solvers keep u_0 = u_1.
class RadialProfile {
 public:
  RadialProfile(double h, std::vector<double> values);

  static RadialProfile gaussian(double h, std::size_t n, double sigma);  // psi^2 = N(0, sigma^2 I), unit mass
  static RadialProfile from_function(double h, std::size_t n, const auto& f) {
    std::vector<double> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i) v[i] = f(h * static_cast<double>(i));
    return RadialProfile(h, std::move(v));
  }

  double h() const noexcept { return h_; }
  std::size_t n() const noexcept { return values_.size() - 1; }
  double radius() const noexcept { return h_ * static_cast<double>(n()); }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// 4 pi sum u_i^2 r_i^2 h.
  double mass() const;
  RadialProfile normalized(double target_mass = 1.0) const;
  RadialProfile scaled(double factor) const;
  /// r -> amplitude * u(lambda r), Catmull-Rom interpolation, zero beyond the edge.
  RadialProfile dilated(double lambda, double amplitude) const;
  /// Catmull-Rom value at radius r (even extension at the origin).
  double at(double r) const;

 private:
  double h_;
  std::vector<double> values_;
};

/// Profiles with mass below this are rejected.
inline constexpr double kMinProfileMass = 1e-12;

enum class InteractionKind { quartic, coulomb, kernel };

struct Interaction {
  InteractionKind kind = InteractionKind::quartic;
  std::optional<RadialKernel> kernel;

  static Interaction quartic() { return {InteractionKind::quartic, std::nullopt}; }
  static Interaction coulomb() { return {InteractionKind::coulomb, std::nullopt}; }
  static Interaction radial(RadialKernel V) { return {InteractionKind::kernel, std::move(V)}; }
  std::string describe() const;
};

struct EnergyTerms {
  double interaction = 0.0;  // int psi^4, or int int psi^2 psi^2 K
  double kinetic = 0.0;      // ||grad psi||^2
};

EnergyTerms energy_terms(const RadialProfile& psi, const Interaction& interaction);

/// int int psi^2(x) phi^2(y) K(x - y) dx dy for coulomb or kernel interactions.
double cross_interaction(const RadialProfile& psi, const RadialProfile& phi, const Interaction& interaction);

enum class FunctionalKind { chi, pekar, pam };

const char* to_string(FunctionalKind kind);
FunctionalKind functional_kind_from_string(const std::string& name);

struct Functional {
  FunctionalKind kind = FunctionalKind::pekar;
  int p = 1;
  RadialKernel V = RadialKernel::zero();  // pam only

  static Functional chi() { return {FunctionalKind::chi, 1, RadialKernel::zero()}; }
  static Functional pekar() { return {FunctionalKind::pekar, 1, RadialKernel::zero()}; }
  /// m_p = 2^{p-1} sup {2^{p-2} int int V psi^2 psi^2 - ||grad psi||^2 / 2}.
  static Functional pam(int p, RadialKernel V) { return {FunctionalKind::pam, p, std::move(V)}; }
  /// Default PAM kernel V = phi * phi, phi the truncated Gaussian of width 1.
  static RadialKernel default_pam_kernel();

  Interaction interaction() const;
  /// Objective = interaction_weight * I - kinetic_weight * K.
  double interaction_weight() const;
  double kinetic_weight() const;
  std::string describe() const;
};

struct SolverConfig {
  double h = 0.015;
  std::size_t n = 2000;
  std::size_t max_iterations = 5000;
  double objective_tol = 1e-9;  // relative change between accepted iterates
  double residual_tol = 1e-6;
  double mass = 1.0;
  double initial_step = 1.0;
  double min_step = 1e-12;

  static SolverConfig defaults(FunctionalKind kind);
  void validate() const;
};

struct VariationalResult {
  double objective = 0.0;       // reported value; pam is clipped below at 0
  double grid_objective = 0.0;  // value of the returned profile on the grid
  EnergyTerms terms;
  RadialProfile profile{1.0, {0.0, 0.0, 0.0}};
  double residual = 0.0;  // || g - lambda psi ||, g the L^2 gradient
  double multiplier = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool regularized = false;  // chi: value depends on the grid
  bool clipped = false;      // pam: grid value < 0, the sup is approached by spreading
  std::vector<double> history;  // objective of every accepted iterate, starting value first
  SolverConfig config;
  std::string functional;
};

/// Preconditioned projected gradient ascent on {mass = config.mass} with monotone
/// backtracking. The default start is psi proportional to exp(-r^2 / 2).
VariationalResult maximize(const Functional& functional, const SolverConfig& config,
                           const std::optional<RadialProfile>& initial = std::nullopt);

/// Grid objective and its Euclidean gradient in the nodal values (entries 0 and N
/// are zero; u_0 is treated as a copy of u_1). Exposed for gradient checks.
struct ObjectiveGradient {
  double value = 0.0;
  std::vector<double> gradient;
};
ObjectiveGradient objective_and_gradient(const Functional& functional, const RadialProfile& psi);

struct ScalingValues {
  double m1 = 0.0, m2 = 0.0;
  double e1 = 0.0, e2 = 0.0, e12 = 0.0;  // E(m1), E(m2), E(m1 + m2)
  bool superadditive = false;            // exact rational comparison
};

/// E(m) = m^5 A - m^3 B, compared exactly in rational arithmetic on the given doubles.
ScalingValues chi_scaling_exact(double m1, double m2, double A, double B);

struct ChiScalingReport {
  double A = 0.0;  // int psi^4
  double B = 0.0;  // ||grad psi||^2
  ScalingValues exact;
  double grid_e1 = 0.0, grid_e2 = 0.0, grid_e12 = 0.0;  // psi_m = m^2 psi(m x) resampled on the grid
  double max_grid_relative_error = 0.0;
  bool grid_within_tolerance = false;  // every relative error <= 1%
};

ChiScalingReport chi_scaling_check(const RadialProfile& psi, double m1, double m2);

struct ProfilePair {
  RadialProfile psi;
  RadialProfile phi;
};

struct RateEvaluation {
  double value = 0.0;                     // 1/2 sum_j (||grad psi_j||^2 + ||grad phi_j||^2)
  std::vector<double> pair_values;
  std::vector<double> mollified_overlaps;  // int int V_eps psi_j^2 phi_j^2, if requested
};

/// Scores the given factorized collection; both mass sums must be <= 1.
RateEvaluation evaluate_rate(const std::vector<ProfilePair>& xi,
                             const std::optional<MollifierSpec>& mollifier = std::nullopt);

struct ProductReductionSide {
  std::string kernel;
  double lhs = 0.0;  // 2 int int K psi^2 phi^2
  double rhs = 0.0;  // int int K psi^2 psi^2 + int int K phi^2 phi^2
  bool holds = false;
};

inline constexpr double kProductReductionSlack = 1e-10;

/// Checks the positive-definiteness inequality for coulomb and for `V`.
std::vector<ProductReductionSide> pekar_product_reduction_check(const RadialProfile& psi, const RadialProfile& phi,
                                                                const RadialKernel& V);

}  // namespace pairorbit
