#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pairorbit/measures.hpp"

namespace pairorbit {

struct ConcentrationCurve {
  std::vector<double> radii;
  std::vector<double> values;  // nondecreasing, each in [0, total mass]
};

/// Q(r) = max over atom locations x of the mass in the closed ball B_r(x).
ConcentrationCurve concentration(const AtomicMeasure& measure, std::span<const double> radii);

struct Component {
  std::vector<double> center;
  double mass = 0.0;
  AtomicMeasure atoms;               // in original coordinates
  std::vector<std::size_t> indices;  // atom indices into the input measure, ascending
};

struct DecompositionParams {
  double window_radius = 0.0;  // r; 0 selects default_window_radius
  double mass_floor = 0.05;    // tau
  double separation_factor = 4.0;

  double peel_radius() const { return separation_factor * window_radius; }
  void validate() const;
};

struct Decomposition {
  int dim = 0;
  std::vector<Component> components;  // decreasing mass
  double dust_mass = 0.0;
  double input_mass = 0.0;
  DecompositionParams params;
};

/// 3 x median nearest-neighbour distance (positive distances only when atoms coincide).
double default_window_radius(const AtomicMeasure& measure);

/// Greedy peeling: take the heaviest r-ball (lowest atom index on ties); if its
/// mass reaches tau, remove every atom within s*r of its center as a component
/// and repeat; the remainder is dust.
Decomposition decompose(const AtomicMeasure& measure, DecompositionParams params);

struct OrbitPair {
  AtomicMeasure alpha;  // barycenter at the origin
  AtomicMeasure beta;   // in the same frame, so it sits near relative_shift
  std::vector<double> relative_shift;
};

struct OrbitCollection {
  int dim = 0;
  std::vector<OrbitPair> pairs;

  double alpha_mass() const;
  double beta_mass() const;
};

/// Pairs each component of `da` with the component of `db` whose center lies
/// within D. Component centers inside each decomposition must be more than 2D apart.
OrbitCollection match_pairs(const Decomposition& da, const Decomposition& db, double match_radius);

/// Diagonally invariant Gaussian test function. Level 1:
///   f(x, y) = exp(-|x - y|^2 / 2 s_xy^2).
/// Level 2:
///   f(x1, y1, x2, y2) = exp(-|x1 - y1|^2 / 2 s_xy^2 - |x1 - x2|^2 / 2 s_xx^2 - |y1 - y2|^2 / 2 s_yy^2).
/// Both have sup norm 1.
struct TestFunction {
  int level = 1;
  double s_xy = 1.0;
  double s_xx = 1.0;
  double s_yy = 1.0;
  double weight = 0.25;  // 2^{-r} / (1 + sup norm)

  double sup_norm() const { return 1.0; }
};

using TestFunctionFamily = std::vector<TestFunction>;

inline constexpr double kScaleLadder[] = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};

/// Six level-1 members over the scale ladder, then twelve level-2 members
/// (s_xy over the ladder, s_xx = s_yy in {1, 4}); weights 2^{-r}/2 for r = 1, 2, ...
TestFunctionFamily default_family();

double lambda_functional(const TestFunction& f, const OrbitCollection& xi);

/// Lambda(f_r, xi) for the first `count` members, computed with `threads` workers.
std::vector<double> lambda_profile(const TestFunctionFamily& family, const OrbitCollection& xi, std::size_t count,
                                   unsigned threads = 1);

struct MetricValue {
  double value = 0.0;
  double tail_bound = 0.0;  // bounds the omitted members r > truncation
  std::size_t truncation = 0;
};

MetricValue metric_d(const OrbitCollection& xi1, const OrbitCollection& xi2, const TestFunctionFamily& family,
                     std::size_t truncation, unsigned threads = 1);
/// Same metric from precomputed lambda profiles.
MetricValue metric_from_profiles(std::span<const double> lambda1, std::span<const double> lambda2,
                                 const TestFunctionFamily& family, std::size_t truncation);

/// Sum over pairs of pairwise_energy(alpha, beta).
double h_energy(const OrbitCollection& xi, const RadialKernel& kernel);

}  // namespace pairorbit
