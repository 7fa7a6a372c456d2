#pragma once

#include <cstdint>
#include <vector>

#include "pairorbit/compactify.hpp"
#include "pairorbit/measures.hpp"

namespace pairorbit {

/// Standard normal base samples for the three-Gaussian escape sequences. The
/// same draws are reused for every n (common random numbers), so the sequence
/// in n is deterministic and monotone contamination is not masked by resampling.
struct FootnoteSamples {
  int dim = 3;
  std::size_t per_component = 0;
  std::vector<double> z[6];  // row-major, per_component x dim each

  static FootnoteSamples draw(int dim, std::size_t per_component, std::uint64_t seed);
};

struct MeasurePair {
  AtomicMeasure mu;
  AtomicMeasure nu;
};

/// mu_n = 1/3 N(0, I) + 1/3 N(n e1, I) + 1/3 N(0, n^2 I),
/// nu_n = 1/3 N(n^2 e1, I) + 1/3 N((n + 1) e1, I) + 1/3 N(0, n^2 I).
MeasurePair footnote_measures(const FootnoteSamples& s, double n);

/// The surviving orbit: alpha = 1/3 N(0, I) and beta = 1/3 N(e1, I), built from
/// the same draws that place the matched components of footnote_measures.
OrbitCollection footnote_limit(const FootnoteSamples& s);

}  // namespace pairorbit
