#include "pairorbit/fixtures.hpp"

#include <random>

#include "pairorbit/error.hpp"

namespace pairorbit {

FootnoteSamples FootnoteSamples::draw(int dim, std::size_t per_component, std::uint64_t seed) {
  require(dim > 0 && per_component > 0, ErrorKind::invalid_argument, "fixture needs dim > 0 and atoms > 0");
  FootnoteSamples s;
  s.dim = dim;
  s.per_component = per_component;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  for (auto& z : s.z) {
    z.resize(per_component * dim);
    for (double& v : z) v = n01(rng);
  }
  return s;
}

namespace {

void append(AtomicMeasure& m, const std::vector<double>& z, double shift_e1, double scale, double weight) {
  const int d = m.dim();
  std::vector<double> x(d);
  for (std::size_t i = 0; i < z.size() / d; ++i) {
    for (int k = 0; k < d; ++k) x[k] = scale * z[i * d + k];
    x[0] += shift_e1;
    m.push_back(x, weight);
  }
}

}  // namespace

MeasurePair footnote_measures(const FootnoteSamples& s, double n) {
  const double w = 1.0 / (3.0 * static_cast<double>(s.per_component));
  MeasurePair out{AtomicMeasure(s.dim), AtomicMeasure(s.dim)};
  append(out.mu, s.z[0], 0.0, 1.0, w);
  append(out.mu, s.z[1], n, 1.0, w);
  append(out.mu, s.z[2], 0.0, n, w);
  append(out.nu, s.z[3], n * n, 1.0, w);
  append(out.nu, s.z[4], n + 1.0, 1.0, w);
  append(out.nu, s.z[5], 0.0, n, w);
  return out;
}

OrbitCollection footnote_limit(const FootnoteSamples& s) {
  const double w = 1.0 / (3.0 * static_cast<double>(s.per_component));
  OrbitPair pair{AtomicMeasure(s.dim), AtomicMeasure(s.dim), std::vector<double>(s.dim, 0.0)};
  append(pair.alpha, s.z[1], 0.0, 1.0, w);
  append(pair.beta, s.z[4], 1.0, 1.0, w);
  pair.relative_shift[0] = 1.0;
  OrbitCollection xi;
  xi.dim = s.dim;
  xi.pairs.push_back(std::move(pair));
  return xi;
}

}  // namespace pairorbit
