#include "pairorbit/compactify.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <limits>

#include "pairorbit/error.hpp"
#include "pairorbit/parallel.hpp"

namespace pairorbit {

namespace {

// Structure-of-arrays copy of the coordinates; inner loops run over one axis at a time.
struct Soa {
  int dim = 0;
  std::size_t n = 0;
  std::vector<std::vector<double>> axes;
  std::vector<double> w;

  explicit Soa(const AtomicMeasure& m) : dim(m.dim()), n(m.size()), axes(m.dim()), w(m.weights()) {
    for (int k = 0; k < dim; ++k) {
      axes[k].resize(n);
      for (std::size_t i = 0; i < n; ++i) axes[k][i] = m.coords()[i * dim + k];
    }
  }

  void squared_distances(std::span<const double> p, std::vector<double>& out) const {
    out.assign(n, 0.0);
    double* o = out.data();
    for (int k = 0; k < dim; ++k) {
      const double* a = axes[k].data();
      const double c = p[k];
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) {
        const double dx = a[j] - c;
        o[j] += dx * dx;
      }
    }
  }

  double ball_mass(const std::vector<double>& d2, double r2) const {
    const double* o = d2.data();
    const double* ww = w.data();
    double m = 0.0;
#pragma omp simd reduction(+ : m)
    for (std::size_t j = 0; j < n; ++j) m += o[j] <= r2 ? ww[j] : 0.0;
    return m;
  }
};

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

constexpr double kExpCutoff = 40.0;

inline double gauss_factor(double d2, double inv_two_s2) {
  const double a = d2 * inv_two_s2;
  return a > kExpCutoff ? 0.0 : std::exp(-a);
}

// sum_i w_i sum_j v_j exp(-|x_i - y_j|^2 inv) f_i g_j; f, g may be null (treated as 1).
double weighted_gauss_sum(const AtomicMeasure& x, const AtomicMeasure& y, double inv, const double* fx,
                          const double* gy) {
  const int d = x.dim();
  const double* xs = x.coords().data();
  const double* ys = y.coords().data();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      double d2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double t = xs[i * d + k] - ys[j * d + k];
        d2 += t * t;
      }
      const double e = gauss_factor(d2, inv);
      if (e != 0.0) row += y.weight(j) * e * (gy ? gy[j] : 1.0);
    }
    total += x.weight(i) * row * (fx ? fx[i] : 1.0);
  }
  return total;
}

// g_i = sum_j w_j exp(-|x_i - x_j|^2 inv), using symmetry of the kernel matrix.
std::vector<double> self_smoothing(const AtomicMeasure& x, double inv) {
  const int d = x.dim();
  const std::size_t n = x.size();
  const double* xs = x.coords().data();
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] += x.weight(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double t = xs[i * d + k] - xs[j * d + k];
        d2 += t * t;
      }
      const double e = gauss_factor(d2, inv);
      if (e != 0.0) {
        g[i] += x.weight(j) * e;
        g[j] += x.weight(i) * e;
      }
    }
  }
  return g;
}

}  // namespace

ConcentrationCurve concentration(const AtomicMeasure& measure, std::span<const double> radii) {
  require(!measure.empty(), ErrorKind::invalid_argument, "concentration of an empty measure");
  require(!radii.empty(), ErrorKind::invalid_argument, "concentration needs at least one radius");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    require(radii[k] > 0.0 && std::isfinite(radii[k]), ErrorKind::invalid_argument, "radii must be positive");
    require(k == 0 || radii[k] > radii[k - 1], ErrorKind::invalid_argument, "radii must be increasing");
  }
  const Soa soa(measure);
  ConcentrationCurve curve;
  curve.radii.assign(radii.begin(), radii.end());
  curve.values.assign(radii.size(), 0.0);
  std::vector<double> d2;
  for (std::size_t i = 0; i < measure.size(); ++i) {
    soa.squared_distances(measure.location(i), d2);
    for (std::size_t k = 0; k < radii.size(); ++k)
      curve.values[k] = std::max(curve.values[k], soa.ball_mass(d2, radii[k] * radii[k]));
  }
  return curve;
}

void DecompositionParams::validate() const {
  require(std::isfinite(window_radius) && window_radius > 0.0, ErrorKind::invalid_argument,
          "window radius must be > 0");
  require(mass_floor > 0.0 && mass_floor < 1.0, ErrorKind::invalid_argument, "mass floor must lie in (0, 1)");
  require(std::isfinite(separation_factor) && separation_factor >= 4.0, ErrorKind::invalid_argument,
          "separation factor must be >= 4");
}

double default_window_radius(const AtomicMeasure& measure) {
  require(measure.size() >= 2, ErrorKind::invalid_argument, "default window radius needs at least two atoms");
  const Soa soa(measure);
  std::vector<double> nn(measure.size());
  std::vector<double> d2;
  for (std::size_t i = 0; i < measure.size(); ++i) {
    soa.squared_distances(measure.location(i), d2);
    d2[i] = std::numeric_limits<double>::infinity();
    nn[i] = std::sqrt(*std::min_element(d2.begin(), d2.end()));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  double med = median(nn);
  if (med == 0.0) {
    std::vector<double> positive;
    for (double v : nn)
      if (v > 0.0) positive.push_back(v);
    if (positive.empty()) return 1.0;  // all atoms coincide; any radius captures them
    med = median(std::move(positive));
  }
  return 3.0 * med;
}

namespace {

// Uniform cell index over the atoms (first three axes; higher dimensions fall
// back to a single cell). Keys are relative to the coordinate minimum, so a
// common translation of all atoms leaves the visiting order unchanged.
class CellIndex {
 public:
  CellIndex(const AtomicMeasure& m, double cell) : dim_(m.dim()), cell_(cell) {
    used_ = std::min(dim_, 3);
    if (dim_ > 3) used_ = 0;
    for (int k = 0; k < used_; ++k) {
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m.size(); ++i) lo = std::min(lo, m.location(i)[k]);
      origin_[k] = lo;
    }
    std::vector<std::pair<Key, std::size_t>> tagged(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) tagged[i] = {key_of(m.location(i)), i};
    std::sort(tagged.begin(), tagged.end());
    sorted_.reserve(m.coords().size());
    for (std::size_t i = 0; i < tagged.size(); ++i) {
      if (i == 0 || tagged[i].first != tagged[i - 1].first) {
        keys_.push_back(tagged[i].first);
        starts_.push_back(i);
      }
      order_.push_back(tagged[i].second);
      auto x = m.location(tagged[i].second);
      sorted_.insert(sorted_.end(), x.begin(), x.end());
    }
    starts_.push_back(tagged.size());
  }

  /// Calls f(j) for every atom with |x_j - p| <= radius.
  template <typename F>
  void for_each_within(std::span<const double> p, double radius, F&& f) const {
    const double r2 = radius * radius;
    const Key base = key_of(p);
    const auto span = static_cast<std::int64_t>(std::ceil(radius / cell_));
    Key lo = base, hi = base;
    for (int k = 0; k < used_; ++k) {
      lo[k] -= span;
      hi[k] += span;
    }
    Key key = lo;
    const double* xs = sorted_.data();
    for (;;) {
      auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
      if (it != keys_.end() && *it == key) {
        const auto slot = static_cast<std::size_t>(it - keys_.begin());
        const std::size_t q1 = starts_[slot + 1];
        if (dim_ == 3) {
          const double px = p[0], py = p[1], pz = p[2];
          for (std::size_t q = starts_[slot]; q < q1; ++q) {
            const double* x = xs + 3 * q;
            const double dx = x[0] - px, dy = x[1] - py, dz = x[2] - pz;
            if (dx * dx + dy * dy + dz * dz <= r2) f(order_[q]);
          }
        } else {
          for (std::size_t q = starts_[slot]; q < q1; ++q) {
            double d2 = 0.0;
            for (int k = 0; k < dim_; ++k) {
              const double t = xs[q * dim_ + k] - p[k];
              d2 += t * t;
            }
            if (d2 <= r2) f(order_[q]);
          }
        }
      }
      int k = used_ - 1;
      for (; k >= 0; --k) {
        if (++key[k] <= hi[k]) break;
        key[k] = lo[k];
      }
      if (k < 0) break;
    }
  }

 private:
  using Key = std::array<std::int64_t, 3>;

  Key key_of(std::span<const double> x) const {
    Key key{0, 0, 0};
    for (int k = 0; k < used_; ++k) key[k] = static_cast<std::int64_t>(std::floor((x[k] - origin_[k]) / cell_));
    return key;
  }

  int dim_;
  int used_ = 0;
  double cell_;
  double origin_[3] = {0.0, 0.0, 0.0};
  std::vector<Key> keys_;
  std::vector<std::size_t> starts_;
  std::vector<std::size_t> order_;
  std::vector<double> sorted_;  // coordinates in cell order
};

}  // namespace

Decomposition decompose(const AtomicMeasure& measure, DecompositionParams params) {
  require(!measure.empty(), ErrorKind::invalid_argument, "decompose needs a nonempty measure");
  if (params.window_radius == 0.0) params.window_radius = default_window_radius(measure);
  params.validate();

  const std::size_t n = measure.size();
  const double r = params.window_radius;
  const CellIndex cells(measure, r);
  const auto& w = measure.weights();

  // Ball masses around every atom over the atoms still alive.
  std::vector<double> ball(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    cells.for_each_within(measure.location(i), r, [&](std::size_t j) { m += w[j]; });
    ball[i] = m;
  }
  std::vector<char> alive(n, 1);

  Decomposition out;
  out.dim = measure.dim();
  out.params = params;
  out.input_mass = measure.total_mass();
  for (;;) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (alive[i] && (best == n || ball[i] > ball[best])) best = i;
    if (best == n || ball[best] < params.mass_floor) break;

    Component comp;
    auto c = measure.location(best);
    comp.center.assign(c.begin(), c.end());
    cells.for_each_within(c, params.peel_radius(), [&](std::size_t j) {
      if (alive[j]) comp.indices.push_back(j);
    });
    std::sort(comp.indices.begin(), comp.indices.end());
    for (std::size_t j : comp.indices) {
      alive[j] = 0;
      comp.mass += w[j];
    }
    // Only balls reaching into the peeled region change.
    cells.for_each_within(c, params.peel_radius() + r, [&](std::size_t i) {
      if (!alive[i]) return;
      double m = 0.0;
      cells.for_each_within(measure.location(i), r, [&](std::size_t j) {
        if (alive[j]) m += w[j];
      });
      ball[i] = m;
    });
    comp.atoms = measure.subset(comp.indices);
    out.components.push_back(std::move(comp));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) out.dust_mass += w[i];
  std::stable_sort(out.components.begin(), out.components.end(),
                   [](const Component& a, const Component& b) { return a.mass > b.mass; });
  return out;
}

double OrbitCollection::alpha_mass() const {
  double s = 0.0;
  for (const auto& p : pairs) s += p.alpha.total_mass();
  return s;
}

double OrbitCollection::beta_mass() const {
  double s = 0.0;
  for (const auto& p : pairs) s += p.beta.total_mass();
  return s;
}

namespace {

void require_separated(const Decomposition& d, double match_radius, const char* which) {
  const double min2 = 4.0 * match_radius * match_radius;
  for (std::size_t i = 0; i < d.components.size(); ++i)
    for (std::size_t j = i + 1; j < d.components.size(); ++j)
      require(squared_distance(d.components[i].center, d.components[j].center) > min2, ErrorKind::separation,
              std::string("components of the ") + which + " decomposition are not separated by more than 2D");
}

// Barycenter of the component atoms relative to its window center.
std::vector<double> local_barycenter(const Component& c) {
  const int d = c.atoms.dim();
  std::vector<double> off(d, 0.0);
  if (c.mass <= 0.0) return off;
  for (std::size_t i = 0; i < c.atoms.size(); ++i) {
    auto x = c.atoms.location(i);
    for (int k = 0; k < d; ++k) off[k] += c.atoms.weight(i) * (x[k] - c.center[k]);
  }
  for (double& v : off) v /= c.mass;
  return off;
}

AtomicMeasure recentered(const AtomicMeasure& m, const std::vector<double>& center, const std::vector<double>& off) {
  const int d = m.dim();
  std::vector<double> coords(m.coords());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (int k = 0; k < d; ++k) coords[i * d + k] = (coords[i * d + k] - center[k]) - off[k];
  return AtomicMeasure(d, std::move(coords), m.weights());
}

}  // namespace

OrbitCollection match_pairs(const Decomposition& da, const Decomposition& db, double match_radius) {
  require(std::isfinite(match_radius) && match_radius > 0.0, ErrorKind::invalid_argument,
          "match radius must be > 0");
  require(da.dim == db.dim, ErrorKind::invalid_argument, "decompositions have different dimensions");
  require_separated(da, match_radius, "first");
  require_separated(db, match_radius, "second");
  OrbitCollection xi;
  xi.dim = da.dim;
  const double D2 = match_radius * match_radius;
  for (const auto& a : da.components) {
    std::size_t hit = db.components.size();
    for (std::size_t j = 0; j < db.components.size(); ++j) {
      if (squared_distance(a.center, db.components[j].center) <= D2) {
        require(hit == db.components.size(), ErrorKind::separation, "ambiguous match: two candidates within D");
        hit = j;
      }
    }
    if (hit == db.components.size()) continue;
    const auto& b = db.components[hit];
    // Barycentric offsets in each component's own frame; every coordinate is
    // formed from differences to a window center, so a common translation of
    // both inputs reproduces the pair bit for bit.
    const auto da_off = local_barycenter(a);
    const auto db_off = local_barycenter(b);
    OrbitPair pair;
    pair.alpha = recentered(a.atoms, a.center, da_off);
    pair.beta = recentered(b.atoms, a.center, da_off);
    pair.relative_shift.resize(da.dim);
    for (int k = 0; k < da.dim; ++k) pair.relative_shift[k] = (b.center[k] - a.center[k]) + (db_off[k] - da_off[k]);
    xi.pairs.push_back(std::move(pair));
  }
  return xi;
}

TestFunctionFamily default_family() {
  TestFunctionFamily family;
  double weight = 0.25;
  for (double s : kScaleLadder) {
    family.push_back({1, s, s, s, weight});
    weight *= 0.5;
  }
  for (double s : kScaleLadder)
    for (double self : {1.0, 4.0}) {
      family.push_back({2, s, self, self, weight});
      weight *= 0.5;
    }
  return family;
}

double lambda_functional(const TestFunction& f, const OrbitCollection& xi) {
  require(f.level == 1 || f.level == 2, ErrorKind::invalid_argument, "test function level must be 1 or 2");
  double total = 0.0;
  const double inv_xy = 1.0 / (2.0 * f.s_xy * f.s_xy);
  for (const auto& p : xi.pairs) {
    if (f.level == 1) {
      total += weighted_gauss_sum(p.alpha, p.beta, inv_xy, nullptr, nullptr);
    } else {
      const auto g = self_smoothing(p.alpha, 1.0 / (2.0 * f.s_xx * f.s_xx));
      const auto h = self_smoothing(p.beta, 1.0 / (2.0 * f.s_yy * f.s_yy));
      total += weighted_gauss_sum(p.alpha, p.beta, inv_xy, g.data(), h.data());
    }
  }
  return total;
}

std::vector<double> lambda_profile(const TestFunctionFamily& family, const OrbitCollection& xi, std::size_t count,
                                   unsigned threads) {
  require(count <= family.size(), ErrorKind::invalid_argument, "profile longer than the test-function family");
  std::vector<double> out(count, 0.0);
  parallel_for(count, threads, [&](std::size_t r) { out[r] = lambda_functional(family[r], xi); });
  return out;
}

MetricValue metric_from_profiles(std::span<const double> lambda1, std::span<const double> lambda2,
                                 const TestFunctionFamily& family, std::size_t truncation) {
  require(truncation >= 16, ErrorKind::invalid_argument, "metric truncation must keep at least 16 members");
  require(truncation <= family.size() && lambda1.size() >= truncation && lambda2.size() >= truncation,
          ErrorKind::invalid_argument, "metric truncation exceeds the available members");
  MetricValue m;
  m.truncation = truncation;
  for (std::size_t r = 0; r < truncation; ++r) m.value += family[r].weight * std::abs(lambda1[r] - lambda2[r]);
  m.tail_bound = 2.0 * std::ldexp(1.0, -static_cast<int>(truncation));
  return m;
}

MetricValue metric_d(const OrbitCollection& xi1, const OrbitCollection& xi2, const TestFunctionFamily& family,
                     std::size_t truncation, unsigned threads) {
  require(truncation >= 16, ErrorKind::invalid_argument, "metric truncation must keep at least 16 members");
  require(truncation <= family.size(), ErrorKind::invalid_argument, "metric truncation exceeds the family size");
  const auto l1 = lambda_profile(family, xi1, truncation, threads);
  const auto l2 = lambda_profile(family, xi2, truncation, threads);
  return metric_from_profiles(l1, l2, family, truncation);
}

double h_energy(const OrbitCollection& xi, const RadialKernel& kernel) {
  double total = 0.0;
  for (const auto& p : xi.pairs) total += pairwise_energy(p.alpha, p.beta, kernel);
  return total;
}

}  // namespace pairorbit
