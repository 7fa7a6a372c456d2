#include "pairorbit/measures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <utility>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "pairorbit/error.hpp"

namespace pairorbit {

// ---------------------------------------------------------------------------
// AtomicMeasure

AtomicMeasure::AtomicMeasure(int dim) : dim_(dim) {
  require(dim > 0, ErrorKind::invalid_argument, "measure dimension must be positive");
}

AtomicMeasure::AtomicMeasure(int dim, std::vector<double> coords, std::vector<double> weights)
    : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
  require(dim > 0, ErrorKind::invalid_argument, "measure dimension must be positive");
  require(coords_.size() == weights_.size() * static_cast<std::size_t>(dim), ErrorKind::invalid_argument,
          "coordinate array does not match atom count times dimension");
  for (double c : coords_) require(std::isfinite(c), ErrorKind::non_finite, "non-finite atom coordinate");
  double sum = 0.0;
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0, ErrorKind::invalid_argument, "atom weights must be finite and >= 0");
    sum += w;
  }
  total_mass_ = sum;
}

void AtomicMeasure::push_back(std::span<const double> location, double weight) {
  require(location.size() == static_cast<std::size_t>(dim_), ErrorKind::invalid_argument,
          "atom location has the wrong dimension");
  require(std::isfinite(weight) && weight >= 0.0, ErrorKind::invalid_argument,
          "atom weights must be finite and >= 0");
  for (double c : location) require(std::isfinite(c), ErrorKind::non_finite, "non-finite atom coordinate");
  coords_.insert(coords_.end(), location.begin(), location.end());
  weights_.push_back(weight);
  total_mass_ += weight;
}

AtomicMeasure AtomicMeasure::shifted(std::span<const double> shift) const {
  require(shift.size() == static_cast<std::size_t>(dim_), ErrorKind::invalid_argument,
          "shift has the wrong dimension");
  std::vector<double> coords = coords_;
  for (std::size_t i = 0; i < size(); ++i)
    for (int k = 0; k < dim_; ++k) coords[i * dim_ + k] += shift[k];
  AtomicMeasure out;
  out.dim_ = dim_;
  out.coords_ = std::move(coords);
  out.weights_ = weights_;
  out.total_mass_ = total_mass_;
  return out;
}

AtomicMeasure AtomicMeasure::scaled_weights(double factor) const {
  require(factor >= 0.0 && std::isfinite(factor), ErrorKind::invalid_argument, "weight factor must be >= 0");
  std::vector<double> w = weights_;
  for (double& x : w) x *= factor;
  return AtomicMeasure(dim_, coords_, std::move(w));
}

AtomicMeasure AtomicMeasure::subset(std::span<const std::size_t> indices) const {
  std::vector<double> coords;
  std::vector<double> weights;
  coords.reserve(indices.size() * dim_);
  weights.reserve(indices.size());
  for (std::size_t i : indices) {
    auto loc = location(i);
    coords.insert(coords.end(), loc.begin(), loc.end());
    weights.push_back(weights_[i]);
  }
  return AtomicMeasure(dim_, std::move(coords), std::move(weights));
}

// ---------------------------------------------------------------------------
// Mollifiers

const char* to_string(MollifierKind kind) {
  return kind == MollifierKind::bump ? "bump" : "gaussian-truncated";
}

MollifierKind mollifier_kind_from_string(const std::string& name) {
  if (name == "gaussian-truncated" || name == "gaussian") return MollifierKind::gaussian_truncated;
  if (name == "bump") return MollifierKind::bump;
  throw Error(ErrorKind::invalid_argument, "unknown mollifier kind '" + name + "'");
}

void MollifierSpec::validate() const {
  require(std::isfinite(epsilon) && epsilon > 0.0, ErrorKind::invalid_argument, "mollifier epsilon must be > 0");
  require(std::isfinite(truncation_radius) && truncation_radius > 0.0, ErrorKind::invalid_argument,
          "mollifier truncation radius must be > 0");
}

Mollifier::Mollifier(const MollifierSpec& spec, int dim) : spec_(spec), dim_(dim) {
  spec.validate();
  require(dim > 0, ErrorKind::invalid_argument, "mollifier dimension must be positive");
  const double R = spec.truncation_radius;
  const double half_d = 0.5 * dim;
  if (spec.kind == MollifierKind::gaussian_truncated) {
    const double inside = boost::math::gamma_p(half_d, 0.5 * R * R);
    unit_norm_ = 1.0 / (std::pow(2.0 * std::numbers::pi, half_d) * inside);
  } else {
    // int_{|x|<=R} (1 - |x|^2/R^2)^3 dx = R^d pi^{d/2} Gamma(4) / Gamma(d/2 + 4)
    unit_norm_ = std::tgamma(half_d + 4.0) / (std::pow(R, dim) * std::pow(std::numbers::pi, half_d) * 6.0);
  }
}

double Mollifier::unit_profile(double s) const {
  const double R = spec_.truncation_radius;
  if (s > R) return 0.0;
  if (spec_.kind == MollifierKind::gaussian_truncated) return unit_norm_ * std::exp(-0.5 * s * s);
  const double q = 1.0 - (s * s) / (R * R);
  return unit_norm_ * q * q * q;
}

double Mollifier::operator()(double r) const {
  const double eps = spec_.epsilon;
  return std::pow(eps, -dim_) * unit_profile(r / eps);
}

double Mollifier::unit_first_moment(double u) const {
  const double R = spec_.truncation_radius;
  const double m = std::min(u, R);
  if (spec_.kind == MollifierKind::gaussian_truncated) return unit_norm_ * -std::expm1(-0.5 * m * m);
  const double q = 1.0 - (m * m) / (R * R);
  return unit_norm_ * (R * R / 8.0) * (1.0 - q * q * q * q);
}

// ---------------------------------------------------------------------------
// Grids

std::size_t GridDescriptor::node_count() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

GridDescriptor GridDescriptor::covering(std::span<const double> lo, std::span<const double> hi, double pad,
                                        double spacing) {
  require(lo.size() == hi.size() && !lo.empty(), ErrorKind::invalid_argument, "bad bounding box");
  require(spacing > 0.0, ErrorKind::invalid_argument, "grid spacing must be > 0");
  GridDescriptor g;
  g.dim = static_cast<int>(lo.size());
  g.spacing = spacing;
  for (std::size_t k = 0; k < lo.size(); ++k) {
    const double a = lo[k] - pad;
    const double b = hi[k] + pad;
    g.origin.push_back(a);
    g.shape.push_back(static_cast<std::size_t>(std::ceil((b - a) / spacing)) + 1);
  }
  return g;
}

GridDensity::GridDensity(GridDescriptor grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  require(grid_.dim > 0 && grid_.origin.size() == static_cast<std::size_t>(grid_.dim) &&
              grid_.shape.size() == static_cast<std::size_t>(grid_.dim),
          ErrorKind::invalid_argument, "grid descriptor is inconsistent with its dimension");
  require(grid_.spacing > 0.0 && std::isfinite(grid_.spacing), ErrorKind::invalid_argument,
          "grid spacing must be > 0");
  require(values_.size() == grid_.node_count(), ErrorKind::invalid_argument,
          "grid values do not match the grid shape");
  for (double v : values_)
    require(std::isfinite(v) && v >= 0.0, ErrorKind::invalid_argument, "grid density values must be finite and >= 0");
}

double GridDensity::mass() const {
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum * std::pow(grid_.spacing, grid_.dim);
}

namespace {

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) strides[k - 1] = strides[k] * shape[k];
  return strides;
}

}  // namespace

GridDensity mollify(const AtomicMeasure& measure, const MollifierSpec& spec, const GridDescriptor& grid) {
  spec.validate();
  require(measure.dim() == grid.dim, ErrorKind::invalid_argument, "measure and grid dimensions differ");
  require(!grid.shape.empty() && grid.node_count() > 0, ErrorKind::invalid_argument, "empty grid");
  require(grid.spacing <= 0.5 * spec.epsilon * (1.0 + 1e-12), ErrorKind::resolution,
          "grid spacing exceeds epsilon/2; refine the grid");
  const int d = grid.dim;
  const double h = grid.spacing;
  const double support = spec.support_radius();
  const double slack = 1e-9 * h;
  for (std::size_t i = 0; i < measure.size(); ++i) {
    auto x = measure.location(i);
    for (int k = 0; k < d; ++k) {
      const double lo = grid.origin[k];
      const double hi = grid.origin[k] + static_cast<double>(grid.shape[k] - 1) * h;
      require(x[k] - support >= lo - slack && x[k] + support <= hi + slack, ErrorKind::domain,
              "atom plus mollifier support leaves the grid box");
    }
  }

  const Mollifier phi(spec, d);
  const auto strides = strides_of(grid.shape);
  std::vector<double> values(grid.node_count(), 0.0);
  std::vector<std::ptrdiff_t> lo(d), hi(d), idx(d);
  const double support2 = support * support;
  for (std::size_t i = 0; i < measure.size(); ++i) {
    const double w = measure.weight(i);
    if (w == 0.0) continue;
    auto x = measure.location(i);
    for (int k = 0; k < d; ++k) {
      lo[k] = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil((x[k] - support - grid.origin[k]) / h)));
      hi[k] = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(grid.shape[k]) - 1,
                                       static_cast<std::ptrdiff_t>(std::floor((x[k] + support - grid.origin[k]) / h)));
      if (lo[k] > hi[k]) goto next_atom;
      idx[k] = lo[k];
    }
    for (;;) {
      double r2 = 0.0;
      std::size_t flat = 0;
      for (int k = 0; k < d; ++k) {
        const double dx = grid.origin[k] + static_cast<double>(idx[k]) * h - x[k];
        r2 += dx * dx;
        flat += static_cast<std::size_t>(idx[k]) * strides[k];
      }
      if (r2 <= support2) values[flat] += w * phi(std::sqrt(r2));
      int k = d - 1;
      for (; k >= 0; --k) {
        if (++idx[k] <= hi[k]) break;
        idx[k] = lo[k];
      }
      if (k < 0) break;
    }
  next_atom:;
  }
  return GridDensity(grid, std::move(values));
}

double dv_rate(const GridDensity& density, double cap) {
  const auto& grid = density.grid();
  const double mass = density.mass();
  require(mass > 0.0, ErrorKind::invalid_argument, "dv_rate needs a density with positive mass");
  require(mass <= 1.0 + 1e-9, ErrorKind::invalid_argument, "dv_rate needs a sub-probability density");
  const int d = grid.dim;
  for (std::size_t n : grid.shape)
    require(n >= 2, ErrorKind::invalid_argument, "dv_rate needs at least two nodes per axis");
  const double h = grid.spacing;
  const auto strides = strides_of(grid.shape);
  std::vector<double> f(density.values().size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sqrt(density.values()[i]);

  double energy = 0.0;
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t flat = 0; flat < f.size(); ++flat) {
    double g2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const std::size_t n = grid.shape[k];
      const std::size_t s = strides[k];
      double g;
      if (idx[k] == 0) {
        g = (f[flat + s] - f[flat]) / h;
      } else if (idx[k] == n - 1) {
        g = (f[flat] - f[flat - s]) / h;
      } else {
        g = (f[flat + s] - f[flat - s]) / (2.0 * h);
      }
      g2 += g * g;
    }
    energy += g2;
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] < grid.shape[k]) break;
      idx[k] = 0;
    }
  }
  energy *= 0.5 * std::pow(h, d);
  if (!(energy <= cap)) return std::numeric_limits<double>::infinity();
  return energy;
}

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

/// Piecewise-linear table of T(s) on s in [0, s_max], s = r^2.
struct SquaredTable {
  double s_max = 0.0;
  double ds = 0.0;
  double inv_ds = 0.0;
  std::vector<double> v;
  std::vector<double> cum;  // int_0^{k ds} T(s) ds

  double at(double s) const {
    if (s >= s_max) return 0.0;
    const double x = s * inv_ds;
    const auto k = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(k);
    return v[k] + frac * (v[k + 1] - v[k]);
  }

  double integral(double s) const {
    if (s >= s_max) return cum.back();
    const auto k = static_cast<std::size_t>(s * inv_ds);
    const double delta = s - static_cast<double>(k) * ds;
    return cum[k] + v[k] * delta + (v[k + 1] - v[k]) * delta * delta / (2.0 * ds);
  }
};

}  // namespace detail

namespace {

constexpr std::size_t kTableIntervals = 1u << 16;

template <typename F>
double gauss_segments(F f, std::vector<double> cuts) {
  std::sort(cuts.begin(), cuts.end());
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) sum += boost::math::quadrature::gauss<double, 40>::integrate(f, cuts[i], cuts[i + 1]);
  }
  return sum;
}

std::shared_ptr<const detail::SquaredTable> unit_table(MollifierKind kind, double truncation) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, std::shared_ptr<const detail::SquaredTable>> cache;
  const auto key = std::make_pair(static_cast<int>(kind), truncation);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto table = std::make_shared<detail::SquaredTable>();
  const double support = 2.0 * truncation;
  table->s_max = support * support;
  table->ds = table->s_max / static_cast<double>(kTableIntervals);
  table->inv_ds = 1.0 / table->ds;
  table->v.resize(kTableIntervals + 1);
  for (std::size_t k = 0; k <= kTableIntervals; ++k)
    table->v[k] = unit_self_convolution(kind, truncation, std::sqrt(static_cast<double>(k) * table->ds));
  table->v.back() = 0.0;
  table->cum.resize(kTableIntervals + 1);
  table->cum[0] = 0.0;
  for (std::size_t k = 0; k < kTableIntervals; ++k)
    table->cum[k + 1] = table->cum[k] + 0.5 * table->ds * (table->v[k] + table->v[k + 1]);
  std::lock_guard lock(mutex);
  auto [it, inserted] = cache.emplace(key, std::move(table));
  return it->second;
}

}  // namespace

double unit_self_convolution(MollifierKind kind, double truncation_radius, double r) {
  const Mollifier phi(MollifierSpec{kind, 1.0, truncation_radius}, 3);
  const double R = truncation_radius;
  constexpr double pi = std::numbers::pi;
  if (r >= 2.0 * R) return 0.0;
  if (r == 0.0) {
    auto f = [&](double s) {
      const double p = phi.unit_profile(s);
      return s * s * p * p;
    };
    return 4.0 * pi * gauss_segments(f, {0.0, R});
  }
  // (f * g)(r) = (2 pi / r) int_0^R s f(s) [G(r + s) - G(|r - s|)] ds with G(u) = int_0^u v g(v) dv
  auto f = [&](double s) {
    return s * phi.unit_profile(s) * (phi.unit_first_moment(r + s) - phi.unit_first_moment(std::abs(r - s)));
  };
  std::vector<double> cuts{0.0, R};
  if (R - r > 0.0) cuts.push_back(R - r);
  if (r - R > 0.0 && r - R < R) cuts.push_back(r - R);
  if (r < R) cuts.push_back(r);
  return 2.0 * pi / r * gauss_segments(f, cuts);
}

RadialKernel RadialKernel::zero() {
  RadialKernel k;
  k.kind_ = Kind::zero;
  k.support_ = 0.0;
  return k;
}

RadialKernel RadialKernel::mollified_delta(const MollifierSpec& spec) {
  spec.validate();
  RadialKernel k;
  k.kind_ = Kind::mollified_delta;
  k.spec_ = spec;
  k.width_ = spec.epsilon;
  k.inv_width2_ = 1.0 / (spec.epsilon * spec.epsilon);
  k.amplitude_ = 1.0 / (spec.epsilon * spec.epsilon * spec.epsilon);
  k.support_ = 2.0 * spec.support_radius();
  k.unit_table_ = unit_table(spec.kind, spec.truncation_radius);
  return k;
}

RadialKernel RadialKernel::regularized_coulomb(double delta) {
  require(std::isfinite(delta) && delta >= 0.0, ErrorKind::invalid_argument, "coulomb delta must be >= 0");
  RadialKernel k;
  k.kind_ = Kind::regularized_coulomb;
  k.delta_ = delta;
  k.support_ = std::numeric_limits<double>::infinity();
  return k;
}

RadialKernel RadialKernel::tabulated(double dr, std::vector<double> values) {
  require(std::isfinite(dr) && dr > 0.0, ErrorKind::invalid_argument, "table spacing must be > 0");
  require(values.size() >= 2, ErrorKind::invalid_argument, "radial table needs at least two nodes");
  for (double v : values) require(std::isfinite(v), ErrorKind::non_finite, "non-finite kernel table value");
  RadialKernel k;
  k.kind_ = Kind::tabulated;
  k.table_dr_ = dr;
  k.support_ = dr * static_cast<double>(values.size() - 1);
  k.table_values_ = std::move(values);
  const auto& v = k.table_values_;
  k.table_moments_.assign(v.size(), 0.0);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double r0 = dr * static_cast<double>(i);
    const double r1 = r0 + dr;
    const double b = (v[i + 1] - v[i]) / dr;
    const double piece = v[i] * (r1 * r1 - r0 * r0) / 2.0 +
                         b * ((r1 * r1 * r1 - r0 * r0 * r0) / 3.0 - r0 * (r1 * r1 - r0 * r0) / 2.0);
    k.table_moments_[i + 1] = k.table_moments_[i] + piece;
  }
  return k;
}

double RadialKernel::at_squared(double r2) const {
  switch (kind_) {
    case Kind::zero: return 0.0;
    case Kind::mollified_delta: return amplitude_ * unit_table_->at(r2 * inv_width2_);
    case Kind::regularized_coulomb: return 1.0 / std::sqrt(delta_ * delta_ + r2);
    case Kind::tabulated: {
      const double r = std::sqrt(r2);
      if (r >= support_) return 0.0;
      const double x = r / table_dr_;
      const auto i = static_cast<std::size_t>(x);
      const double frac = x - static_cast<double>(i);
      return table_values_[i] + frac * (table_values_[i + 1] - table_values_[i]);
    }
  }
  return 0.0;
}

double RadialKernel::radial_moment(double u) const {
  switch (kind_) {
    case Kind::zero: return 0.0;
    case Kind::mollified_delta: {
      const double y = u / width_;
      return 0.5 * unit_table_->integral(y * y) / width_;
    }
    case Kind::regularized_coulomb: return std::sqrt(delta_ * delta_ + u * u) - delta_;
    case Kind::tabulated: {
      if (u >= support_) return table_moments_.back();
      const auto i = static_cast<std::size_t>(u / table_dr_);
      const double r0 = table_dr_ * static_cast<double>(i);
      const double b = (table_values_[i + 1] - table_values_[i]) / table_dr_;
      const double a = table_values_[i];
      return table_moments_[i] + a * (u * u - r0 * r0) / 2.0 +
             b * ((u * u * u - r0 * r0 * r0) / 3.0 - r0 * (u * u - r0 * r0) / 2.0);
    }
  }
  return 0.0;
}

double RadialKernel::spherical_average(double r, double s) const {
  if (r == 0.0 && s == 0.0) {
    require(!singular(), ErrorKind::singular_kernel, "exact Coulomb kernel evaluated at the origin");
    return at_squared(0.0);
  }
  if (r == 0.0) return at_squared(s * s);
  if (s == 0.0) return at_squared(r * r);
  if (compact() && std::abs(r - s) >= support_) return 0.0;
  return (radial_moment(r + s) - radial_moment(std::abs(r - s))) / (2.0 * r * s);
}

std::string RadialKernel::describe() const {
  std::ostringstream os;
  os.precision(12);
  switch (kind_) {
    case Kind::zero: os << "zero"; break;
    case Kind::mollified_delta:
      os << "mollified-delta(" << to_string(spec_.kind) << ",eps=" << spec_.epsilon
         << ",truncation=" << spec_.truncation_radius << ")";
      break;
    case Kind::regularized_coulomb: os << "regularized-coulomb(delta=" << delta_ << ")"; break;
    case Kind::tabulated: os << "tabulated(dr=" << table_dr_ << ",nodes=" << table_values_.size() << ")"; break;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Pairwise energy

namespace {

template <typename Eval>
double naive_sum(const AtomicMeasure& mu, const AtomicMeasure& nu, Eval eval, bool singular) {
  const int d = mu.dim();
  const double* xs = mu.coords().data();
  const double* ys = nu.coords().data();
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double wi = mu.weight(i);
    const double* x = xs + i * d;
    double row = 0.0;
    for (std::size_t j = 0; j < nu.size(); ++j) {
      const double* y = ys + j * d;
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double dx = x[k] - y[k];
        r2 += dx * dx;
      }
      if (singular && r2 == 0.0)
        throw Error(ErrorKind::singular_kernel, "exact Coulomb kernel with coincident atoms; use delta > 0");
      row += nu.weight(j) * eval(r2);
    }
    total += wi * row;
  }
  return total;
}

struct CellIndex {
  std::vector<std::array<std::int64_t, 3>> keys;  // sorted cell keys
  std::vector<std::size_t> starts;                // offsets into order, size keys+1
  std::vector<std::size_t> order;                 // atom indices grouped by cell, ascending within cell
};

// Keys are taken relative to `origin`, so translating both measures and the
// origin together leaves the cell assignment, and hence the summation order, unchanged.
CellIndex build_cells(const AtomicMeasure& m, double cell, const std::array<double, 3>& origin) {
  const int d = m.dim();
  std::vector<std::pair<std::array<std::int64_t, 3>, std::size_t>> tagged(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::array<std::int64_t, 3> key{0, 0, 0};
    auto x = m.location(i);
    for (int k = 0; k < d; ++k) key[k] = static_cast<std::int64_t>(std::floor((x[k] - origin[k]) / cell));
    tagged[i] = {key, i};
  }
  std::sort(tagged.begin(), tagged.end());
  CellIndex out;
  out.order.reserve(m.size());
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    if (i == 0 || tagged[i].first != tagged[i - 1].first) {
      out.keys.push_back(tagged[i].first);
      out.starts.push_back(i);
    }
    out.order.push_back(tagged[i].second);
  }
  out.starts.push_back(tagged.size());
  return out;
}

template <typename Eval>
double cell_sum(const AtomicMeasure& mu, const AtomicMeasure& nu, Eval eval, double support) {
  const int d = mu.dim();
  const double support2 = support * support;
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  for (int k = 0; k < d; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nu.size(); ++j) lo = std::min(lo, nu.location(j)[k]);
    origin[k] = lo;
  }
  const CellIndex cells = build_cells(nu, support, origin);
  const double* ys = nu.coords().data();
  const double* wy = nu.weights().data();
  double total = 0.0;
  std::array<std::int64_t, 3> base{0, 0, 0};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto x = mu.location(i);
    for (int k = 0; k < d; ++k) base[k] = static_cast<std::int64_t>(std::floor((x[k] - origin[k]) / support));
    double row = 0.0;
    const int span_y = d >= 2 ? 1 : 0;
    const int span_z = d >= 3 ? 1 : 0;
    for (int a = -1; a <= 1; ++a)
      for (int b = -span_y; b <= span_y; ++b)
        for (int c = -span_z; c <= span_z; ++c) {
          const std::array<std::int64_t, 3> key{base[0] + a, base[1] + b, base[2] + c};
          auto it = std::lower_bound(cells.keys.begin(), cells.keys.end(), key);
          if (it == cells.keys.end() || *it != key) continue;
          const auto slot = static_cast<std::size_t>(it - cells.keys.begin());
          for (std::size_t p = cells.starts[slot]; p < cells.starts[slot + 1]; ++p) {
            const std::size_t j = cells.order[p];
            const double* y = ys + j * d;
            double r2 = 0.0;
            for (int k = 0; k < d; ++k) {
              const double dx = x[k] - y[k];
              r2 += dx * dx;
            }
            if (r2 < support2) row += wy[j] * eval(r2);
          }
        }
    total += mu.weight(i) * row;
  }
  return total;
}

// sum_i w_i^2 V(0) + 2 sum_{i<j} w_i w_j V(x_i - x_j).
template <typename Eval>
double symmetric_sum(const AtomicMeasure& mu, Eval eval) {
  const int d = mu.dim();
  const double* xs = mu.coords().data();
  const double* w = mu.weights().data();
  const std::size_t n = mu.size();
  double diagonal = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = xs + i * d;
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* y = xs + j * d;
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double dx = x[k] - y[k];
        r2 += dx * dx;
      }
      row += w[j] * eval(r2);
    }
    off += w[i] * row;
    diagonal += w[i] * w[i];
  }
  return diagonal * eval(0.0) + 2.0 * off;
}

}  // namespace

double self_energy(const AtomicMeasure& mu, const RadialKernel& kernel) {
  if (mu.empty()) return 0.0;
  switch (kernel.kind()) {
    case RadialKernel::Kind::zero: return 0.0;
    case RadialKernel::Kind::regularized_coulomb: {
      require(!kernel.singular(), ErrorKind::singular_kernel,
              "exact Coulomb self-energy is infinite; use delta > 0");
      const double d2 = kernel.delta() * kernel.delta();
      return symmetric_sum(mu, [d2](double r2) { return 1.0 / std::sqrt(d2 + r2); });
    }
    case RadialKernel::Kind::mollified_delta: {
      const detail::SquaredTable* table = kernel.unit_table_.get();
      const double scale = kernel.inv_width2_;
      const double amplitude = kernel.amplitude_;
      return symmetric_sum(mu, [table, scale, amplitude](double r2) { return amplitude * table->at(r2 * scale); });
    }
    case RadialKernel::Kind::tabulated:
      return symmetric_sum(mu, [&kernel](double r2) { return kernel.at_squared(r2); });
  }
  return 0.0;
}

double pairwise_energy(const AtomicMeasure& mu, const AtomicMeasure& nu, const RadialKernel& kernel) {
  require(mu.dim() == nu.dim(), ErrorKind::invalid_argument, "pairwise_energy: dimension mismatch");
  if (mu.empty() || nu.empty()) return 0.0;
  switch (kernel.kind()) {
    case RadialKernel::Kind::zero: return 0.0;
    case RadialKernel::Kind::regularized_coulomb: {
      const double d2 = kernel.delta() * kernel.delta();
      return naive_sum(mu, nu, [d2](double r2) { return 1.0 / std::sqrt(d2 + r2); }, kernel.singular());
    }
    case RadialKernel::Kind::mollified_delta: {
      const detail::SquaredTable* table = kernel.unit_table_.get();
      const double scale = kernel.inv_width2_;
      const double amplitude = kernel.amplitude_;
      auto eval = [table, scale, amplitude](double r2) { return amplitude * table->at(r2 * scale); };
      if (mu.dim() <= 3) return cell_sum(mu, nu, eval, kernel.support_radius());
      return naive_sum(mu, nu, eval, false);
    }
    case RadialKernel::Kind::tabulated: {
      auto eval = [&kernel](double r2) { return kernel.at_squared(r2); };
      if (mu.dim() <= 3) return cell_sum(mu, nu, eval, kernel.support_radius());
      return naive_sum(mu, nu, eval, false);
    }
  }
  return 0.0;
}

}  // namespace pairorbit
