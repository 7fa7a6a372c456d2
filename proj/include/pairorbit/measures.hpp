#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pairorbit {

/// Weighted point cloud in R^d with nonnegative weights. Coordinates are stored
/// row-major (atom-major), so location(i) is a contiguous span of length dim.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  explicit AtomicMeasure(int dim);
  AtomicMeasure(int dim, std::vector<double> coords, std::vector<double> weights);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return weights_.size(); }
  bool empty() const noexcept { return weights_.empty(); }
  double total_mass() const noexcept { return total_mass_; }

  std::span<const double> location(std::size_t i) const {
    return {coords_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& coords() const noexcept { return coords_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  void push_back(std::span<const double> location, double weight);

  /// Translate every atom by `shift`.
  AtomicMeasure shifted(std::span<const double> shift) const;
  AtomicMeasure scaled_weights(double factor) const;
  AtomicMeasure subset(std::span<const std::size_t> indices) const;

 private:
  int dim_ = 0;
  std::vector<double> coords_;
  std::vector<double> weights_;
  double total_mass_ = 0.0;
};

enum class MollifierKind { gaussian_truncated, bump };

const char* to_string(MollifierKind kind);
MollifierKind mollifier_kind_from_string(const std::string& name);

/// phi_eps(x) = eps^{-d} phi(|x| / eps) with phi either a Gaussian cut at
/// `truncation_radius` (renormalized) or (1 - |x|^2/R^2)^3 on |x| <= R.
struct MollifierSpec {
  MollifierKind kind = MollifierKind::gaussian_truncated;
  double epsilon = 1.0;
  double truncation_radius = 6.0;

  static MollifierSpec gaussian(double epsilon, double truncation_radius = 6.0) {
    return {MollifierKind::gaussian_truncated, epsilon, truncation_radius};
  }
  static MollifierSpec bump(double epsilon, double truncation_radius = 1.0) {
    return {MollifierKind::bump, epsilon, truncation_radius};
  }

  double support_radius() const { return epsilon * truncation_radius; }
  /// Same shape with width multiplied by `factor`.
  MollifierSpec rescaled(double factor) const { return {kind, epsilon * factor, truncation_radius}; }
  void validate() const;
};

/// Radial evaluator for a mollifier in a fixed dimension.
class Mollifier {
 public:
  Mollifier(const MollifierSpec& spec, int dim);

  /// phi_eps at distance r from the center.
  double operator()(double r) const;
  /// Unit-width profile phi(s) (epsilon = 1).
  double unit_profile(double s) const;
  /// int_0^u v phi(v) dv for the unit-width profile, closed form.
  double unit_first_moment(double u) const;

  const MollifierSpec& spec() const noexcept { return spec_; }
  int dim() const noexcept { return dim_; }

 private:
  MollifierSpec spec_;
  int dim_;
  double unit_norm_;  // normalizing constant of the unit-width profile
};

struct GridDescriptor {
  int dim = 1;
  double spacing = 1.0;
  std::vector<double> origin;
  std::vector<std::size_t> shape;

  std::size_t node_count() const;
  /// Smallest box with spacing h that contains [lo - pad, hi + pad] per axis.
  static GridDescriptor covering(std::span<const double> lo, std::span<const double> hi, double pad,
                                 double spacing);
};

/// Nonnegative samples on a regular grid, row-major with the last axis fastest.
class GridDensity {
 public:
  GridDensity(GridDescriptor grid, std::vector<double> values);

  const GridDescriptor& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  int dim() const noexcept { return grid_.dim; }
  double spacing() const noexcept { return grid_.spacing; }
  double mass() const;

 private:
  GridDescriptor grid_;
  std::vector<double> values_;
};

GridDensity mollify(const AtomicMeasure& measure, const MollifierSpec& spec, const GridDescriptor& grid);

inline constexpr double kDefaultEnergyCap = 1e12;

/// Discrete Donsker-Varadhan energy 1/2 ||grad sqrt(density)||^2. Returns +inf
/// when the discrete energy exceeds `cap`.
double dv_rate(const GridDensity& density, double cap = kDefaultEnergyCap);

namespace detail {
struct SquaredTable;
}

/// Even interaction kernel V(x) = v(|x|).
class RadialKernel {
 public:
  enum class Kind { zero, mollified_delta, regularized_coulomb, tabulated };

  static RadialKernel zero();
  /// V_eps = phi_eps * phi_eps in R^3.
  static RadialKernel mollified_delta(const MollifierSpec& spec);
  /// (delta^2 + |x|^2)^{-1/2}; delta == 0 is the exact Coulomb kernel.
  static RadialKernel regularized_coulomb(double delta);
  /// Piecewise-linear radial table on r_k = k * dr, zero beyond the last node.
  static RadialKernel tabulated(double dr, std::vector<double> values);

  Kind kind() const noexcept { return kind_; }
  double operator()(double r) const { return at_squared(r * r); }
  double at_squared(double r2) const;
  double support_radius() const noexcept { return support_; }
  bool compact() const noexcept { return support_ < std::numeric_limits<double>::infinity(); }
  bool singular() const noexcept { return kind_ == Kind::regularized_coulomb && delta_ == 0.0; }
  double delta() const noexcept { return delta_; }
  const MollifierSpec& mollifier() const noexcept { return spec_; }
  double table_spacing() const noexcept { return table_dr_; }
  const std::vector<double>& table_values() const noexcept { return table_values_; }

  /// int_0^u V(v) v dv.
  double radial_moment(double u) const;
  /// Average of V(x - y) over |x| = r, |y| = s (uniform on both spheres).
  double spherical_average(double r, double s) const;

  std::string describe() const;

 private:
  RadialKernel() = default;
  friend double pairwise_energy(const AtomicMeasure&, const AtomicMeasure&, const RadialKernel&);
  friend double self_energy(const AtomicMeasure&, const RadialKernel&);

  Kind kind_ = Kind::zero;
  double support_ = 0.0;
  double delta_ = 0.0;
  MollifierSpec spec_{};
  double width_ = 1.0;
  double inv_width2_ = 1.0;
  double amplitude_ = 1.0;
  std::shared_ptr<const detail::SquaredTable> unit_table_;
  double table_dr_ = 0.0;
  std::vector<double> table_values_;
  std::vector<double> table_moments_;
};

/// Sum_i Sum_j w_i w_j V(x_i - y_j); cell lists for compact kernels, index order throughout.
double pairwise_energy(const AtomicMeasure& mu, const AtomicMeasure& nu, const RadialKernel& kernel);

/// pairwise_energy(mu, mu, kernel), summing each unordered pair once.
double self_energy(const AtomicMeasure& mu, const RadialKernel& kernel);

/// Unit-width self-convolution phi * phi of a 3-d mollifier shape, sampled at
/// distance r (exposed for tests and the variational kernels).
double unit_self_convolution(MollifierKind kind, double truncation_radius, double r);

}  // namespace pairorbit
