#include "pairorbit/variational.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "pairorbit/error.hpp"

namespace pairorbit {

namespace {

constexpr double pi = std::numbers::pi;

void require_finite_profile(const std::vector<double>& v) {
  for (double x : v) require(std::isfinite(x), ErrorKind::non_finite, "profile has a non-finite value");
}

}  // namespace

RadialProfile::RadialProfile(double h, std::vector<double> values) : h_(h), values_(std::move(values)) {
  require(std::isfinite(h) && h > 0.0, ErrorKind::invalid_argument, "profile spacing must be > 0");
  require(values_.size() >= 3, ErrorKind::invalid_argument, "profile needs at least three nodes");
  require_finite_profile(values_);
}

RadialProfile RadialProfile::gaussian(double h, std::size_t n, double sigma) {
  require(sigma > 0.0, ErrorKind::invalid_argument, "gaussian width must be > 0");
  const double c = std::pow(2.0 * pi * sigma * sigma, -0.75);
  return from_function(h, n, [&](double r) { return c * std::exp(-r * r / (4.0 * sigma * sigma)); });
}

double RadialProfile::mass() const {
  double s = 0.0;
  for (std::size_t i = 1; i < values_.size(); ++i) {
    const double r = h_ * static_cast<double>(i);
    s += values_[i] * values_[i] * r * r;
  }
  return 4.0 * pi * s * h_;
}

RadialProfile RadialProfile::normalized(double target_mass) const {
  const double m = mass();
  require(m >= kMinProfileMass, ErrorKind::invalid_argument, "profile mass is below the degeneracy floor");
  return scaled(std::sqrt(target_mass / m));
}

RadialProfile RadialProfile::scaled(double factor) const {
  auto v = values_;
  for (double& x : v) x *= factor;
  return RadialProfile(h_, std::move(v));
}

double RadialProfile::at(double r) const {
  r = std::abs(r);
  const double x = r / h_;
  const auto n = static_cast<double>(this->n());
  if (x >= n) return 0.0;
  const auto i = static_cast<std::ptrdiff_t>(x);
  const double t = x - static_cast<double>(i);
  auto node = [&](std::ptrdiff_t k) {
    if (k < 0) k = -k;
    if (k > static_cast<std::ptrdiff_t>(this->n())) return 0.0;
    return values_[static_cast<std::size_t>(k)];
  };
  const double p0 = node(i - 1), p1 = node(i), p2 = node(i + 1), p3 = node(i + 2);
  return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
}

RadialProfile RadialProfile::dilated(double lambda, double amplitude) const {
  require(lambda > 0.0, ErrorKind::invalid_argument, "dilation factor must be > 0");
  std::vector<double> v(values_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = amplitude * at(lambda * h_ * static_cast<double>(i));
  return RadialProfile(h_, std::move(v));
}

std::string Interaction::describe() const {
  switch (kind) {
    case InteractionKind::quartic: return "quartic";
    case InteractionKind::coulomb: return "coulomb";
    case InteractionKind::kernel: return "kernel:" + kernel->describe();
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Grid operators

namespace {

// Node weights w_i = 4 pi r_i^2 h and kinetic coefficients c_i = 4 pi r_{i+1/2}^2 / h,
// so that mass = sum w u^2 and K = sum_i c_i (u_{i+1} - u_i)^2.
class RadialGrid {
 public:
  RadialGrid(double h, std::size_t n, const Interaction& interaction) : h_(h), n_(n), kind_(interaction.kind) {
    w_.resize(n + 1);
    c_.resize(n);
    for (std::size_t i = 0; i <= n; ++i) {
      const double r = h * static_cast<double>(i);
      w_[i] = 4.0 * pi * r * r * h;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double r = h * (static_cast<double>(i) + 0.5);
      c_[i] = 4.0 * pi * r * r / h;
    }
    if (kind_ == InteractionKind::kernel) build_kernel(*interaction.kernel);
  }

  std::size_t n() const { return n_; }
  const std::vector<double>& w() const { return w_; }
  const std::vector<double>& c() const { return c_; }

  double kinetic(const std::vector<double>& u) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double d = u[i + 1] - u[i];
      s += c_[i] * d * d;
    }
    return s;
  }

  void add_kinetic_gradient(const std::vector<double>& u, double factor, std::vector<double>& g) const {
    for (std::size_t i = 0; i < n_; ++i) {
      const double d = 2.0 * factor * c_[i] * (u[i + 1] - u[i]);
      g[i + 1] += d;
      g[i] -= d;
    }
  }

  // Potential Phi_k = sum_j K_kj a_j for a_j = w_j u_j^2; interaction = sum a Phi.
  // Quartic uses Phi_k = u_k^2 so that interaction = sum w u^4.
  std::vector<double> potential(const std::vector<double>& a, const std::vector<double>& u) const {
    std::vector<double> phi(n_ + 1, 0.0);
    switch (kind_) {
      case InteractionKind::quartic:
        for (std::size_t k = 1; k <= n_; ++k) phi[k] = u[k] * u[k];
        break;
      case InteractionKind::coulomb: {
        // Shell theorem: K_kj = 1 / max(r_k, r_j).
        std::vector<double> tail(n_ + 2, 0.0);
        for (std::size_t k = n_; k >= 1; --k) tail[k] = tail[k + 1] + a[k] / (h_ * static_cast<double>(k));
        double prefix = 0.0;
        for (std::size_t k = 1; k <= n_; ++k) {
          prefix += a[k];
          phi[k] = prefix / (h_ * static_cast<double>(k)) + tail[k + 1];
        }
        break;
      }
      case InteractionKind::kernel:
        for (std::size_t k = 1; k <= n_; ++k) {
          const double* row = &vbar_[(k - 1) * n_];
          double s = 0.0;
          for (std::size_t j = band_lo_[k]; j <= band_hi_[k]; ++j) s += row[j - 1] * a[j];
          phi[k] = s;
        }
        break;
    }
    return phi;
  }

  double cross(const std::vector<double>& u, const std::vector<double>& v) const {
    require(kind_ != InteractionKind::quartic, ErrorKind::invalid_argument,
            "cross interaction needs a coulomb or kernel interaction");
    std::vector<double> a(n_ + 1, 0.0), b(n_ + 1, 0.0);
    for (std::size_t k = 1; k <= n_; ++k) {
      a[k] = w_[k] * u[k] * u[k];
      b[k] = w_[k] * v[k] * v[k];
    }
    const auto phi = potential(b, v);
    double s = 0.0;
    for (std::size_t k = 1; k <= n_; ++k) s += a[k] * phi[k];
    return s;
  }

 private:
  void build_kernel(const RadialKernel& V) {
    require(!V.singular(), ErrorKind::singular_kernel, "radial kernel must be regular at the origin");
    vbar_.assign(n_ * n_, 0.0);
    band_lo_.assign(n_ + 1, 1);
    band_hi_.assign(n_ + 1, n_);
    const double reach = V.compact() ? V.support_radius() : std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= n_; ++k) {
      const double rk = h_ * static_cast<double>(k);
      std::size_t lo = n_ + 1, hi = 0;
      for (std::size_t j = 1; j <= n_; ++j) {
        const double rj = h_ * static_cast<double>(j);
        if (std::abs(rk - rj) >= reach) continue;
        const double v = j < k ? vbar_[(j - 1) * n_ + (k - 1)] : V.spherical_average(rk, rj);
        vbar_[(k - 1) * n_ + (j - 1)] = v;
        lo = std::min(lo, j);
        hi = std::max(hi, j);
      }
      band_lo_[k] = lo;
      band_hi_[k] = lo > hi ? 0 : hi;
    }
  }

  double h_;
  std::size_t n_;
  InteractionKind kind_;
  std::vector<double> w_;
  std::vector<double> c_;
  std::vector<double> vbar_;  // spherical averages for nodes 1..n, row-major
  std::vector<std::size_t> band_lo_, band_hi_;
};

struct Evaluation {
  double value = 0.0;
  EnergyTerms terms;
  std::vector<double> gradient;  // Euclidean, nodal
};

Evaluation evaluate(const RadialGrid& grid, const Functional& f, const std::vector<double>& u, bool with_gradient) {
  const std::size_t n = grid.n();
  const auto& w = grid.w();
  std::vector<double> a(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) a[k] = w[k] * u[k] * u[k];
  const auto phi = grid.potential(a, u);
  Evaluation e;
  for (std::size_t k = 1; k <= n; ++k) e.terms.interaction += a[k] * phi[k];
  e.terms.kinetic = grid.kinetic(u);
  const double ai = f.interaction_weight();
  const double bk = f.kinetic_weight();
  e.value = ai * e.terms.interaction - bk * e.terms.kinetic;
  if (with_gradient) {
    e.gradient.assign(n + 1, 0.0);
    // d/du_k of sum a Phi: 4 w u Phi for every interaction kind (quartic: 4 w u^3).
    for (std::size_t k = 1; k <= n; ++k) e.gradient[k] = ai * 4.0 * w[k] * u[k] * phi[k];
    grid.add_kinetic_gradient(u, -bk, e.gradient);
  }
  return e;
}

RadialGrid grid_for(const RadialProfile& psi, const Interaction& interaction) {
  return RadialGrid(psi.h(), psi.n(), interaction);
}

void require_mass(const RadialProfile& psi) {
  require(psi.mass() >= kMinProfileMass, ErrorKind::invalid_argument, "profile mass is below the degeneracy floor");
}

}  // namespace

EnergyTerms energy_terms(const RadialProfile& psi, const Interaction& interaction) {
  require_mass(psi);
  const auto grid = grid_for(psi, interaction);
  return evaluate(grid, Functional::chi(), psi.values(), false).terms;
}

double cross_interaction(const RadialProfile& psi, const RadialProfile& phi, const Interaction& interaction) {
  require(psi.h() == phi.h() && psi.n() == phi.n(), ErrorKind::invalid_argument, "profiles must share a grid");
  require_mass(psi);
  require_mass(phi);
  return grid_for(psi, interaction).cross(psi.values(), phi.values());
}

// ---------------------------------------------------------------------------
// Functionals

const char* to_string(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::chi: return "chi";
    case FunctionalKind::pekar: return "pekar";
    case FunctionalKind::pam: return "pam";
  }
  return "unknown";
}

FunctionalKind functional_kind_from_string(const std::string& name) {
  if (name == "chi") return FunctionalKind::chi;
  if (name == "pekar") return FunctionalKind::pekar;
  if (name == "pam") return FunctionalKind::pam;
  throw Error(ErrorKind::invalid_argument, "unknown functional '" + name + "'");
}

RadialKernel Functional::default_pam_kernel() { return RadialKernel::mollified_delta(MollifierSpec::gaussian(1.0)); }

Interaction Functional::interaction() const {
  switch (kind) {
    case FunctionalKind::chi: return Interaction::quartic();
    case FunctionalKind::pekar: return Interaction::coulomb();
    case FunctionalKind::pam: return Interaction::radial(V);
  }
  return Interaction::quartic();
}

double Functional::interaction_weight() const {
  return kind == FunctionalKind::pam ? std::ldexp(1.0, 2 * p - 3) : 1.0;
}

double Functional::kinetic_weight() const { return kind == FunctionalKind::pam ? std::ldexp(1.0, p - 2) : 1.0; }

std::string Functional::describe() const {
  if (kind != FunctionalKind::pam) return to_string(kind);
  return "pam(p=" + std::to_string(p) + "," + V.describe() + ")";
}

SolverConfig SolverConfig::defaults(FunctionalKind kind) {
  SolverConfig c;
  switch (kind) {
    case FunctionalKind::pekar: break;
    case FunctionalKind::chi:
      c.h = 0.02;
      c.n = 500;
      break;
    case FunctionalKind::pam:
      c.h = 0.05;
      c.n = 400;
      break;
  }
  return c;
}

void SolverConfig::validate() const {
  require(std::isfinite(h) && h > 0.0, ErrorKind::invalid_argument, "grid spacing must be > 0");
  require(n >= 4, ErrorKind::invalid_argument, "grid needs at least four intervals");
  require(max_iterations >= 1, ErrorKind::invalid_argument, "max_iterations must be >= 1");
  require(objective_tol > 0.0 && residual_tol > 0.0, ErrorKind::invalid_argument, "tolerances must be > 0");
  require(std::isfinite(mass) && mass > 0.0, ErrorKind::invalid_argument, "mass constraint must be > 0");
  require(initial_step > 0.0 && min_step > 0.0 && min_step < initial_step, ErrorKind::invalid_argument,
          "step schedule must satisfy 0 < min_step < initial_step");
}

ObjectiveGradient objective_and_gradient(const Functional& functional, const RadialProfile& psi) {
  require_mass(psi);
  const auto grid = grid_for(psi, functional.interaction());
  auto u = psi.values();
  u[0] = u[1];
  auto e = evaluate(grid, functional, u, true);
  e.gradient[0] = 0.0;
  e.gradient[psi.n()] = 0.0;
  return {e.value, std::move(e.gradient)};
}

// ---------------------------------------------------------------------------
// Solver

namespace {

// Solves the tridiagonal system with diagonal `diag` and symmetric off-diagonal
// `off` (off[k] couples k and k + 1) on indices 1..n-1.
std::vector<double> solve_tridiagonal(const std::vector<double>& diag, const std::vector<double>& off,
                                      const std::vector<double>& rhs, std::size_t n) {
  std::vector<double> cp(n + 1, 0.0), dp(n + 1, 0.0), x(n + 1, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const double sub = k > 1 ? off[k - 1] : 0.0;
    const double denom = diag[k] - sub * cp[k - 1];
    cp[k] = off[k] / denom;
    dp[k] = (rhs[k] - sub * dp[k - 1]) / denom;
  }
  for (std::size_t k = n - 1; k >= 1; --k) x[k] = dp[k] - (k + 1 < n ? cp[k] * x[k + 1] : 0.0);
  return x;
}

double weighted_dot(const std::vector<double>& w, const std::vector<double>& a, const std::vector<double>& b,
                    std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 1; k < n; ++k) s += w[k] * a[k] * b[k];
  return s;
}

// Puts u on the constraint set: tie u_0 to u_1, zero the edge, rescale to the mass.
void project(std::vector<double>& u, const std::vector<double>& w, double mass) {
  const std::size_t n = u.size() - 1;
  u[n] = 0.0;
  const double m = weighted_dot(w, u, u, n);
  require(m >= kMinProfileMass, ErrorKind::invalid_argument, "profile mass is below the degeneracy floor");
  const double s = std::sqrt(mass / m);
  for (double& x : u) x *= s;
  u[0] = u[1];
}

struct Stationarity {
  double multiplier;
  double residual;
};

Stationarity stationarity(const std::vector<double>& g, const std::vector<double>& u, const std::vector<double>& w,
                          double mass) {
  const std::size_t n = u.size() - 1;
  double gu = 0.0;
  for (std::size_t k = 1; k < n; ++k) gu += g[k] * u[k];
  const double lambda = gu / mass;
  double r2 = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double d = g[k] - lambda * w[k] * u[k];
    r2 += d * d / w[k];
  }
  return {lambda, std::sqrt(r2)};
}

void require_finite_gradient(const std::vector<double>& g) {
  for (double x : g) require(std::isfinite(x), ErrorKind::non_finite, "gradient has a non-finite entry");
}

}  // namespace

VariationalResult maximize(const Functional& functional, const SolverConfig& config,
                           const std::optional<RadialProfile>& initial) {
  config.validate();
  if (functional.kind == FunctionalKind::pam) require(functional.p >= 1, ErrorKind::invalid_argument, "p must be >= 1");
  const std::size_t n = config.n;
  const RadialGrid grid(config.h, n, functional.interaction());
  const auto& w = grid.w();
  const auto& c = grid.c();

  std::vector<double> u(n + 1);
  if (initial) {
    require(initial->n() == n && initial->h() == config.h, ErrorKind::invalid_argument,
            "initial profile must use the solver grid");
    u = initial->values();
  } else {
    for (std::size_t i = 0; i <= n; ++i) {
      const double r = config.h * static_cast<double>(i);
      u[i] = std::exp(-r * r / 2.0);
    }
  }
  project(u, w, config.mass);

  VariationalResult res;
  res.config = config;
  res.functional = functional.describe();
  res.regularized = functional.kind == FunctionalKind::chi;

  auto cur = evaluate(grid, functional, u, true);
  require_finite_gradient(cur.gradient);
  res.history.push_back(cur.value);
  auto st = stationarity(cur.gradient, u, w, config.mass);

  const double bk = functional.kinetic_weight();
  std::vector<double> off(n + 1, 0.0), diag(n + 1, 0.0), wu(n + 1, 0.0);
  for (std::size_t k = 1; k + 1 < n; ++k) off[k] = -2.0 * bk * c[k];
  double step = config.initial_step;
  std::size_t it = 0;
  double last_change = std::numeric_limits<double>::infinity();
  for (; it < config.max_iterations; ++it) {
    if (st.residual <= config.residual_tol && last_change <= config.objective_tol) {
      res.converged = true;
      break;
    }
    // P = 2 b S + |lambda| W approximates the constrained Hessian of -E.
    const double sigma = std::abs(st.multiplier);
    for (std::size_t k = 1; k < n; ++k) diag[k] = 2.0 * bk * (c[k] + (k > 1 ? c[k - 1] : 0.0)) + sigma * w[k];
    for (std::size_t k = 1; k < n; ++k) wu[k] = w[k] * u[k];
    const auto pg = solve_tridiagonal(diag, off, cur.gradient, n);
    const auto pu = solve_tridiagonal(diag, off, wu, n);
    const double mu = weighted_dot(w, u, pg, n) / weighted_dot(w, u, pu, n);
    std::vector<double> d(n + 1, 0.0);
    double slope = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      d[k] = pg[k] - mu * pu[k];
      slope += cur.gradient[k] * d[k];
    }
    if (!(slope > 0.0)) break;

    bool accepted = false;
    double alpha = std::min(config.initial_step, 2.0 * step);
    for (; alpha >= config.min_step; alpha *= 0.5) {
      std::vector<double> trial(u);
      for (std::size_t k = 1; k < n; ++k) trial[k] += alpha * d[k];
      project(trial, w, config.mass);
      auto next = evaluate(grid, functional, trial, true);
      if (next.value >= cur.value + 1e-4 * alpha * slope) {
        require_finite_gradient(next.gradient);
        last_change = std::abs(next.value - cur.value) / std::max(std::abs(next.value), 1e-300);
        u = std::move(trial);
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    step = alpha;
    res.history.push_back(cur.value);
    st = stationarity(cur.gradient, u, w, config.mass);
  }
  if (!res.converged && st.residual <= config.residual_tol && last_change <= config.objective_tol)
    res.converged = true;

  res.iterations = it;
  res.grid_objective = cur.value;
  res.terms = cur.terms;
  res.residual = st.residual;
  res.multiplier = st.multiplier;
  res.profile = RadialProfile(config.h, u);
  res.objective = cur.value;
  if (functional.kind == FunctionalKind::pam && cur.value < 0.0) {
    res.objective = 0.0;
    res.clipped = true;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Scaling and rate checks

ScalingValues chi_scaling_exact(double m1, double m2, double A, double B) {
  require(m1 > 0.0 && m2 > 0.0, ErrorKind::invalid_argument, "masses must be > 0");
  require(std::isfinite(A) && std::isfinite(B), ErrorKind::non_finite, "scaling coefficients must be finite");
  using boost::multiprecision::cpp_rational;
  // Doubles convert to rationals exactly.
  const cpp_rational a(A), b(B), q1(m1), q2(m2);
  auto E = [&](const cpp_rational& m) -> cpp_rational {
    const cpp_rational m3 = m * m * m;
    return m3 * m * m * a - m3 * b;
  };
  const cpp_rational e1 = E(q1), e2 = E(q2), e12 = E(q1 + q2);
  ScalingValues v;
  v.m1 = m1;
  v.m2 = m2;
  v.e1 = static_cast<double>(e1);
  v.e2 = static_cast<double>(e2);
  v.e12 = static_cast<double>(e12);
  v.superadditive = e12 > e1 + e2;
  return v;
}

ChiScalingReport chi_scaling_check(const RadialProfile& psi, double m1, double m2) {
  require_mass(psi);
  require(std::abs(psi.mass() - 1.0) <= 1e-8, ErrorKind::invalid_argument, "chi scaling check needs a unit profile");
  const auto terms = energy_terms(psi, Interaction::quartic());
  ChiScalingReport rep;
  rep.A = terms.interaction;
  rep.B = terms.kinetic;
  rep.exact = chi_scaling_exact(m1, m2, rep.A, rep.B);
  auto grid_value = [&](double m) {
    const auto t = energy_terms(psi.dilated(m, m * m), Interaction::quartic());
    return t.interaction - t.kinetic;
  };
  rep.grid_e1 = grid_value(m1);
  rep.grid_e2 = grid_value(m2);
  rep.grid_e12 = grid_value(m1 + m2);
  const double pairs[3][2] = {{rep.grid_e1, rep.exact.e1}, {rep.grid_e2, rep.exact.e2}, {rep.grid_e12, rep.exact.e12}};
  for (const auto& p : pairs)
    rep.max_grid_relative_error = std::max(rep.max_grid_relative_error, std::abs(p[0] - p[1]) / std::abs(p[1]));
  rep.grid_within_tolerance = rep.max_grid_relative_error <= 0.01;
  return rep;
}

RateEvaluation evaluate_rate(const std::vector<ProfilePair>& xi, const std::optional<MollifierSpec>& mollifier) {
  RateEvaluation out;
  double mass_a = 0.0, mass_b = 0.0;
  for (const auto& pair : xi) {
    mass_a += pair.psi.mass();
    mass_b += pair.phi.mass();
  }
  require(mass_a <= 1.0 + 1e-12 && mass_b <= 1.0 + 1e-12, ErrorKind::invalid_argument,
          "factorized collection violates the mass constraints");
  std::optional<Interaction> V;
  if (mollifier) V = Interaction::radial(RadialKernel::mollified_delta(*mollifier));
  for (const auto& pair : xi) {
    const double ka = pair.psi.mass() > 0.0 ? energy_terms(pair.psi, Interaction::quartic()).kinetic : 0.0;
    const double kb = pair.phi.mass() > 0.0 ? energy_terms(pair.phi, Interaction::quartic()).kinetic : 0.0;
    const double v = 0.5 * (ka + kb);
    out.pair_values.push_back(v);
    out.value += v;
    if (V) out.mollified_overlaps.push_back(cross_interaction(pair.psi, pair.phi, *V));
  }
  return out;
}

std::vector<ProductReductionSide> pekar_product_reduction_check(const RadialProfile& psi, const RadialProfile& phi,
                                                                const RadialKernel& V) {
  std::vector<ProductReductionSide> out;
  for (const auto& inter : {Interaction::coulomb(), Interaction::radial(V)}) {
    ProductReductionSide s;
    s.kernel = inter.describe();
    s.lhs = 2.0 * cross_interaction(psi, phi, inter);
    s.rhs = cross_interaction(psi, psi, inter) + cross_interaction(phi, phi, inter);
    s.holds = s.lhs <= s.rhs + kProductReductionSlack;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pairorbit
