#include "pairorbit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pairorbit/error.hpp"
#include "pairorbit/parallel.hpp"

namespace pairorbit {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t replica) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t replica)
    : seed_(seed), replica_(replica), engine_(seeded_engine(seed, replica)) {}

BrownianPath BrownianPath::shifted(std::span<const double> z) const {
  require(z.size() == static_cast<std::size_t>(dim), ErrorKind::invalid_argument, "shift has the wrong dimension");
  BrownianPath out = *this;
  for (std::size_t k = 0; k <= steps(); ++k)
    for (int a = 0; a < dim; ++a) out.positions[k * dim + a] += z[a];
  return out;
}

std::size_t step_count(double horizon, double dt) {
  require(std::isfinite(horizon) && horizon > 0.0, ErrorKind::invalid_argument, "horizon must be > 0");
  require(std::isfinite(dt) && dt > 0.0, ErrorKind::invalid_argument, "dt must be > 0");
  require(dt <= horizon * (1.0 + 1e-12), ErrorKind::invalid_argument, "dt must not exceed the horizon");
  return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
}

BrownianPath sample_path(int dim, double horizon, double dt, std::span<const double> start, RngStream& rng) {
  require(dim > 0, ErrorKind::invalid_argument, "path dimension must be positive");
  require(start.size() == static_cast<std::size_t>(dim), ErrorKind::invalid_argument,
          "start point has the wrong dimension");
  const std::size_t n = step_count(horizon, dt);
  BrownianPath path;
  path.dim = dim;
  path.horizon = horizon;
  path.dt = horizon / static_cast<double>(n);
  const double sd = std::sqrt(path.dt);
  path.positions.resize((n + 1) * dim);
  std::copy(start.begin(), start.end(), path.positions.begin());
  for (std::size_t k = 0; k < n; ++k)
    for (int a = 0; a < dim; ++a)
      path.positions[(k + 1) * dim + a] = path.positions[k * dim + a] + sd * rng.gaussian();
  return path;
}

BrownianPath path_from_increments(int dim, double horizon, std::span<const double> start,
                                  std::span<const double> increments) {
  require(dim > 0 && start.size() == static_cast<std::size_t>(dim), ErrorKind::invalid_argument,
          "start point has the wrong dimension");
  require(!increments.empty() && increments.size() % dim == 0, ErrorKind::invalid_argument,
          "increments must be a nonempty steps x dim array");
  require(std::isfinite(horizon) && horizon > 0.0, ErrorKind::invalid_argument, "horizon must be > 0");
  const std::size_t n = increments.size() / dim;
  BrownianPath path;
  path.dim = dim;
  path.horizon = horizon;
  path.dt = horizon / static_cast<double>(n);
  path.positions.resize((n + 1) * dim);
  std::copy(start.begin(), start.end(), path.positions.begin());
  for (std::size_t k = 0; k < n; ++k)
    for (int a = 0; a < dim; ++a)
      path.positions[(k + 1) * dim + a] = path.positions[k * dim + a] + increments[k * dim + a];
  return path;
}

AtomicMeasure occupation(const BrownianPath& path) {
  require(!path.positions.empty(), ErrorKind::invalid_argument, "occupation of an empty path");
  const std::size_t n = path.steps();
  if (n == 0) return AtomicMeasure(path.dim, path.positions, {1.0});
  const double w = 1.0 / static_cast<double>(n);
  std::vector<double> weights(n + 1, w);
  weights.front() = 0.5 * w;
  weights.back() = 0.5 * w;
  return AtomicMeasure(path.dim, path.positions, std::move(weights));
}

namespace {

void require_same_horizon(const BrownianPath& a, const BrownianPath& b) {
  require(std::abs(a.horizon - b.horizon) <= 1e-12 * std::max(a.horizon, b.horizon), ErrorKind::invalid_argument,
          "paths have different horizons");
}

}  // namespace

double intersection_mass(const BrownianPath& p1, const BrownianPath& p2, const MollifierSpec& spec) {
  require_same_horizon(p1, p2);
  require(p1.dim == 3 && p2.dim == 3, ErrorKind::invalid_argument, "intersection measure is defined in 3-d");
  const double t = p1.horizon;
  return t * t * pairwise_energy(occupation(p1), occupation(p2), RadialKernel::mollified_delta(spec));
}

double intersection_mass_grid(const BrownianPath& p1, const BrownianPath& p2, const MollifierSpec& spec,
                              double spacing) {
  require_same_horizon(p1, p2);
  require(p1.dim == p2.dim, ErrorKind::invalid_argument, "paths have different dimensions");
  const int d = p1.dim;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto* p : {&p1, &p2})
    for (std::size_t k = 0; k <= p->steps(); ++k)
      for (int a = 0; a < d; ++a) {
        lo[a] = std::min(lo[a], p->position(k)[a]);
        hi[a] = std::max(hi[a], p->position(k)[a]);
      }
  const auto grid = GridDescriptor::covering(lo, hi, spec.support_radius() + spacing, spacing);
  const auto a = mollify(occupation(p1), spec, grid);
  const auto b = mollify(occupation(p2), spec, grid);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) sum += a.values()[i] * b.values()[i];
  const double t = p1.horizon;
  return t * t * sum * std::pow(spacing, d);
}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::zero: return "zero";
    case ModelKind::dirac_mollified: return "dirac-mollified";
    case ModelKind::coulomb: return "coulomb";
    case ModelKind::pam: return "pam";
  }
  return "unknown";
}

double default_dt(double epsilon, double horizon) {
  return std::min(epsilon * epsilon / 10.0, horizon / 1000.0);
}

GibbsModel GibbsModel::dirac_mollified(double t, const MollifierSpec& spec, double dt) {
  spec.validate();
  GibbsModel m;
  m.kind = ModelKind::dirac_mollified;
  m.horizon = t;
  m.dt = dt > 0.0 ? dt : default_dt(spec.epsilon, t);
  m.kernel = RadialKernel::mollified_delta(spec);
  m.epsilon = spec.epsilon;
  m.mollifier = spec;
  step_count(t, m.dt);
  return m;
}

GibbsModel GibbsModel::coulomb(double t, double delta, double dt) {
  require(delta > 0.0, ErrorKind::singular_kernel, "coulomb model needs delta > 0");
  GibbsModel m;
  m.kind = ModelKind::coulomb;
  m.horizon = t;
  m.dt = dt > 0.0 ? dt : t / 1000.0;
  m.kernel = RadialKernel::regularized_coulomb(delta);
  m.delta = delta;
  step_count(t, m.dt);
  return m;
}

GibbsModel GibbsModel::pam(int p, double epsilon, const MollifierSpec& phi, double dt) {
  require(p >= 1, ErrorKind::invalid_argument, "pam moment order must be >= 1");
  require(epsilon > 0.0 && epsilon <= 1.0, ErrorKind::invalid_argument, "pam epsilon must lie in (0, 1]");
  phi.validate();
  GibbsModel m;
  m.kind = ModelKind::pam;
  m.n_paths = p;
  m.epsilon = epsilon;
  m.mollifier = phi;
  m.kernel = RadialKernel::mollified_delta(phi);
  m.horizon = 1.0 / (epsilon * epsilon);
  const double unit_dt = dt > 0.0 ? dt : default_dt(epsilon, 1.0);
  m.dt = unit_dt * m.horizon;
  step_count(m.horizon, m.dt);
  return m;
}

GibbsModel GibbsModel::zero(double t, int n_paths, double dt) {
  require(n_paths >= 1, ErrorKind::invalid_argument, "model needs at least one path");
  GibbsModel m;
  m.kind = ModelKind::zero;
  m.horizon = t;
  m.n_paths = n_paths;
  m.dt = dt > 0.0 ? dt : t / 1000.0;
  step_count(t, m.dt);
  return m;
}

std::string GibbsModel::describe() const {
  std::ostringstream os;
  os.precision(12);  // labels only; exact values live in the parameter records
  os << to_string(kind) << "(t=" << horizon << ",dt=" << dt << ",paths=" << n_paths << ",kernel=" << kernel.describe()
     << ")";
  return os.str();
}

namespace {

// sum_{i,j} H(L^i, L^j) as self terms plus twice the i < j cross terms.
double all_pairs_energy(std::span<const AtomicMeasure> occ, const RadialKernel& V) {
  double total = 0.0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    total += self_energy(occ[i], V);
    for (std::size_t j = i + 1; j < occ.size(); ++j) total += 2.0 * pairwise_energy(occ[i], occ[j], V);
  }
  return total;
}

}  // namespace

double gibbs_weight(const GibbsModel& model, std::span<const BrownianPath> paths) {
  require(paths.size() == static_cast<std::size_t>(model.n_paths), ErrorKind::invalid_argument,
          "wrong number of paths for the model");
  for (const auto& p : paths)
    require(std::abs(p.horizon - model.horizon) <= 1e-12 * model.horizon, ErrorKind::invalid_argument,
            "path horizon does not match the model horizon");
  switch (model.kind) {
    case ModelKind::zero: return 0.0;
    case ModelKind::dirac_mollified:
    case ModelKind::coulomb:
      return model.horizon * pairwise_energy(occupation(paths[0]), occupation(paths[1]), model.kernel);
    case ModelKind::pam: {
      std::vector<AtomicMeasure> occ;
      for (const auto& p : paths) occ.push_back(occupation(p));
      return 0.5 * model.horizon * all_pairs_energy(occ, model.kernel);
    }
  }
  return 0.0;
}

double pam_unit_horizon_weight(std::span<const BrownianPath> paths, double epsilon, const MollifierSpec& phi) {
  for (const auto& p : paths)
    require(std::abs(p.horizon - 1.0) <= 1e-12, ErrorKind::invalid_argument, "unit-horizon form needs t = 1");
  std::vector<AtomicMeasure> occ;
  for (const auto& p : paths) occ.push_back(occupation(p));
  return 0.5 * epsilon * all_pairs_energy(occ, RadialKernel::mollified_delta(phi.rescaled(epsilon)));
}

MCEstimate log_mean_exp_estimate(std::span<const double> log_weights, double normalization, std::uint64_t seed) {
  const std::size_t n = log_weights.size();
  require(n >= 2, ErrorKind::invalid_argument, "need at least two samples");
  for (double l : log_weights) require(std::isfinite(l), ErrorKind::non_finite, "non-finite log-weight");
  const double M = *std::max_element(log_weights.begin(), log_weights.end());
  double s1 = 0.0, s2 = 0.0, mean_log = 0.0;
  for (double l : log_weights) {
    const double w = std::exp(l - M);
    s1 += w;
    s2 += w * w;
    mean_log += l;
  }
  const double nn = static_cast<double>(n);
  const double mean = s1 / nn;
  const double var = std::max(0.0, (s2 - s1 * s1 / nn) / (nn - 1.0));
  MCEstimate e;
  e.value = (M + std::log(mean)) / normalization;
  e.std_error = std::sqrt(var) / (std::sqrt(nn) * mean) / normalization;
  e.n_samples = n;
  e.seed = seed;
  e.log_domain = true;
  e.ess = s1 * s1 / s2;
  e.mean_log_weight = mean_log / nn / normalization;
  return e;
}

MCEstimate estimate_log_partition(const GibbsModel& model, const MonteCarloConfig& mc) {
  require(mc.n_samples >= 2, ErrorKind::invalid_argument, "need at least two samples");
  std::vector<double> logw(mc.n_samples, 0.0);
  if (model.kind == ModelKind::zero) return log_mean_exp_estimate(logw, model.normalization(), mc.seed);
  const std::vector<double> origin(3, 0.0);
  parallel_for(mc.n_samples, mc.threads, [&](std::size_t r) {
    RngStream rng(mc.seed, r);
    std::vector<BrownianPath> paths;
    for (int i = 0; i < model.n_paths; ++i) paths.push_back(sample_path(3, model.horizon, model.dt, origin, rng));
    logw[r] = gibbs_weight(model, paths);
  });
  return log_mean_exp_estimate(logw, model.normalization(), mc.seed);
}

MCEstimate estimate_pam_moment(const PamMomentConfig& cfg, const MonteCarloConfig& mc) {
  require(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0, ErrorKind::invalid_argument, "pam epsilon must lie in (0, 1]");
  require(cfg.p >= 1, ErrorKind::invalid_argument, "pam moment order must be >= 1");
  const double eps2 = cfg.epsilon * cfg.epsilon;
  const double dt = cfg.dt > 0.0 ? cfg.dt : default_dt(cfg.epsilon, 1.0);
  require(dt <= eps2 / 4.0 * (1.0 + 1e-12), ErrorKind::resolution, "pam step must satisfy dt <= eps^2 / 4");
  const std::size_t steps = step_count(1.0, dt);
  require(steps <= cfg.step_budget, ErrorKind::cost, "pam step count exceeds the step budget");
  GibbsModel model = GibbsModel::pam(cfg.p, cfg.epsilon, cfg.phi, dt);
  if (cfg.zero_kernel) {
    model.kind = ModelKind::zero;
    model.kernel = RadialKernel::zero();
  }
  return estimate_log_partition(model, mc);
}

bool single_dominant_pair(const OrbitCollection& xi, double mass_a, double mass_b, double dominance) {
  return xi.pairs.size() == 1 && xi.pairs[0].alpha.total_mass() >= dominance * mass_a &&
         xi.pairs[0].beta.total_mass() >= dominance * mass_b;
}

std::vector<LocalizationSummary> gibbs_reweighted_decomposition(std::span<const GibbsModel> models,
                                                                const MonteCarloConfig& mc,
                                                                const LocalizationParams& params) {
  require(!models.empty(), ErrorKind::invalid_argument, "need at least one model");
  require(mc.n_samples >= 2, ErrorKind::invalid_argument, "need at least two samples");
  const double t = models[0].horizon;
  const double dt = models[0].dt;
  for (const auto& m : models) {
    require(m.n_paths == 2, ErrorKind::invalid_argument, "localization uses path pairs");
    require(std::abs(m.horizon - t) <= 1e-12 * t && std::abs(m.dt - dt) <= 1e-12 * dt, ErrorKind::invalid_argument,
            "models must share horizon and dt");
  }
  params.decomposition.validate();
  const std::size_t n = mc.n_samples;
  const std::size_t k = models.size();
  std::vector<char> event(n, 0);
  std::vector<double> logw(n * k, 0.0);
  const std::vector<double> origin(3, 0.0);
  parallel_for(n, mc.threads, [&](std::size_t r) {
    RngStream rng(mc.seed, r);
    const BrownianPath paths[2] = {sample_path(3, t, dt, origin, rng), sample_path(3, t, dt, origin, rng)};
    const auto l1 = occupation(paths[0]);
    const auto l2 = occupation(paths[1]);
    const auto xi =
        match_pairs(decompose(l1, params.decomposition), decompose(l2, params.decomposition), params.match_radius);
    event[r] = single_dominant_pair(xi, l1.total_mass(), l2.total_mass(), params.dominance) ? 1 : 0;
    for (std::size_t m = 0; m < k; ++m) logw[r * k + m] = gibbs_weight(models[m], paths);
  });

  std::vector<LocalizationSummary> out;
  const double nn = static_cast<double>(n);
  std::size_t events = 0;
  for (char e : event) events += e;
  const double fu = static_cast<double>(events) / nn;
  for (std::size_t m = 0; m < k; ++m) {
    double M = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) M = std::max(M, logw[r * k + m]);
    std::vector<double> w(n);
    double sw = 0.0, sw2 = 0.0, swe = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      w[r] = std::exp(logw[r * k + m] - M);
      sw += w[r];
      sw2 += w[r] * w[r];
      if (event[r]) swe += w[r];
    }
    const double fw = swe / sw;
    const double wbar = sw / nn;
    // Linearized ratio estimator, paired with the unweighted frequency on the same samples.
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double ind = event[r] ? 1.0 : 0.0;
      const double psi = (w[r] / wbar) * (ind - fw) - (ind - fu);
      s += psi;
      s2 += psi * psi;
    }
    const double var = std::max(0.0, (s2 - s * s / nn) / (nn - 1.0));
    LocalizationSummary sum;
    sum.model = models[m].describe();
    sum.weighted_frequency = fw;
    sum.unweighted_frequency = fu;
    sum.difference = fw - fu;
    sum.std_error = std::sqrt(var / nn);
    sum.z_score = sum.std_error > 0.0 ? sum.difference / sum.std_error : 0.0;
    sum.ess = sw * sw / sw2;
    sum.n_samples = n;
    sum.events = events;
    out.push_back(std::move(sum));
  }
  return out;
}

}  // namespace pairorbit
