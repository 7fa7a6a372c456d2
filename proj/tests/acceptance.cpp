// Acceptance checks, one line per criterion. `acceptance --criterion N` runs one;
// without arguments all run. Exit status is 0 only if every selected check passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "CLI11.hpp"
#include "pairorbit/compactify.hpp"
#include "pairorbit/error.hpp"
#include "pairorbit/experiments.hpp"
#include "pairorbit/fixtures.hpp"
#include "pairorbit/io.hpp"
#include "pairorbit/measures.hpp"
#include "pairorbit/parallel.hpp"
#include "pairorbit/simulate.hpp"
#include "pairorbit/variational.hpp"

using namespace pairorbit;
using nlohmann::json;

namespace {

constexpr double pi = std::numbers::pi;

struct Options {
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// ---- generators ------------------------------------------------------------

AtomicMeasure random_cloud(std::mt19937_64& rng, int dim, std::size_t n, double spread, double mass) {
  std::normal_distribution<double> g(0.0, spread);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> c, w;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) c.push_back(g(rng));
    w.push_back(u(rng));
    total += w.back();
  }
  for (double& x : w) x *= mass / total;
  return AtomicMeasure(dim, c, w);
}

// Up to three pairs with total masses below 3/4 on each side.
OrbitCollection random_collection(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  OrbitCollection xi;
  xi.dim = 2;
  const int k = static_cast<int>(rng() % 4);
  for (int j = 0; j < k; ++j) {
    const double ma = u(rng) / 4, mb = u(rng) / 4;
    auto a = random_cloud(rng, 2, 1 + rng() % 5, 0.5 + 2 * u(rng), ma);
    auto b = random_cloud(rng, 2, 1 + rng() % 5, 0.5 + 2 * u(rng), mb);
    const double z[2] = {3 * u(rng) - 1.5, 3 * u(rng) - 1.5};
    xi.pairs.push_back({a, b.shifted(z), {z[0], z[1]}});
  }
  return xi;
}

// Positive radial profile: Gaussian envelope times a squared cosine series.
RadialProfile random_profile(std::mt19937_64& rng, double h, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> s(lo, hi), a(-0.4, 0.4);
  const double width = s(rng);
  const double c1 = a(rng), c2 = a(rng), c3 = a(rng);
  const double R = h * static_cast<double>(n);
  return RadialProfile::from_function(h, n, [&](double r) {
           const double x = r / R;
           const double mod = 1.0 + c1 * std::cos(pi * x) + c2 * std::cos(2 * pi * x) + c3 * std::cos(3 * pi * x);
           return std::exp(-r * r / (2 * width * width)) * mod * mod * (1.0 - x);
         })
      .normalized();
}

GridDensity gaussian_density_1d(double sigma, double h, double lo, double hi) {
  GridDescriptor g;
  g.dim = 1;
  g.spacing = h;
  g.origin = {lo};
  g.shape = {static_cast<std::size_t>(std::llround((hi - lo) / h)) + 1};
  std::vector<double> v(g.shape[0]);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = lo + h * static_cast<double>(i);
    v[i] = std::exp(-x * x / (2 * sigma * sigma)) / (sigma * std::sqrt(2 * pi));
  }
  return GridDensity(g, v);
}

// ---- criteria --------------------------------------------------------------

Verdict footnote_decomposition(const Options& o) {
  const auto s = FootnoteSamples::draw(3, 10000, o.seed);
  const auto m = footnote_measures(s, 50.0);
  const DecompositionParams p{3.0, 0.05, 4.0};
  const Stopwatch sw;
  const auto xi = match_pairs(decompose(m.mu, p), decompose(m.nu, p), 5.0);
  const double secs = sw.seconds();
  if (xi.pairs.size() != 1) return {false, fmt("pairs=%zu (want 1) runtime=%.2fs", xi.pairs.size(), secs)};
  const auto& pr = xi.pairs[0];
  double dz = 0.0;
  for (std::size_t k = 0; k < pr.relative_shift.size(); ++k)
    dz += std::pow(pr.relative_shift[k] - (k == 0 ? 1.0 : 0.0), 2);
  dz = std::sqrt(dz);
  const double ea = std::abs(pr.alpha.total_mass() - 1.0 / 3), eb = std::abs(pr.beta.total_mass() - 1.0 / 3);
  const bool ok = ea <= 0.03 && eb <= 0.03 && dz <= 0.15 && secs < 10.0;
  return {ok, fmt("atoms=%zu pairs=1 masses=(%.4f, %.4f) |z - e1|=%.4f runtime=%.2fs (limit 10s)", m.mu.size(),
                  pr.alpha.total_mass(), pr.beta.total_mass(), dz, secs)};
}

Verdict dv_rate_oracle(const Options&) {
  const auto g1 = gaussian_density_1d(1.0, 0.01, -10, 10);
  const double v = dv_rate(g1);
  const auto wide = gaussian_density_1d(1.0, 0.01, -15, 15);
  std::vector<double> moved(wide.values().size(), 0.0);
  for (std::size_t i = 137; i < moved.size(); ++i) moved[i] = wide.values()[i - 137];
  const double shift_err = std::abs(dv_rate(GridDensity(wide.grid(), moved)) - dv_rate(wide));
  double dil_err = 0.0;
  for (double sigma : {2.0, 3.0}) {
    const auto g = gaussian_density_1d(sigma, 0.01, -10 * sigma, 10 * sigma);
    dil_err = std::max(dil_err, rel(dv_rate(g), v / (sigma * sigma)));
  }
  const bool ok = rel(v, 0.125) <= 0.01 && shift_err <= 1e-10 && dil_err <= 0.01;
  return {ok, fmt("I=%.6f (oracle 0.125) shift_err=%.2e dilation_rel_err=%.2e", v, shift_err, dil_err)};
}

Verdict metric_axioms(const Options& o) {
  const auto family = default_family();
  std::mt19937_64 rng(o.seed);
  std::size_t bad_identity = 0, bad_symmetry = 0, bad_triangle = 0;
  double worst_slack = -1e300;
  for (int t = 0; t < 200; ++t) {
    const auto a = random_collection(rng), b = random_collection(rng), c = random_collection(rng);
    const double ab = metric_d(a, b, family, 18, o.threads).value;
    const double ba = metric_d(b, a, family, 18, o.threads).value;
    const double bc = metric_d(b, c, family, 18, o.threads).value;
    const double ac = metric_d(a, c, family, 18, o.threads).value;
    bad_identity += metric_d(a, a, family, 18, o.threads).value != 0.0;
    bad_symmetry += ab != ba;
    worst_slack = std::max(worst_slack, ac - ab - bc);
    bad_triangle += ac > ab + bc + 1e-12;
  }
  const json seq = experiments::run("footnote-convergence", json::object(), {o.seed, o.threads});
  std::string values;
  for (const auto& row : seq["sequence"]) values += fmt(" %g:%.6g", row["n"].get<double>(), row["metric"].get<double>());
  const bool ok = bad_identity == 0 && bad_symmetry == 0 && bad_triangle == 0 && seq["verdict"].get<bool>();
  return {ok, fmt("200 triples: identity/symmetry/triangle failures %zu/%zu/%zu (max ac-ab-bc %.2e); "
                  "escape sequence%s decreasing=%s",
                  bad_identity, bad_symmetry, bad_triangle, worst_slack, values.c_str(),
                  seq["verdict"].get<bool>() ? "yes" : "no")};
}

Verdict pekar_solver(const Options& o) {
  const auto cfg = SolverConfig::defaults(FunctionalKind::pekar);
  std::mt19937_64 rng(o.seed);
  const Stopwatch sw;
  std::vector<VariationalResult> runs;
  for (int k = 0; k < 5; ++k) runs.push_back(maximize(Functional::pekar(), cfg, random_profile(rng, cfg.h, cfg.n, 1.0, 8.0)));
  const double secs = sw.seconds();
  double lo = 1e300, hi = -1e300, worst_residual = 0.0;
  bool converged = true;
  for (const auto& r : runs) {
    lo = std::min(lo, r.objective);
    hi = std::max(hi, r.objective);
    worst_residual = std::max(worst_residual, r.residual);
    converged = converged && r.converged;
  }
  const double spread = (hi - lo) / std::abs(hi);

  // Central differences of the grid objective in 20 random directions.
  double worst_fd = 0.0;
  const auto psi = random_profile(rng, cfg.h, cfg.n, 1.0, 3.0);
  const auto og = objective_and_gradient(Functional::pekar(), psi);
  std::normal_distribution<double> z;
  for (int dir = 0; dir < 20; ++dir) {
    std::vector<double> v(cfg.n + 1, 0.0);
    for (std::size_t k = 1; k < cfg.n; ++k) v[k] = z(rng) * std::abs(psi[k]);
    v[0] = v[1];
    double analytic = 0.0;
    for (std::size_t k = 0; k <= cfg.n; ++k) analytic += og.gradient[k] * v[k];
    auto at = [&](double s) {
      std::vector<double> u = psi.values();
      for (std::size_t k = 0; k <= cfg.n; ++k) u[k] += s * v[k];
      return objective_and_gradient(Functional::pekar(), RadialProfile(cfg.h, u)).value;
    };
    const double step = 1e-4;
    const double fd = (at(step) - at(-step)) / (2 * step);
    worst_fd = std::max(worst_fd, rel(fd, analytic));
  }
  const double bound = 1.0 / (3.0 * pi) - 1e-4;
  const bool ok = converged && spread <= 1e-6 && worst_residual <= 1e-6 && lo >= bound && worst_fd <= 1e-5 &&
                  secs < 60.0 && cfg.n == 2000;
  return {ok, fmt("N=%zu objectives in [%.9f, %.9f] spread=%.2e max_residual=%.2e bound=%.6f fd_rel_err=%.2e "
                  "runtime=%.2fs (limit 60s)",
                  cfg.n, lo, hi, spread, worst_residual, bound, worst_fd, secs)};
}

Verdict superadditivity(const Options& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  std::size_t exact_fail = 0;
  for (int k = 0; k < 50; ++k) {
    // A and B drawn under the premise A (m1 + m2)^2 > B, which the inequality needs.
    const double m1 = u(rng), m2 = u(rng), B = u(rng);
    const double A = B / ((m1 + m2) * (m1 + m2)) * (1.0 + u(rng));
    exact_fail += !chi_scaling_exact(m1, m2, A, B).superadditive;
  }
  const double sigma = 0.02;
  const auto g = RadialProfile::gaussian(sigma / 100.0, 2000, sigma);
  std::uniform_real_distribution<double> mu(0.5, 1.5);
  std::size_t grid_fail = 0, grid_sup_fail = 0;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto rep = chi_scaling_check(g, mu(rng), mu(rng));
    grid_fail += !rep.grid_within_tolerance;
    grid_sup_fail += !rep.exact.superadditive;
    worst = std::max(worst, rep.max_grid_relative_error);
  }
  const bool ok = exact_fail == 0 && grid_fail == 0 && grid_sup_fail == 0;
  return {ok, fmt("exact: %zu/50 failures; grid (Gaussian sigma=%.2f, 10 mass pairs): %zu outside 1%%, "
                  "%zu not superadditive, max rel err %.2e",
                  exact_fail, sigma, grid_fail, grid_sup_fail, worst)};
}

Verdict intermittency(const Options& o) {
  const json r = experiments::run("intermittency-ordering", json::object(), {o.seed, o.threads});
  std::string ms;
  for (const auto& row : r["moments"])
    ms += row["clipped"].get<bool>()
              ? fmt(" m%d=%.6g (clipped; grid sup %.4g)", row["p"].get<int>(), row["m_p"].get<double>(),
                    row["grid_objective"].get<double>())
              : fmt(" m%d=%.6g", row["p"].get<int>(), row["m_p"].get<double>());
  std::string gs;
  for (const auto& g : r["gaps"]) gs += fmt(" %.3g", g.get<double>());
  return {r["verdict"].get<bool>() && r["converged"].get<bool>(),
          fmt("%s gaps m_{p+1}/(p+1) - m_p/p:%s (need > 1e-4)", ms.c_str(), gs.c_str())};
}

Verdict product_reduction(const Options& o) {
  std::mt19937_64 rng(o.seed);
  const auto V = Functional::default_pam_kernel();
  std::size_t failures = 0;
  double worst = -1e300;
  for (int k = 0; k < 100; ++k) {
    const auto psi = random_profile(rng, 0.02, 600, 0.5, 4.0);
    const auto phi = random_profile(rng, 0.02, 600, 0.5, 4.0);
    for (const auto& side : pekar_product_reduction_check(psi, phi, V)) {
      failures += !side.holds;
      worst = std::max(worst, side.lhs - side.rhs);
    }
  }
  return {failures == 0, fmt("100 pairs x {coulomb, phi*phi}: %zu failures, max lhs - rhs = %.3e (slack 1e-10)",
                             failures, worst)};
}

// int_0^1 int_0^1 E[V_eps(G_{a+b})] da db with V_eps ~ N(0, 2 eps^2 I) density;
// the cut at 6 eps moves it by less than 1e-7.
double intersection_oracle(double eps) {
  using boost::math::quadrature::gauss;
  auto inner = [&](double a) {
    return gauss<double, 30>::integrate(
        [&](double b) { return std::pow(2 * pi * (2 * eps * eps + a + b), -1.5); }, 0.0, 1.0);
  };
  return gauss<double, 30>::integrate(inner, 0.0, 1.0);
}

Verdict intersection_mass_oracle(const Options& o) {
  const double eps = 0.5, dt = 1e-3;
  const auto spec = MollifierSpec::gaussian(eps);
  const double oracle = intersection_oracle(eps);
  const std::size_t n = 10000;
  std::vector<double> l(n);
  const double origin[3] = {0, 0, 0};
  parallel_for(n, o.threads, [&](std::size_t r) {
    RngStream rng(o.seed, r);
    const auto a = sample_path(3, 1.0, dt, origin, rng);
    const auto b = sample_path(3, 1.0, dt, origin, rng);
    l[r] = intersection_mass(a, b, spec);
  });
  double mean = 0.0;
  for (double x : l) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : l) var += (x - mean) * (x - mean);
  const double se = std::sqrt(var / (n - 1) / n);
  double worst_grid = 0.0;
  for (std::uint64_t r = 0; r < 3; ++r) {
    RngStream rng(o.seed + 1000003, r);
    const auto a = sample_path(3, 1.0, dt, origin, rng);
    const auto b = sample_path(3, 1.0, dt, origin, rng);
    worst_grid = std::max(worst_grid, rel(intersection_mass_grid(a, b, spec, eps / 4), intersection_mass(a, b, spec)));
  }
  const double z = (mean - oracle) / se;
  const bool ok = std::abs(z) <= 4.0 && worst_grid <= 0.01;
  return {ok, fmt("mean=%.6f se=%.2e oracle=%.6f z=%.2f (|z| <= 4); grid vs kernel max rel err %.2e (<= 1%%)", mean,
                  se, oracle, z, worst_grid)};
}

Verdict pam_trend(const Options& o) {
  const Stopwatch sw;
  const json r = experiments::run("pam-mc-vs-variational", json::object(), {o.seed, o.threads});
  const double secs = sw.seconds();
  std::string rows;
  for (const auto& row : r["sweep"])
    rows += fmt(" eps=%.1f:%.5f+-%.1e", row["epsilon"].get<double>(), row["estimate"]["value"].get<double>(),
                row["estimate"]["std_error"].get<double>());
  const auto& relgap = r["reference_relative_gap"];
  const std::string relstr = relgap.is_null() ? "undefined (m1 = 0)" : fmt("%.3f", relgap.get<double>());
  const bool ok = r["verdict"].get<bool>() && secs < 900.0;
  return {ok, fmt("MC%s; variational m1=%.6g%s; relative gap at 0.4 %s (<= 0.30); gap nonincreasing=%s; "
                  "runtime=%.0fs (limit 900s)",
                  rows.c_str(), r["variational_m1"].get<double>(),
                  r["variational_clipped"].get<bool>() ? " (clipped)" : "", relstr.c_str(),
                  r["gap_nonincreasing"].get<bool>() ? "yes" : "no", secs)};
}

Verdict localization(const Options& o) {
  const json r = experiments::run("gibbs-localization", json::object(), {o.seed, o.threads});
  std::string rows;
  for (const auto& s : r["models"])
    rows += fmt(" %s: weighted=%.4f unweighted=%.4f z=%.2f ess=%.0f;", s["model"].get<std::string>().c_str(),
                s["weighted_frequency"].get<double>(), s["unweighted_frequency"].get<double>(),
                s["z_score"].get<double>(), s["ess"].get<double>());
  return {r["verdict"].get<bool>(), fmt("%s n=%d (need z > 3)", rows.c_str(), r["params"]["samples"].get<int>())};
}

Verdict determinism(const Options& o) {
  // Reduced sizes keep the reruns short; each pipeline runs at one and at two workers.
  const std::map<std::string, json> reduced{
      {"intermittency-ordering", json::object()},
      {"pam-mc-vs-variational", {{"samples", 200}}},
      {"gibbs-localization", {{"samples", 200}, {"dt", 0.02}}},
      {"footnote-convergence", {{"per_component", 300}, {"n", {10, 20}}}},
  };
  std::string detail;
  bool all = true;
  for (const auto& name : experiments::names()) {
    const json& ov = reduced.at(name);
    const std::string a = io::dump(experiments::run(name, ov, {o.seed, 1}));
    const std::string b = io::dump(experiments::run(name, ov, {o.seed, 2}));
    const bool same = a == b;
    all = all && same;
    detail += fmt(" %s:%s(%zu bytes)", name.c_str(), same ? "identical" : "DIFFERENT", a.size());
  }
  return {all, detail.substr(1)};
}

struct Entry {
  const char* title;
  Verdict (*run)(const Options&);
};

const std::map<int, Entry>& criteria() {
  static const std::map<int, Entry> c{
      {1, {"escape-sequence decomposition", footnote_decomposition}},
      {2, {"Donsker-Varadhan rate oracle", dv_rate_oracle}},
      {3, {"metric axioms and escape sequence", metric_axioms}},
      {4, {"Pekar solver", pekar_solver}},
      {5, {"superadditivity algebra", superadditivity}},
      {6, {"intermittency ordering", intermittency}},
      {7, {"positive-definite product reduction", product_reduction}},
      {8, {"intersection-mass oracle", intersection_mass_oracle}},
      {9, {"PAM MC vs variational trend", pam_trend}},
      {10, {"Gibbs localization trend", localization}},
      {11, {"determinism", determinism}},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  Options o;
  app.add_option("--criterion", selected, "Criterion number (repeatable); default all");
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--threads", o.threads, "0 = all cores");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (const auto& [k, _] : criteria()) selected.push_back(k);

  bool all = true;
  for (int k : selected) {
    const auto it = criteria().find(k);
    if (it == criteria().end()) {
      std::printf("criterion %d FAIL unknown criterion\n", k);
      all = false;
      continue;
    }
    Verdict v;
    try {
      v = it->second.run(o);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d %s %s: %s\n", k, v.pass ? "PASS" : "FAIL", it->second.title, v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
