#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pairorbit/compactify.hpp"
#include "pairorbit/error.hpp"
#include "pairorbit/experiments.hpp"
#include "pairorbit/fixtures.hpp"
#include "pairorbit/io.hpp"
#include "pairorbit/simulate.hpp"
#include "pairorbit/variational.hpp"

#ifndef PAIRORBIT_VERSION
#define PAIRORBIT_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace pairorbit;
using io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitInput = 2;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::io, "cannot reopen '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) == 1, ErrorKind::io,
          "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

void emit_error(const std::string& kind, const std::string& message, int status) {
  const json j{{"error", {{"kind", kind}, {"message", message}}}, {"exit_status", status}};
  std::cerr << j.dump() << std::endl;
}

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = ".";
};

/// What a subcommand produced: the result document, extra files it already
/// wrote, and the exit status it asks for.
struct Outcome {
  json result;
  std::vector<fs::path> extra_files;
  int status = kExitOk;
  json summary = json::object();  // headline values repeated in the manifest
};

class Run {
 public:
  Run(const Globals& g, std::vector<std::string> argv) : globals_(g), argv_(std::move(argv)), started_(utc_now()) {}

  /// `out` relative paths live under --out-dir; the default is <out-dir>/<stem>.json.
  fs::path output_path(const std::string& out, const std::string& default_stem) const {
    fs::path p = out.empty() ? fs::path(default_stem + ".json") : fs::path(out);
    if (p.is_relative()) p = fs::path(globals_.out_dir) / p;
    return p;
  }

  int finish(const std::string& command, const fs::path& result_path, Outcome outcome) {
    fs::create_directories(result_path.parent_path().empty() ? fs::path(".") : result_path.parent_path());
    json& r = outcome.result;
    r["command"] = command;
    r["version"] = PAIRORBIT_VERSION;
    if (!r.contains("seed")) r["seed"] = globals_.seed;
    io::write_text(result_path.string(), io::dump(r));

    json outputs = json::array();
    std::vector<fs::path> files{result_path};
    files.insert(files.end(), outcome.extra_files.begin(), outcome.extra_files.end());
    for (const auto& f : files)
      outputs.push_back({{"path", f.filename().string()}, {"sha256", sha256_file(f)}, {"bytes", fs::file_size(f)}});
    const json manifest{{"argv", argv_},
                        {"command", command},
                        {"params", r.value("params", json::object())},
                        {"seeds", {r["seed"]}},
                        {"threads", globals_.threads},
                        {"version", PAIRORBIT_VERSION},
                        {"started_at", started_},
                        {"finished_at", utc_now()},
                        {"outputs", outputs},
                        {"summary", outcome.summary},
                        {"exit_status", outcome.status}};
    fs::path mpath = result_path;
    mpath.replace_extension("").concat(".manifest.json");
    io::write_text(mpath.string(), io::dump(manifest));
    std::cout << result_path.string() << "\n";
    return outcome.status;
  }

  const Globals& globals() const { return globals_; }

 private:
  Globals globals_;
  std::vector<std::string> argv_;
  std::string started_;
};

Decomposition load_decomposition(const std::string& path) {
  const json j = io::read_json(path);
  return io::decomposition_from_json(j.contains("decomposition") ? j.at("decomposition") : j);
}

json parse_param_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);  // bare words are strings
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Pair-orbit compactification, Gibbs path models and radial variational solvers"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base seed for every random stream")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores); results do not depend on it");
  app.add_option("--out-dir", g.out_dir, "Directory for outputs and manifests")->capture_default_str();

  std::string out;
  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", out, "Result JSON path (relative to --out-dir)"); };

  // fixture
  auto* fixture = app.add_subcommand("fixture", "Write the three-Gaussian escape measures as CSV atom tables");
  double fx_n = 50.0;
  std::size_t fx_per = 10000;
  std::string fx_stem = "footnote";
  fixture->add_option("--n", fx_n, "Escape scale n")->capture_default_str();
  fixture->add_option("--per-component", fx_per, "Atoms per Gaussian component")->capture_default_str();
  fixture->add_option("--stem", fx_stem, "File stem for <stem>_mu.csv and <stem>_nu.csv")->capture_default_str();
  add_out(fixture);

  // decompose
  auto* decompose_cmd = app.add_subcommand("decompose", "Greedy decomposition of an atom table");
  std::string dc_input, dc_partner;
  double dc_window = 0.0, dc_floor = 0.05, dc_sep = 4.0, dc_match = 5.0;
  decompose_cmd->add_option("--input", dc_input, "CSV atom table")->required();
  decompose_cmd->add_option("--partner", dc_partner, "Second CSV; decomposes it too and matches the pair");
  decompose_cmd->add_option("--window-radius", dc_window, "r (0 = 3 x median nearest-neighbour distance)");
  decompose_cmd->add_option("--mass-floor", dc_floor, "tau")->capture_default_str();
  decompose_cmd->add_option("--separation-factor", dc_sep, "s; atoms within s r of a center are peeled")
      ->capture_default_str();
  decompose_cmd->add_option("--match-radius", dc_match, "D for --partner matching")->capture_default_str();
  add_out(decompose_cmd);

  // match
  auto* match_cmd = app.add_subcommand("match", "Match two decompositions into an orbit collection");
  std::string mt_a, mt_b;
  double mt_radius = 5.0;
  match_cmd->add_option("--a", mt_a, "Decomposition JSON (or a decompose result)")->required();
  match_cmd->add_option("--b", mt_b, "Decomposition JSON (or a decompose result)")->required();
  match_cmd->add_option("--match-radius", mt_radius, "D")->capture_default_str();
  add_out(match_cmd);

  // solve
  auto* solve = app.add_subcommand("solve", "Radial variational solver");
  std::string sv_positional, sv_functional;
  int sv_p = 1;
  double sv_mass = 1.0, sv_h = 0.0, sv_tol = 0.0, sv_phi = 1.0, sv_amp = 1.0;
  std::size_t sv_n = 0, sv_iter = 0;
  solve->add_option("name", sv_positional, "chi, pekar or pam");
  solve->add_option("--functional", sv_functional, "chi, pekar or pam");
  solve->add_option("--p", sv_p, "PAM moment order")->capture_default_str();
  solve->add_option("--mass", sv_mass, "Mass constraint")->capture_default_str();
  solve->add_option("--grid-n", sv_n, "Grid intervals (default per functional)");
  solve->add_option("--grid-h", sv_h, "Grid spacing (default per functional)");
  solve->add_option("--tol", sv_tol, "Residual tolerance (default 1e-6)");
  solve->add_option("--max-iterations", sv_iter, "Iteration cap");
  solve->add_option("--phi-eps", sv_phi, "PAM: width of phi in V = phi * phi")->capture_default_str();
  solve->add_option("--amplitude", sv_amp, "PAM: multiplier on V")->capture_default_str();
  add_out(solve);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo log partition function of a Gibbs model");
  std::string sm_model;
  double sm_t = 1.0, sm_dt = 0.0, sm_eps = 0.0, sm_delta = 0.0, sm_phi = 1.0;
  int sm_p = 1;
  std::size_t sm_samples = 1000;
  simulate->add_option("--model", sm_model, "zero, dirac-mollified, coulomb or pam")->required();
  simulate->add_option("--t", sm_t, "Horizon (ignored for pam, which uses eps^-2)")->capture_default_str();
  simulate->add_option("--dt", sm_dt, "Time step (0 = min(eps^2/10, t/1000); pam: unit-horizon step)");
  simulate->add_option("--eps", sm_eps, "Mollifier width (dirac-mollified) or PAM scale");
  simulate->add_option("--delta", sm_delta, "Coulomb regularization");
  simulate->add_option("--p", sm_p, "PAM path count")->capture_default_str();
  simulate->add_option("--phi-eps", sm_phi, "PAM: width of phi")->capture_default_str();
  simulate->add_option("--samples", sm_samples, "Replicas")->capture_default_str();
  add_out(simulate);

  // moments
  auto* moments = app.add_subcommand("moments", "PAM moment estimates eps^2 log m_p(eps, 0), p = 1..p-max");
  int mo_pmax = 3;
  double mo_eps = 0.5, mo_dt = 0.0, mo_phi = 1.0;
  std::size_t mo_samples = 1000, mo_budget = kDefaultStepBudget;
  moments->add_option("--p-max", mo_pmax, "Largest moment order")->capture_default_str();
  moments->add_option("--eps", mo_eps, "Scale eps")->capture_default_str();
  moments->add_option("--dt", mo_dt, "Unit-horizon step (0 = default)");
  moments->add_option("--phi-eps", mo_phi, "Width of phi")->capture_default_str();
  moments->add_option("--samples", mo_samples, "Replicas")->capture_default_str();
  moments->add_option("--step-budget", mo_budget, "Largest admissible path length")->capture_default_str();
  add_out(moments);

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run a scripted pipeline");
  std::string ex_name;
  std::vector<std::string> ex_params;
  experiment->add_option("name", ex_name, "Pipeline name")->required();
  experiment->add_option("--param", ex_params, "Override key=value (value parsed as JSON)");
  add_out(experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what(), kExitInput);
    return kExitInput;
  }

  Run run(g, args);
  try {
    if (*fixture) {
      const auto s = FootnoteSamples::draw(3, fx_per, g.seed);
      const auto m = footnote_measures(s, fx_n);
      const fs::path res = run.output_path(out, fx_stem);
      fs::create_directories(res.parent_path().empty() ? fs::path(".") : res.parent_path());
      const fs::path mu = res.parent_path() / (fx_stem + "_mu.csv");
      const fs::path nu = res.parent_path() / (fx_stem + "_nu.csv");
      io::write_measure_csv(mu.string(), m.mu);
      io::write_measure_csv(nu.string(), m.nu);
      Outcome o;
      o.result = {{"params", {{"n", fx_n}, {"per_component", fx_per}}},
                  {"mu", {{"path", mu.filename().string()}, {"atoms", m.mu.size()}, {"mass", m.mu.total_mass()}}},
                  {"nu", {{"path", nu.filename().string()}, {"atoms", m.nu.size()}, {"mass", m.nu.total_mass()}}}};
      o.extra_files = {mu, nu};
      return run.finish("fixture", res, std::move(o));
    }
    if (*decompose_cmd) {
      // Atoms are read before parameters are checked so malformed tables report as io errors.
      const DecompositionParams params{dc_window, dc_floor, dc_sep};
      const auto mu = io::read_measure_csv(dc_input);
      Outcome o;
      const auto da = decompose(mu, params);
      json p{{"input", fs::path(dc_input).filename().string()}, {"decomposition", io::to_json(da.params)}};
      o.result["decomposition"] = io::to_json(da);
      if (!dc_partner.empty()) {
        const auto nu = io::read_measure_csv(dc_partner);
        const auto db = decompose(nu, da.params);
        o.result["partner_decomposition"] = io::to_json(db);
        o.result["orbit_collection"] = io::to_json(match_pairs(da, db, dc_match));
        p["partner"] = fs::path(dc_partner).filename().string();
        p["match_radius"] = dc_match;
      }
      o.result["params"] = p;
      return run.finish("decompose", run.output_path(out, "decompose"), std::move(o));
    }
    if (*match_cmd) {
      const auto xi = match_pairs(load_decomposition(mt_a), load_decomposition(mt_b), mt_radius);
      Outcome o;
      o.result = {{"params", {{"a", fs::path(mt_a).filename().string()},
                              {"b", fs::path(mt_b).filename().string()},
                              {"match_radius", mt_radius}}},
                  {"orbit_collection", io::to_json(xi)}};
      return run.finish("match", run.output_path(out, "match"), std::move(o));
    }
    if (*solve) {
      require(sv_positional.empty() || sv_functional.empty() || sv_positional == sv_functional,
              ErrorKind::invalid_argument, "functional given twice with different values");
      const std::string name = !sv_functional.empty() ? sv_functional : sv_positional;
      require(!name.empty(), ErrorKind::invalid_argument, "solve needs a functional (chi, pekar or pam)");
      const FunctionalKind kind = functional_kind_from_string(name);
      SolverConfig cfg = SolverConfig::defaults(kind);
      cfg.mass = sv_mass;
      if (sv_n) cfg.n = sv_n;
      if (sv_h > 0) cfg.h = sv_h;
      if (sv_tol > 0) cfg.residual_tol = sv_tol;
      if (sv_iter) cfg.max_iterations = sv_iter;
      const Functional f = kind == FunctionalKind::chi     ? Functional::chi()
                           : kind == FunctionalKind::pekar ? Functional::pekar()
                                                           : Functional::pam(sv_p, experiments::pam_kernel(sv_phi, sv_amp));
      const auto r = maximize(f, cfg);
      Outcome o;
      json p{{"functional", name}, {"solver", io::to_json(cfg)}};
      if (kind == FunctionalKind::pam) {
        p["p"] = sv_p;
        p["phi_eps"] = sv_phi;
        p["amplitude"] = sv_amp;
      }
      o.result = {{"params", p}, {"result", io::to_json(r)}, {"converged", r.converged}};
      o.status = r.converged ? kExitOk : kExitNumerical;
      o.summary = {{"objective", r.objective}, {"residual", r.residual}, {"converged", r.converged},
                   {"iterations", r.iterations}};
      return run.finish("solve", run.output_path(out, "solve"), std::move(o));
    }
    if (*simulate) {
      GibbsModel model;
      json p{{"model", sm_model}, {"samples", sm_samples}};
      if (sm_model == "zero") {
        model = GibbsModel::zero(sm_t, 2, sm_dt);
        p["t"] = sm_t;
      } else if (sm_model == "dirac-mollified") {
        require(sm_eps > 0, ErrorKind::invalid_argument, "dirac-mollified needs --eps > 0");
        model = GibbsModel::dirac_mollified(sm_t, MollifierSpec::gaussian(sm_eps), sm_dt);
        p["t"] = sm_t;
        p["eps"] = sm_eps;
      } else if (sm_model == "coulomb") {
        model = GibbsModel::coulomb(sm_t, sm_delta, sm_dt);
        p["t"] = sm_t;
        p["delta"] = sm_delta;
      } else if (sm_model == "pam") {
        require(sm_eps > 0, ErrorKind::invalid_argument, "pam needs --eps > 0");
        model = GibbsModel::pam(sm_p, sm_eps, MollifierSpec::gaussian(sm_phi), sm_dt);
        p["eps"] = sm_eps;
        p["p"] = sm_p;
        p["phi_eps"] = sm_phi;
      } else {
        throw Error(ErrorKind::invalid_argument, "unknown model '" + sm_model + "'");
      }
      p["dt"] = model.dt;
      p["horizon"] = model.horizon;
      const auto est = estimate_log_partition(model, {sm_samples, g.seed, g.threads});
      Outcome o;
      o.result = {{"params", p}, {"model", model.describe()}, {"estimate", io::to_json(est)}};
      return run.finish("simulate", run.output_path(out, "simulate"), std::move(o));
    }
    if (*moments) {
      require(mo_pmax >= 1, ErrorKind::invalid_argument, "--p-max must be >= 1");
      json rows = json::array();
      for (int k = 1; k <= mo_pmax; ++k) {
        PamMomentConfig cfg;
        cfg.p = k;
        cfg.epsilon = mo_eps;
        cfg.phi = MollifierSpec::gaussian(mo_phi);
        cfg.dt = mo_dt;
        cfg.step_budget = mo_budget;
        const auto est = estimate_pam_moment(cfg, {mo_samples, g.seed, g.threads});
        rows.push_back({{"p", k}, {"estimate", io::to_json(est)}, {"per_path", est.value / k}});
      }
      Outcome o;
      o.result = {{"params", {{"p_max", mo_pmax}, {"eps", mo_eps}, {"dt", mo_dt}, {"phi_eps", mo_phi},
                              {"samples", mo_samples}, {"step_budget", mo_budget}}},
                  {"moments", rows}};
      return run.finish("moments", run.output_path(out, "moments"), std::move(o));
    }
    if (*experiment) {
      json overrides = json::object();
      for (const auto& kv : ex_params) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos && eq > 0, ErrorKind::invalid_argument, "--param expects key=value, got '" + kv + "'");
        overrides[kv.substr(0, eq)] = parse_param_value(kv.substr(eq + 1));
      }
      // Validate the name before any work so unknown pipelines fail fast.
      experiments::default_params(ex_name);
      Outcome o;
      o.result = experiments::run(ex_name, overrides, {g.seed, g.threads});
      const bool converged = o.result.value("converged", true);
      o.status = converged && o.result.at("verdict").get<bool>() ? kExitOk : kExitNumerical;
      o.summary = {{"verdict", o.result.at("verdict")}, {"converged", converged}};
      return run.finish("experiment", run.output_path(out, ex_name), std::move(o));
    }
  } catch (const Error& e) {
    const int status = e.kind() == ErrorKind::non_finite ? kExitNumerical : kExitInput;
    emit_error(to_string(e.kind()), e.what(), status);
    return status;
  } catch (const fs::filesystem_error& e) {
    emit_error("io", e.what(), kExitInput);
    return kExitInput;
  } catch (const std::exception& e) {
    emit_error("internal", e.what(), kExitNumerical);
    return kExitNumerical;
  }
  return kExitInput;
}
