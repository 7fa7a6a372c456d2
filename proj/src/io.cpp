#include "pairorbit/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pairorbit/error.hpp"

namespace pairorbit::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, const std::string& where) {
  const std::string f = trim(field);
  double v = 0.0;
  const auto* end = f.data() + f.size();
  const auto [ptr, ec] = std::from_chars(f.data(), end, v);
  require(ec == std::errc() && ptr == end && !f.empty(), ErrorKind::io, where + ": not a number: '" + f + "'");
  return v;
}

template <typename T>
T get(const json& j, const char* key) {
  require(j.is_object() && j.contains(key), ErrorKind::io, std::string("missing JSON field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io, std::string("bad JSON field '") + key + "': " + e.what());
  }
}

}  // namespace

AtomicMeasure parse_measure_csv(std::istream& in, const std::string& source) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::io, source + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  require(header.size() >= 2, ErrorKind::io, source + ": header must be x1,...,xd,weight");
  const int d = static_cast<int>(header.size()) - 1;
  for (int k = 0; k < d; ++k)
    require(trim(header[k]) == "x" + std::to_string(k + 1), ErrorKind::io,
            source + ": header must be x1,...,xd,weight");
  require(trim(header.back()) == "weight", ErrorKind::io, source + ": header must end with 'weight'");
  AtomicMeasure m(d);
  std::vector<double> x(d);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::string where = source + ":" + std::to_string(row);
    require(fields.size() == header.size(), ErrorKind::io, where + ": expected " + std::to_string(d + 1) + " fields");
    for (int k = 0; k < d; ++k) x[k] = parse_double(fields[k], where);
    const double w = parse_double(fields.back(), where);
    try {
      m.push_back(x, w);
    } catch (const Error& e) {
      throw Error(ErrorKind::io, where + ": " + e.what());
    }
  }
  require(!m.empty(), ErrorKind::io, source + ": no atoms");
  return m;
}

AtomicMeasure read_measure_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open '" + path + "'");
  return parse_measure_csv(in, path);
}

void write_measure_csv(std::ostream& out, const AtomicMeasure& m) {
  for (int k = 0; k < m.dim(); ++k) out << 'x' << (k + 1) << ',';
  out << "weight\n";
  char buf[64];
  auto put = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, r.ptr - buf);
  };
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (double c : m.location(i)) {
      put(c);
      out << ',';
    }
    put(m.weight(i));
    out << '\n';
  }
}

void write_measure_csv(const std::string& path, const AtomicMeasure& m) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io, "cannot write '" + path + "'");
  write_measure_csv(out, m);
}

json to_json(const AtomicMeasure& m) {
  json coords = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto loc = m.location(i);
    coords.push_back(std::vector<double>(loc.begin(), loc.end()));
  }
  return {{"dim", m.dim()}, {"coords", coords}, {"weights", m.weights()}, {"total_mass", m.total_mass()}};
}

AtomicMeasure measure_from_json(const json& j) {
  const int d = get<int>(j, "dim");
  const auto coords = get<std::vector<std::vector<double>>>(j, "coords");
  const auto weights = get<std::vector<double>>(j, "weights");
  require(coords.size() == weights.size(), ErrorKind::io, "atom table has mismatched coords and weights");
  std::vector<double> flat;
  for (const auto& c : coords) {
    require(static_cast<int>(c.size()) == d, ErrorKind::io, "atom has the wrong dimension");
    flat.insert(flat.end(), c.begin(), c.end());
  }
  return AtomicMeasure(d, std::move(flat), weights);
}

json to_json(const GridDensity& g) {
  const auto& gd = g.grid();
  return {{"dim", gd.dim}, {"spacing", gd.spacing}, {"origin", gd.origin}, {"shape", gd.shape}, {"values", g.values()}};
}

GridDensity grid_density_from_json(const json& j) {
  GridDescriptor gd;
  gd.dim = get<int>(j, "dim");
  gd.spacing = get<double>(j, "spacing");
  gd.origin = get<std::vector<double>>(j, "origin");
  gd.shape = get<std::vector<std::size_t>>(j, "shape");
  return GridDensity(gd, get<std::vector<double>>(j, "values"));
}

json to_json(const DecompositionParams& p) {
  return {{"window_radius", p.window_radius}, {"mass_floor", p.mass_floor}, {"separation_factor", p.separation_factor}};
}

json to_json(const Decomposition& d) {
  json comps = json::array();
  for (const auto& c : d.components)
    comps.push_back({{"center", c.center},
                     {"mass", c.mass},
                     {"atom_count", c.atoms.size()},
                     {"indices", c.indices},
                     {"atoms", to_json(c.atoms)}});
  return {{"dim", d.dim},
          {"components", comps},
          {"dust_mass", d.dust_mass},
          {"input_mass", d.input_mass},
          {"params", to_json(d.params)}};
}

Decomposition decomposition_from_json(const json& j) {
  Decomposition d;
  d.dim = get<int>(j, "dim");
  d.dust_mass = get<double>(j, "dust_mass");
  d.input_mass = get<double>(j, "input_mass");
  const json& p = get<json>(j, "params");
  d.params.window_radius = get<double>(p, "window_radius");
  d.params.mass_floor = get<double>(p, "mass_floor");
  d.params.separation_factor = get<double>(p, "separation_factor");
  for (const auto& c : get<json>(j, "components")) {
    Component comp;
    comp.center = get<std::vector<double>>(c, "center");
    comp.mass = get<double>(c, "mass");
    comp.indices = get<std::vector<std::size_t>>(c, "indices");
    comp.atoms = measure_from_json(get<json>(c, "atoms"));
    require(static_cast<int>(comp.center.size()) == d.dim && comp.atoms.dim() == d.dim, ErrorKind::io,
            "component has the wrong dimension");
    d.components.push_back(std::move(comp));
  }
  return d;
}

json to_json(const OrbitCollection& xi) {
  json pairs = json::array();
  for (const auto& p : xi.pairs)
    pairs.push_back({{"relative_shift", p.relative_shift},
                     {"alpha_mass", p.alpha.total_mass()},
                     {"beta_mass", p.beta.total_mass()},
                     {"alpha", to_json(p.alpha)},
                     {"beta", to_json(p.beta)}});
  return {{"dim", xi.dim}, {"pairs", pairs}, {"alpha_mass", xi.alpha_mass()}, {"beta_mass", xi.beta_mass()}};
}

OrbitCollection orbit_collection_from_json(const json& j) {
  OrbitCollection xi;
  xi.dim = get<int>(j, "dim");
  for (const auto& p : get<json>(j, "pairs"))
    xi.pairs.push_back({measure_from_json(get<json>(p, "alpha")), measure_from_json(get<json>(p, "beta")),
                        get<std::vector<double>>(p, "relative_shift")});
  return xi;
}

json to_json(const MCEstimate& e) {
  return {{"value", e.value},
          {"std_error", e.std_error},
          {"n_samples", e.n_samples},
          {"seed", e.seed},
          {"log_domain", e.log_domain},
          {"ess", e.ess},
          {"mean_log_weight", e.mean_log_weight}};
}

json to_json(const LocalizationSummary& s) {
  return {{"model", s.model},
          {"weighted_frequency", s.weighted_frequency},
          {"unweighted_frequency", s.unweighted_frequency},
          {"difference", s.difference},
          {"std_error", s.std_error},
          {"z_score", s.z_score},
          {"ess", s.ess},
          {"n_samples", s.n_samples},
          {"events", s.events}};
}

json to_json(const SolverConfig& c) {
  return {{"h", c.h},
          {"n", c.n},
          {"max_iterations", c.max_iterations},
          {"objective_tol", c.objective_tol},
          {"residual_tol", c.residual_tol},
          {"mass", c.mass},
          {"initial_step", c.initial_step},
          {"min_step", c.min_step}};
}

json to_json(const VariationalResult& r, std::size_t max_samples) {
  const std::size_t n = r.profile.n();
  const std::size_t stride = std::max<std::size_t>(1, (n + max_samples - 1) / std::max<std::size_t>(1, max_samples - 1));
  json radii = json::array(), values = json::array();
  for (std::size_t i = 0; i <= n; i += stride) {
    radii.push_back(r.profile.h() * static_cast<double>(i));
    values.push_back(r.profile[i]);
  }
  return {{"functional", r.functional},
          {"objective", r.objective},
          {"grid_objective", r.grid_objective},
          {"interaction", r.terms.interaction},
          {"kinetic", r.terms.kinetic},
          {"residual", r.residual},
          {"multiplier", r.multiplier},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"regularized", r.regularized},
          {"clipped", r.clipped},
          {"profile", {{"r", radii}, {"u", values}, {"mass", r.profile.mass()}}},
          {"config", to_json(r.config)}};
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io, path + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io, "cannot write '" + path + "'");
  out << text;
  require(out.good(), ErrorKind::io, "write failed for '" + path + "'");
}

}  // namespace pairorbit::io
