#include <random>
#include <sstream>

#include "doctest.h"
#include "pairorbit/error.hpp"
#include "pairorbit/experiments.hpp"
#include "pairorbit/fixtures.hpp"
#include "pairorbit/io.hpp"

using namespace pairorbit;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::string& csv) {
  std::istringstream in(csv);
  try {
    io::parse_measure_csv(in);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::invalid_argument;
}

}  // namespace

TEST_CASE("measure csv") {
  SUBCASE("parses header, rows, blank lines and CRLF") {
    std::istringstream in("x1,x2,weight\r\n0.5, -1,0.25\n\n3,4e-3,0.75\n");
    const auto m = io::parse_measure_csv(in);
    REQUIRE(m.size() == 2);
    CHECK(m.dim() == 2);
    CHECK(m.location(0)[1] == -1.0);
    CHECK(m.location(1)[1] == 4e-3);
    CHECK(m.total_mass() == 1.0);
  }
  SUBCASE("round trip is exact") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    AtomicMeasure m(3);
    for (int i = 0; i < 100; ++i) {
      const double x[3] = {g(rng), g(rng) * 1e-7, g(rng) * 1e9};
      m.push_back(x, std::abs(g(rng)) / 100);
    }
    std::stringstream ss;
    io::write_measure_csv(ss, m);
    const auto back = io::parse_measure_csv(ss);
    CHECK(back.weights() == m.weights());
    for (std::size_t i = 0; i < m.size(); ++i)
      for (int k = 0; k < 3; ++k) CHECK(back.location(i)[k] == m.location(i)[k]);
  }
  SUBCASE("malformed input is an io error") {
    CHECK(kind_of("") == ErrorKind::io);
    CHECK(kind_of("x1,x2,weight\n") == ErrorKind::io);
    CHECK(kind_of("x1,weight\n1,zero\n") == ErrorKind::io);
    CHECK(kind_of("x1,weight\n1\n") == ErrorKind::io);
    CHECK(kind_of("x1,weight\n1,2,3\n") == ErrorKind::io);
    CHECK(kind_of("a,b,weight\n1,2,3\n") == ErrorKind::io);
    CHECK(kind_of("x1,x2,mass\n1,2,3\n") == ErrorKind::io);
    CHECK(kind_of("x1,weight\n1,-0.5\n") == ErrorKind::io);
    CHECK(kind_of("x1,weight\n1,0.5x\n") == ErrorKind::io);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(io::read_measure_csv("/nonexistent/dir/m.csv"), Error);
  }
}

TEST_CASE("json round trips") {
  const auto s = FootnoteSamples::draw(3, 400, 3);
  const auto m = footnote_measures(s, 20.0);
  const DecompositionParams p{2.0, 0.05, 4.0};
  const auto da = decompose(m.mu, p), db = decompose(m.nu, p);

  SUBCASE("decomposition") {
    const auto back = io::decomposition_from_json(json::parse(io::to_json(da).dump()));
    CHECK(io::dump(io::to_json(back)) == io::dump(io::to_json(da)));
    // Matching from the restored decompositions reproduces the collection.
    const auto xi = match_pairs(da, db, 2.5);
    const auto xi2 = match_pairs(back, io::decomposition_from_json(io::to_json(db)), 2.5);
    CHECK(io::dump(io::to_json(xi)) == io::dump(io::to_json(xi2)));
  }
  SUBCASE("orbit collection") {
    const auto xi = match_pairs(da, db, 2.5);
    REQUIRE(!xi.pairs.empty());
    const auto back = io::orbit_collection_from_json(io::to_json(xi));
    CHECK(back.alpha_mass() == xi.alpha_mass());
    CHECK(back.pairs[0].relative_shift == xi.pairs[0].relative_shift);
  }
  SUBCASE("grid density") {
    const AtomicMeasure a(3, {0, 0, 0, 1, 0.5, -1}, {0.4, 0.6});
    const double lo[3] = {0, 0, -1}, hi[3] = {1, 0.5, 0};
    const auto grid = GridDescriptor::covering(lo, hi, 3.5, 0.25);
    const auto dens = mollify(a, MollifierSpec::gaussian(0.5), grid);
    const auto back = io::grid_density_from_json(io::to_json(dens));
    CHECK(back.values() == dens.values());
    CHECK(back.grid().shape == dens.grid().shape);
  }
  SUBCASE("bad documents") {
    CHECK_THROWS_AS(io::decomposition_from_json(json::object()), Error);
    CHECK_THROWS_AS(io::measure_from_json(json{{"dim", 2}, {"coords", {{1.0}}}, {"weights", {1.0}}}), Error);
  }
}

TEST_CASE("experiment parameters") {
  CHECK(experiments::names().size() == 4);
  CHECK_THROWS_AS(experiments::default_params("nope"), Error);
  CHECK_THROWS_AS(experiments::run("footnote-convergence", json{{"bogus", 1}}, {}), Error);
  CHECK_THROWS_AS(experiments::run("footnote-convergence", json{{"n", "ten"}}, {}), Error);
  CHECK_THROWS_AS(experiments::run("pam-mc-vs-variational", json{{"reference_epsilon", 0.45}, {"samples", 4}}, {}),
                  Error);
  const auto r = experiments::run("footnote-convergence", json{{"per_component", 150}, {"n", {10, 20}}}, {7, 1});
  CHECK(r["seed"] == 7);
  CHECK(r["params"]["per_component"] == 150);
  CHECK(r["sequence"].size() == 2);
}

TEST_CASE("pam kernel") {
  const auto exact = experiments::pam_kernel(1.0, 1.0);
  const auto scaled = experiments::pam_kernel(1.0, 3.0);
  CHECK(exact.kind() == RadialKernel::Kind::mollified_delta);
  for (double r : {0.0, 0.37, 1.5, 4.0})
    CHECK(scaled(r) == doctest::Approx(3.0 * exact(r)).epsilon(1e-4));
  CHECK(scaled(exact.support_radius() + 0.1) == 0.0);
}
