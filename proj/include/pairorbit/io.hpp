#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "pairorbit/compactify.hpp"
#include "pairorbit/measures.hpp"
#include "pairorbit/simulate.hpp"
#include "pairorbit/variational.hpp"

namespace pairorbit::io {

using nlohmann::json;

/// Header x1,...,xd,weight; one atom per row. Empty tables are rejected.
AtomicMeasure parse_measure_csv(std::istream& in, const std::string& source = "<stream>");
AtomicMeasure read_measure_csv(const std::string& path);
void write_measure_csv(std::ostream& out, const AtomicMeasure& m);
void write_measure_csv(const std::string& path, const AtomicMeasure& m);

json to_json(const AtomicMeasure& m);
AtomicMeasure measure_from_json(const json& j);

json to_json(const GridDensity& g);
GridDensity grid_density_from_json(const json& j);

json to_json(const DecompositionParams& p);
json to_json(const Decomposition& d);
Decomposition decomposition_from_json(const json& j);

json to_json(const OrbitCollection& xi);
OrbitCollection orbit_collection_from_json(const json& j);

json to_json(const MCEstimate& e);
json to_json(const LocalizationSummary& s);

json to_json(const SolverConfig& c);
/// Profile samples are thinned to at most `max_samples` nodes.
json to_json(const VariationalResult& r, std::size_t max_samples = 201);

json read_json(const std::string& path);
/// Pretty-printed with sorted keys and a trailing newline, so equal values give equal bytes.
std::string dump(const json& j);
void write_text(const std::string& path, const std::string& text);

}  // namespace pairorbit::io
