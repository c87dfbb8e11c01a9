#ifndef FML_SERIALIZE_HPP
#define FML_SERIALIZE_HPP

#include <string>

#include <json.hpp>

#include "fml/cube_system.hpp"
#include "fml/fatthin.hpp"
#include "fml/measure.hpp"
#include "fml/scans.hpp"
#include "fml/validate.hpp"

namespace fml {

using nlohmann::json;

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

json sequence_to_json(const SequenceSpec& spec);
SequenceSpec sequence_from_json(const json& j);
// "kind:params" shorthand used on the command line, e.g. "geometric:0.5",
// "constant:0.2", "power:1.0", "recip-odd:2n+1", "list:0.5,0.25".
SequenceSpec sequence_from_string(const std::string& s);

// include_cubes: eager systems append the materialized cube table (all levels
// whose size fits the budget).
json system_to_json(const CubeSystem& sys, bool include_cubes = false,
                    std::uint64_t cube_budget = 200'000);
CubeSystem system_from_json(const json& j);

json measure_to_json(const MeasureTree& tree, std::uint64_t k_budget = 20'000);
MeasureTree measure_from_json(const json& j);

json validation_to_json(const ValidationReport& rep);
json doubling_to_json(const DoublingReport& rep);
json fatthin_to_json(const FatThinReport& rep);
json restricted_to_json(const RestrictedScanReport& rep);
json plumpness_to_json(const PlumpnessReport& rep);
json comparability_to_json(const ComparabilityReport& rep);
json conservation_to_json(const ConservationReport& rep);

// CSV emitters with frozen column contracts (docs/formats.md).
std::string doubling_to_csv(const DoublingReport& rep, int q);
std::string fatthin_to_csv(const FatThinReport& rep);
std::string restricted_to_csv(const RestrictedScanReport& rep);
std::string plumpness_to_csv(const PlumpnessReport& rep);

}  // namespace fml

#endif
