#ifndef STRATEFF_REPORT_HPP
#define STRATEFF_REPORT_HPP

#include <string>

#include "json.hpp"
#include "strateff/data.hpp"
#include "strateff/montecarlo.hpp"
#include "strateff/simulation.hpp"

namespace strateff {

// All JSON documents carry schema_version = 1 and never contain NaN/Inf;
// absent quantities are emitted as null.
inline constexpr int kSchemaVersion = 1;

nlohmann::ordered_json to_json(const EffectEstimate& est);
nlohmann::ordered_json to_json(const DataSummary& summary);
nlohmann::ordered_json to_json(const OracleLimits& oracles);
nlohmann::ordered_json to_json(const MonteCarloReport& report);

std::string report_text(const MonteCarloReport& report);
std::string report_csv(const MonteCarloReport& report);

}  // namespace strateff

#endif
