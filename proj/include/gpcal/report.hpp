#pragma once

#include "gpcal/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace gpcal {

using Json = nlohmann::ordered_json;

/// Every effective parameter after defaults have been applied.
Json config_echo(const RunConfig& config);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Json to_json(const CredibleSet& set);
Json to_json(const NumericHealth& health);
Json to_json(const AsmcDiagnostics& diag);

/// Deterministic calibration report. Wall-clock figures are kept out of it (see timing_json).
Json calibration_json(const CalibrationReport& report, const RunConfig& config);

Json timing_json(const CalibrationReport& report);

/// s,eta,coverage,ladder_full,ladder_min,ladder_mean,ladder_max
std::string trajectory_csv(const CalibrationReport& report);

/// Shortest decimal that reads back to the same double; "nan"/"inf" for non-finite values.
std::string format_number(double value);

/// Two-space indented JSON followed by a newline.
void write_json(const std::filesystem::path& path, const Json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

/// path with its extension replaced by `suffix` (e.g. report.json -> report.timing.json).
std::filesystem::path sibling_path(const std::filesystem::path& path, const std::string& suffix);

}  // namespace gpcal
