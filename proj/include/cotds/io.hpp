#pragma once

// Scenario files (JSON syntax) and CSV time series.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotds/cosim.hpp"
#include "cotds/engine.hpp"

namespace cotds::io {

/// Malformed or schema-violating input.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses a scenario document. A transmission `dataset` reference is
/// resolved relative to `base_dir` and loaded.
[[nodiscard]] engine::Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir);
[[nodiscard]] engine::Scenario load_scenario(const std::filesystem::path& path);

/// Inverse of parse_scenario. Referenced datasets stay references.
[[nodiscard]] nlohmann::json serialize_scenario(const engine::Scenario& s);

[[nodiscard]] engine::TransmissionData parse_transmission(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json serialize_transmission(const engine::TransmissionData& d);

/// Header `t,<columns>`; values with 17 significant digits.
void write_csv(std::ostream& out, const cosim::TimeSeriesLog& log);
void write_csv(const std::filesystem::path& path, const cosim::TimeSeriesLog& log);
/// Throws SchemaError for ragged rows, non-numeric cells or non-increasing t.
[[nodiscard]] cosim::TimeSeriesLog read_csv(std::istream& in);
[[nodiscard]] cosim::TimeSeriesLog read_csv(const std::filesystem::path& path);

/// Shortest text that parses back to exactly `v`.
[[nodiscard]] std::string format_double(double v);

}  // namespace cotds::io
