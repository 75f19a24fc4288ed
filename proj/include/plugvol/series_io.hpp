// CSV persistence for ObservedSeries and JSON emission for EstimateReport.
//
// CSV layout: header row "time,z,q1,...,qq", dot decimal, one observation
// per line. Values are written with 17 significant digits so a write/read
// cycle reproduces every double bit for bit.
#pragma once

#include "plugvol/core_model.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace plugvol {

void write_series_csv(std::ostream& os, const ObservedSeries& s);
void write_series_csv(const std::filesystem::path& path, const ObservedSeries& s);

struct CsvReadOptions {
  // Horizon of the grid; the last time stamp when absent.
  std::optional<double> horizon;
  // Required covariate columns; a missing one raises SchemaError naming it.
  std::size_t expected_covariates = 0;
};

ObservedSeries read_series_csv(std::istream& is, const CsvReadOptions& opts = {});
ObservedSeries read_series_csv(const std::filesystem::path& path,
                               const CsvReadOptions& opts = {});

nlohmann::json to_json(const EstimateReport& r);
EstimateReport report_from_json(const nlohmann::json& j);

// Shortest round-trip text for a double ("%.17g").
std::string format_double(double v);

}  // namespace plugvol
