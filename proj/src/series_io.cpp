#include "plugvol/series_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace plugvol {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_series_csv(std::ostream& os, const ObservedSeries& s) {
  os << "time,z";
  for (std::size_t j = 0; j < s.covariate_dim(); ++j) os << ',' << s.covariate_name(j);
  os << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << format_double(s.grid.times[i]) << ',' << format_double(s.z[i]);
    for (std::size_t j = 0; j < s.covariate_dim(); ++j)
      os << ',' << format_double(s.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    os << '\n';
  }
}

void write_series_csv(const std::filesystem::path& path, const ObservedSeries& s) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_series_csv(os, s);
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
  // strtod handles nan/inf spellings; non-finite values are left for
  // validate_series to report.
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size())
    throw SchemaError("line " + std::to_string(line_no) + ": cannot parse '" + cell +
                      "' in column " + column);
  return v;
}

}  // namespace

ObservedSeries read_series_csv(std::istream& is, const CsvReadOptions& opts) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("empty CSV");
  const auto header = split_line(line);
  if (header.size() < 2 || header[0] != "time" || header[1] != "z")
    throw SchemaError("CSV header must start with time,z");
  const std::size_t ncov = header.size() - 2;
  if (ncov < opts.expected_covariates)
    throw SchemaError("missing covariate column q" + std::to_string(ncov + 1));

  ObservedSeries s;
  for (std::size_t j = 0; j < ncov; ++j) s.covariate_names.push_back(header[j + 2]);
  std::vector<double> qflat;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns, got " +
                        std::to_string(cells.size()));
    s.grid.times.push_back(parse_cell(cells[0], line_no, "time"));
    s.z.push_back(parse_cell(cells[1], line_no, "z"));
    for (std::size_t j = 0; j < ncov; ++j)
      qflat.push_back(parse_cell(cells[j + 2], line_no, header[j + 2]));
  }
  const auto n = static_cast<Eigen::Index>(s.z.size());
  s.q = CovariateMatrix(n, static_cast<Eigen::Index>(ncov));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(ncov); ++j)
      s.q(i, j) = qflat[static_cast<std::size_t>(i) * ncov + static_cast<std::size_t>(j)];
  s.grid.horizon = opts.horizon.value_or(s.grid.times.empty() ? 0.0 : s.grid.times.back());
  // Flag regularity when every gap matches T/N to 1e-9 relative.
  s.grid.regular = false;
  if (s.grid.times.size() > 1 && s.grid.horizon > 0.0 && s.grid.times.back() == s.grid.horizon) {
    const double step = s.grid.horizon / static_cast<double>(s.grid.times.size() - 1);
    bool reg = true;
    for (std::size_t i = 1; i < s.grid.times.size() && reg; ++i)
      reg = std::abs(s.grid.times[i] - s.grid.times[i - 1] - step) <= 1e-9 * step;
    s.grid.regular = reg;
  }
  return s;
}

ObservedSeries read_series_csv(const std::filesystem::path& path, const CsvReadOptions& opts) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_series_csv(is, opts);
}

nlohmann::json to_json(const EstimateReport& r) {
  nlohmann::json j;
  j["estimator"] = r.estimator_name;
  j["xi_hat"] = r.xi_hat;
  j["ab_hat"] = r.ab_hat;
  j["avar_hat"] = r.avar_hat;
  j["rate_exponent"] = r.rate_exponent;
  j["scale"] = r.scale;
  j["observations"] = r.observations;
  j["student_stat"] = r.student_stat ? nlohmann::json(*r.student_stat) : nlohmann::json();
  j["ci95"] = r.ci95 ? nlohmann::json::array({r.ci95->first, r.ci95->second}) : nlohmann::json();
  j["flags"] = r.flags;
  return j;
}

EstimateReport report_from_json(const nlohmann::json& j) {
  EstimateReport r;
  r.estimator_name = j.at("estimator").get<std::string>();
  r.xi_hat = j.at("xi_hat").get<double>();
  r.ab_hat = j.at("ab_hat").get<double>();
  r.avar_hat = j.at("avar_hat").get<double>();
  r.rate_exponent = j.at("rate_exponent").get<double>();
  r.scale = j.at("scale").get<double>();
  r.observations = j.at("observations").get<std::size_t>();
  if (!j.at("student_stat").is_null()) r.student_stat = j.at("student_stat").get<double>();
  if (!j.at("ci95").is_null()) r.ci95 = std::make_pair(j["ci95"][0].get<double>(), j["ci95"][1].get<double>());
  r.flags = j.at("flags").get<std::vector<std::string>>();
  return r;
}

}  // namespace plugvol
