// Command-line front end. Each subcommand reads a JSON config, writes its
// outputs into --out and echoes the resolved config there.
//
// Exit codes: 0 success, 1 a Monte Carlo check failed, 2 usage or config
// error.
#pragma once

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace plugvol::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

// Raised for bad configs; mapped to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::filesystem::path out = ".";
  std::vector<std::filesystem::path> inputs;
};

// Worker count from PLUGVOL_WORKERS, else 1.
std::size_t default_workers();

nlohmann::json load_json(const std::filesystem::path& path);

// Subcommands. Each returns the process exit code.
int cmd_simulate(const nlohmann::json& config, const Common& c, std::ostream& log);
int cmd_fit_noise(const nlohmann::json& config, const Common& c, std::ostream& log);
int cmd_estimate(const nlohmann::json& config, const Common& c, std::ostream& log);
int cmd_montecarlo(const nlohmann::json& config, const Common& c, std::ostream& log);
int cmd_report(const nlohmann::json& summary, const Common& c, std::ostream& log);

// Valid names for the estimate subcommand.
const std::vector<std::string>& estimate_names();

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace plugvol::cli
