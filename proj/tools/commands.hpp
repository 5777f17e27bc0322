#pragma once

#include "bilevel/models.hpp"
#include "bilevel/zoo.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bilevel::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode { kOk = 0, kCheckFailed = 1, kUsage = 2, kDiverged = 3 };

// Usage or configuration problem; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON config file: one flat object of numbers. Recognized keys are the
/// SolveConfig fields (t, s, eta, K, T, alpha_exponent, bigsam_frequency)
/// and the hyper-cleaning data fields (rho, n_tr, n_val). Anything else is
/// rejected. With require_core, t, s, eta, K and T must all be present.
struct ConfigFile {
  SolveConfig solve;
  std::optional<double> rho;
  std::optional<std::size_t> n_tr;
  std::optional<std::size_t> n_val;
};

ConfigFile parse_config(const nlohmann::json& j, bool require_core);
ConfigFile load_config(const std::filesystem::path& path);

nlohmann::json solve_config_json(const SolveConfig& c);
SolveConfig solve_config_from_json(const nlohmann::json& j);

struct CheckArgs {
  std::string problem = "all";
  std::optional<double> tol;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
};

struct SolveArgs {
  std::string problem;
  Mode mode = Mode::kImproved;
  SolveConfig config;
  CleanDataSpec clean;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  bool timing = true;
};

struct AblationArgs {
  std::string problem;
  std::vector<std::size_t> freqs;
  SolveConfig config;
  CleanDataSpec clean;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  bool timing = true;
};

struct CleanArgs {
  CleanDataSpec data;
  SolveConfig config;
  std::vector<std::uint64_t> seeds = {0};
  std::size_t jobs = 1;
  std::filesystem::path out;
};

int cmd_check(const CheckArgs& args);
int cmd_solve(const SolveArgs& args);
int cmd_ablation(const AblationArgs& args);
int cmd_clean(const CleanArgs& args);
int cmd_replay(const std::filesystem::path& manifest);

// Parses "synthetic" or "idx:<images>,<labels>".
std::optional<std::pair<std::string, std::string>> parse_data_source(const std::string& source);

}  // namespace bilevel::cli
