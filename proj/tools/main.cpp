#include "commands.hpp"

#include "bilevel/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace bilevel;
using namespace bilevel::cli;

struct Shared {
  std::string config_path;
  std::string problem;
  std::uint64_t seed = 0;
  bool no_timing = false;
};

// Config file values, or the defaults when no file is given.
ConfigFile config_or_defaults(const std::string& path) {
  return path.empty() ? ConfigFile{} : load_config(path);
}

void apply_data_overrides(const ConfigFile& file, CleanDataSpec& data) {
  if (file.rho) data.rho = *file.rho;
  if (file.n_tr) data.n_tr = *file.n_tr;
  if (file.n_val) data.n_val = *file.n_val;
}

std::string problem_list() {
  std::string out;
  for (const auto& n : problem_names()) out += (out.empty() ? "" : ", ") + n;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilevel optimization experiments with averaged inner solvers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CheckArgs check;
  std::string check_out;
  auto* check_cmd = app.add_subcommand("check", "Verify gradients, VJPs and hypergradients against oracles");
  check_cmd->add_option("--problem", check.problem, "Problem name or 'all' (" + problem_list() + ")")
      ->capture_default_str();
  check_cmd->add_option("--tol", check.tol, "Override the finite-difference tolerances");
  check_cmd->add_option("--seed", check.seed, "Seed for data and check points");
  check_cmd->add_option("--out", check_out, "Write the JSON report here");

  Shared solve_shared;
  std::string model = "improved";
  std::string solve_out;
  auto* solve_cmd = app.add_subcommand("solve", "Run one model and write its trace as CSV");
  solve_cmd->add_option("--problem", solve_shared.problem, "Problem name")->required();
  solve_cmd->add_option("--model", model, "improved or basic")
      ->check(CLI::IsMember({"improved", "basic"}))
      ->capture_default_str();
  solve_cmd->add_option("--config", solve_shared.config_path, "JSON config file");
  solve_cmd->add_option("--seed", solve_shared.seed, "Seed");
  solve_cmd->add_option("--out", solve_out, "Output CSV")->required();
  solve_cmd->add_flag("--no-timing", solve_shared.no_timing, "Write 0 in the wall_ms column");

  Shared abl_shared;
  std::vector<std::size_t> freqs;
  std::string abl_out;
  auto* abl_cmd = app.add_subcommand("ablation", "Run improved-<k> series for several frequencies plus basic");
  abl_cmd->add_option("--problem", abl_shared.problem, "Problem name")->required();
  abl_cmd->add_option("--freqs", freqs, "Comma-separated BiG-SAM frequencies")
      ->required()
      ->delimiter(',');
  abl_cmd->add_option("--config", abl_shared.config_path, "JSON config file");
  abl_cmd->add_option("--seed", abl_shared.seed, "Seed");
  abl_cmd->add_option("--out-dir", abl_out, "Output directory")->required();
  abl_cmd->add_flag("--no-timing", abl_shared.no_timing, "Write 0 in the wall_ms column");

  CleanArgs clean;
  std::string data_source = "synthetic";
  std::string clean_config;
  std::optional<double> rho;
  std::optional<std::size_t> n_tr, n_val;
  std::optional<std::uint64_t> clean_seed;
  std::vector<std::uint64_t> clean_seeds;
  std::string clean_out;
  auto* clean_cmd = app.add_subcommand("clean", "Data hyper-cleaning: F1 of improved vs basic");
  clean_cmd->add_option("--data", data_source, "synthetic or idx:<images>,<labels>")->capture_default_str();
  clean_cmd->add_option("--rho", rho, "Corruption rate in [0, 1] (default 0.5)");
  clean_cmd->add_option("--ntr", n_tr, "Training samples (default 400)");
  clean_cmd->add_option("--nval", n_val, "Validation samples (default 400)");
  clean_cmd->add_option("--config", clean_config, "JSON config file");
  auto* seed_opt = clean_cmd->add_option("--seed", clean_seed, "Seed of a single run");
  clean_cmd->add_option("--seeds", clean_seeds, "Comma-separated seeds, one run each")
      ->delimiter(',')
      ->excludes(seed_opt);
  clean_cmd->add_option("--jobs", clean.jobs, "Runs executed concurrently")->capture_default_str();
  clean_cmd->add_option("--out", clean_out, "Output CSV")->required();

  std::string manifest;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", manifest, "Manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (check_cmd->parsed()) {
      if (!check_out.empty()) check.out = check_out;
      return cmd_check(check);
    }
    if (solve_cmd->parsed()) {
      SolveArgs a;
      const ConfigFile file = config_or_defaults(solve_shared.config_path);
      a.problem = solve_shared.problem;
      a.mode = model == "basic" ? Mode::kBasic : Mode::kImproved;
      a.config = file.solve;
      apply_data_overrides(file, a.clean);
      a.seed = solve_shared.seed;
      a.out = solve_out;
      a.timing = !solve_shared.no_timing;
      return cmd_solve(a);
    }
    if (abl_cmd->parsed()) {
      AblationArgs a;
      const ConfigFile file = config_or_defaults(abl_shared.config_path);
      a.problem = abl_shared.problem;
      a.freqs = freqs;
      a.config = file.solve;
      apply_data_overrides(file, a.clean);
      a.seed = abl_shared.seed;
      a.out_dir = abl_out;
      a.timing = !abl_shared.no_timing;
      return cmd_ablation(a);
    }
    if (clean_cmd->parsed()) {
      const ConfigFile file = config_or_defaults(clean_config);
      clean.config = file.solve;
      apply_data_overrides(file, clean.data);
      if (rho) clean.data.rho = *rho;
      if (n_tr) clean.data.n_tr = *n_tr;
      if (n_val) clean.data.n_val = *n_val;
      clean.data.idx = parse_data_source(data_source);
      if (!clean_seeds.empty()) clean.seeds = clean_seeds;
      else if (clean_seed) clean.seeds = {*clean_seed};
      clean.out = clean_out;
      return cmd_clean(clean);
    }
    if (replay_cmd->parsed()) return cmd_replay(manifest);
  } catch (const UsageError& e) {
    std::cerr << "bilevel: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "bilevel: " << e.what() << '\n';
    return e.code() == ErrorCode::kOracleDivergence ? kDiverged : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "bilevel: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
