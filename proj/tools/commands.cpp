#include "commands.hpp"

#include "bilevel/error.hpp"
#include "bilevel/format.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <thread>

namespace bilevel::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kFlagRule =
    "sample i is flagged corrupted when lambda_i < 0, i.e. sigma(lambda_i) < 0.5";

std::size_t as_count(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::size_t>(v.get<long long>());
  throw UsageError("config field '" + key + "' must be a non-negative integer");
}

double as_real(const std::string& key, const json& v) {
  if (!v.is_number()) throw UsageError("config field '" + key + "' must be a number");
  return v.get<double>();
}

void validate_solve(const SolveConfig& c) {
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  return fs::path(path.string() + suffix);
}

json clean_json(const CleanDataSpec& d) {
  json j = {{"rho", d.rho},     {"n_samples", d.n_samples}, {"dim", d.dim},
            {"margin", d.margin}, {"n_tr", d.n_tr},         {"n_val", d.n_val}};
  if (d.idx) j["idx"] = {d.idx->first, d.idx->second};
  return j;
}

CleanDataSpec clean_from_json(const json& j) {
  CleanDataSpec d;
  d.rho = j.at("rho").get<double>();
  d.n_samples = j.at("n_samples").get<std::size_t>();
  d.dim = j.at("dim").get<std::size_t>();
  d.margin = j.at("margin").get<double>();
  d.n_tr = j.at("n_tr").get<std::size_t>();
  d.n_val = j.at("n_val").get<std::size_t>();
  if (j.contains("idx")) d.idx = {j["idx"][0].get<std::string>(), j["idx"][1].get<std::string>()};
  return d;
}

json manifest_base(const std::string& command) {
  return {{"tool", "bilevel"}, {"version", kToolVersion}, {"command", command}};
}

std::string absolute_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

ProblemInstance instance_or_usage(const std::string& name, std::uint64_t seed,
                                  const CleanDataSpec& clean) {
  if (!is_problem_name(name)) throw UsageError("unknown problem '" + name + "'");
  try {
    return make_instance(name, seed, clean);
  } catch (const Error& e) {
    throw UsageError(std::string("cannot build problem: ") + e.what());
  }
}

// Runs one model and streams its trace to `path`. Returns kDiverged on
// oracle divergence, leaving the rows written so far plus a trailer.
int write_series(const ProblemInstance& inst, const SolveConfig& cfg, const fs::path& path,
                 bool timing, double* final_value) {
  std::ofstream out = open_out(path);
  out << "iter,outer_value,grad_norm,metric,wall_ms\n";
  RunOptions opts;
  opts.record_timing = timing;
  opts.on_record = [&](const TraceRecord& r) {
    out << r.iter << ',' << format_double(r.outer_value) << ',' << format_double(r.grad_norm) << ','
        << (r.metric ? format_double(*r.metric) : std::string()) << ','
        << format_double(timing ? r.wall_ms : 0.0) << '\n';
  };
  try {
    const ExperimentTrace trace = run_model(*inst.problem, inst.lambda0, cfg, inst.metric, opts);
    if (final_value) *final_value = trace.records.back().outer_value;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kOracleDivergence) throw;
    out << "# truncated\n";
    std::cerr << "bilevel: " << path.string() << ": " << e.what() << '\n';
    return kDiverged;
  }
  return kOk;
}

}  // namespace

ConfigFile parse_config(const json& j, bool require_core) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  ConfigFile cfg;
  SolveConfig& s = cfg.solve;
  for (const auto& [key, v] : j.items()) {
    if (key == "t") s.t = as_real(key, v);
    else if (key == "s") s.s = as_real(key, v);
    else if (key == "eta") s.eta = as_real(key, v);
    else if (key == "K") s.K = as_count(key, v);
    else if (key == "T") s.T = as_count(key, v);
    else if (key == "alpha_exponent") s.alpha_exponent = as_real(key, v);
    else if (key == "bigsam_frequency") s.bigsam_frequency = as_count(key, v);
    else if (key == "rho") cfg.rho = as_real(key, v);
    else if (key == "n_tr") cfg.n_tr = as_count(key, v);
    else if (key == "n_val") cfg.n_val = as_count(key, v);
    else throw UsageError("unknown config field '" + key + "'");
  }
  if (require_core) {
    for (const char* key : {"t", "s", "eta", "K", "T"}) {
      if (!j.contains(key)) throw UsageError(std::string("missing config field '") + key + "'");
    }
  }
  validate_solve(s);
  return cfg;
}

ConfigFile load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, true);
}

json solve_config_json(const SolveConfig& c) {
  return {{"t", c.t},
          {"s", c.s},
          {"eta", c.eta},
          {"K", c.K},
          {"T", c.T},
          {"alpha_exponent", c.alpha_exponent},
          {"bigsam_frequency", c.bigsam_frequency}};
}

SolveConfig solve_config_from_json(const json& j) { return parse_config(j, true).solve; }

std::optional<std::pair<std::string, std::string>> parse_data_source(const std::string& source) {
  if (source == "synthetic") return std::nullopt;
  if (source.rfind("idx:", 0) == 0) {
    const std::string rest = source.substr(4);
    const auto comma = rest.find(',');
    if (comma != std::string::npos && comma > 0 && comma + 1 < rest.size()) {
      return std::make_pair(rest.substr(0, comma), rest.substr(comma + 1));
    }
  }
  throw UsageError("--data must be 'synthetic' or 'idx:<images>,<labels>'");
}

int cmd_check(const CheckArgs& args) {
  std::vector<std::string> names;
  if (args.problem == "all") {
    names = problem_names();
  } else if (is_problem_name(args.problem)) {
    names = {args.problem};
  } else {
    throw UsageError("unknown problem '" + args.problem + "'");
  }
  if (args.tol && !(*args.tol > 0.0)) throw UsageError("--tol must be positive");

  bool all_pass = true;
  json problems = json::array();
  for (const auto& name : names) {
    CheckConfig cfg = default_check_config(name);
    cfg.seed = args.seed;
    if (args.tol) cfg.first_order_tol = cfg.vjp_tol = cfg.hypergrad_tol = *args.tol;
    const auto problem = make_check_problem(name, args.seed);
    const auto reports = check_suite(*problem, {cfg});
    bool pass = true;
    for (const auto& r : reports) {
      pass = pass && r.pass;
      std::cout << (r.pass ? "PASS " : "FAIL ") << r.name
                << " max_rel_error=" << r.max_rel_error << " tol=" << r.tolerance << '\n';
    }
    all_pass = all_pass && pass;
    problems.push_back({{"problem", name}, {"pass", pass}, {"reports", to_json(reports)}});
  }
  if (args.out) {
    json report = manifest_base("check");
    report["seed"] = args.seed;
    if (args.tol) report["tol"] = *args.tol;
    report["pass"] = all_pass;
    report["problems"] = problems;
    write_json(*args.out, report);
  }
  return all_pass ? kOk : kCheckFailed;
}

int cmd_solve(const SolveArgs& args) {
  SolveConfig cfg = args.config;
  cfg.mode = args.mode;
  cfg.seed = args.seed;
  validate_solve(cfg);
  const ProblemInstance inst = instance_or_usage(args.problem, args.seed, args.clean);

  double final_value = 0.0;
  const int status = write_series(inst, cfg, args.out, args.timing, &final_value);

  json manifest = manifest_base("solve");
  manifest["problem"] = args.problem;
  manifest["model"] = std::string(to_string(args.mode));
  manifest["seed"] = args.seed;
  manifest["timing"] = args.timing;
  manifest["config"] = solve_config_json(cfg);
  if (args.problem == "hyperclean") manifest["data"] = clean_json(args.clean);
  manifest["outputs"] = {absolute_string(args.out)};
  write_json(with_suffix(args.out, ".manifest.json"), manifest);

  if (status == kOk) {
    std::cout << args.problem << ' ' << to_string(args.mode)
              << " final outer_value=" << format_double(final_value) << '\n';
  }
  return status;
}

int cmd_ablation(const AblationArgs& args) {
  if (args.freqs.empty()) throw UsageError("--freqs must list at least one frequency");
  for (std::size_t f : args.freqs) {
    if (f == 0) throw UsageError("frequencies must be positive integers");
  }
  SolveConfig base = args.config;
  base.seed = args.seed;
  base.mode = Mode::kImproved;
  validate_solve(base);
  const ProblemInstance inst = instance_or_usage(args.problem, args.seed, args.clean);
  fs::create_directories(args.out_dir);

  json outputs = json::array();
  int status = kOk;
  for (std::size_t f : args.freqs) {
    SolveConfig cfg = base;
    cfg.bigsam_frequency = f;
    const fs::path path = args.out_dir / ("improved-" + std::to_string(f) + ".csv");
    double final_value = 0.0;
    status = write_series(inst, cfg, path, args.timing, &final_value);
    outputs.push_back(absolute_string(path));
    if (status != kOk) break;
    std::cout << "improved-" << f << " final outer_value=" << format_double(final_value) << '\n';
  }
  if (status == kOk) {
    SolveConfig cfg = base;
    cfg.mode = Mode::kBasic;
    const fs::path path = args.out_dir / "basic.csv";
    double final_value = 0.0;
    status = write_series(inst, cfg, path, args.timing, &final_value);
    outputs.push_back(absolute_string(path));
    if (status == kOk) std::cout << "basic final outer_value=" << format_double(final_value) << '\n';
  }

  json manifest = manifest_base("ablation");
  manifest["problem"] = args.problem;
  manifest["freqs"] = args.freqs;
  manifest["seed"] = args.seed;
  manifest["timing"] = args.timing;
  manifest["config"] = solve_config_json(base);
  if (args.problem == "hyperclean") manifest["data"] = clean_json(args.clean);
  manifest["out_dir"] = absolute_string(args.out_dir);
  manifest["outputs"] = outputs;
  write_json(args.out_dir / "manifest.json", manifest);
  return status;
}

namespace {

struct CleanCell {
  std::uint64_t seed = 0;
  fs::path csv;
  fs::path summary;
  double f1_improved = 0.0;
  double f1_basic = 0.0;
  std::size_t corrupted = 0;
};

void run_clean_cell(const CleanArgs& args, CleanCell& cell) {
  ProblemInstance inst;
  try {
    inst = make_hyperclean_instance(args.data, cell.seed);
  } catch (const Error& e) {
    throw UsageError(std::string("cannot build hyperclean data: ") + e.what());
  }
  cell.corrupted = static_cast<std::size_t>(std::count(inst.mask.begin(), inst.mask.end(), true));
  SolveConfig improved = args.config;
  improved.seed = cell.seed;
  improved.mode = Mode::kImproved;
  SolveConfig basic = improved;
  basic.mode = Mode::kBasic;
  RunOptions opts;
  opts.record_timing = false;
  const ExperimentTrace ti = run_model(*inst.problem, inst.lambda0, improved, inst.metric, opts);
  const ExperimentTrace tb = run_model(*inst.problem, inst.lambda0, basic, inst.metric, opts);

  std::ofstream out = open_out(cell.csv);
  out << "iter,f1_improved,f1_basic\n";
  for (std::size_t i = 0; i < ti.records.size(); ++i) {
    out << i << ',' << format_double(*ti.records[i].metric) << ','
        << format_double(*tb.records[i].metric) << '\n';
  }
  cell.f1_improved = *ti.records.back().metric;
  cell.f1_basic = *tb.records.back().metric;

  json summary = {{"seed", cell.seed},
                  {"rho", args.data.rho},
                  {"n_tr", args.data.n_tr},
                  {"n_val", args.data.n_val},
                  {"corrupted", cell.corrupted},
                  {"flag_rule", kFlagRule},
                  {"final_f1_improved", cell.f1_improved},
                  {"final_f1_basic", cell.f1_basic},
                  {"csv", absolute_string(cell.csv)}};
  if (cell.corrupted == 0) summary["f1_note"] = "undefined-F1, reported 0";
  write_json(cell.summary, summary);
}

}  // namespace

int cmd_clean(const CleanArgs& args) {
  if (!(args.data.rho >= 0.0 && args.data.rho <= 1.0)) throw UsageError("--rho must lie in [0, 1]");
  if (args.seeds.empty()) throw UsageError("at least one seed is required");
  if (args.jobs < 1) throw UsageError("--jobs must be >= 1");
  validate_solve(args.config);

  std::vector<std::uint64_t> seeds = args.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  const bool single = seeds.size() == 1;
  std::vector<CleanCell> cells(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    CleanCell& c = cells[i];
    c.seed = seeds[i];
    if (single) {
      c.csv = args.out;
    } else {
      fs::path p = args.out;
      p.replace_filename(args.out.stem().string() + "-seed" + std::to_string(c.seed) +
                         args.out.extension().string());
      c.csv = p;
    }
    c.summary = fs::path(c.csv).replace_extension(".summary.json");
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cells.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        run_clean_cell(args, cells[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n_threads = std::min(args.jobs, cells.size());
  for (std::size_t j = 1; j < n_threads; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  json outputs = json::array();
  double mean_improved = 0.0;
  double mean_basic = 0.0;
  json index_cells = json::array();
  for (const auto& c : cells) {
    outputs.push_back(absolute_string(c.csv));
    outputs.push_back(absolute_string(c.summary));
    mean_improved += c.f1_improved / static_cast<double>(cells.size());
    mean_basic += c.f1_basic / static_cast<double>(cells.size());
    index_cells.push_back({{"seed", c.seed},
                           {"csv", absolute_string(c.csv)},
                           {"summary", absolute_string(c.summary)},
                           {"final_f1_improved", c.f1_improved},
                           {"final_f1_basic", c.f1_basic}});
    std::cout << "seed " << c.seed << " final f1 improved=" << format_double(c.f1_improved)
              << " basic=" << format_double(c.f1_basic) << '\n';
  }
  if (!single) {
    const fs::path index = fs::path(args.out).replace_extension(".index.json");
    write_json(index, {{"cells", index_cells},
                       {"mean_final_f1_improved", mean_improved},
                       {"mean_final_f1_basic", mean_basic},
                       {"flag_rule", kFlagRule}});
    outputs.push_back(absolute_string(index));
  }

  json manifest = manifest_base("clean");
  manifest["seeds"] = seeds;
  manifest["jobs"] = args.jobs;
  manifest["config"] = solve_config_json(args.config);
  manifest["data"] = clean_json(args.data);
  manifest["out"] = absolute_string(args.out);
  manifest["outputs"] = outputs;
  write_json(with_suffix(args.out, ".manifest.json"), manifest);
  return kOk;
}

int cmd_replay(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw UsageError("cannot read manifest " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
    const std::string command = m.at("command").get<std::string>();
    if (command == "solve") {
      SolveArgs a;
      a.problem = m.at("problem").get<std::string>();
      a.mode = m.at("model").get<std::string>() == "basic" ? Mode::kBasic : Mode::kImproved;
      a.config = solve_config_from_json(m.at("config"));
      a.seed = m.at("seed").get<std::uint64_t>();
      a.timing = m.at("timing").get<bool>();
      if (m.contains("data")) a.clean = clean_from_json(m["data"]);
      a.out = m.at("outputs").at(0).get<std::string>();
      return cmd_solve(a);
    }
    if (command == "ablation") {
      AblationArgs a;
      a.problem = m.at("problem").get<std::string>();
      a.freqs = m.at("freqs").get<std::vector<std::size_t>>();
      a.config = solve_config_from_json(m.at("config"));
      a.seed = m.at("seed").get<std::uint64_t>();
      a.timing = m.at("timing").get<bool>();
      if (m.contains("data")) a.clean = clean_from_json(m["data"]);
      a.out_dir = m.at("out_dir").get<std::string>();
      return cmd_ablation(a);
    }
    if (command == "clean") {
      CleanArgs a;
      a.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
      a.jobs = m.at("jobs").get<std::size_t>();
      a.config = solve_config_from_json(m.at("config"));
      a.data = clean_from_json(m.at("data"));
      a.out = m.at("out").get<std::string>();
      return cmd_clean(a);
    }
    throw UsageError("manifest has unknown command '" + command + "'");
  } catch (const json::exception& e) {
    throw UsageError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
}

}  // namespace bilevel::cli
