#include "bilevel/zoo.hpp"

#include "bilevel/error.hpp"
#include "bilevel/rng.hpp"

#include <algorithm>
#include <cmath>

namespace bilevel {

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = {"closedform_quadratic", "degenerate_quadratic",
                                                 "hyperclean", "hyperrep"};
  return names;
}

bool is_problem_name(const std::string& name) {
  const auto& names = problem_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::pair<Dataset, Dataset> make_clean_data(const CleanDataSpec& spec, std::uint64_t seed) {
  Dataset full = spec.idx ? load_idx(spec.idx->first, spec.idx->second)
                          : gen_synthetic(seed, spec.n_samples, spec.dim, 2, spec.margin);
  if (spec.idx) {
    int max_label = 0;
    for (int y : full.y) max_label = std::max(max_label, y);
    full.num_classes = max_label + 1;
  }
  auto [train, val] = split(full, spec.n_tr, spec.n_val, seed);
  train = corrupt_labels(train, spec.rho, seed);
  return {std::move(train), std::move(val)};
}

ProblemInstance make_hyperclean_instance(const CleanDataSpec& spec, std::uint64_t seed) {
  auto [train, val] = make_clean_data(spec, seed);
  const int classes = std::max(train.num_classes, 2);
  auto problem = std::make_shared<HypercleanProblem>(train.labeled(), val.labeled(), classes);
  ProblemInstance inst;
  inst.lambda0 = Vector::Zero(static_cast<Eigen::Index>(train.size()));
  inst.mask = train.mask;
  inst.metric = [mask = train.mask](const InnerVariable&, const OuterVariable& lambda) {
    return f1_score(flag_corrupted(lambda), mask);
  };
  inst.metric_name = "f1";
  inst.problem = std::move(problem);
  return inst;
}

ProblemInstance make_hyperrep_instance(const RepDataSpec& spec, std::uint64_t seed) {
  const Dataset ds = gen_synthetic(seed, spec.n_samples, spec.dim, spec.num_classes, spec.margin);
  const EpisodeSet eps =
      make_episodes(ds, spec.way, spec.shot, spec.val_per_class, spec.tasks, seed);
  auto problem =
      std::make_shared<HyperrepProblem>(eps.tasks, static_cast<int>(spec.way), spec.rank);
  ProblemInstance inst;
  Rng rng = Rng::derive(seed, "lambda0");
  inst.lambda0.resize(static_cast<Eigen::Index>(problem->dims().outer));
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  for (Eigen::Index i = 0; i < inst.lambda0.size(); ++i) inst.lambda0(i) = scale * rng.normal();
  inst.metric = [p = problem.get()](const InnerVariable& omega, const OuterVariable& lambda) {
    return p->val_accuracy(omega, lambda);
  };
  inst.metric_name = "val_accuracy";
  inst.problem = std::move(problem);
  return inst;
}

ProblemInstance make_instance(const std::string& name, std::uint64_t seed,
                              const CleanDataSpec& clean, const RepDataSpec& rep) {
  if (name == "closedform_quadratic") {
    ProblemInstance inst;
    inst.problem = make_closedform_quadratic();
    inst.lambda0 = Vector::Constant(1, 2.0);
    return inst;
  }
  if (name == "degenerate_quadratic") {
    ProblemInstance inst;
    inst.problem = make_degenerate_quadratic();
    inst.lambda0 = Vector::Constant(1, 1.0);
    return inst;
  }
  if (name == "hyperclean") return make_hyperclean_instance(clean, seed);
  if (name == "hyperrep") return make_hyperrep_instance(rep, seed);
  throw Error(ErrorCode::kInvalidArgument, "unknown problem '" + name + "'");
}

std::shared_ptr<const BilevelProblem> make_check_problem(const std::string& name,
                                                         std::uint64_t seed) {
  if (name == "hyperclean") {
    CleanDataSpec spec;
    spec.n_samples = 120;
    spec.dim = 5;
    spec.n_tr = 50;
    spec.n_val = 50;
    return make_hyperclean_instance(spec, seed).problem;
  }
  if (name == "hyperrep") {
    RepDataSpec spec;
    spec.n_samples = 120;
    spec.dim = 6;
    spec.num_classes = 8;
    spec.way = 3;
    spec.shot = 2;
    spec.val_per_class = 3;
    spec.tasks = 2;
    spec.rank = 2;
    return make_hyperrep_instance(spec, seed).problem;
  }
  return make_instance(name, seed).problem;
}

CheckConfig default_check_config(const std::string& name) {
  CheckConfig cfg;
  cfg.label = name;
  if (name == "hyperclean") cfg.t = cfg.s = 0.01;
  if (name == "hyperrep") cfg.t = cfg.s = 0.05;
  return cfg;
}

}  // namespace bilevel
