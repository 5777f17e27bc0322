#pragma once

#include "bilevel/data.hpp"
#include "bilevel/models.hpp"
#include "bilevel/oracles.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bilevel {

// Data behind the hyper-cleaning instance.
struct CleanDataSpec {
  double rho = 0.5;
  std::size_t n_samples = 1000;
  std::size_t dim = 10;
  double margin = 3.0;
  std::size_t n_tr = 400;
  std::size_t n_val = 400;
  // When set, features and labels come from IDX files instead of gen_synthetic.
  std::optional<std::pair<std::string, std::string>> idx;
};

struct RepDataSpec {
  std::size_t n_samples = 400;
  std::size_t dim = 32;
  int num_classes = 20;
  double margin = 3.0;
  std::size_t way = 5;
  std::size_t shot = 1;
  std::size_t val_per_class = 10;
  std::size_t tasks = 8;
  std::size_t rank = 8;
};

// A ready-to-run problem: the problem, its starting λ and its task metric.
struct ProblemInstance {
  std::shared_ptr<const BilevelProblem> problem;
  OuterVariable lambda0;
  MetricFn metric;
  std::string metric_name;  // empty when there is no metric
  // Corruption mask of the training set (hyperclean only).
  std::vector<bool> mask;
};

const std::vector<std::string>& problem_names();
bool is_problem_name(const std::string& name);

// Corrupted synthetic (or IDX) train/val split, both drawn from `seed`.
std::pair<Dataset, Dataset> make_clean_data(const CleanDataSpec& spec, std::uint64_t seed);

ProblemInstance make_hyperclean_instance(const CleanDataSpec& spec, std::uint64_t seed);
ProblemInstance make_hyperrep_instance(const RepDataSpec& spec, std::uint64_t seed);

// closedform_quadratic (λ0 = 2), degenerate_quadratic (λ0 = 1), hyperclean, hyperrep.
// Throws kInvalidArgument for unknown names.
ProblemInstance make_instance(const std::string& name, std::uint64_t seed,
                              const CleanDataSpec& clean = {}, const RepDataSpec& rep = {});

// Verification instance and check settings used by `check`: the quadratics as is,
// hyperclean at N_tr = 50, d = 5, hyperrep with two small tasks.
std::shared_ptr<const BilevelProblem> make_check_problem(const std::string& name,
                                                         std::uint64_t seed);
CheckConfig default_check_config(const std::string& name);

}  // namespace bilevel
