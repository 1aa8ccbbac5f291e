#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zdq/filter.hpp"
#include "zdq/model.hpp"
#include "zdq/policy.hpp"

namespace zdq {

inline constexpr long long kDefaultBudget = 100000000;

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SearchOptions {
  long long budget = kDefaultBudget;
  double tol = kCanonTol;
  // enumerate_full only: the decision at t is scored against x_{t-delay}
  // (against x_0 while t < delay).
  int delay = 0;
};

struct SearchReport {
  std::string class_name;
  long long num_policies_evaluated = 0;
  double optimal_cost = 0.0;
  nlohmann::json optimal_policy;
  double wall_time = 0.0;
};

// Exhaustive searches with the Bayes decoder. Candidates are visited in
// lexicographic order of their tables (earlier stages and earlier classes most
// significant, messages ascending); the first minimizer wins.
SearchReport enumerate_full(const FiniteModel& model, const SearchOptions& options = {},
                            FullHistoryPolicy* best = nullptr);
SearchReport enumerate_witsenhausen(const FiniteModel& model, const SearchOptions& options = {},
                                    WitsenhausenPolicy* best = nullptr);
SearchReport enumerate_wv(const FiniteModel& model, const SearchOptions& options = {},
                          WVPolicy* best = nullptr);

struct ClassComparison {
  std::string class_name;
  double optimal_cost = 0.0;
  double gap_to_full = 0.0;
  long long num_policies_evaluated = 0;
};

std::vector<ClassComparison> compare_classes(const FiniteModel& model, const SearchOptions& options = {});

// P(x_{max(t-delay,0)} = x, y_[0,t]) for every node of the observation tree, by
// summing over state paths.
std::vector<std::vector<std::vector<double>>> delayed_stage_weights(const FiniteModel& model,
                                                                    const ObservationTree& tree, int delay);

nlohmann::json to_json(const SearchReport& report);

}  // namespace zdq
