#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "zdq/filter.hpp"
#include "zdq/oracle.hpp"
#include "zdq/policy.hpp"

namespace zdq {

struct DPNode {
  int t = 0;
  int meta_belief = 0;  // id in the level's registry
  double value = 0.0;   // optimal cost-to-go from t
  Quantizer best_quantizer;
};

struct DPOptions {
  // Bound on the number of (meta-belief, quantizer) pairs examined.
  long long budget = kDefaultBudget;
  double tol = kCanonTol;
};

struct DPResult {
  double optimal_cost = 0.0;
  WVPolicy policy;
  std::vector<std::vector<DPNode>> nodes;  // [t] in registry order
  std::vector<std::vector<MetaBelief>> meta_beliefs;
  long long actions_evaluated = 0;
};

// Expected stage cost of applying `quantizer` under Xi with the Bayes decoder.
double stage_cost(const FiniteModel& model, const BeliefTable& beliefs, const MetaBelief& xi,
                  const Quantizer& quantizer);

// Backward induction over the reachable meta-beliefs. Quantizers range over
// all maps from the support into M_t, visited lexicographically over the
// support in belief-id order; the first minimizer wins.
DPResult dp_solve(const FiniteModel& model, const DPOptions& options = {});

nlohmann::json to_json(const DPResult& result);

}  // namespace zdq
