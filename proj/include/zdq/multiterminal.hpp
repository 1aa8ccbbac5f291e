#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zdq/filter.hpp"
#include "zdq/oracle.hpp"
#include "zdq/policy.hpp"

namespace zdq {

// Information each encoder may use at time t:
//   Memoryless  y^i_t
//   Separated   own belief P(x_t | y^i_[0,t]) and both encoders' q_[0,t-1]
//   Full        y^i_t and both encoders' y_[0,t-1] (one-step delayed sharing)
enum class TeamClass { Memoryless, Separated, Full };

std::string to_string(TeamClass cls);
TeamClass parse_team_class(const std::string& name);  // nsm | separated | full

// tables[i][t] maps the class key to a message of encoder i:
//   Memoryless  {y^i_t}
//   Separated   {belief id in beliefs[i], q_0, ..., q_{t-1}} with joint message indices
//   Full        {y^i_t, y_0, ..., y_{t-1}} with joint observation indices
struct TeamPolicy {
  TeamClass cls = TeamClass::Memoryless;
  std::vector<BeliefTable> beliefs;
  std::vector<std::vector<std::map<History, int>>> tables;
};

// Exact expected cost with the Bayes decoder on joint message histories.
double evaluate_team_policy(const FiniteModel& model, const TeamPolicy& policy);

SearchReport enumerate_team(const FiniteModel& model, TeamClass cls, const SearchOptions& options = {},
                            TeamPolicy* best = nullptr);

// Sixteen states x = (x1,x2,x3,x4) in {0,1}^4, index 8*x1 + 4*x2 + 2*x3 + x4.
// x_0 = (z1,z2,0,0), x_1 = (0,0,z2,z3), y^1 = x1^x3^x4, y^2 = x1^x2, and the
// decoder estimates x4 under squared error.
FiniteModel counterexample_model();

// Encoder 1 sends y^1_0 then y^1_1; encoder 2 sends y^2_0 at t = 1.
TeamPolicy counterexample_witness(const FiniteModel& model);

struct CounterexampleResult {
  double full_cost = 0.0;
  double separated_cost = 0.0;
  double witness_cost = 0.0;
  TeamPolicy witness;
  SearchReport full_report;
  SearchReport separated_report;
};

CounterexampleResult run_counterexample(const SearchOptions& options = {});

// Separated-class optimum minus the full-class optimum.
double signaling_gap(const FiniteModel& model, const SearchOptions& options = {});

nlohmann::json to_json(const TeamPolicy& policy);
TeamPolicy team_policy_from_json(const nlohmann::json& doc);

}  // namespace zdq
