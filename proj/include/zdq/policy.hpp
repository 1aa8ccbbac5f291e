#pragma once

#include <map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zdq/filter.hpp"
#include "zdq/model.hpp"

namespace zdq {

// An observation path y_[0,t] or a message history q_[0,t].
using History = std::vector<int>;

// Encoder policy over the whole observation history. The message history
// q_[0,t-1] is a function of y_[0,t-1] for a deterministic policy, so tables
// are keyed by y_[0,t] alone. tables[t] covers every positive-probability path.
struct FullHistoryPolicy {
  std::vector<std::map<History, int>> tables;
};

// q_t = table[t][(id of pi_t, q_[0,t-1])].
struct WitsenhausenPolicy {
  BeliefTable beliefs;
  std::vector<std::map<std::pair<BeliefId, History>, int>> tables;
};

struct WVEntry {
  MetaBelief xi;
  Quantizer quantizer;
};

// stages[t] maps each reachable meta-belief Xi_t to a quantizer on its support.
struct WVPolicy {
  BeliefTable beliefs;
  std::vector<std::vector<WVEntry>> stages;

  const Quantizer& quantizer_for(int t, const MetaBelief& xi) const;
};

// Explicit receiver: decision index per message history q_[0,t]. Histories that
// are missing are unreachable and decode to 0.
struct DecoderPolicy {
  std::vector<std::map<History, int>> tables;
};

// argmin_v sum_x posterior[x] cost[x][v], lowest index on ties.
int bayes_decode(const std::vector<double>& posterior, const Matrix& cost);

// Minimum expected cost against unnormalized weights w[x] = P(x, event); for
// squared-error models the decision is the conditional mean of the target.
double bayes_risk(const FiniteModel& model, const std::vector<double>& weights);
double expected_cost(const FiniteModel& model, const std::vector<double>& weights, int decision);

std::vector<double> posterior_given_q(const FiniteModel& model, const FullHistoryPolicy& policy,
                                      const History& q_hist);

double evaluate_policy(const FiniteModel& model, const FullHistoryPolicy& policy);
double evaluate_policy(const FiniteModel& model, const FullHistoryPolicy& policy, const DecoderPolicy& decoder);
double evaluate_policy(const FiniteModel& model, const WitsenhausenPolicy& policy);
double evaluate_policy(const FiniteModel& model, const WVPolicy& policy);

// The Bayes decoder for a fixed encoder, tabulated over reachable histories.
DecoderPolicy bayes_decoder(const FiniteModel& model, const FullHistoryPolicy& policy);

FullHistoryPolicy lift_policy(const FiniteModel& model, const WitsenhausenPolicy& policy);
FullHistoryPolicy lift_policy(const FiniteModel& model, const WVPolicy& policy);

std::string history_key(const History& h);
History parse_history_key(const std::string& key);

nlohmann::json to_json(const FullHistoryPolicy& policy);
nlohmann::json to_json(const WitsenhausenPolicy& policy);
nlohmann::json to_json(const WVPolicy& policy);
FullHistoryPolicy full_policy_from_json(const nlohmann::json& doc);
WitsenhausenPolicy witsenhausen_policy_from_json(const nlohmann::json& doc);
WVPolicy wv_policy_from_json(const nlohmann::json& doc);

}  // namespace zdq
