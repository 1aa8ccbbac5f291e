#include "zdq/beliefdp.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace zdq {
namespace {

struct Branch {
  double prob;
  int next;  // id at level t + 1
};

// Successors of one (meta-belief, quantizer) pair, one per positive-probability
// message. The quantizer is kept as its position in the enumeration order.
struct Action {
  long long index = 0;
  double stage = 0.0;
  std::vector<Branch> branches;
};

// Calls f(index, quantizer) on every map support -> {0..m-1}, first support
// entry most significant.
template <class F>
void for_each_quantizer(const MetaBelief& xi, int m, F&& f) {
  const std::size_t k = xi.support.size();
  std::vector<int> digits(k, 0);
  Quantizer quantizer;
  for (long long index = 0;; ++index) {
    for (std::size_t j = 0; j < k; ++j) quantizer[xi.support[j].first] = digits[j];
    f(index, quantizer);
    std::size_t j = k;
    while (j > 0 && ++digits[j - 1] == m) digits[--j] = 0;
    if (j == 0) return;
  }
}

Quantizer quantizer_at(const MetaBelief& xi, int m, long long index) {
  Quantizer quantizer;
  for (std::size_t j = xi.support.size(); j-- > 0;) {
    quantizer[xi.support[j].first] = static_cast<int>(index % m);
    index /= m;
  }
  return quantizer;
}

}  // namespace

double stage_cost(const FiniteModel& model, const BeliefTable& beliefs, const MetaBelief& xi,
                  const Quantizer& quantizer) {
  int top = 0;
  for (const auto& [id, w] : xi.support) top = std::max(top, quantizer.at(id));
  double total = 0.0;
  for (int q = 0; q <= top; ++q) {
    std::vector<double> weights(static_cast<std::size_t>(model.num_states), 0.0);
    bool any = false;
    for (const auto& [id, w] : xi.support) {
      if (quantizer.at(id) != q) continue;
      any = true;
      const auto& belief = beliefs.at(id);
      for (std::size_t x = 0; x < weights.size(); ++x) weights[x] += w * belief[x];
    }
    if (any) total += bayes_risk(model, weights);
  }
  return total;
}

DPResult dp_solve(const FiniteModel& model, const DPOptions& options) {
  if (model.num_encoders() != 1) throw std::invalid_argument("dp_solve requires a single-encoder model");
  if (options.budget <= 0) throw std::invalid_argument("budget must be positive");
  const int horizon = model.horizon;
  BeliefTable table(options.tol);
  std::vector<MetaBeliefRegistry> registry(static_cast<std::size_t>(horizon), MetaBeliefRegistry(options.tol));
  std::vector<std::vector<std::vector<Action>>> actions(static_cast<std::size_t>(horizon));
  long long examined = 0;

  // Forward pass: reachable meta-beliefs under every quantizer sequence. The
  // last stage has no successors, so only its best action is kept.
  registry[0].intern(xi_init(model, table));
  for (int t = 0; t < horizon; ++t) {
    const int m = model.rate(0, t);
    const bool last = t + 1 == horizon;
    for (std::size_t id = 0; id < registry[t].size(); ++id) {
      const MetaBelief xi = registry[t].at(static_cast<int>(id));
      auto& acts = actions[t].emplace_back();
      for_each_quantizer(xi, m, [&](long long index, const Quantizer& quantizer) {
        if (++examined > options.budget) {
          throw BudgetExceeded(fmt::format("dynamic program exceeds the budget of {} quantizer evaluations",
                                           options.budget));
        }
        Action act{index, stage_cost(model, table, xi, quantizer), {}};
        if (last) {
          if (acts.empty()) {
            acts.push_back(act);
          } else if (act.stage < acts.front().stage) {
            acts.front() = act;
          }
          return;
        }
        for (int q = 0; q < m; ++q) {
          const double pq = message_probability(xi, quantizer, q);
          if (pq <= 0.0) continue;
          const auto next = xi_predict(model, xi_condition(xi, quantizer, q), table);
          act.branches.push_back({pq, registry[t + 1].intern(next)});
        }
        acts.push_back(std::move(act));
      });
    }
  }

  // Backward pass.
  DPResult result;
  result.nodes.resize(static_cast<std::size_t>(horizon));
  result.meta_beliefs.resize(static_cast<std::size_t>(horizon));
  std::vector<double> next_value;
  for (int t = horizon - 1; t >= 0; --t) {
    std::vector<double> value(registry[t].size());
    for (std::size_t id = 0; id < registry[t].size(); ++id) {
      double best = std::numeric_limits<double>::infinity();
      const Action* chosen = nullptr;
      for (const auto& act : actions[t][id]) {
        double v = act.stage;
        for (const auto& b : act.branches) v += b.prob * next_value[static_cast<std::size_t>(b.next)];
        if (v < best) {
          best = v;
          chosen = &act;
        }
      }
      value[id] = best;
      const auto& xi = registry[t].at(static_cast<int>(id));
      result.nodes[t].push_back({t, static_cast<int>(id), best, quantizer_at(xi, model.rate(0, t), chosen->index)});
      result.meta_beliefs[t].push_back(xi);
    }
    next_value = std::move(value);
  }

  result.optimal_cost = result.nodes[0][0].value;
  result.actions_evaluated = examined;
  result.policy.beliefs = table;
  for (int t = 0; t < horizon; ++t) {
    auto& stage = result.policy.stages.emplace_back();
    for (const auto& node : result.nodes[t]) stage.push_back({result.meta_beliefs[t][node.meta_belief], node.best_quantizer});
  }
  return result;
}

nlohmann::json to_json(const DPResult& result) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : result.nodes) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : level) {
      nlohmann::json quantizer = nlohmann::json::object();
      for (const auto& [id, q] : node.best_quantizer) quantizer[std::to_string(id)] = q;
      nodes.push_back({{"t", node.t},
                       {"meta_belief", node.meta_belief},
                       {"xi", to_json(result.meta_beliefs[node.t][node.meta_belief])},
                       {"value", node.value},
                       {"best_quantizer", quantizer}});
    }
    levels.push_back(std::move(nodes));
  }
  return {{"class_name", "dp"},
          {"optimal_cost", result.optimal_cost},
          {"actions_evaluated", result.actions_evaluated},
          {"value_table", levels},
          {"optimal_policy", to_json(result.policy)}};
}

}  // namespace zdq
