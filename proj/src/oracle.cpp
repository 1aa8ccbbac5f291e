#include "zdq/oracle.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "enumeration.hpp"

namespace zdq {
namespace {

using detail::ClassKey;

void require_single_encoder(const FiniteModel& model) {
  if (model.num_encoders() != 1) {
    throw std::invalid_argument("single-encoder search requires a model with one observation channel");
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// q_[0,t] as a message list for every node, following the argmin assignment.
std::vector<std::vector<History>> message_histories(const ObservationTree& tree, const detail::EngineResult& r) {
  std::vector<std::vector<History>> out(tree.levels.size());
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    for (std::size_t n = 0; n < tree.levels[t].size(); ++n) {
      History h = t == 0 ? History{} : out[t - 1][static_cast<std::size_t>(tree.levels[t][n].parent)];
      h.push_back(r.messages[t][0][n]);
      out[t].push_back(std::move(h));
    }
  }
  return out;
}

// Xi_t for every group of nodes sharing the parent message history.
std::map<std::uint64_t, MetaBelief> meta_beliefs_by_history(const std::vector<ObsNode>& level,
                                                            const std::vector<std::uint64_t>& parent_q) {
  std::map<std::uint64_t, std::map<BeliefId, double>> mass;
  for (std::size_t n = 0; n < level.size(); ++n) mass[parent_q[n]][level[n].enc_belief[0]] += level[n].prob;
  std::map<std::uint64_t, MetaBelief> out;
  for (const auto& [q, weights] : mass) {
    double total = 0.0;
    for (const auto& [id, w] : weights) total += w;
    MetaBelief xi;
    for (const auto& [id, w] : weights) xi.support.emplace_back(id, w / total);
    out[q] = std::move(xi);
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::vector<double>>> delayed_stage_weights(const FiniteModel& model,
                                                                    const ObservationTree& tree, int delay) {
  if (delay < 0) throw std::invalid_argument("delay must be >= 0");
  const Matrix kernel = joint_kernel(model);
  const auto n = static_cast<std::size_t>(model.num_states);
  std::vector<std::vector<std::vector<double>>> out(tree.levels.size());
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    const std::size_t scored = t >= static_cast<std::size_t>(delay) ? t - static_cast<std::size_t>(delay) : 0;
    for (std::size_t node = 0; node < tree.levels[t].size(); ++node) {
      const auto ypath = tree.path(static_cast<int>(t), static_cast<int>(node));
      std::vector<double> w(n, 0.0);
      std::vector<std::size_t> xs(t + 1, 0);
      // Odometer over all state paths x_[0,t].
      for (;;) {
        double p = model.initial[xs[0]] * kernel[xs[0]][static_cast<std::size_t>(ypath[0])];
        for (std::size_t s = 1; s <= t && p > 0.0; ++s) {
          p *= model.transition[xs[s - 1]][xs[s]] * kernel[xs[s]][static_cast<std::size_t>(ypath[s])];
        }
        w[xs[scored]] += p;
        std::size_t k = t + 1;
        while (k > 0 && ++xs[k - 1] == n) xs[--k] = 0;
        if (k == 0) break;
      }
      out[t].push_back(std::move(w));
    }
  }
  return out;
}

SearchReport enumerate_full(const FiniteModel& model, const SearchOptions& options, FullHistoryPolicy* best) {
  require_single_encoder(model);
  const auto start = std::chrono::steady_clock::now();
  const auto tree = build_observation_tree(model, options.tol);
  const auto weights =
      options.delay == 0 ? detail::joint_weights(tree) : delayed_stage_weights(model, tree, options.delay);
  detail::EngineInput input{model, tree, weights,
                            [&](int t, const std::vector<std::uint64_t>&, std::vector<std::vector<ClassKey>>& keys) {
                              const auto size = tree.levels[t].size();
                              for (std::size_t n = 0; n < size; ++n) keys[0].push_back({static_cast<long long>(n)});
                            },
                            options.budget, true};
  const auto r = detail::run_engine(input);

  FullHistoryPolicy policy;
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    auto& table = policy.tables.emplace_back();
    for (std::size_t n = 0; n < tree.levels[t].size(); ++n) {
      table[tree.path(static_cast<int>(t), static_cast<int>(n))] = r.messages[t][0][n];
    }
  }
  SearchReport report{"full", r.evaluated, r.cost, to_json(policy), seconds_since(start)};
  if (options.delay != 0) report.optimal_policy["delay"] = options.delay;
  if (best) *best = std::move(policy);
  return report;
}

SearchReport enumerate_witsenhausen(const FiniteModel& model, const SearchOptions& options,
                                    WitsenhausenPolicy* best) {
  require_single_encoder(model);
  if (options.delay != 0) throw std::invalid_argument("delayed scoring is only supported for the full class");
  const auto start = std::chrono::steady_clock::now();
  const auto tree = build_observation_tree(model, options.tol);
  const auto weights = detail::joint_weights(tree);
  detail::EngineInput input{
      model, tree, weights,
      [&](int t, const std::vector<std::uint64_t>& parent_q, std::vector<std::vector<ClassKey>>& keys) {
        const auto& level = tree.levels[t];
        for (std::size_t n = 0; n < level.size(); ++n) {
          keys[0].push_back({level[n].enc_belief[0], static_cast<long long>(parent_q[n])});
        }
      },
      options.budget};
  const auto r = detail::run_engine(input);

  WitsenhausenPolicy policy{tree.encoder_beliefs[0], {}};
  const auto hist = message_histories(tree, r);
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    auto& table = policy.tables.emplace_back();
    for (std::size_t n = 0; n < tree.levels[t].size(); ++n) {
      History past(hist[t][n].begin(), hist[t][n].end() - 1);
      table[{tree.levels[t][n].enc_belief[0], std::move(past)}] = r.messages[t][0][n];
    }
  }
  SearchReport report{"witsenhausen", r.evaluated, r.cost, to_json(policy), seconds_since(start)};
  if (best) *best = std::move(policy);
  return report;
}

SearchReport enumerate_wv(const FiniteModel& model, const SearchOptions& options, WVPolicy* best) {
  require_single_encoder(model);
  if (options.delay != 0) throw std::invalid_argument("delayed scoring is only supported for the full class");
  const auto start = std::chrono::steady_clock::now();
  const auto tree = build_observation_tree(model, options.tol);
  const auto weights = detail::joint_weights(tree);
  std::vector<MetaBeliefRegistry> registry(tree.levels.size(), MetaBeliefRegistry(options.tol));
  detail::EngineInput input{
      model, tree, weights,
      [&](int t, const std::vector<std::uint64_t>& parent_q, std::vector<std::vector<ClassKey>>& keys) {
        const auto& level = tree.levels[t];
        std::map<std::uint64_t, int> xi_id;
        for (const auto& [q, xi] : meta_beliefs_by_history(level, parent_q)) xi_id[q] = registry[t].intern(xi);
        for (std::size_t n = 0; n < level.size(); ++n) {
          keys[0].push_back({xi_id.at(parent_q[n]), level[n].enc_belief[0]});
        }
      },
      options.budget};
  const auto r = detail::run_engine(input);

  WVPolicy policy{tree.encoder_beliefs[0], {}};
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    const auto& level = tree.levels[t];
    std::vector<std::uint64_t> parent_q(level.size(), 0);
    if (t > 0) {
      for (std::size_t n = 0; n < level.size(); ++n) parent_q[n] = r.qhist[t - 1][static_cast<std::size_t>(level[n].parent)];
    }
    auto& stage = policy.stages.emplace_back();
    for (const auto& [q, xi] : meta_beliefs_by_history(level, parent_q)) {
      bool known = false;
      for (const auto& entry : stage) known = known || same_meta_belief(entry.xi, xi, options.tol);
      if (known) continue;
      Quantizer quantizer;
      for (std::size_t n = 0; n < level.size(); ++n) {
        if (parent_q[n] == q) quantizer[level[n].enc_belief[0]] = r.messages[t][0][n];
      }
      stage.push_back({xi, std::move(quantizer)});
    }
  }
  SearchReport report{"wv", r.evaluated, r.cost, to_json(policy), seconds_since(start)};
  if (best) *best = std::move(policy);
  return report;
}

std::vector<ClassComparison> compare_classes(const FiniteModel& model, const SearchOptions& options) {
  std::vector<ClassComparison> rows;
  const auto full = enumerate_full(model, options);
  for (const auto& report : {full, enumerate_witsenhausen(model, options), enumerate_wv(model, options)}) {
    rows.push_back({report.class_name, report.optimal_cost, report.optimal_cost - full.optimal_cost,
                    report.num_policies_evaluated});
  }
  return rows;
}

nlohmann::json to_json(const SearchReport& report) {
  return {{"class_name", report.class_name},
          {"num_policies_evaluated", report.num_policies_evaluated},
          {"optimal_cost", report.optimal_cost},
          {"optimal_policy", report.optimal_policy}};
}

}  // namespace zdq
