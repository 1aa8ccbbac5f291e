#include "zdq/multiterminal.hpp"

#include <chrono>

#include <fmt/format.h>

#include "enumeration.hpp"

namespace zdq {
namespace {

// The table key of node n at level t for encoder i. `past_q` is the joint
// message history q_[0,t-1] of the node (used by the separated class only).
History team_key(TeamClass cls, const ObservationTree& tree, int t, int n, int i, const History& past_q,
                 BeliefId own_belief) {
  const auto& node = tree.levels[t][n];
  switch (cls) {
    case TeamClass::Memoryless:
      return {node.y_enc[i]};
    case TeamClass::Separated: {
      History key{own_belief};
      key.insert(key.end(), past_q.begin(), past_q.end());
      return key;
    }
    case TeamClass::Full: {
      History key{node.y_enc[i]};
      if (t > 0) {
        const auto prev = tree.path(t - 1, node.parent);
        key.insert(key.end(), prev.begin(), prev.end());
      }
      return key;
    }
  }
  throw std::logic_error("unknown team class");
}

int joint_message(const FiniteModel& model, int t, const std::vector<int>& msgs) {
  int joint = 0;
  for (int i = 0; i < model.num_encoders(); ++i) joint = joint * model.rate(i, t) + msgs[i];
  return joint;
}

}  // namespace

std::string to_string(TeamClass cls) {
  switch (cls) {
    case TeamClass::Memoryless:
      return "nsm";
    case TeamClass::Separated:
      return "separated";
    case TeamClass::Full:
      return "full";
  }
  return "unknown";
}

TeamClass parse_team_class(const std::string& name) {
  if (name == "nsm" || name == "memoryless") return TeamClass::Memoryless;
  if (name == "separated") return TeamClass::Separated;
  if (name == "full") return TeamClass::Full;
  throw std::invalid_argument(fmt::format("unknown team class '{}' (expected nsm, separated or full)", name));
}

double evaluate_team_policy(const FiniteModel& model, const TeamPolicy& policy) {
  const int encoders = model.num_encoders();
  if (static_cast<int>(policy.tables.size()) != encoders) {
    throw std::invalid_argument("team policy has a table set per encoder; encoder count differs from the model");
  }
  for (const auto& tables : policy.tables) {
    if (static_cast<int>(tables.size()) != model.horizon) {
      throw std::invalid_argument("team policy stages do not match the model horizon");
    }
  }
  const auto tree = build_observation_tree(model);
  std::vector<History> prev_hist;
  double total = 0.0;
  for (int t = 0; t < model.horizon; ++t) {
    const auto& level = tree.levels[t];
    std::vector<History> hist;
    std::map<History, std::vector<double>> cells;
    for (int n = 0; n < static_cast<int>(level.size()); ++n) {
      const auto& node = level[n];
      const History past = t == 0 ? History{} : prev_hist[static_cast<std::size_t>(node.parent)];
      std::vector<int> msgs(static_cast<std::size_t>(encoders));
      for (int i = 0; i < encoders; ++i) {
        BeliefId own = -1;
        if (policy.cls == TeamClass::Separated) {
          const auto id = policy.beliefs.at(i).find(tree.encoder_beliefs[i].at(node.enc_belief[i]));
          if (!id) throw std::invalid_argument(fmt::format("encoder {} belief missing from the policy at t={}", i, t));
          own = *id;
        }
        const auto key = team_key(policy.cls, tree, t, n, i, past, own);
        const auto it = policy.tables[i][t].find(key);
        if (it == policy.tables[i][t].end()) {
          throw std::invalid_argument(
              fmt::format("encoder {} has no entry for key {} at t={}", i, history_key(key), t));
        }
        if (it->second < 0 || it->second >= model.rate(i, t)) {
          throw std::invalid_argument(fmt::format("encoder {} message {} out of range at t={}", i, it->second, t));
        }
        msgs[i] = it->second;
      }
      History h = past;
      h.push_back(joint_message(model, t, msgs));
      auto& w = cells[h];
      w.resize(static_cast<std::size_t>(model.num_states), 0.0);
      for (std::size_t x = 0; x < w.size(); ++x) w[x] += node.joint[x];
      hist.push_back(std::move(h));
    }
    for (const auto& [h, w] : cells) total += bayes_risk(model, w);
    prev_hist = std::move(hist);
  }
  return total;
}

SearchReport enumerate_team(const FiniteModel& model, TeamClass cls, const SearchOptions& options, TeamPolicy* best) {
  if (options.delay != 0) throw std::invalid_argument("delayed scoring is only supported for the full class");
  const auto start = std::chrono::steady_clock::now();
  const int encoders = model.num_encoders();
  const auto tree = build_observation_tree(model, options.tol);
  const auto weights = detail::joint_weights(tree);
  detail::EngineInput input{
      model, tree, weights,
      [&](int t, const std::vector<std::uint64_t>& parent_q, std::vector<std::vector<detail::ClassKey>>& keys) {
        const auto& level = tree.levels[t];
        for (int i = 0; i < encoders; ++i) {
          for (std::size_t n = 0; n < level.size(); ++n) {
            const auto& node = level[n];
            switch (cls) {
              case TeamClass::Memoryless:
                keys[i].push_back({node.y_enc[i]});
                break;
              case TeamClass::Separated:
                keys[i].push_back({node.enc_belief[i], static_cast<long long>(parent_q[n])});
                break;
              case TeamClass::Full:
                keys[i].push_back({node.y_enc[i], node.parent});
                break;
            }
          }
        }
      },
      options.budget, cls != TeamClass::Separated};
  const auto r = detail::run_engine(input);

  TeamPolicy policy{cls, tree.encoder_beliefs, {}};
  policy.tables.assign(static_cast<std::size_t>(encoders),
                       std::vector<std::map<History, int>>(static_cast<std::size_t>(model.horizon)));
  for (int t = 0; t < model.horizon; ++t) {
    const auto& level = tree.levels[t];
    for (int n = 0; n < static_cast<int>(level.size()); ++n) {
      History past;
      if (t > 0) past = detail::joint_messages(model, t - 1, r.qhist[t - 1][static_cast<std::size_t>(level[n].parent)]);
      for (int i = 0; i < encoders; ++i) {
        const auto key = team_key(cls, tree, t, n, i, past, level[n].enc_belief[i]);
        policy.tables[i][t][key] = r.messages[t][i][n];
      }
    }
  }
  SearchReport report{"team-" + to_string(cls), r.evaluated, r.cost, to_json(policy), 0.0};
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (best) *best = std::move(policy);
  return report;
}

FiniteModel counterexample_model() {
  constexpr int n = 16;
  auto bit = [](int x, int k) { return (x >> (4 - k)) & 1; };  // k-th coordinate, k = 1..4
  FiniteModel m;
  m.num_states = n;
  m.transition.assign(n, std::vector<double>(n, 0.0));
  for (int x = 0; x < n; ++x) {
    for (int z = 0; z < 2; ++z) m.transition[x][2 * bit(x, 2) + z] = 0.5;
  }
  m.initial.assign(n, 0.0);
  for (int z1 = 0; z1 < 2; ++z1) {
    for (int z2 = 0; z2 < 2; ++z2) m.initial[8 * z1 + 4 * z2] = 0.25;
  }
  Matrix c1(n, std::vector<double>(2, 0.0)), c2 = c1;
  std::vector<Matrix> joint(n, Matrix(2, std::vector<double>(2, 0.0)));
  std::vector<double> target(n);
  for (int x = 0; x < n; ++x) {
    const int y1 = bit(x, 1) ^ bit(x, 3) ^ bit(x, 4);
    const int y2 = bit(x, 1) ^ bit(x, 2);
    c1[x][y1] = 1.0;
    c2[x][y2] = 1.0;
    joint[x][y1][y2] = 1.0;
    target[x] = bit(x, 4);
  }
  m.obs_channels = {c1, c2};
  m.joint_obs = std::move(joint);
  m.squared_error_target = std::move(target);
  m.rate_schedule = {{2, 2}, {1, 2}};
  m.horizon = 2;
  return m;
}

TeamPolicy counterexample_witness(const FiniteModel& model) {
  TeamPolicy policy{TeamClass::Full, {}, {}};
  policy.tables.assign(2, std::vector<std::map<History, int>>(2));
  const int ny2 = model.num_obs(1);
  for (int y1 = 0; y1 < model.num_obs(0); ++y1) {
    policy.tables[0][0][{y1}] = y1;
    for (int y0 = 0; y0 < joint_obs_size(model); ++y0) policy.tables[0][1][{y1, y0}] = y1;
  }
  for (int y2 = 0; y2 < ny2; ++y2) {
    policy.tables[1][0][{y2}] = 0;
    for (int y0 = 0; y0 < joint_obs_size(model); ++y0) policy.tables[1][1][{y2, y0}] = y0 % ny2;
  }
  return policy;
}

CounterexampleResult run_counterexample(const SearchOptions& options) {
  const auto model = counterexample_model();
  CounterexampleResult out;
  out.full_report = enumerate_team(model, TeamClass::Full, options);
  out.separated_report = enumerate_team(model, TeamClass::Separated, options);
  out.full_cost = out.full_report.optimal_cost;
  out.separated_cost = out.separated_report.optimal_cost;
  out.witness = counterexample_witness(model);
  out.witness_cost = evaluate_team_policy(model, out.witness);
  return out;
}

double signaling_gap(const FiniteModel& model, const SearchOptions& options) {
  return enumerate_team(model, TeamClass::Separated, options).optimal_cost -
         enumerate_team(model, TeamClass::Full, options).optimal_cost;
}

nlohmann::json to_json(const TeamPolicy& policy) {
  nlohmann::json encoders = nlohmann::json::array();
  for (const auto& stages : policy.tables) {
    nlohmann::json tables = nlohmann::json::array();
    for (const auto& table : stages) {
      nlohmann::json entries = nlohmann::json::object();
      for (const auto& [key, q] : table) entries[history_key(key)] = q;
      tables.push_back(std::move(entries));
    }
    encoders.push_back(std::move(tables));
  }
  nlohmann::json doc{{"class", to_string(policy.cls)}, {"tables", encoders}};
  if (policy.cls == TeamClass::Separated) {
    nlohmann::json beliefs = nlohmann::json::array();
    for (const auto& table : policy.beliefs) beliefs.push_back(table.entries());
    doc["belief_tables"] = beliefs;
  }
  return doc;
}

TeamPolicy team_policy_from_json(const nlohmann::json& doc) {
  TeamPolicy policy;
  policy.cls = parse_team_class(doc.at("class").get<std::string>());
  if (policy.cls == TeamClass::Separated) {
    for (const auto& entries : doc.at("belief_tables")) {
      BeliefTable table;
      for (const auto& b : entries) table.intern(b.get<Belief>());
      policy.beliefs.push_back(std::move(table));
    }
  }
  for (const auto& stages : doc.at("tables")) {
    auto& out = policy.tables.emplace_back();
    for (const auto& table : stages) {
      auto& t = out.emplace_back();
      for (const auto& [key, q] : table.items()) t[parse_history_key(key)] = q.get<int>();
    }
  }
  return policy;
}

}  // namespace zdq
