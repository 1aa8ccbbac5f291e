#include "zdq/policy.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace zdq {
namespace {

// Message history (including q_t) of every node of the observation tree.
using NodeHistories = std::vector<std::vector<History>>;

NodeHistories assign_histories(const FiniteModel& model, const ObservationTree& tree,
                               const FullHistoryPolicy& policy) {
  if (static_cast<int>(policy.tables.size()) != model.horizon) {
    throw std::invalid_argument(
        fmt::format("policy has {} stages, model horizon is {}", policy.tables.size(), model.horizon));
  }
  NodeHistories out(tree.levels.size());
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    const auto& level = tree.levels[t];
    out[t].resize(level.size());
    for (std::size_t n = 0; n < level.size(); ++n) {
      const auto path = tree.path(static_cast<int>(t), static_cast<int>(n));
      const auto it = policy.tables[t].find(path);
      if (it == policy.tables[t].end()) {
        throw std::invalid_argument(fmt::format("policy has no entry for reachable path {} at t={}",
                                                history_key(path), t));
      }
      const int q = it->second;
      if (q < 0 || q >= model.rate(0, static_cast<int>(t))) {
        throw std::invalid_argument(fmt::format("message {} out of range at t={}", q, t));
      }
      History h = t == 0 ? History{} : out[t - 1][static_cast<std::size_t>(level[n].parent)];
      h.push_back(q);
      out[t][n] = std::move(h);
    }
  }
  return out;
}

std::vector<std::map<History, std::vector<double>>> group_by_history(const FiniteModel& model,
                                                                    const ObservationTree& tree,
                                                                    const NodeHistories& hist) {
  std::vector<std::map<History, std::vector<double>>> groups(tree.levels.size());
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    for (std::size_t n = 0; n < tree.levels[t].size(); ++n) {
      auto& acc = groups[t][hist[t][n]];
      acc.resize(static_cast<std::size_t>(model.num_states), 0.0);
      const auto& joint = tree.levels[t][n].joint;
      for (std::size_t x = 0; x < joint.size(); ++x) acc[x] += joint[x];
    }
  }
  return groups;
}

double initial_obs_prob(const FiniteModel& model, int y) {
  double p = 0.0;
  for (int x = 0; x < model.num_states; ++x) p += model.initial[x] * model.obs_channels[0][x][y];
  return p;
}

void require_single_encoder(const FiniteModel& model) {
  if (model.num_encoders() != 1) throw std::invalid_argument("single-encoder model required");
}

}  // namespace

int bayes_decode(const std::vector<double>& posterior, const Matrix& cost) {
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  const std::size_t decisions = cost.front().size();
  for (std::size_t v = 0; v < decisions; ++v) {
    double c = 0.0;
    for (std::size_t x = 0; x < posterior.size(); ++x) c += posterior[x] * cost[x][v];
    if (c < best_cost) {
      best_cost = c;
      best = static_cast<int>(v);
    }
  }
  return best;
}

double expected_cost(const FiniteModel& model, const std::vector<double>& weights, int decision) {
  double c = 0.0;
  for (std::size_t x = 0; x < weights.size(); ++x) c += weights[x] * model.cost[x][static_cast<std::size_t>(decision)];
  return c;
}

double bayes_risk(const FiniteModel& model, const std::vector<double>& weights) {
  if (model.squared_error_target) {
    const auto& f = *model.squared_error_target;
    double mass = 0.0, first = 0.0;
    for (std::size_t x = 0; x < weights.size(); ++x) {
      mass += weights[x];
      first += weights[x] * f[x];
    }
    if (mass <= 0.0) return 0.0;
    const double mean = first / mass;
    double risk = 0.0;
    for (std::size_t x = 0; x < weights.size(); ++x) risk += weights[x] * (f[x] - mean) * (f[x] - mean);
    return risk;
  }
  return expected_cost(model, weights, bayes_decode(weights, model.cost));
}

std::vector<double> posterior_given_q(const FiniteModel& model, const FullHistoryPolicy& policy,
                                      const History& q_hist) {
  require_single_encoder(model);
  if (q_hist.empty() || static_cast<int>(q_hist.size()) > model.horizon) {
    throw std::invalid_argument("posterior_given_q: history length must be in [1, horizon]");
  }
  const auto tree = build_observation_tree(model);
  const auto hist = assign_histories(model, tree, policy);
  const std::size_t t = q_hist.size() - 1;
  std::vector<double> post(static_cast<std::size_t>(model.num_states), 0.0);
  for (std::size_t n = 0; n < tree.levels[t].size(); ++n) {
    if (hist[t][n] != q_hist) continue;
    for (std::size_t x = 0; x < post.size(); ++x) post[x] += tree.levels[t][n].joint[x];
  }
  double mass = 0.0;
  for (double p : post) mass += p;
  if (mass <= 0.0) {
    throw ZeroProbabilityError(fmt::format("message history {} has probability zero", history_key(q_hist)));
  }
  for (double& p : post) p /= mass;
  return post;
}

double evaluate_policy(const FiniteModel& model, const FullHistoryPolicy& policy) {
  require_single_encoder(model);
  const auto tree = build_observation_tree(model);
  const auto groups = group_by_history(model, tree, assign_histories(model, tree, policy));
  double total = 0.0;
  for (const auto& level : groups) {
    for (const auto& [h, w] : level) total += bayes_risk(model, w);
  }
  return total;
}

double evaluate_policy(const FiniteModel& model, const FullHistoryPolicy& policy, const DecoderPolicy& decoder) {
  require_single_encoder(model);
  if (model.squared_error_target) {
    throw std::invalid_argument("explicit decoders need a cost table; squared-error models decode by conditional mean");
  }
  const auto tree = build_observation_tree(model);
  const auto groups = group_by_history(model, tree, assign_histories(model, tree, policy));
  double total = 0.0;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    for (const auto& [h, w] : groups[t]) {
      int v = 0;
      if (t < decoder.tables.size()) {
        if (auto it = decoder.tables[t].find(h); it != decoder.tables[t].end()) v = it->second;
      }
      total += expected_cost(model, w, v);
    }
  }
  return total;
}

DecoderPolicy bayes_decoder(const FiniteModel& model, const FullHistoryPolicy& policy) {
  require_single_encoder(model);
  if (model.squared_error_target) throw std::invalid_argument("bayes_decoder: needs a cost table");
  const auto tree = build_observation_tree(model);
  const auto groups = group_by_history(model, tree, assign_histories(model, tree, policy));
  DecoderPolicy decoder;
  for (const auto& level : groups) {
    auto& table = decoder.tables.emplace_back();
    for (const auto& [h, w] : level) table[h] = bayes_decode(w, model.cost);
  }
  return decoder;
}

// Follows the belief recursion along every observation path; independent of the
// observation tree.
double evaluate_policy(const FiniteModel& model, const WitsenhausenPolicy& policy) {
  require_single_encoder(model);
  if (static_cast<int>(policy.tables.size()) != model.horizon) {
    throw std::invalid_argument("policy stages do not match the model horizon");
  }
  std::vector<std::map<History, std::vector<double>>> groups(static_cast<std::size_t>(model.horizon));

  auto walk = [&](auto&& self, int t, const Belief& belief, double prob, const History& past) -> void {
    const auto id = policy.beliefs.find(belief);
    if (!id) throw std::invalid_argument(fmt::format("policy belief table misses a reachable belief at t={}", t));
    const auto it = policy.tables[t].find({*id, past});
    if (it == policy.tables[t].end()) {
      throw std::invalid_argument(fmt::format("policy has no entry for belief {} history {} at t={}", *id,
                                              history_key(past), t));
    }
    History h = past;
    h.push_back(it->second);
    auto& acc = groups[t][h];
    acc.resize(belief.size(), 0.0);
    for (std::size_t x = 0; x < belief.size(); ++x) acc[x] += prob * belief[x];
    if (t + 1 == model.horizon) return;
    for (int y = 0; y < model.num_obs(); ++y) {
      const double lik = obs_likelihood(model, belief, y);
      if (lik <= 0.0) continue;
      self(self, t + 1, belief_step(model, belief, y), prob * lik, h);
    }
  };
  for (int y = 0; y < model.num_obs(); ++y) {
    const double p = initial_obs_prob(model, y);
    if (p <= 0.0) continue;
    walk(walk, 0, belief_init(model, y), p, {});
  }

  double total = 0.0;
  for (const auto& level : groups) {
    for (const auto& [h, w] : level) total += bayes_risk(model, w);
  }
  return total;
}

const Quantizer& WVPolicy::quantizer_for(int t, const MetaBelief& xi) const {
  for (const auto& entry : stages.at(static_cast<std::size_t>(t))) {
    if (same_meta_belief(entry.xi, xi, beliefs.tol())) return entry.quantizer;
  }
  throw std::invalid_argument(fmt::format("WV policy has no quantizer for a reachable meta-belief at t={}", t));
}

// Runs the meta-belief chain: Xi_t selects the quantizer, each message splits
// Xi_t, and the conditioned meta-belief is pushed through the belief kernel.
double evaluate_policy(const FiniteModel& model, const WVPolicy& policy) {
  require_single_encoder(model);
  if (static_cast<int>(policy.stages.size()) != model.horizon) {
    throw std::invalid_argument("policy stages do not match the model horizon");
  }
  BeliefTable table = policy.beliefs;
  auto cost_to_go = [&](auto&& self, int t, const MetaBelief& xi, double weight) -> double {
    const Quantizer& quantizer = policy.quantizer_for(t, xi);
    double total = 0.0;
    for (int q = 0; q < model.rate(0, t); ++q) {
      const double pq = message_probability(xi, quantizer, q);
      if (pq <= 0.0) continue;
      std::vector<double> w(static_cast<std::size_t>(model.num_states), 0.0);
      for (const auto& [id, mass] : xi.support) {
        if (quantizer.at(id) != q) continue;
        const auto& belief = table.at(id);
        for (std::size_t x = 0; x < w.size(); ++x) w[x] += weight * mass * belief[x];
      }
      total += bayes_risk(model, w);
      if (t + 1 < model.horizon) {
        total += self(self, t + 1, xi_predict(model, xi_condition(xi, quantizer, q), table), weight * pq);
      }
    }
    return total;
  };
  return cost_to_go(cost_to_go, 0, xi_init(model, table), 1.0);
}

FullHistoryPolicy lift_policy(const FiniteModel& model, const WitsenhausenPolicy& policy) {
  require_single_encoder(model);
  const auto tree = build_observation_tree(model, policy.beliefs.tol());
  FullHistoryPolicy out;
  std::vector<History> prev_hist;
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    auto& table = out.tables.emplace_back();
    std::vector<History> hist;
    for (std::size_t n = 0; n < tree.levels[t].size(); ++n) {
      const auto& node = tree.levels[t][n];
      const auto id = policy.beliefs.find(tree.encoder_beliefs[0].at(node.enc_belief[0]));
      if (!id) throw std::invalid_argument(fmt::format("policy belief table misses a reachable belief at t={}", t));
      const History past = t == 0 ? History{} : prev_hist[static_cast<std::size_t>(node.parent)];
      const int q = policy.tables.at(t).at({*id, past});
      table[tree.path(static_cast<int>(t), static_cast<int>(n))] = q;
      History h = past;
      h.push_back(q);
      hist.push_back(std::move(h));
    }
    prev_hist = std::move(hist);
  }
  return out;
}

FullHistoryPolicy lift_policy(const FiniteModel& model, const WVPolicy& policy) {
  require_single_encoder(model);
  BeliefTable table = policy.beliefs;
  const auto tree = build_observation_tree(model, table.tol());
  FullHistoryPolicy out;

  std::map<History, MetaBelief> xi_of{{History{}, xi_init(model, table)}};
  std::vector<History> prev_hist;
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    auto& stage = out.tables.emplace_back();
    std::vector<History> hist;
    std::map<History, const Quantizer*> used;
    for (std::size_t n = 0; n < tree.levels[t].size(); ++n) {
      const auto& node = tree.levels[t][n];
      const History past = t == 0 ? History{} : prev_hist[static_cast<std::size_t>(node.parent)];
      const Quantizer& quantizer = policy.quantizer_for(static_cast<int>(t), xi_of.at(past));
      used[past] = &quantizer;
      const auto id = table.find(tree.encoder_beliefs[0].at(node.enc_belief[0]));
      if (!id) throw std::invalid_argument(fmt::format("reachable belief missing from policy table at t={}", t));
      const int q = quantizer.at(*id);
      stage[tree.path(static_cast<int>(t), static_cast<int>(n))] = q;
      History h = past;
      h.push_back(q);
      hist.push_back(std::move(h));
    }
    if (t + 1 < tree.levels.size()) {
      std::map<History, MetaBelief> next;
      for (const auto& h : hist) {
        if (next.count(h)) continue;
        const History past(h.begin(), h.end() - 1);
        next[h] = xi_predict(model, xi_condition(xi_of.at(past), *used.at(past), h.back()), table);
      }
      xi_of = std::move(next);
    }
    prev_hist = std::move(hist);
  }
  return out;
}

std::string history_key(const History& h) {
  std::string out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(h[i]);
  }
  return out;
}

History parse_history_key(const std::string& key) {
  History out;
  if (key.empty()) return out;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) out.push_back(std::stoi(part));
  return out;
}

nlohmann::json to_json(const FullHistoryPolicy& policy) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& table : policy.tables) {
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [path, q] : table) entries[history_key(path)] = q;
    tables.push_back(std::move(entries));
  }
  return {{"class", "full"}, {"key", "y_path"}, {"tables", tables}};
}

nlohmann::json to_json(const WitsenhausenPolicy& policy) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& table : policy.tables) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [key, q] : table) {
      entries.push_back({{"belief_id", key.first}, {"q_hist", key.second}, {"message", q}});
    }
    tables.push_back(std::move(entries));
  }
  return {{"class", "witsenhausen"}, {"belief_table", policy.beliefs.entries()}, {"tables", tables}};
}

nlohmann::json to_json(const WVPolicy& policy) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& stage : policy.stages) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& entry : stage) {
      nlohmann::json quantizer = nlohmann::json::object();
      for (const auto& [id, q] : entry.quantizer) quantizer[std::to_string(id)] = q;
      entries.push_back({{"xi", to_json(entry.xi)}, {"quantizer", quantizer}});
    }
    stages.push_back(std::move(entries));
  }
  return {{"class", "wv"}, {"belief_table", policy.beliefs.entries()}, {"stages", stages}};
}

FullHistoryPolicy full_policy_from_json(const nlohmann::json& doc) {
  if (doc.value("class", std::string{}) != "full") {
    throw std::invalid_argument("expected a policy document with \"class\": \"full\"");
  }
  FullHistoryPolicy policy;
  for (const auto& table : doc.at("tables")) {
    auto& out = policy.tables.emplace_back();
    for (const auto& [key, q] : table.items()) out[parse_history_key(key)] = q.get<int>();
  }
  return policy;
}

namespace {

BeliefTable belief_table_from_json(const nlohmann::json& doc) {
  BeliefTable table;
  for (const auto& b : doc) {
    const auto id = table.intern(b.get<Belief>());
    if (static_cast<std::size_t>(id) + 1 != table.size()) {
      throw std::invalid_argument("policy belief table has entries closer than the canonical tolerance");
    }
  }
  return table;
}

void expect_class(const nlohmann::json& doc, const char* name) {
  if (doc.value("class", std::string{}) != name) {
    throw std::invalid_argument(fmt::format("expected a policy document with \"class\": \"{}\"", name));
  }
}

}  // namespace

WitsenhausenPolicy witsenhausen_policy_from_json(const nlohmann::json& doc) {
  expect_class(doc, "witsenhausen");
  WitsenhausenPolicy policy{belief_table_from_json(doc.at("belief_table")), {}};
  for (const auto& table : doc.at("tables")) {
    auto& out = policy.tables.emplace_back();
    for (const auto& e : table) {
      out[{e.at("belief_id").get<BeliefId>(), e.at("q_hist").get<History>()}] = e.at("message").get<int>();
    }
  }
  return policy;
}

WVPolicy wv_policy_from_json(const nlohmann::json& doc) {
  expect_class(doc, "wv");
  WVPolicy policy{belief_table_from_json(doc.at("belief_table")), {}};
  for (const auto& stage : doc.at("stages")) {
    auto& out = policy.stages.emplace_back();
    for (const auto& e : stage) {
      WVEntry entry;
      for (const auto& s : e.at("xi")) entry.xi.support.emplace_back(s.at("belief_id").get<BeliefId>(), s.at("weight").get<double>());
      for (const auto& [id, q] : e.at("quantizer").items()) entry.quantizer[std::stoi(id)] = q.get<int>();
      out.push_back(std::move(entry));
    }
  }
  return policy;
}

}  // namespace zdq
