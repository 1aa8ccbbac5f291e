#include "zdq/filter.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace zdq {
namespace {

void check_obs(const Matrix& kernel, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= kernel.front().size()) {
    throw std::out_of_range(fmt::format("observation {} outside alphabet of size {}", y, kernel.front().size()));
  }
}

// Unnormalized predict-update: out[x'] = K(y|x') * sum_x P(x'|x) prev[x].
std::vector<double> predict_update(const Matrix& transition, const Matrix& kernel,
                                   const std::vector<double>& prev, int y) {
  const auto n = prev.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    if (prev[x] == 0.0) continue;
    for (std::size_t next = 0; next < n; ++next) out[next] += transition[x][next] * prev[x];
  }
  for (std::size_t next = 0; next < n; ++next) out[next] *= kernel[next][static_cast<std::size_t>(y)];
  return out;
}

std::vector<double> weigh(const Matrix& kernel, const std::vector<double>& prior, int y) {
  std::vector<double> out(prior.size());
  for (std::size_t x = 0; x < prior.size(); ++x) out[x] = prior[x] * kernel[x][static_cast<std::size_t>(y)];
  return out;
}

double total(const std::vector<double>& v) {
  double s = 0.0;
  for (double p : v) s += p;
  return s;
}

Belief normalized(std::vector<double> v, double mass) {
  for (double& p : v) p /= mass;
  return v;
}

}  // namespace

double linf_distance(const Belief& a, const Belief& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::optional<BeliefId> BeliefTable::find(const Belief& b) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].size() == b.size() && linf_distance(entries_[i], b) <= tol_) {
      return static_cast<BeliefId>(i);
    }
  }
  return std::nullopt;
}

BeliefId BeliefTable::intern(const Belief& b) {
  if (auto id = find(b)) return *id;
  entries_.push_back(b);
  return static_cast<BeliefId>(entries_.size() - 1);
}

Canonicalized canonicalize(const std::vector<Belief>& beliefs, double tol) {
  if (tol < 0.0) throw std::invalid_argument("canonicalize: tolerance must be >= 0");
  Canonicalized out{BeliefTable(tol), {}};
  out.ids.reserve(beliefs.size());
  for (const auto& b : beliefs) out.ids.push_back(out.table.intern(b));
  return out;
}

double obs_likelihood(const FiniteModel& model, const Belief& prev, int y, int encoder) {
  const auto& kernel = model.obs_channels.at(encoder);
  check_obs(kernel, y);
  return total(predict_update(model.transition, kernel, prev, y));
}

Belief belief_init(const FiniteModel& model, int y0, int encoder) {
  const auto& kernel = model.obs_channels.at(encoder);
  check_obs(kernel, y0);
  auto joint = weigh(kernel, model.initial, y0);
  const double mass = total(joint);
  if (mass <= 0.0) throw ZeroProbabilityError(fmt::format("initial observation y0={} has probability zero", y0));
  return normalized(std::move(joint), mass);
}

Belief belief_step(const FiniteModel& model, const Belief& prev, int y, int encoder) {
  const auto& kernel = model.obs_channels.at(encoder);
  check_obs(kernel, y);
  auto joint = predict_update(model.transition, kernel, prev, y);
  const double mass = total(joint);
  if (mass <= 0.0) throw ZeroProbabilityError(fmt::format("observation y={} has likelihood zero", y));
  return normalized(std::move(joint), mass);
}

BeliefTree build_belief_tree(const FiniteModel& model, int horizon, double tol) {
  if (model.num_encoders() != 1) throw std::invalid_argument("build_belief_tree: single-encoder model required");
  BeliefTree tree{{}, BeliefTable(tol)};
  const int num_obs = model.num_obs();
  std::vector<BeliefNode> level;
  for (int y = 0; y < num_obs; ++y) {
    const double p = total(weigh(model.obs_channels[0], model.initial, y));
    if (p <= 0.0) continue;
    BeliefNode node{belief_init(model, y), p, {y}, -1};
    node.id = tree.table.intern(node.belief);
    level.push_back(std::move(node));
  }
  tree.levels.push_back(std::move(level));
  for (int t = 1; t < horizon; ++t) {
    std::vector<BeliefNode> next;
    for (const auto& parent : tree.levels.back()) {
      for (int y = 0; y < num_obs; ++y) {
        const double lik = obs_likelihood(model, parent.belief, y);
        if (lik <= 0.0) continue;
        BeliefNode node{belief_step(model, parent.belief, y), parent.path_prob * lik, parent.obs_path, -1};
        node.obs_path.push_back(y);
        node.id = tree.table.intern(node.belief);
        next.push_back(std::move(node));
      }
    }
    tree.levels.push_back(std::move(next));
  }
  return tree;
}

std::vector<int> ObservationTree::path(int t, int node) const {
  std::vector<int> out(static_cast<std::size_t>(t + 1));
  for (int s = t; s >= 0; --s) {
    const auto& n = levels[s][node];
    out[s] = n.y;
    node = n.parent;
  }
  return out;
}

ObservationTree build_observation_tree(const FiniteModel& model, double tol) {
  const Matrix kernel = joint_kernel(model);
  const int num_joint = joint_obs_size(model);
  const int encoders = model.num_encoders();
  ObservationTree tree{{}, BeliefTable(tol), std::vector<BeliefTable>(encoders, BeliefTable(tol))};
  // Own-observation belief vectors per node, kept alongside the tree.
  std::vector<std::vector<Belief>> own_prev;

  auto split = [&](int y) {
    std::vector<int> parts(encoders);
    for (int i = encoders - 1; i >= 0; --i) {
      parts[i] = y % model.num_obs(i);
      y /= model.num_obs(i);
    }
    return parts;
  };

  for (int t = 0; t < model.horizon; ++t) {
    std::vector<ObsNode> level;
    std::vector<std::vector<Belief>> own_next;
    const int parents = t == 0 ? 1 : static_cast<int>(tree.levels.back().size());
    for (int p = 0; p < parents; ++p) {
      for (int y = 0; y < num_joint; ++y) {
        ObsNode node;
        node.parent = t == 0 ? -1 : p;
        node.y = y;
        node.y_enc = split(y);
        if (t == 0) {
          node.joint = weigh(kernel, model.initial, y);
        } else {
          node.joint = predict_update(model.transition, kernel, tree.levels.back()[p].joint, y);
        }
        node.prob = total(node.joint);
        if (node.prob <= 0.0) continue;
        node.belief = tree.beliefs.intern(normalized(node.joint, node.prob));
        std::vector<Belief> own(encoders);
        for (int i = 0; i < encoders; ++i) {
          own[i] = t == 0 ? belief_init(model, node.y_enc[i], i)
                          : belief_step(model, own_prev[p][i], node.y_enc[i], i);
          node.enc_belief.push_back(tree.encoder_beliefs[i].intern(own[i]));
        }
        own_next.push_back(std::move(own));
        level.push_back(std::move(node));
      }
    }
    tree.levels.push_back(std::move(level));
    own_prev = std::move(own_next);
  }
  return tree;
}

bool same_meta_belief(const MetaBelief& a, const MetaBelief& b, double tol) {
  if (a.support.size() != b.support.size()) return false;
  for (std::size_t i = 0; i < a.support.size(); ++i) {
    if (a.support[i].first != b.support[i].first) return false;
    if (std::abs(a.support[i].second - b.support[i].second) > tol) return false;
  }
  return true;
}

std::optional<int> MetaBeliefRegistry::find(const MetaBelief& xi) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (same_meta_belief(entries_[i], xi, tol_)) return static_cast<int>(i);
  }
  return std::nullopt;
}

int MetaBeliefRegistry::intern(const MetaBelief& xi) {
  if (auto id = find(xi)) return *id;
  entries_.push_back(xi);
  return static_cast<int>(entries_.size() - 1);
}

namespace {

MetaBelief from_weights(const std::map<BeliefId, double>& weights) {
  double mass = 0.0;
  for (const auto& [id, w] : weights) mass += w;
  MetaBelief xi;
  for (const auto& [id, w] : weights) {
    if (w > 0.0) xi.support.emplace_back(id, w / mass);
  }
  return xi;
}

}  // namespace

MetaBelief xi_init(const FiniteModel& model, BeliefTable& table) {
  std::map<BeliefId, double> weights;
  for (int y = 0; y < model.num_obs(); ++y) {
    const double p = total(weigh(model.obs_channels[0], model.initial, y));
    if (p <= 0.0) continue;
    weights[table.intern(belief_init(model, y))] += p;
  }
  return from_weights(weights);
}

double message_probability(const MetaBelief& xi, const Quantizer& quantizer, int q) {
  double mass = 0.0;
  for (const auto& [id, w] : xi.support) {
    const auto it = quantizer.find(id);
    if (it == quantizer.end()) {
      throw std::out_of_range(fmt::format("quantizer is not defined on belief {}", id));
    }
    if (it->second == q) mass += w;
  }
  return mass;
}

MetaBelief xi_condition(const MetaBelief& xi, const Quantizer& quantizer, int q) {
  const double mass = message_probability(xi, quantizer, q);
  if (mass <= 0.0) throw ZeroProbabilityError(fmt::format("message {} has probability zero under the quantizer", q));
  MetaBelief out;
  for (const auto& [id, w] : xi.support) {
    if (quantizer.at(id) == q) out.support.emplace_back(id, w / mass);
  }
  return out;
}

MetaBelief xi_predict(const FiniteModel& model, const MetaBelief& xi, BeliefTable& table) {
  std::map<BeliefId, double> weights;
  for (const auto& [id, w] : xi.support) {
    const Belief prior = table.at(id);
    for (int y = 0; y < model.num_obs(); ++y) {
      const double lik = obs_likelihood(model, prior, y);
      if (lik <= 0.0) continue;
      weights[table.intern(belief_step(model, prior, y))] += w * lik;
    }
  }
  return from_weights(weights);
}

nlohmann::json to_json(const BeliefTree& tree) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : tree.levels) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : level) {
      nodes.push_back({{"obs_path", node.obs_path}, {"path_prob", node.path_prob}, {"belief_id", node.id}});
    }
    levels.push_back(std::move(nodes));
  }
  return {{"belief_table", tree.table.entries()}, {"levels", levels}};
}

nlohmann::json to_json(const MetaBelief& xi) {
  nlohmann::json support = nlohmann::json::array();
  for (const auto& [id, w] : xi.support) support.push_back({{"belief_id", id}, {"weight", w}});
  return support;
}

}  // namespace zdq
