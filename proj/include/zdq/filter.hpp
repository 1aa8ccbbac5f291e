#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zdq/model.hpp"

namespace zdq {

inline constexpr double kCanonTol = 1e-12;

using Belief = std::vector<double>;
using BeliefId = int;

// Raised when conditioning on an event of probability zero.
class ZeroProbabilityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Append-only table of beliefs. Two beliefs within `tol` in L-infinity share an
// id; the representative is the first one interned.
class BeliefTable {
 public:
  explicit BeliefTable(double tol = kCanonTol) : tol_(tol) {}

  BeliefId intern(const Belief& b);
  std::optional<BeliefId> find(const Belief& b) const;
  const Belief& at(BeliefId id) const { return entries_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return entries_.size(); }
  double tol() const { return tol_; }
  const std::vector<Belief>& entries() const { return entries_; }

 private:
  double tol_;
  std::vector<Belief> entries_;
};

struct Canonicalized {
  BeliefTable table;
  std::vector<BeliefId> ids;
};

Canonicalized canonicalize(const std::vector<Belief>& beliefs, double tol = kCanonTol);

double linf_distance(const Belief& a, const Belief& b);

// Single-encoder filter operations; `encoder` picks the observation channel.
Belief belief_init(const FiniteModel& model, int y0, int encoder = 0);
Belief belief_step(const FiniteModel& model, const Belief& prev, int y, int encoder = 0);
double obs_likelihood(const FiniteModel& model, const Belief& prev, int y, int encoder = 0);

struct BeliefNode {
  Belief belief;
  double path_prob = 0.0;
  std::vector<int> obs_path;
  BeliefId id = -1;
};

struct BeliefTree {
  std::vector<std::vector<BeliefNode>> levels;
  BeliefTable table;
};

// One node per positive-probability observation path, in lexicographic path order.
BeliefTree build_belief_tree(const FiniteModel& model, int horizon, double tol = kCanonTol);

// Observation-path tree over the joint observation of all encoders. Each node
// carries the unnormalized joint P(x_t = x, y_[0,t]), the belief given the joint
// observations and, for every encoder, the belief given its own observations.
struct ObsNode {
  int parent = -1;
  int y = 0;
  std::vector<int> y_enc;
  double prob = 0.0;
  std::vector<double> joint;
  BeliefId belief = -1;
  std::vector<BeliefId> enc_belief;
};

struct ObservationTree {
  std::vector<std::vector<ObsNode>> levels;
  BeliefTable beliefs;
  std::vector<BeliefTable> encoder_beliefs;

  std::vector<int> path(int t, int node) const;
};

ObservationTree build_observation_tree(const FiniteModel& model, double tol = kCanonTol);

// Finitely supported distribution over beliefs, support sorted by belief id.
struct MetaBelief {
  std::vector<std::pair<BeliefId, double>> support;
};

bool same_meta_belief(const MetaBelief& a, const MetaBelief& b, double tol = kCanonTol);

class MetaBeliefRegistry {
 public:
  explicit MetaBeliefRegistry(double tol = kCanonTol) : tol_(tol) {}
  int intern(const MetaBelief& xi);
  std::optional<int> find(const MetaBelief& xi) const;
  const MetaBelief& at(int id) const { return entries_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return entries_.size(); }

 private:
  double tol_;
  std::vector<MetaBelief> entries_;
};

using Quantizer = std::map<BeliefId, int>;

MetaBelief xi_init(const FiniteModel& model, BeliefTable& table);
double message_probability(const MetaBelief& xi, const Quantizer& quantizer, int q);
MetaBelief xi_condition(const MetaBelief& xi, const Quantizer& quantizer, int q);
MetaBelief xi_predict(const FiniteModel& model, const MetaBelief& xi, BeliefTable& table);

nlohmann::json to_json(const BeliefTree& tree);
nlohmann::json to_json(const MetaBelief& xi);

}  // namespace zdq
