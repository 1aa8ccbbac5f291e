#pragma once

// Depth-first enumeration shared by the single-encoder and team searches.
//
// At every level of the observation tree each encoder's nodes are partitioned
// into classes by a keyer; a candidate policy assigns one message per class.
// Keys may depend on the message histories of the parents, which is how the
// structured classes are expressed.

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "zdq/filter.hpp"
#include "zdq/model.hpp"

namespace zdq::detail {

using ClassKey = std::vector<long long>;
using StageWeights = std::vector<std::vector<std::vector<double>>>;  // [t][node][x]

// Fills keys[i][n] for every encoder i and node n of level t. parent_q[n] is the
// joint message history of the parent of n (0 at t = 0).
using LevelKeyer =
    std::function<void(int t, const std::vector<std::uint64_t>& parent_q, std::vector<std::vector<ClassKey>>& keys)>;

struct EngineResult {
  double cost = std::numeric_limits<double>::infinity();
  long long evaluated = 0;
  std::vector<std::vector<std::vector<int>>> messages;  // [t][encoder][node] of the argmin
  std::vector<std::vector<std::uint64_t>> qhist;        // [t][node], includes q_t
};

struct EngineInput {
  const FiniteModel& model;
  const ObservationTree& tree;
  const StageWeights& weights;
  LevelKeyer keyer;
  long long budget;
  // Keys ignore parent_q; the number of candidates is then known up front.
  bool static_keys = false;
};

EngineResult run_engine(const EngineInput& input);

// Joint message id of a node from its parent's and its own messages.
std::uint64_t extend_history(const FiniteModel& model, int t, std::uint64_t parent_q, const std::vector<int>& msgs);

// Decodes a joint history id into per-stage joint message indices.
std::vector<int> joint_messages(const FiniteModel& model, int t, std::uint64_t q);

StageWeights joint_weights(const ObservationTree& tree);

}  // namespace zdq::detail
