#pragma once

#include <cstdint>
#include <vector>

#include "zdq/model.hpp"

namespace zdq {

// Seeded random instances. Kernel rows are flat-Dirichlet draws (normalized
// Exp(1) variables) and table costs are uniform on [0, 1], all from one
// mt19937_64 stream seeded with `seed`. Suites derive per-instance seeds with
// derive_seed(master, index).
struct RandomSpec {
  int states = 2;
  int observations = 2;
  int messages = 2;
  int decisions = 2;
  int horizon = 2;
};

FiniteModel random_model(const RandomSpec& spec, std::uint64_t seed);

// Two encoders observing an i.i.d. source: every transition row equals the
// initial distribution; the joint observation kernel is drawn per state.
struct TeamSpec {
  int states = 2;
  int observations = 2;  // per encoder
  int decisions = 2;
  int horizon = 2;
  std::vector<std::vector<int>> rates = {{2, 2}, {1, 2}};
};

FiniteModel random_iid_team(const TeamSpec& spec, std::uint64_t seed);

// Stable random linear-Gaussian model with n states and m outputs.
LinearGaussModel random_lqg(int n, int m, int horizon, std::uint64_t seed);

}  // namespace zdq
