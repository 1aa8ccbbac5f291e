#pragma once

// Reference computations used only by the tests. Everything here works from
// the raw kernels by enumerating (state path, observation path) atoms, without
// the library's filter, tree or search code.

#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "zdq/model.hpp"

namespace oracle {

using Path = std::vector<int>;

struct Atom {
  double prob = 0.0;
  std::vector<double> joint;  // P(x_t = x, y_[0,t])
};

// Every positive-probability joint observation path y_[0,t] with P(x_t, y_[0,t]).
std::map<Path, Atom> path_joint(const zdq::FiniteModel& model, int t);

// Same, but tracking one encoder's own observations only.
std::map<Path, Atom> own_path_joint(const zdq::FiniteModel& model, int t, int encoder);

std::vector<double> normalized(const std::vector<double>& v);

// Joint message index at time t given the joint observation path y_[0,t].
using Encoder = std::function<int(int t, const Path& ypath)>;

// Expected cost with the Bayes decoder on message histories, by enumeration.
double expected_cost(const zdq::FiniteModel& model, const Encoder& encoder);

// Minimum over every full-history policy of a single-encoder model, each
// candidate scored with expected_cost. Feasible for tiny models only.
double full_optimum(const zdq::FiniteModel& model);

// P(x_t | q_[0,t]) for the encoder, by enumeration.
std::vector<double> posterior_given_q(const zdq::FiniteModel& model, const Encoder& encoder, const Path& q_hist);

// Distribution of pi_t given q_[0,t-1] under a belief-based encoder
// q_t = rule(t, pi_t, q_[0,t-1]): list of (belief, weight) per history.
using BeliefRule = std::function<int(int t, const std::vector<double>& belief, const Path& q_hist)>;
std::map<Path, std::vector<std::pair<std::vector<double>, double>>> meta_beliefs(const zdq::FiniteModel& model,
                                                                                  const BeliefRule& rule, int t);

// Predictive covariance Sigma_{t+1|t} by conditioning the stacked Gaussian
// vector (x_{t+1}, y_0, ..., y_t).
Eigen::MatrixXd batch_predictive_cov(const zdq::LinearGaussModel& model, int t);

// Samples a state/observation path of the linear-Gaussian model.
std::vector<Eigen::VectorXd> sample_observations(const zdq::LinearGaussModel& model, int steps, unsigned long long seed);

}  // namespace oracle
