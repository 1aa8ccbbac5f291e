#include "zdq/instances.hpp"

#include <random>
#include <stdexcept>

namespace zdq {
namespace {

std::vector<double> dirichlet_row(std::mt19937_64& rng, int size) {
  std::exponential_distribution<double> exp1(1.0);
  std::vector<double> row(static_cast<std::size_t>(size));
  double total = 0.0;
  for (double& v : row) total += v = exp1(rng);
  for (double& v : row) v /= total;
  return row;
}

Matrix dirichlet_matrix(std::mt19937_64& rng, int rows, int cols) {
  Matrix m;
  for (int r = 0; r < rows; ++r) m.push_back(dirichlet_row(rng, cols));
  return m;
}

Matrix uniform_costs(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix m(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols)));
  for (auto& row : m) {
    for (double& v : row) v = unit(rng);
  }
  return m;
}

}  // namespace

FiniteModel random_model(const RandomSpec& spec, std::uint64_t seed) {
  if (spec.states < 1 || spec.observations < 1 || spec.messages < 1 || spec.decisions < 1 || spec.horizon < 1) {
    throw std::invalid_argument("random_model: all sizes must be >= 1");
  }
  std::mt19937_64 rng(seed);
  FiniteModel m;
  m.num_states = spec.states;
  m.transition = dirichlet_matrix(rng, spec.states, spec.states);
  m.initial = dirichlet_row(rng, spec.states);
  m.obs_channels = {dirichlet_matrix(rng, spec.states, spec.observations)};
  m.num_decisions = spec.decisions;
  m.cost = uniform_costs(rng, spec.states, spec.decisions);
  m.rate_schedule = {std::vector<int>(static_cast<std::size_t>(spec.horizon), spec.messages)};
  m.horizon = spec.horizon;
  return m;
}

FiniteModel random_iid_team(const TeamSpec& spec, std::uint64_t seed) {
  if (static_cast<int>(spec.rates.size()) != 2) throw std::invalid_argument("random_iid_team: two rate schedules required");
  std::mt19937_64 rng(seed);
  const int n = spec.states, ny = spec.observations;
  FiniteModel m;
  m.num_states = n;
  m.initial = dirichlet_row(rng, n);
  m.transition.assign(static_cast<std::size_t>(n), m.initial);
  std::vector<Matrix> joint;
  Matrix c1(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(ny), 0.0)), c2 = c1;
  for (int x = 0; x < n; ++x) {
    const auto flat = dirichlet_row(rng, ny * ny);
    Matrix k(static_cast<std::size_t>(ny), std::vector<double>(static_cast<std::size_t>(ny)));
    for (int a = 0; a < ny; ++a) {
      for (int b = 0; b < ny; ++b) {
        k[a][b] = flat[static_cast<std::size_t>(a * ny + b)];
        c1[x][a] += k[a][b];
      }
    }
    for (int b = 0; b < ny; ++b) {
      for (int a = 0; a < ny; ++a) c2[x][b] += k[a][b];
    }
    joint.push_back(std::move(k));
  }
  m.obs_channels = {c1, c2};
  m.joint_obs = std::move(joint);
  m.num_decisions = spec.decisions;
  m.cost = uniform_costs(rng, n, spec.decisions);
  m.rate_schedule = spec.rates;
  for (auto& r : m.rate_schedule) r.resize(static_cast<std::size_t>(spec.horizon), r.empty() ? 1 : r.back());
  m.horizon = spec.horizon;
  return m;
}

LinearGaussModel random_lqg(int n, int m, int horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](int rows, int cols) {
    Eigen::MatrixXd g(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) g(i, j) = normal(rng);
    }
    return g;
  };
  LinearGaussModel model;
  Eigen::MatrixXd a = gaussian(n, n);
  const double radius = Eigen::EigenSolver<Eigen::MatrixXd>(a).eigenvalues().cwiseAbs().maxCoeff();
  model.A = radius > 0.0 ? Eigen::MatrixXd(0.9 * a / radius) : a;
  model.C = gaussian(m, n);
  const Eigen::MatrixXd lw = gaussian(n, n), lr = gaussian(m, m), ls = gaussian(n, n);
  model.W = lw * lw.transpose() / n + 0.1 * Eigen::MatrixXd::Identity(n, n);
  model.R = lr * lr.transpose() / m + 0.5 * Eigen::MatrixXd::Identity(m, m);
  model.Sigma0 = ls * ls.transpose() / n;
  model.Qcost = Eigen::MatrixXd::Identity(n, n);
  model.horizon = horizon;
  model.rate_schedule.assign(static_cast<std::size_t>(horizon), 4);
  return model;
}

}  // namespace zdq
