#pragma once

#include <filesystem>
#include <string>

#include "zdq/model.hpp"

namespace fixtures {

inline zdq::Matrix identity(int n) {
  zdq::Matrix m(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) m[i][i] = 1.0;
  return m;
}

inline zdq::Matrix constant(int rows, int cols, double v) {
  return zdq::Matrix(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols), v));
}

inline zdq::Matrix zero_one(int n) {
  zdq::Matrix c = constant(n, n, 1.0);
  for (int i = 0; i < n; ++i) c[i][i] = 0.0;
  return c;
}

// Single encoder, 0-1 loss, uniform initial state.
inline zdq::FiniteModel make(const zdq::Matrix& transition, const zdq::Matrix& channel, int rate, int horizon) {
  zdq::FiniteModel m;
  m.num_states = static_cast<int>(transition.size());
  m.transition = transition;
  m.initial.assign(transition.size(), 1.0 / static_cast<double>(transition.size()));
  m.obs_channels = {channel};
  m.cost = zero_one(m.num_states);
  m.num_decisions = m.num_states;
  m.rate_schedule = {std::vector<int>(static_cast<std::size_t>(horizon), rate)};
  m.horizon = horizon;
  return m;
}

// Identity transition, noiseless channel.
inline zdq::FiniteModel noiseless(int n, int rate, int horizon) { return make(identity(n), identity(n), rate, horizon); }

// Uniform i.i.d. source seen through an uninformative channel.
inline zdq::FiniteModel uninformative(int n, int ny, int rate, int horizon) {
  return make(constant(n, n, 1.0 / n), constant(n, ny, 1.0 / ny), rate, horizon);
}

// Identity transition with P(y=0|x=0) = 0.8 and P(y=0|x=1) = 0.3.
inline zdq::FiniteModel noisy_pair(int rate = 2, int horizon = 2) {
  return make(identity(2), {{0.8, 0.2}, {0.3, 0.7}}, rate, horizon);
}

inline std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "zdq_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace fixtures
