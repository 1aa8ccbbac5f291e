#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace zdq {

using Matrix = std::vector<std::vector<double>>;

inline constexpr double kKernelTol = 1e-12;
inline constexpr double kCovTol = 1e-10;

// Finite-alphabet partially observed Markov source with one or two encoders.
//
// Kernels are row-stochastic: transition[x][x'] = P(x'|x), obs_channels[i][x][y] =
// P(y^i|x). A two-encoder model may carry the joint kernel joint_obs[x][y1][y2];
// without it the two channels are treated as conditionally independent given x.
//
// The per-stage cost is either the table cost[x][v] over num_decisions decisions,
// or, when squared_error_target is set, (f(x) - v)^2 with a real-valued decision v.
struct FiniteModel {
  int num_states = 0;
  Matrix transition;
  std::vector<double> initial;
  std::vector<Matrix> obs_channels;
  std::optional<std::vector<Matrix>> joint_obs;
  Matrix cost;
  int num_decisions = 0;
  std::optional<std::vector<double>> squared_error_target;
  std::vector<std::vector<int>> rate_schedule;  // [encoder][t]
  int horizon = 0;

  int num_encoders() const { return static_cast<int>(obs_channels.size()); }
  int num_obs(int encoder = 0) const {
    return static_cast<int>(obs_channels.at(encoder).front().size());
  }
  int rate(int encoder, int t) const { return rate_schedule.at(encoder).at(t); }
  bool squared_error() const { return squared_error_target.has_value(); }
  double max_cost() const;
};

struct LinearGaussModel {
  Eigen::MatrixXd A, C, W, R, Sigma0, Qcost;
  int horizon = 0;
  std::vector<int> rate_schedule;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int obs_dim() const { return static_cast<int>(C.rows()); }
};

using AnyModel = std::variant<FiniteModel, LinearGaussModel>;

struct Violation {
  std::string field;
  std::string message;
};

std::vector<Violation> validate(const FiniteModel& model);
std::vector<Violation> validate(const LinearGaussModel& model);

class ModelError : public std::runtime_error {
 public:
  enum class Kind { Parse, Validation };
  ModelError(Kind kind, const std::string& what, std::vector<Violation> violations = {})
      : std::runtime_error(what), kind_(kind), violations_(std::move(violations)) {}
  Kind kind() const { return kind_; }
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  Kind kind_;
  std::vector<Violation> violations_;
};

// Parses without validating. Throws ModelError(Parse) naming the offending field.
AnyModel model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const FiniteModel& model);
nlohmann::json model_to_json(const LinearGaussModel& model);

// Reads, parses and validates; throws ModelError on any failure.
AnyModel load_model(const std::filesystem::path& path);
FiniteModel load_finite_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const AnyModel& model);

// Joint observation kernel P(y|x) over the flattened joint alphabet
// y = y1 * |Y2| + y2 (or just y for a single encoder).
Matrix joint_kernel(const FiniteModel& model);
int joint_obs_size(const FiniteModel& model);

// Truncates the horizon, or extends it by repeating the last rate entry.
FiniteModel with_horizon(FiniteModel model, int horizon);

// Block-state augmentation z_t = x_[t-L+1, t] with L = max(delay + 1, order).
// The decoder output at t is scored against x_{t-delay}; before the window is
// filled the state is padded with copies of x_0, so the stage cost at t < delay
// is scored against x_0.
FiniteModel augment_state(const FiniteModel& model, int order, int delay);

}  // namespace zdq
