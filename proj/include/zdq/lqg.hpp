#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zdq/model.hpp"

namespace zdq {

// Filter state before processing y_t: mean holds m~_{t-1} (zero before the
// first observation) and pred_cov holds Sigma_{t|t-1}.
struct KalmanState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd pred_cov;
  int time = 0;
};

KalmanState kalman_init(const LinearGaussModel& model);

// Sigma_{t+1|t} from Sigma_{t|t-1}, symmetrized. Throws std::domain_error for
// an input that is not symmetric PSD within 1e-10.
Eigen::MatrixXd cov_step(const LinearGaussModel& model, const Eigen::MatrixXd& pred_cov);

// m~_t = A m~_{t-1} + K_t (y_t - C A m~_{t-1}), K_t = S C'(C S C' + R)^{-1}, S = Sigma_{t|t-1}.
KalmanState kalman_step(const LinearGaussModel& model, const KalmanState& state, const Eigen::VectorXd& y);

// E[x_t | y_[0,t]] for every t by conditioning the stacked Gaussian vector.
std::vector<Eigen::VectorXd> batch_conditional(const LinearGaussModel& model,
                                               const std::vector<Eigen::VectorXd>& y_path);

struct ScalarQuantizer {
  std::vector<double> thresholds;  // M - 1, strictly increasing
  std::vector<double> points;      // M, sorted

  int cell(double v) const;
  double reproduce(double v) const { return points[static_cast<std::size_t>(cell(v))]; }
  int size() const { return static_cast<int>(points.size()); }
};

enum class QuantizerMethod { Uniform, Lloyd };
QuantizerMethod parse_quantizer_method(const std::string& name);

ScalarQuantizer design_quantizer(std::vector<double> samples, int levels, QuantizerMethod method);

// Mean squared error of the quantizer after each Lloyd iteration, starting with
// the uniform initializer.
std::vector<double> lloyd_trace(std::vector<double> samples, int levels);

double quantizer_distortion(const std::vector<double>& samples, const ScalarQuantizer& quantizer);

struct SeparationResult {
  double total_distortion = 0.0;  // sum_t E|x_t - E[x_t | q_[0,t]]|^2_Q
  double filter_term = 0.0;       // sum_t E|x_t - m~_t|^2_Q
  double quantize_term = 0.0;     // sum_t E|m~_t - E[x_t | q_[0,t]]|^2_Q
  double residual = 0.0;
  long long paths = 0;
  std::uint64_t seed = 0;
};

// Per-stage quantizer of m~_t; nullopt transmits m~_t exactly.
using StageQuantizers = std::vector<std::optional<ScalarQuantizer>>;

// Monte Carlo over N seeded paths. The decoder is the empirical conditional
// mean of x_t per cell q_[0,t], computed from the same paths. Paths are drawn in
// fixed-size chunks with seeds derived from (seed, chunk), so the result does not
// depend on `workers`.
SeparationResult simulate_separation(const LinearGaussModel& model, const StageQuantizers& quantizers, long long paths,
                                     std::uint64_t seed, int workers = 1);

// Samples of m~_t for every t from `paths` simulated paths.
std::vector<std::vector<double>> simulate_estimates(const LinearGaussModel& model, long long paths,
                                                    std::uint64_t seed);

// Designs one quantizer per stage from simulated estimates; levels = 0 gives the
// identity at every stage.
StageQuantizers design_stage_quantizers(const LinearGaussModel& model, int levels, QuantizerMethod method,
                                        long long paths, std::uint64_t seed);

}  // namespace zdq
