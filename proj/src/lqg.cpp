#include "zdq/lqg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "zdq/random.hpp"

namespace zdq {
namespace {

constexpr long long kChunk = 65536;

void require_psd(const Eigen::MatrixXd& s, const char* what) {
  if (s.rows() != s.cols()) throw std::domain_error(fmt::format("{} is not square", what));
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > kCovTol) throw std::domain_error(fmt::format("{} is not symmetric", what));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (s + s.transpose()));
  if (eig.eigenvalues().minCoeff() < -kCovTol) {
    throw std::domain_error(fmt::format("{} is not positive semidefinite (min eigenvalue {:.3e})", what,
                                        eig.eigenvalues().minCoeff()));
  }
}

void require_scalar(const LinearGaussModel& model) {
  if (model.state_dim() != 1 || model.obs_dim() != 1) {
    throw std::invalid_argument("the quantized pipeline supports scalar models only (n = m = 1)");
  }
}

// Scalar filter gains K_t for t = 0..T-1.
std::vector<double> scalar_gains(const LinearGaussModel& model) {
  std::vector<double> gains;
  Eigen::MatrixXd s = model.Sigma0;
  for (int t = 0; t < model.horizon; ++t) {
    const double c = model.C(0, 0);
    gains.push_back(s(0, 0) * c / (c * s(0, 0) * c + model.R(0, 0)));
    s = cov_step(model, s);
  }
  return gains;
}

// Draws `count` paths and calls visit(t, x_t, m~_t) for every stage, path by path.
template <class Visit>
void simulate_chunk(const LinearGaussModel& model, const std::vector<double>& gains, std::uint64_t seed, long long count,
                    Visit&& visit) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a = model.A(0, 0), c = model.C(0, 0);
  const double sw = std::sqrt(model.W(0, 0)), sr = std::sqrt(model.R(0, 0)), s0 = std::sqrt(model.Sigma0(0, 0));
  for (long long p = 0; p < count; ++p) {
    double x = s0 * normal(rng);
    double m = 0.0;
    for (int t = 0; t < model.horizon; ++t) {
      const double y = c * x + sr * normal(rng);
      const double pred = a * m;
      m = pred + gains[t] * (y - c * pred);
      visit(t, x, m);
      x = a * x + sw * normal(rng);
    }
  }
}

long long chunk_count(long long paths) { return (paths + kChunk - 1) / kChunk; }
long long chunk_size(long long paths, long long k) { return std::min(kChunk, paths - k * kChunk); }

struct CellStats {
  double n = 0, sx = 0, sxx = 0, sm = 0, smm = 0;
  void merge(const CellStats& o) {
    n += o.n;
    sx += o.sx;
    sxx += o.sxx;
    sm += o.sm;
    smm += o.smm;
  }
};

struct ChunkStats {
  std::vector<double> filter;          // [t] sum (x - m)^2
  std::vector<double> exact;           // [t] sum (x - m)^2 over identity stages
  std::vector<std::map<std::uint64_t, CellStats>> cells;  // [t]
};

template <class Job>
void run_parallel(long long jobs, int workers, Job&& job) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::min<long long>(jobs, 1 << 16))));
  if (workers == 1) {
    for (long long k = 0; k < jobs; ++k) job(k);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (long long k = w; k < jobs; k += workers) job(k);
    });
  }
  for (auto& th : pool) th.join();
}

void lloyd_iterate(const std::vector<double>& sorted, ScalarQuantizer& q, std::vector<double>* trace) {
  const std::size_t n = sorted.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sorted[i];
  if (trace) trace->push_back(quantizer_distortion(sorted, q));
  for (int iter = 0; iter < 200; ++iter) {
    double movement = 0.0;
    std::size_t lo = 0;
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      const std::size_t hi =
          k + 1 < q.points.size()
              ? static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), q.thresholds[k]) - sorted.begin())
              : n;
      if (hi > lo) {
        const double centroid = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
        movement = std::max(movement, std::abs(centroid - q.points[k]));
        q.points[k] = centroid;
      }
      lo = hi;
    }
    for (std::size_t k = 0; k + 1 < q.points.size(); ++k) q.thresholds[k] = 0.5 * (q.points[k] + q.points[k + 1]);
    if (trace) trace->push_back(quantizer_distortion(sorted, q));
    if (movement < 1e-9) break;
  }
}

ScalarQuantizer uniform_quantizer(const std::vector<double>& sorted, int levels) {
  const double lo = sorted.front(), hi = sorted.back();
  double width = (hi - lo) / levels;
  if (width <= 0.0) width = 1.0;
  ScalarQuantizer q;
  for (int k = 0; k < levels; ++k) {
    if (k > 0) q.thresholds.push_back(lo + k * width);
    q.points.push_back(lo + (k + 0.5) * width);
  }
  if (levels == 1) q.points[0] = 0.5 * (lo + hi);
  return q;
}

}  // namespace

KalmanState kalman_init(const LinearGaussModel& model) {
  return {Eigen::VectorXd::Zero(model.state_dim()), model.Sigma0, 0};
}

Eigen::MatrixXd cov_step(const LinearGaussModel& model, const Eigen::MatrixXd& pred_cov) {
  if (pred_cov.rows() != model.state_dim() || pred_cov.cols() != model.state_dim()) {
    throw std::invalid_argument("cov_step: covariance dimension mismatch");
  }
  require_psd(pred_cov, "predictive covariance");
  const Eigen::MatrixXd& a = model.A;
  const Eigen::MatrixXd& c = model.C;
  const Eigen::MatrixXd innovation = c * pred_cov * c.transpose() + model.R;
  const Eigen::MatrixXd cross = a * pred_cov * c.transpose();
  const Eigen::MatrixXd next =
      a * pred_cov * a.transpose() + model.W - cross * innovation.ldlt().solve(cross.transpose());
  return 0.5 * (next + next.transpose());
}

KalmanState kalman_step(const LinearGaussModel& model, const KalmanState& state, const Eigen::VectorXd& y) {
  if (y.size() != model.obs_dim()) {
    throw std::invalid_argument(fmt::format("kalman_step: observation has {} entries, expected {}", y.size(),
                                            model.obs_dim()));
  }
  if (state.mean.size() != model.state_dim()) throw std::invalid_argument("kalman_step: state dimension mismatch");
  const Eigen::MatrixXd& s = state.pred_cov;
  const Eigen::MatrixXd innovation = model.C * s * model.C.transpose() + model.R;
  const Eigen::MatrixXd gain = innovation.ldlt().solve(model.C * s).transpose();
  const Eigen::VectorXd pred = model.A * state.mean;
  return {pred + gain * (y - model.C * pred), cov_step(model, s), state.time + 1};
}

std::vector<Eigen::VectorXd> batch_conditional(const LinearGaussModel& model,
                                               const std::vector<Eigen::VectorXd>& y_path) {
  const int steps = static_cast<int>(y_path.size());
  if (steps > 20) throw std::invalid_argument("batch_conditional: at most 20 steps");
  const int n = model.state_dim(), m = model.obs_dim();
  // Cov(x_t, x_s) = A^{t-s} Var(x_s) for s <= t.
  Eigen::MatrixXd sx = Eigen::MatrixXd::Zero(n * steps, n * steps);
  Eigen::MatrixXd var = model.Sigma0;
  for (int s = 0; s < steps; ++s) {
    Eigen::MatrixXd block = var;
    for (int t = s; t < steps; ++t) {
      sx.block(n * t, n * s, n, n) = block;
      sx.block(n * s, n * t, n, n) = block.transpose();
      block = model.A * block;
    }
    var = model.A * var * model.A.transpose() + model.W;
  }
  Eigen::MatrixXd cc = Eigen::MatrixXd::Zero(m * steps, n * steps);
  Eigen::MatrixXd rr = Eigen::MatrixXd::Zero(m * steps, m * steps);
  Eigen::VectorXd y(m * steps);
  for (int t = 0; t < steps; ++t) {
    if (y_path[t].size() != m) throw std::invalid_argument("batch_conditional: observation dimension mismatch");
    cc.block(m * t, n * t, m, n) = model.C;
    rr.block(m * t, m * t, m, m) = model.R;
    y.segment(m * t, m) = y_path[t];
  }
  const Eigen::MatrixXd sy = cc * sx * cc.transpose() + rr;
  const Eigen::MatrixXd sxy = sx * cc.transpose();
  std::vector<Eigen::VectorXd> means;
  for (int t = 0; t < steps; ++t) {
    const int k = m * (t + 1);
    Eigen::LLT<Eigen::MatrixXd> llt(sy.topLeftCorner(k, k));
    if (llt.info() != Eigen::Success) throw std::domain_error("batch_conditional: singular observation covariance");
    means.push_back(sxy.block(n * t, 0, n, k) * llt.solve(y.head(k)));
  }
  return means;
}

int ScalarQuantizer::cell(double v) const {
  return static_cast<int>(std::upper_bound(thresholds.begin(), thresholds.end(), v) - thresholds.begin());
}

QuantizerMethod parse_quantizer_method(const std::string& name) {
  if (name == "uniform") return QuantizerMethod::Uniform;
  if (name == "lloyd") return QuantizerMethod::Lloyd;
  throw std::invalid_argument(fmt::format("unknown quantizer method '{}' (expected uniform or lloyd)", name));
}

double quantizer_distortion(const std::vector<double>& samples, const ScalarQuantizer& quantizer) {
  double d = 0.0;
  for (double v : samples) {
    const double e = v - quantizer.reproduce(v);
    d += e * e;
  }
  return d / static_cast<double>(samples.size());
}

ScalarQuantizer design_quantizer(std::vector<double> samples, int levels, QuantizerMethod method) {
  if (levels < 1) throw std::invalid_argument(fmt::format("quantizer needs M >= 1 cells, got {}", levels));
  if (samples.empty()) throw std::invalid_argument("design_quantizer: no samples");
  std::sort(samples.begin(), samples.end());
  auto q = uniform_quantizer(samples, levels);
  if (method == QuantizerMethod::Lloyd) lloyd_iterate(samples, q, nullptr);
  return q;
}

std::vector<double> lloyd_trace(std::vector<double> samples, int levels) {
  if (levels < 1) throw std::invalid_argument(fmt::format("quantizer needs M >= 1 cells, got {}", levels));
  if (samples.empty()) throw std::invalid_argument("lloyd_trace: no samples");
  std::sort(samples.begin(), samples.end());
  auto q = uniform_quantizer(samples, levels);
  std::vector<double> trace;
  lloyd_iterate(samples, q, &trace);
  return trace;
}

std::vector<std::vector<double>> simulate_estimates(const LinearGaussModel& model, long long paths,
                                                    std::uint64_t seed) {
  require_scalar(model);
  const auto gains = scalar_gains(model);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(model.horizon));
  for (auto& v : out) v.reserve(static_cast<std::size_t>(paths));
  for (long long k = 0; k < chunk_count(paths); ++k) {
    simulate_chunk(model, gains, derive_seed(seed, static_cast<std::uint64_t>(k)), chunk_size(paths, k),
                   [&](int t, double, double m) { out[t].push_back(m); });
  }
  return out;
}

StageQuantizers design_stage_quantizers(const LinearGaussModel& model, int levels, QuantizerMethod method,
                                        long long paths, std::uint64_t seed) {
  StageQuantizers out(static_cast<std::size_t>(model.horizon));
  if (levels == 0) return out;
  const auto samples = simulate_estimates(model, paths, seed);
  for (int t = 0; t < model.horizon; ++t) out[t] = design_quantizer(samples[t], levels, method);
  return out;
}

SeparationResult simulate_separation(const LinearGaussModel& model, const StageQuantizers& quantizers, long long paths,
                                     std::uint64_t seed, int workers) {
  require_scalar(model);
  if (paths < 1) throw std::invalid_argument("simulate_separation: need at least one path");
  if (static_cast<int>(quantizers.size()) != model.horizon) {
    throw std::invalid_argument("simulate_separation: one quantizer per stage required");
  }
  const auto gains = scalar_gains(model);
  const int horizon = model.horizon;
  const long long chunks = chunk_count(paths);
  std::vector<ChunkStats> stats(static_cast<std::size_t>(chunks));

  run_parallel(chunks, workers, [&](long long k) {
    ChunkStats cs{std::vector<double>(horizon, 0.0), std::vector<double>(horizon, 0.0),
                  std::vector<std::map<std::uint64_t, CellStats>>(static_cast<std::size_t>(horizon))};
    std::uint64_t key = 0;
    simulate_chunk(model, gains, derive_seed(seed, static_cast<std::uint64_t>(k)), chunk_size(paths, k),
                   [&](int t, double x, double m) {
                     if (t == 0) key = 0;
                     const double e = x - m;
                     cs.filter[t] += e * e;
                     if (!quantizers[t]) {
                       cs.exact[t] += e * e;
                       return;
                     }
                     key = key * static_cast<std::uint64_t>(quantizers[t]->size()) +
                           static_cast<std::uint64_t>(quantizers[t]->cell(m));
                     auto& c = cs.cells[t][key];
                     c.n += 1;
                     c.sx += x;
                     c.sxx += x * x;
                     c.sm += m;
                     c.smm += m * m;
                   });
    stats[static_cast<std::size_t>(k)] = std::move(cs);
  });

  // Reduction in chunk order.
  std::vector<double> filter(horizon, 0.0), exact(horizon, 0.0);
  std::vector<std::map<std::uint64_t, CellStats>> cells(static_cast<std::size_t>(horizon));
  for (const auto& cs : stats) {
    for (int t = 0; t < horizon; ++t) {
      filter[t] += cs.filter[t];
      exact[t] += cs.exact[t];
      for (const auto& [key, c] : cs.cells[t]) cells[t][key].merge(c);
    }
  }
  const double weight = model.Qcost(0, 0) / static_cast<double>(paths);
  SeparationResult out;
  out.paths = paths;
  out.seed = seed;
  for (int t = 0; t < horizon; ++t) {
    double lhs = exact[t], quant = 0.0;
    for (const auto& [key, c] : cells[t]) {
      const double mean = c.sx / c.n;
      lhs += c.sxx - mean * c.sx;
      quant += c.smm - 2.0 * mean * c.sm + c.n * mean * mean;
    }
    out.total_distortion += weight * lhs;
    out.filter_term += weight * filter[t];
    out.quantize_term += weight * quant;
  }
  out.residual = std::abs(out.total_distortion - (out.filter_term + out.quantize_term)) /
                 std::max(out.total_distortion, std::numeric_limits<double>::min());
  return out;
}

}  // namespace zdq
