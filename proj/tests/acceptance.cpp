// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "oracles.hpp"
#include "zdq/beliefdp.hpp"
#include "zdq/cli.hpp"
#include "zdq/filter.hpp"
#include "zdq/instances.hpp"
#include "zdq/lqg.hpp"
#include "zdq/multiterminal.hpp"
#include "zdq/oracle.hpp"
#include "zdq/random.hpp"

using namespace zdq;

namespace {

constexpr std::uint64_t kMaster = 20241015;

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = o.ok && secs < limit_s;
  if (!ok) ++failures;
  fmt::print("{} criterion {}: {} ({}; {:.2f}s of {:.0f}s)\n", ok ? "PASS" : "FAIL", id, name, o.detail, secs, limit_s);
  std::fflush(stdout);
}

int rule(int t, const std::vector<double>& belief, const oracle::Path& q) {
  double shift = 0.37 * t;
  for (int m : q) shift += 0.21 * (m + 1);
  return static_cast<int>(std::floor(belief[0] * 7.0 + shift)) % 2;
}

Outcome counterexample() {
  std::ostringstream out, err;
  const int code = run({"counterexample"}, out, err);
  const auto r = run_counterexample();
  const bool ok = code == kExitOk && out.str().rfind("full_cost=0\nseparated_cost=0.25\n", 0) == 0 &&
                  r.full_cost == 0.0 && r.separated_cost == 0.25;
  return {ok, fmt::format("full={} separated={} witness={}", r.full_cost, r.separated_cost, r.witness_cost)};
}

Outcome structure_equivalence() {
  double gap = 0.0;
  int n = 0;
  for (int horizon : {2, 3}) {
    const int count = horizon == 2 ? 20 : 5;
    for (int i = 0; i < count; ++i) {
      const auto m = random_model({2, 2, 2, 2, horizon}, derive_seed(kMaster + horizon, i));
      const double full = enumerate_full(m).optimal_cost;
      for (double c : {enumerate_witsenhausen(m).optimal_cost, enumerate_wv(m).optimal_cost, dp_solve(m).optimal_cost}) {
        gap = std::max(gap, std::abs(c - full));
      }
      ++n;
    }
  }
  return {gap <= 1e-9, fmt::format("{} instances, max gap {:.3e}", n, gap)};
}

Outcome memoryless_team() {
  double gap = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto m = random_iid_team({}, derive_seed(kMaster + 5, i));
    gap = std::max(gap, std::abs(enumerate_team(m, TeamClass::Memoryless).optimal_cost -
                                 enumerate_team(m, TeamClass::Full).optimal_cost));
  }
  return {gap <= 1e-9, fmt::format("10 instances, max gap {:.3e}", gap)};
}

Outcome filter_correctness() {
  double belief_gap = 0.0, weight_gap = 0.0;
  long long paths = 0, supports = 0;
  bool structure_ok = true;
  for (int i = 0; i < 100; ++i) {
    const int nx = 2 + i % 2, ny = 2 + (i / 2) % 2, horizon = 1 + i % 3;
    const auto m = random_model({nx, ny, 2, 2, horizon}, derive_seed(kMaster + 7, i));
    const auto tree = build_belief_tree(m, horizon);
    for (int t = 0; t < horizon; ++t) {
      const auto atoms = oracle::path_joint(m, t);
      if (atoms.size() != tree.levels[t].size()) structure_ok = false;
      for (const auto& node : tree.levels[t]) {
        belief_gap = std::max(belief_gap, linf_distance(node.belief, oracle::normalized(atoms.at(node.obs_path).joint)));
        ++paths;
      }
      for (const auto& [q, support] : oracle::meta_beliefs(m, rule, t)) {
        BeliefTable table;
        auto xi = xi_init(m, table);
        for (int s = 0; s < t; ++s) {
          Quantizer quantizer;
          for (const auto& [id, w] : xi.support) quantizer[id] = rule(s, table.at(id), oracle::Path(q.begin(), q.begin() + s));
          xi = xi_predict(m, xi_condition(xi, quantizer, q[static_cast<std::size_t>(s)]), table);
        }
        if (xi.support.size() != support.size()) structure_ok = false;
        for (const auto& [belief, weight] : support) {
          const auto id = table.find(belief);
          if (!id) {
            structure_ok = false;
            continue;
          }
          double got = 0.0;
          for (const auto& [b, w] : xi.support) {
            if (b == *id) got = w;
          }
          weight_gap = std::max(weight_gap, std::abs(got - weight));
        }
        ++supports;
      }
    }
  }
  const bool ok = structure_ok && belief_gap <= 1e-12 && weight_gap <= 1e-12;
  return {ok, fmt::format("{} paths, belief gap {:.3e}; {} meta-beliefs, weight gap {:.3e}", paths, belief_gap,
                          supports, weight_gap)};
}

Outcome kalman_equivalence() {
  double mean_gap = 0.0, psd = std::numeric_limits<double>::infinity(), asym = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = i < 50 ? 1 : 2;
    const std::uint64_t seed = derive_seed(kMaster + 11, i);
    const auto m = random_lqg(n, 1, 10, seed);
    const auto ys = oracle::sample_observations(m, m.horizon, seed);
    const auto batch = batch_conditional(m, ys);
    auto state = kalman_init(m);
    for (int t = 0; t < m.horizon; ++t) {
      state = kalman_step(m, state, ys[t]);
      mean_gap = std::max(mean_gap, (state.mean - batch[t]).cwiseAbs().maxCoeff());
      asym = std::max(asym, (state.pred_cov - state.pred_cov.transpose()).cwiseAbs().maxCoeff());
      psd = std::min(psd, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(state.pred_cov).eigenvalues().minCoeff());
    }
  }
  LinearGaussModel unit;
  unit.A = unit.C = unit.W = unit.R = unit.Sigma0 = unit.Qcost = Eigen::MatrixXd::Ones(1, 1);
  unit.horizon = 1;
  unit.rate_schedule = {2};
  const double fixture = cov_step(unit, unit.Sigma0)(0, 0);
  const bool ok = mean_gap <= 1e-8 && psd >= -1e-10 && asym <= 1e-10 && fixture == 1.5;
  return {ok, fmt::format("max mean gap {:.3e}, min eigenvalue {:.3e}, fixture {}", mean_gap, psd, fixture)};
}

Outcome lqg_orthogonality() {
  LinearGaussModel m;
  m.A = Eigen::MatrixXd::Constant(1, 1, 0.9);
  m.C = Eigen::MatrixXd::Ones(1, 1);
  m.W = Eigen::MatrixXd::Ones(1, 1);
  m.R = Eigen::MatrixXd::Constant(1, 1, 0.5);
  m.Sigma0 = Eigen::MatrixXd::Ones(1, 1);
  m.Qcost = Eigen::MatrixXd::Ones(1, 1);
  m.horizon = 3;
  m.rate_schedule = {4, 4, 4};
  const long long n = 1000000;
  const auto quantizers = design_stage_quantizers(m, 4, QuantizerMethod::Lloyd, n, derive_seed(kMaster, 13));
  const auto q = simulate_separation(m, quantizers, n, kMaster);
  const auto id = simulate_separation(m, StageQuantizers(3), n, kMaster);
  const double ratio = id.quantize_term / id.total_distortion;
  const bool ok = q.residual <= 1e-2 && ratio <= 2e-2;
  return {ok, fmt::format("M=4 total {:.6f} filter {:.6f} quantize {:.6f} residual {:.3e}; identity ratio {:.3e}",
                          q.total_distortion, q.filter_term, q.quantize_term, q.residual, ratio)};
}

Outcome augmentation() {
  const auto m = random_model({2, 2, 2, 2, 3}, derive_seed(kMaster + 17, 0));
  SearchOptions delayed;
  delayed.delay = 1;
  const double original = enumerate_full(m, delayed).optimal_cost;
  const double augmented = enumerate_full(augment_state(m, 1, 1)).optimal_cost;
  return {std::abs(original - augmented) <= 1e-12,
          fmt::format("delayed {:.15g}, augmented {:.15g}", original, augmented)};
}

}  // namespace

int main() {
  criterion(1, "signaling counterexample optima are 0 and 0.25", 10, counterexample);
  criterion(2, "full, Witsenhausen, WV and DP optima agree within 1e-9", 600, structure_equivalence);
  criterion(3, "memoryless team optimum equals the full-sharing optimum within 1e-9", 900, memoryless_team);
  criterion(4, "beliefs and meta-beliefs match joint conditioning within 1e-12", 60, filter_correctness);
  criterion(5, "Kalman means match batch conditioning within 1e-8, covariances PSD", 10, kalman_equivalence);
  criterion(6, "LQG distortion splits into filter and quantization terms", 120, lqg_orthogonality);
  criterion(7, "delayed decoding equals the augmented model optimum within 1e-12", 60, augmentation);
  fmt::print("{}\n", failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures));
  return failures == 0 ? 0 : 1;
}
