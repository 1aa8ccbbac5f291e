#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "zdq/beliefdp.hpp"
#include "zdq/instances.hpp"
#include "zdq/oracle.hpp"
#include "zdq/policy.hpp"

using namespace zdq;

namespace {

FullHistoryPolicy random_full(const FiniteModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FullHistoryPolicy p;
  for (int t = 0; t < m.horizon; ++t) {
    std::uniform_int_distribution<int> msg(0, m.rate(0, t) - 1);
    auto& table = p.tables.emplace_back();
    for (const auto& [path, atom] : oracle::path_joint(m, t)) table[path] = msg(rng);
  }
  return p;
}

oracle::Encoder as_encoder(const FullHistoryPolicy& p) {
  return [&p](int t, const oracle::Path& y) { return p.tables[static_cast<std::size_t>(t)].at(y); };
}

// Random Witsenhausen policy filled in along the observation tree; a
// nonnegative `constant` sends that message everywhere instead.
WitsenhausenPolicy random_witsenhausen(const FiniteModel& m, std::uint64_t seed, int constant = -1) {
  std::mt19937_64 rng(seed);
  const auto tree = build_observation_tree(m);
  WitsenhausenPolicy p;
  p.beliefs = tree.encoder_beliefs[0];
  p.tables.resize(static_cast<std::size_t>(m.horizon));
  std::vector<History> prev_q;
  for (int t = 0; t < m.horizon; ++t) {
    std::uniform_int_distribution<int> msg(0, m.rate(0, t) - 1);
    std::vector<History> q;
    for (const auto& node : tree.levels[t]) {
      History past = node.parent < 0 ? History{} : prev_q[static_cast<std::size_t>(node.parent)];
      auto [it, fresh] = p.tables[t].try_emplace({node.enc_belief[0], past}, 0);
      if (fresh) it->second = constant >= 0 ? constant : msg(rng);
      past.push_back(it->second);
      q.push_back(past);
    }
    prev_q = std::move(q);
  }
  return p;
}

}  // namespace

TEST_SUITE("policy") {
  TEST_CASE("bayes_decode") {
    const auto loss = fixtures::zero_one(2);
    CHECK(bayes_decode({0.7, 0.3}, loss) == 0);
    CHECK(bayes_decode({0.5, 0.5}, loss) == 0);
    const Matrix squared{{0.0, 1.0}, {1.0, 0.0}};
    CHECK(bayes_decode({0.2, 0.8}, squared) == 1);
    auto m = fixtures::noiseless(2, 2, 1);
    m.cost = squared;
    CHECK(expected_cost(m, {0.2, 0.8}, 0) == doctest::Approx(0.8));
    CHECK(expected_cost(m, {0.2, 0.8}, 1) == doctest::Approx(0.2));
  }

  TEST_CASE("posterior_given_q") {
    SUBCASE("identity quantizer on a noiseless channel") {
      const auto m = fixtures::noiseless(2, 2, 2);
      const auto p = random_full(m, 0);
      FullHistoryPolicy id;
      for (int t = 0; t < 2; ++t) {
        auto& table = id.tables.emplace_back();
        for (const auto& [path, atom] : oracle::path_joint(m, t)) table[path] = path.back();
      }
      CHECK(posterior_given_q(m, id, {1, 1}) == std::vector<double>{0.0, 1.0});
      CHECK(posterior_given_q(m, id, {0}) == std::vector<double>{1.0, 0.0});
      CHECK_THROWS_AS(posterior_given_q(m, id, {0, 1}), ZeroProbabilityError);
    }
    SUBCASE("one message carries no information") {
      auto m = random_model({3, 2, 1, 2, 3}, 9);
      const auto p = random_full(m, 1);
      const auto post = posterior_given_q(m, p, {0, 0, 0});
      std::vector<double> marginal(3, 0.0);
      for (const auto& [path, atom] : oracle::path_joint(m, 2)) {
        for (int x = 0; x < 3; ++x) marginal[x] += atom.joint[x];
      }
      for (int x = 0; x < 3; ++x) CHECK(std::abs(post[x] - marginal[x]) <= 1e-12);
    }
    SUBCASE("random policies against enumeration") {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = random_model({2, 2, 2, 2, 2}, seed);
        const auto p = random_full(m, seed + 100);
        for (const History& q : {History{0}, History{1}, History{0, 0}, History{0, 1}, History{1, 0}, History{1, 1}}) {
          const auto want = oracle::posterior_given_q(m, as_encoder(p), q);
          if (!std::isfinite(want[0])) {
            CHECK_THROWS_AS(posterior_given_q(m, p, q), ZeroProbabilityError);
            continue;
          }
          CHECK(linf_distance(posterior_given_q(m, p, q), want) <= 1e-12);
        }
      }
    }
  }

  TEST_CASE("evaluate_policy") {
    const auto m = fixtures::noiseless(3, 3, 4);
    FullHistoryPolicy id;
    DecoderPolicy dec;
    for (int t = 0; t < 4; ++t) {
      auto& table = id.tables.emplace_back();
      for (const auto& [path, atom] : oracle::path_joint(m, t)) table[path] = path.back();
      auto& d = dec.tables.emplace_back();
      for (const auto& [path, atom] : oracle::path_joint(m, t)) d[path] = path.back();
    }
    CHECK(evaluate_policy(m, id) == 0.0);
    CHECK(evaluate_policy(m, id, dec) == 0.0);

    const auto silent = fixtures::make(fixtures::constant(2, 2, 0.5), fixtures::identity(2), 1, 1);
    FullHistoryPolicy none;
    none.tables.push_back({{History{0}, 0}, {History{1}, 0}});
    CHECK(evaluate_policy(silent, none) == 0.5);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = random_model({3, 2, 2, 3, 3}, seed);
      const auto p = random_full(r, seed);
      CHECK(std::abs(evaluate_policy(r, p) - oracle::expected_cost(r, as_encoder(p))) <= 1e-12);
    }
  }

  TEST_CASE("Bayes decoder never loses to an explicit decoder") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto m = random_model({2, 2, 2, 3, 2}, seed);
      const auto p = random_full(m, seed);
      const auto bayes = bayes_decoder(m, p);
      CHECK(std::abs(evaluate_policy(m, p, bayes) - evaluate_policy(m, p)) <= 1e-12);
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> v(0, 2);
      DecoderPolicy other = bayes;
      for (auto& table : other.tables) {
        for (auto& [h, d] : table) d = v(rng);
      }
      CHECK(evaluate_policy(m, p) <= evaluate_policy(m, p, other) + 1e-12);
    }
  }

  TEST_CASE("relabeling messages leaves the cost unchanged") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto m = random_model({3, 2, 3, 2, 2}, seed);
      const auto p = random_full(m, seed);
      for (int t = 0; t < 2; ++t) {
        auto relabeled = p;
        for (auto& [y, q] : relabeled.tables[t]) q = (q + 1) % 3;
        CHECK(std::abs(evaluate_policy(m, relabeled) - evaluate_policy(m, p)) <= 1e-12);
      }
    }
  }

  TEST_CASE("lifting a policy constant in the belief") {
    const auto m = random_model({2, 2, 2, 2, 2}, 3);
    const auto p = random_witsenhausen(m, 0, 1);
    const auto lifted = lift_policy(m, p);
    for (const auto& table : lifted.tables) {
      for (const auto& [y, q] : table) CHECK(q == 1);
    }
  }

  TEST_CASE("structured policies cost the same as their lifts") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto m = random_model({2, 2, 2, 2, 3}, seed);
      const auto w = random_witsenhausen(m, seed);
      const auto lw = lift_policy(m, w);
      CHECK(std::abs(evaluate_policy(m, w) - evaluate_policy(m, lw)) <= 1e-12);
      CHECK(std::abs(evaluate_policy(m, lw) - oracle::expected_cost(m, as_encoder(lw))) <= 1e-12);

      const auto dp = dp_solve(m);
      const auto lv = lift_policy(m, dp.policy);
      CHECK(std::abs(evaluate_policy(m, dp.policy) - evaluate_policy(m, lv)) <= 1e-12);
      CHECK(std::abs(evaluate_policy(m, dp.policy) - dp.optimal_cost) <= 1e-12);
    }
  }

  TEST_CASE("policy documents round trip") {
    const auto m = random_model({2, 2, 2, 2, 2}, 8);
    const auto full = random_full(m, 1);
    CHECK(full_policy_from_json(to_json(full)).tables == full.tables);
    const auto w = random_witsenhausen(m, 2);
    CHECK(evaluate_policy(m, witsenhausen_policy_from_json(to_json(w))) == evaluate_policy(m, w));
    const auto dp = dp_solve(m);
    CHECK(evaluate_policy(m, wv_policy_from_json(to_json(dp.policy))) == evaluate_policy(m, dp.policy));
    CHECK(parse_history_key(history_key({3, 0, 12})) == History{3, 0, 12});
    CHECK(parse_history_key(history_key({})).empty());
  }
}
