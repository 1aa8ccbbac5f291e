#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "zdq/instances.hpp"
#include "zdq/multiterminal.hpp"
#include "zdq/oracle.hpp"

using namespace zdq;

namespace {

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kMinimal = R"({
  "num_states": 2, "transition": [[1,0],[0,1]], "initial": [0.5,0.5],
  "obs_channels": [[[1,0],[0,1]]], "cost": [[0,1],[1,0]], "num_decisions": 2,
  "rate_schedule": [[2,2]], "horizon": 2 })";

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("minimal identity file loads") {
    const auto path = fixtures::temp_file("minimal.json");
    write(path, kMinimal);
    const auto model = load_finite_model(path);
    CHECK(model.num_states == 2);
    CHECK(model.num_encoders() == 1);
    CHECK(model.rate(0, 1) == 2);
  }

  TEST_CASE("row summing to 0.9 is rejected and named") {
    const auto path = fixtures::temp_file("bad_row.json");
    std::string text = kMinimal;
    text.replace(text.find("[[1,0],[0,1]]"), 13, "[[0.9,0],[0,1]]");
    write(path, text);
    try {
      load_model(path);
      FAIL("expected a validation error");
    } catch (const ModelError& e) {
      CHECK(e.kind() == ModelError::Kind::Validation);
      REQUIRE(e.violations().size() == 1);
      CHECK(e.violations()[0].field == "transition[0]");
    }
  }

  TEST_CASE("malformed file is a parse error") {
    const auto path = fixtures::temp_file("malformed.json");
    write(path, "{ \"num_states\": 2, ");
    try {
      load_model(path);
      FAIL("expected a parse error");
    } catch (const ModelError& e) {
      CHECK(e.kind() == ModelError::Kind::Parse);
    }
    write(path, R"({"num_states": 2})");
    CHECK_THROWS_AS(load_model(path), ModelError);
  }

  TEST_CASE("rational entries convert at load") {
    const auto path = fixtures::temp_file("rational.json");
    std::string text = kMinimal;
    text.replace(text.find("[0.5,0.5]"), 9, R"(["1/3","2/3"])");
    write(path, text);
    const auto model = load_finite_model(path);
    CHECK(model.initial[0] == 1.0 / 3.0);
    CHECK(model.initial[1] == 2.0 / 3.0);
  }

  TEST_CASE("counterexample model survives save and load") {
    const auto path = fixtures::temp_file("counterexample.json");
    const auto model = counterexample_model();
    save_model(path, model);
    const auto back = load_finite_model(path);
    CHECK(back.num_states == 16);
    CHECK(back.num_encoders() == 2);
    CHECK(back.transition == model.transition);
    CHECK(back.obs_channels == model.obs_channels);
    CHECK(*back.joint_obs == *model.joint_obs);
    CHECK(*back.squared_error_target == *model.squared_error_target);
    CHECK(back.rate_schedule == model.rate_schedule);
  }

  TEST_CASE("save then load is the identity on random models") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto model = random_model({3, 2, 2, 3, 3}, seed);
      const auto path = fixtures::temp_file("roundtrip.json");
      save_model(path, model);
      const auto back = load_finite_model(path);
      CHECK(back.transition == model.transition);
      CHECK(back.initial == model.initial);
      CHECK(back.obs_channels == model.obs_channels);
      CHECK(back.cost == model.cost);
      CHECK(back.rate_schedule == model.rate_schedule);
      CHECK(back.horizon == model.horizon);
      CHECK(back.num_decisions == model.num_decisions);
    }
    const auto team = random_iid_team({}, 3);
    const auto path = fixtures::temp_file("roundtrip_team.json");
    save_model(path, team);
    CHECK(*load_finite_model(path).joint_obs == *team.joint_obs);
  }

  TEST_CASE("validate") {
    auto model = fixtures::uninformative(2, 2, 2, 2);
    CHECK(validate(model).empty());

    SUBCASE("negative cost") {
      model.cost[0][1] = -1.0;
      const auto v = validate(model);
      REQUIRE(v.size() == 1);
      CHECK(v[0].field == "cost[0][1]");
    }
    SUBCASE("joint marginal off by 0.1") {
      auto team = random_iid_team({}, 1);
      for (auto& row : team.obs_channels[1]) row = {0.5, 0.5};
      for (auto& row : team.obs_channels[0]) row = {0.5, 0.5};
      for (auto& k : *team.joint_obs) k = {{0.25, 0.25}, {0.25, 0.25}};
      REQUIRE(validate(team).empty());
      (*team.joint_obs)[0] = {{0.3, 0.3}, {0.2, 0.2}};
      const auto v = validate(team);
      REQUIRE(v.size() == 1);
      CHECK(v[0].field == "joint_obs[0]");
    }
    SUBCASE("rates and horizon") {
      model.rate_schedule[0][1] = 0;
      model.horizon = 0;
      CHECK(validate(model).size() >= 2);
    }
  }

  TEST_CASE("linear-Gaussian validation") {
    LinearGaussModel g;
    g.A = Eigen::MatrixXd::Identity(2, 2);
    g.C = Eigen::MatrixXd::Ones(1, 2);
    g.W = Eigen::MatrixXd::Identity(2, 2);
    g.R = Eigen::MatrixXd::Identity(1, 1);
    g.Sigma0 = Eigen::MatrixXd::Zero(2, 2);
    g.Qcost = Eigen::MatrixXd::Identity(2, 2);
    g.horizon = 3;
    g.rate_schedule = {2, 2, 2};
    CHECK(validate(g).empty());
    g.R(0, 0) = 0.0;
    CHECK(validate(g).size() == 1);
    g.R(0, 0) = 1.0;
    g.W(0, 1) = 0.5;
    CHECK(!validate(g).empty());
  }

  TEST_CASE("augmentation with m=1, d=0 relabels nothing") {
    const auto model = random_model({3, 2, 2, 2, 2}, 11);
    const auto aug = augment_state(model, 1, 0);
    CHECK(aug.num_states == 3);
    CHECK(aug.transition == model.transition);
    CHECK(aug.initial == model.initial);
    CHECK(aug.obs_channels == model.obs_channels);
    CHECK(aug.cost == model.cost);
    CHECK(enumerate_full(aug).optimal_cost == doctest::Approx(enumerate_full(model).optimal_cost).epsilon(1e-12));
  }

  TEST_CASE("order-2 block transition") {
    const auto model = random_model({2, 2, 2, 2, 2}, 5);
    const auto aug = augment_state(model, 2, 0);
    REQUIRE(aug.num_states == 4);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        for (int c = 0; c < 2; ++c) {
          for (int d = 0; d < 2; ++d) {
            const double expected = b == c ? model.transition[b][d] : 0.0;
            CHECK(aug.transition[2 * a + b][2 * c + d] == expected);
          }
        }
      }
    }
  }

  TEST_CASE("augmented kernels stay stochastic") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto model = random_model({3, 2, 2, 2, 3}, seed);
      for (int order = 1; order <= 3; ++order) {
        for (int delay = 0; delay <= 2; ++delay) {
          const auto aug = augment_state(model, order, delay);
          for (const auto& row : aug.transition) {
            double s = 0.0;
            for (double p : row) s += p;
            CHECK(std::abs(s - 1.0) <= 1e-12);
          }
          CHECK(validate(aug).empty());
        }
      }
    }
  }

  TEST_CASE("augmentation rejects two encoders") {
    CHECK_THROWS_AS(augment_state(counterexample_model(), 2, 0), std::invalid_argument);
  }
}
