#include <doctest.h>

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "fixtures.hpp"
#include "zdq/cli.hpp"
#include "zdq/instances.hpp"
#include "zdq/multiterminal.hpp"

using namespace zdq;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run zdq_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string example(const std::string& name) { return std::string(ZDQ_SOURCE_DIR) + "/docs/examples/" + name; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("validate") {
    auto m = fixtures::uninformative(2, 2, 2, 2);
    const auto good = fixtures::temp_file("cli_good.json");
    save_model(good, m);
    CHECK(zdq_run({"validate", "--model", good.string()}).code == kExitOk);

    m.cost[0][1] = -1.0;
    const auto bad = fixtures::temp_file("cli_bad.json");
    std::ofstream(bad) << model_to_json(m).dump();
    const auto r = zdq_run({"validate", "--model", bad.string()});
    CHECK(r.code == kExitInvalid);
    CHECK(r.err.find("cost[0][1]") != std::string::npos);

    CHECK(zdq_run({"validate", "--model", example("two_state.json")}).code == kExitOk);
    CHECK(zdq_run({"validate", "--model", example("scalar_lqg.json")}).code == kExitOk);
    CHECK(zdq_run({"validate", "--model", "/nonexistent/model.json"}).code == kExitInvalid);
  }

  TEST_CASE("counterexample") {
    const auto r = zdq_run({"counterexample"});
    CHECK(r.code == kExitOk);
    const auto out = lines(r.out);
    REQUIRE(out.size() >= 2);
    CHECK(out[0] == "full_cost=0");
    CHECK(out[1] == "separated_cost=0.25");
    CHECK(r.out.find("witness_policy=") != std::string::npos);
  }

  TEST_CASE("compare prints equal costs") {
    const auto r = zdq_run({"compare", "--model", example("two_state.json"), "--dp"});
    CHECK(r.code == kExitOk);
    const auto out = lines(r.out);
    REQUIRE(out.size() == 5);
    CHECK(out[0] == "class,optimal_cost,gap_to_full");
    for (std::size_t i = 1; i < out.size(); ++i) {
      CHECK(out[i].find(",0.495,") != std::string::npos);
    }
  }

  TEST_CASE("usage errors") {
    CHECK(zdq_run({"frobnicate"}).code == kExitUsage);
    CHECK(zdq_run({"solve", "--model", example("two_state.json"), "--bogus"}).code == kExitUsage);
    CHECK(zdq_run({"solve", "--model", example("two_state.json"), "--class", "nope"}).code == kExitUsage);
    CHECK(zdq_run({"--help"}).code == kExitOk);
  }

  TEST_CASE("budget exceeded") {
    const auto r = zdq_run({"solve", "--model", example("two_state.json"), "--class", "full", "--budget", "3"});
    CHECK(r.code == kExitBudget);
  }

  TEST_CASE("suites") {
    const auto empty = zdq_run({"verify-suite", "--count", "0"});
    CHECK(empty.code == kExitOk);
    CHECK(lines(empty.out).size() == 1);

    const auto single = zdq_run({"verify-suite", "--count", "3", "--seed", "5"});
    CHECK(single.code == kExitOk);
    const auto rows = lines(single.out);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "index,seed,full,witsenhausen,wv,dp,max_gap,status");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].substr(rows[i].rfind(',') + 1) == "ok");

    const auto team = zdq_run({"verify-suite", "--kind", "team", "--count", "2"});
    CHECK(team.code == kExitOk);
    CHECK(lines(team.out)[0] == "index,seed,nsm,full,gap,status");

    SuiteSpec spec;
    spec.count = 2;
    spec.horizon = 3;
    spec.budget = 10;
    std::ostringstream csv;
    const auto summary = batch_verify(spec, csv);
    CHECK(summary.skipped == 2);
    CHECK(csv.str().find("skipped") != std::string::npos);
  }

  TEST_CASE("identical runs give identical bytes") {
    const auto j1 = fixtures::temp_file("det1.json"), j2 = fixtures::temp_file("det2.json");
    const auto a = zdq_run({"solve", "--model", example("two_state.json"), "--class", "wv", "--out-json", j1.string()});
    const auto b = zdq_run({"solve", "--model", example("two_state.json"), "--class", "wv", "--out-json", j2.string()});
    CHECK(a.out == b.out);
    CHECK(slurp(j1) == slurp(j2));
    const auto l1 = zdq_run({"lqg", "--model", example("scalar_lqg.json"), "--paths", "20000", "--seed", "4"});
    const auto l2 = zdq_run({"lqg", "--model", example("scalar_lqg.json"), "--paths", "20000", "--seed", "4",
                             "--workers", "2"});
    CHECK(l1.code == kExitOk);
    CHECK(l1.out == l2.out);
    CHECK(lines(l1.out)[0] == "seed,N,M,total,filter_term,quantize_term,residual");
  }

  TEST_CASE("emitted policies reproduce emitted costs") {
    const auto model = fixtures::temp_file("emit_model.json");
    save_model(model, random_model({2, 2, 2, 2, 3}, 42));
    for (const std::string cls : {"full", "wits", "wv", "dp"}) {
      const auto report = fixtures::temp_file("emit_" + cls + ".json");
      REQUIRE(zdq_run({"solve", "--model", model.string(), "--class", cls, "--out-json", report.string()}).code ==
              kExitOk);
      const auto doc = nlohmann::json::parse(slurp(report));
      CHECK(doc.at("schema_version") == 1);
      const auto e = zdq_run({"evaluate", "--model", model.string(), "--policy", report.string()});
      REQUIRE(e.code == kExitOk);
      std::ostringstream want;
      want << "expected_cost=" << fmt::format("{:.12g}", doc.at("optimal_cost").get<double>()) << "\n";
      CHECK(e.out == want.str());
    }

    const auto team_model = fixtures::temp_file("emit_team.json");
    save_model(team_model, counterexample_model());
    for (const std::string cls : {"nsm", "separated", "full"}) {
      const auto report = fixtures::temp_file("emit_team_" + cls + ".json");
      REQUIRE(zdq_run({"team", "--model", team_model.string(), "--class", cls, "--out-json", report.string()}).code ==
              kExitOk);
      const auto doc = nlohmann::json::parse(slurp(report));
      const auto e = zdq_run({"evaluate", "--model", team_model.string(), "--policy", report.string()});
      REQUIRE(e.code == kExitOk);
      CHECK(e.out == "expected_cost=" + fmt::format("{:.12g}", doc.at("optimal_cost").get<double>()) + "\n");
    }
  }
}
