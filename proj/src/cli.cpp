#include "zdq/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "zdq/beliefdp.hpp"
#include "zdq/filter.hpp"
#include "zdq/instances.hpp"
#include "zdq/lqg.hpp"
#include "zdq/model.hpp"
#include "zdq/multiterminal.hpp"
#include "zdq/oracle.hpp"
#include "zdq/policy.hpp"
#include "zdq/random.hpp"

namespace zdq {
namespace {

constexpr int kSchemaVersion = 1;

std::string num(double v) { return fmt::format("{:.12g}", v); }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot write {}", path));
  f << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ModelError(ModelError::Kind::Parse, fmt::format("cannot open {}", path));
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(ModelError::Kind::Parse, fmt::format("{}: {}", path, e.what()));
  }
}

FiniteModel finite_model(const std::string& path, int horizon) {
  auto model = load_finite_model(path);
  return horizon > 0 ? with_horizon(std::move(model), horizon) : model;
}

// Shared flags of the commands that take a model.
struct Common {
  std::string model;
  long long budget = kDefaultBudget;
  double tol = kCanonTol;
  int horizon = 0;
  std::string out_json;
  std::string out_csv;
  bool timing = false;

  SearchOptions options() const { return {budget, tol, 0}; }
};

void add_common(CLI::App* cmd, Common& c, bool model_required = true) {
  auto* opt = cmd->add_option("--model", c.model, "model file (JSON)");
  if (model_required) opt->required();
  cmd->add_option("--budget", c.budget, "maximum number of policy evaluations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--tol", c.tol, "belief canonicalization tolerance (L-infinity)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--horizon", c.horizon, "override the model horizon")->check(CLI::PositiveNumber);
  cmd->add_option("--out-json", c.out_json, "write the JSON report here");
  cmd->add_option("--out-csv", c.out_csv, "write the CSV summary here");
  cmd->add_flag("--timing", c.timing, "include wall time in the reports");
}

// CSV goes to stdout and optionally to a file; JSON only to a file.
void emit(const Common& c, std::ostream& out, const std::string& csv, nlohmann::json doc) {
  out << csv;
  if (!c.out_csv.empty()) write_file(c.out_csv, csv);
  if (!c.out_json.empty()) {
    doc["schema_version"] = kSchemaVersion;
    write_file(c.out_json, doc.dump(2) + "\n");
  }
}

nlohmann::json report_json(const SearchReport& r, bool timing) {
  auto doc = to_json(r);
  if (timing) doc["wall_time"] = r.wall_time;
  return doc;
}

std::string report_csv(const std::vector<SearchReport>& reports, bool timing) {
  std::string csv = timing ? "class,policies_evaluated,optimal_cost,wall_time\n" : "class,policies_evaluated,optimal_cost\n";
  for (const auto& r : reports) {
    csv += fmt::format("{},{},{}", r.class_name, r.num_policies_evaluated, num(r.optimal_cost));
    csv += timing ? fmt::format(",{}\n", num(r.wall_time)) : "\n";
  }
  return csv;
}

int cmd_validate(const Common& c, std::ostream& out, std::ostream& err) {
  nlohmann::json doc = read_json(c.model);
  const AnyModel model = model_from_json(doc);
  const auto violations = std::visit([](const auto& m) { return validate(m); }, model);
  if (!violations.empty()) {
    for (const auto& v : violations) err << "violation: " << v.field << ": " << v.message << "\n";
    return kExitInvalid;
  }
  if (const auto* f = std::get_if<FiniteModel>(&model)) {
    out << fmt::format("ok: finite model, {} states, {} encoder(s), horizon {}\n", f->num_states, f->num_encoders(),
                       f->horizon);
  } else {
    const auto& g = std::get<LinearGaussModel>(model);
    out << fmt::format("ok: linear-Gaussian model, n={}, m={}, horizon {}\n", g.state_dim(), g.obs_dim(), g.horizon);
  }
  return kExitOk;
}

int cmd_solve(const Common& c, const std::string& cls, std::ostream& out) {
  const auto model = finite_model(c.model, c.horizon);
  if (cls == "dp") {
    DPOptions options{c.budget, c.tol};
    const auto start = std::chrono::steady_clock::now();
    const auto result = dp_solve(model, options);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    SearchReport r{"dp", result.actions_evaluated, result.optimal_cost, {}, wall};
    auto doc = to_json(result);
    if (c.timing) doc["wall_time"] = wall;
    emit(c, out, report_csv({r}, c.timing), doc);
    return kExitOk;
  }
  SearchReport r;
  if (cls == "full") r = enumerate_full(model, c.options());
  if (cls == "wits") r = enumerate_witsenhausen(model, c.options());
  if (cls == "wv") r = enumerate_wv(model, c.options());
  emit(c, out, report_csv({r}, c.timing), report_json(r, c.timing));
  return kExitOk;
}

int cmd_compare(const Common& c, bool with_dp, std::ostream& out) {
  const auto model = finite_model(c.model, c.horizon);
  auto rows = compare_classes(model, c.options());
  if (with_dp) {
    const double dp = dp_solve(model, {c.budget, c.tol}).optimal_cost;
    rows.push_back({"dp", dp, dp - rows.front().optimal_cost, 0});
  }
  std::string csv = "class,optimal_cost,gap_to_full\n";
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& row : rows) {
    csv += fmt::format("{},{},{:.12f}\n", row.class_name, num(row.optimal_cost), row.gap_to_full);
    classes.push_back({{"class_name", row.class_name},
                       {"optimal_cost", row.optimal_cost},
                       {"gap_to_full", row.gap_to_full}});
  }
  emit(c, out, csv, {{"model", c.model}, {"classes", classes}});
  return kExitOk;
}

int cmd_team(const Common& c, const std::string& cls, std::ostream& out) {
  const auto model = finite_model(c.model, c.horizon);
  const auto r = enumerate_team(model, parse_team_class(cls), c.options());
  emit(c, out, report_csv({r}, c.timing), report_json(r, c.timing));
  return kExitOk;
}

int cmd_counterexample(const Common& c, std::ostream& out) {
  const auto result = run_counterexample(c.options());
  std::string text = fmt::format("full_cost={}\nseparated_cost={}\nsignaling_gap={}\nwitness_cost={}\n",
                                 num(result.full_cost), num(result.separated_cost),
                                 num(result.separated_cost - result.full_cost), num(result.witness_cost));
  text += "witness_policy=" + to_json(result.witness).dump() + "\n";
  out << text;
  if (!c.out_csv.empty()) {
    write_file(c.out_csv, report_csv({result.full_report, result.separated_report}, c.timing));
  }
  if (!c.out_json.empty()) {
    nlohmann::json doc{{"schema_version", kSchemaVersion},
                       {"full_cost", result.full_cost},
                       {"separated_cost", result.separated_cost},
                       {"witness_cost", result.witness_cost},
                       {"witness_policy", to_json(result.witness)},
                       {"full_report", report_json(result.full_report, c.timing)},
                       {"separated_report", report_json(result.separated_report, c.timing)}};
    write_file(c.out_json, doc.dump(2) + "\n");
  }
  return kExitOk;
}

struct LqgArgs {
  int rate = -1;
  long long paths = 1000000;
  long long design_paths = 0;
  std::uint64_t seed = 1;
  std::string method = "lloyd";
  int workers = 1;
};

int cmd_lqg(const Common& c, const LqgArgs& a, std::ostream& out) {
  const auto any = load_model(c.model);
  const auto* found = std::get_if<LinearGaussModel>(&any);
  if (!found) throw ModelError(ModelError::Kind::Validation, "lqg needs a linear-Gaussian model (an \"lqg\" object)");
  LinearGaussModel model = *found;
  if (c.horizon > 0) {
    model.horizon = c.horizon;
    model.rate_schedule.resize(static_cast<std::size_t>(c.horizon), model.rate_schedule.empty() ? 0 : model.rate_schedule.back());
  }
  const auto method = parse_quantizer_method(a.method);
  const long long design_paths = a.design_paths > 0 ? a.design_paths : a.paths;
  // Quantizers are designed on an independent stream; rate 0 means no quantization.
  const std::uint64_t design_seed = derive_seed(a.seed, 0x6465736967ULL);
  StageQuantizers quantizers(static_cast<std::size_t>(model.horizon));
  std::vector<std::vector<double>> samples;
  for (int t = 0; t < model.horizon; ++t) {
    const int levels = a.rate >= 0 ? a.rate : model.rate_schedule.at(static_cast<std::size_t>(t));
    if (levels == 0) continue;
    if (samples.empty()) samples = simulate_estimates(model, design_paths, design_seed);
    quantizers[t] = design_quantizer(samples[t], levels, method);
  }
  const auto r = simulate_separation(model, quantizers, a.paths, a.seed, a.workers);
  const std::string rate = a.rate == 0 ? "inf" : a.rate > 0 ? std::to_string(a.rate) : "schedule";
  const std::string csv = "seed,N,M,total,filter_term,quantize_term,residual\n" +
                          fmt::format("{},{},{},{},{},{},{}\n", a.seed, a.paths, rate, num(r.total_distortion),
                                      num(r.filter_term), num(r.quantize_term), num(r.residual));
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& q : quantizers) {
    qs.push_back(q ? nlohmann::json{{"thresholds", q->thresholds}, {"points", q->points}} : nlohmann::json(nullptr));
  }
  emit(c, out, csv,
       {{"seed", a.seed},
        {"paths", a.paths},
        {"method", a.method},
        {"quantizers", qs},
        {"total_distortion", r.total_distortion},
        {"filter_term", r.filter_term},
        {"quantize_term", r.quantize_term},
        {"residual", r.residual}});
  return kExitOk;
}

int cmd_beliefs(const Common& c, std::ostream& out) {
  const auto model = finite_model(c.model, c.horizon);
  const auto tree = build_belief_tree(model, model.horizon, c.tol);
  BeliefTable table(c.tol);
  const auto xi = xi_init(model, table);
  nlohmann::json doc = to_json(tree);
  doc["xi_0"] = {{"belief_table", table.entries()}, {"support", to_json(xi)}};
  doc["schema_version"] = kSchemaVersion;
  const std::string text = doc.dump(2) + "\n";
  if (c.out_json.empty()) {
    out << text;
  } else {
    write_file(c.out_json, text);
  }
  return kExitOk;
}

// Accepts a bare policy document or a report that carries one.
int cmd_evaluate(const Common& c, const std::string& policy_path, std::ostream& out) {
  const auto model = finite_model(c.model, c.horizon);
  nlohmann::json doc = read_json(policy_path);
  if (doc.contains("optimal_policy")) doc = doc.at("optimal_policy");
  const std::string cls = doc.value("class", std::string{});
  double cost = 0.0;
  if (cls == "full" && model.num_encoders() > 1) {
    cost = evaluate_team_policy(model, team_policy_from_json(doc));
  } else if (cls == "full") {
    cost = evaluate_policy(model, full_policy_from_json(doc));
  } else if (cls == "witsenhausen") {
    cost = evaluate_policy(model, witsenhausen_policy_from_json(doc));
  } else if (cls == "wv") {
    cost = evaluate_policy(model, wv_policy_from_json(doc));
  } else if (cls == "nsm" || cls == "separated") {
    cost = evaluate_team_policy(model, team_policy_from_json(doc));
  } else {
    throw std::invalid_argument(fmt::format("{}: unrecognized policy class '{}'", policy_path, cls));
  }
  out << "expected_cost=" << num(cost) << "\n";
  return kExitOk;
}

int cmd_verify_suite(const Common& c, SuiteSpec spec, const std::string& suite_path, std::ostream& out,
                     std::ostream& err) {
  if (!suite_path.empty()) spec = suite_from_json(read_json(suite_path));
  std::ostringstream csv;
  const auto summary = batch_verify(spec, csv);
  out << csv.str();
  if (!c.out_csv.empty()) write_file(c.out_csv, csv.str());
  err << fmt::format("instances={} skipped={} failed={} max_gap={}\n", summary.instances, summary.skipped,
                     summary.failed, num(summary.max_gap));
  return summary.failed > 0 ? kExitFailure : kExitOk;
}

}  // namespace

SuiteSpec suite_from_json(const nlohmann::json& doc) {
  SuiteSpec s;
  s.kind = doc.value("kind", s.kind);
  s.count = doc.value("count", s.count);
  s.seed = doc.value("seed", s.seed);
  s.states = doc.value("states", s.states);
  s.observations = doc.value("observations", s.observations);
  s.messages = doc.value("messages", s.messages);
  s.decisions = doc.value("decisions", s.decisions);
  s.horizon = doc.value("horizon", s.horizon);
  s.budget = doc.value("budget", s.budget);
  s.tol = doc.value("tol", s.tol);
  s.gap_tol = doc.value("gap_tol", s.gap_tol);
  if (s.kind != "single" && s.kind != "team") {
    throw std::invalid_argument(fmt::format("suite kind '{}' (expected single or team)", s.kind));
  }
  if (s.count < 0) throw std::invalid_argument("suite count must be >= 0");
  return s;
}

SuiteSummary batch_verify(const SuiteSpec& spec, std::ostream& csv) {
  SuiteSummary summary;
  const SearchOptions options{spec.budget, spec.tol, 0};
  if (spec.kind == "single") {
    csv << "index,seed,full,witsenhausen,wv,dp,max_gap,status\n";
  } else if (spec.kind == "team") {
    csv << "index,seed,nsm,full,gap,status\n";
  } else {
    throw std::invalid_argument(fmt::format("suite kind '{}' (expected single or team)", spec.kind));
  }
  for (int i = 0; i < spec.count; ++i) {
    const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
    ++summary.instances;
    try {
      std::vector<double> costs;
      if (spec.kind == "single") {
        const auto model = random_model({spec.states, spec.observations, spec.messages, spec.decisions, spec.horizon}, seed);
        for (const auto& row : compare_classes(model, options)) costs.push_back(row.optimal_cost);
        costs.push_back(dp_solve(model, {spec.budget, spec.tol}).optimal_cost);
      } else {
        TeamSpec ts;
        ts.states = spec.states;
        ts.observations = spec.observations;
        ts.decisions = spec.decisions;
        ts.horizon = spec.horizon;
        const auto model = random_iid_team(ts, seed);
        costs.push_back(enumerate_team(model, TeamClass::Memoryless, options).optimal_cost);
        costs.push_back(enumerate_team(model, TeamClass::Full, options).optimal_cost);
      }
      double gap = 0.0;
      for (double v : costs) gap = std::max(gap, std::abs(v - costs.front()));
      if (spec.kind == "team") gap = costs[0] - costs[1];
      const bool ok = std::abs(gap) <= spec.gap_tol;
      summary.max_gap = std::max(summary.max_gap, std::abs(gap));
      if (!ok) ++summary.failed;
      csv << i << "," << seed;
      for (double v : costs) csv << "," << num(v);
      csv << fmt::format(",{:.12f},{}\n", gap, ok ? "ok" : "gap");
    } catch (const BudgetExceeded&) {
      ++summary.skipped;
      csv << i << "," << seed << (spec.kind == "single" ? ",,,,,," : ",,,,") << "skipped\n";
    }
  }
  return summary;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"zdq: zero-delay quantization of partially observed Markov sources.\n"
               "Exhaustive searches are double-exponential; keep |X| <= 3, |Y| <= 2, |M_t| <= 2, T <= 3."};
  app.require_subcommand(1);

  Common c;
  auto* validate_cmd = app.add_subcommand("validate", "check a model file against every invariant");
  validate_cmd->add_option("--model", c.model, "model file (JSON)")->required();

  std::string solve_class;
  auto* solve_cmd = app.add_subcommand("solve", "optimal cost over one policy class");
  add_common(solve_cmd, c);
  solve_cmd->add_option("--class", solve_class, "full | wits | wv | dp")
      ->required()
      ->check(CLI::IsMember({"full", "wits", "wv", "dp"}));

  bool compare_dp = false;
  auto* compare_cmd = app.add_subcommand("compare", "full, Witsenhausen and WV optima side by side");
  add_common(compare_cmd, c);
  compare_cmd->add_flag("--dp", compare_dp, "also run the meta-belief dynamic program");

  std::string team_class;
  auto* team_cmd = app.add_subcommand("team", "two-encoder team search");
  add_common(team_cmd, c);
  team_cmd->add_option("--class", team_class, "nsm | separated | full")
      ->required()
      ->check(CLI::IsMember({"nsm", "separated", "full"}));

  auto* counter_cmd = app.add_subcommand("counterexample", "signaling counterexample: full vs separated optimum");
  add_common(counter_cmd, c, false);

  LqgArgs lqg;
  auto* lqg_cmd = app.add_subcommand("lqg", "Kalman-then-quantize Monte Carlo");
  add_common(lqg_cmd, c);
  lqg_cmd->add_option("--rate", lqg.rate, "cells per stage; 0 sends the estimate unquantized (default: model schedule)")
      ->check(CLI::NonNegativeNumber);
  lqg_cmd->add_option("--paths", lqg.paths, "Monte Carlo paths")->check(CLI::PositiveNumber)->capture_default_str();
  lqg_cmd->add_option("--design-paths", lqg.design_paths, "paths used to design the quantizers (default: --paths)");
  lqg_cmd->add_option("--seed", lqg.seed, "master seed")->capture_default_str();
  lqg_cmd->add_option("--method", lqg.method, "uniform | lloyd")
      ->check(CLI::IsMember({"uniform", "lloyd"}))
      ->capture_default_str();
  lqg_cmd->add_option("--workers", lqg.workers, "threads")->check(CLI::PositiveNumber)->capture_default_str();

  SuiteSpec suite;
  std::string suite_path;
  auto* suite_cmd = app.add_subcommand("verify-suite", "seeded random instances, all classes compared");
  add_common(suite_cmd, c, false);
  suite_cmd->add_option("--suite", suite_path, "suite spec (JSON); overrides the flags below");
  suite_cmd->add_option("--kind", suite.kind, "single | team")->check(CLI::IsMember({"single", "team"}));
  suite_cmd->add_option("--count", suite.count, "number of instances")->check(CLI::NonNegativeNumber);
  suite_cmd->add_option("--seed", suite.seed, "master seed")->capture_default_str();
  suite_cmd->add_option("--states", suite.states)->check(CLI::PositiveNumber);
  suite_cmd->add_option("--observations", suite.observations)->check(CLI::PositiveNumber);
  suite_cmd->add_option("--messages", suite.messages)->check(CLI::PositiveNumber);

  auto* beliefs_cmd = app.add_subcommand("beliefs", "export the belief tree and initial meta-belief");
  add_common(beliefs_cmd, c);

  std::string policy_path;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "expected cost of a policy file with the Bayes decoder");
  add_common(evaluate_cmd, c);
  evaluate_cmd->add_option("--policy", policy_path, "policy or report file (JSON)")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate_cmd) return cmd_validate(c, out, err);
    if (*solve_cmd) return cmd_solve(c, solve_class, out);
    if (*compare_cmd) return cmd_compare(c, compare_dp, out);
    if (*team_cmd) return cmd_team(c, team_class, out);
    if (*counter_cmd) return cmd_counterexample(c, out);
    if (*lqg_cmd) return cmd_lqg(c, lqg, out);
    if (*beliefs_cmd) return cmd_beliefs(c, out);
    if (*evaluate_cmd) return cmd_evaluate(c, policy_path, out);
    if (*suite_cmd) {
      if (c.horizon > 0) suite.horizon = c.horizon;
      suite.budget = c.budget;
      suite.tol = c.tol;
      return cmd_verify_suite(c, suite, suite_path, out, err);
    }
  } catch (const ModelError& e) {
    err << "error: " << e.what() << "\n";
    for (const auto& v : e.violations()) err << "violation: " << v.field << ": " << v.message << "\n";
    return kExitInvalid;
  } catch (const BudgetExceeded& e) {
    err << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace zdq
