#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zdq/oracle.hpp"

namespace zdq {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInvalid = 2,
  kExitBudget = 3,
  kExitUsage = 64,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

// Seeded verification suite.
//   kind "single": random single-encoder models, full / witsenhausen / wv / dp
//   kind "team":   random i.i.d. two-encoder models, nsm against full sharing
struct SuiteSpec {
  std::string kind = "single";
  int count = 0;
  std::uint64_t seed = 1;
  int states = 2;
  int observations = 2;
  int messages = 2;
  int decisions = 2;
  int horizon = 2;
  long long budget = kDefaultBudget;
  double tol = kCanonTol;
  double gap_tol = 1e-9;
};

SuiteSpec suite_from_json(const nlohmann::json& doc);

struct SuiteSummary {
  int instances = 0;
  int skipped = 0;
  int failed = 0;  // some gap above gap_tol
  double max_gap = 0.0;
};

// Writes a CSV header and one row per instance.
SuiteSummary batch_verify(const SuiteSpec& spec, std::ostream& csv);

}  // namespace zdq
