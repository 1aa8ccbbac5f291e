#include "zdq/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

namespace zdq {
namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& field, const std::string& what) {
  throw ModelError(ModelError::Kind::Parse, fmt::format("{}: {}", field, what));
}

// Accepts a JSON number or an exact rational written as "num/den".
double parse_real(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return std::stod(s);
      const double num = std::stod(s.substr(0, slash));
      const double den = std::stod(s.substr(slash + 1));
      if (den == 0.0) parse_fail(field, "zero denominator in rational '" + s + "'");
      return num / den;
    } catch (const std::logic_error&) {
      parse_fail(field, "cannot parse number '" + s + "'");
    }
  }
  parse_fail(field, "expected a number or a \"num/den\" string");
}

int parse_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) parse_fail(field, "expected an integer");
  return v.get<int>();
}

std::vector<double> parse_vector(const json& v, const std::string& field) {
  if (!v.is_array()) parse_fail(field, "expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(parse_real(v[i], fmt::format("{}[{}]", field, i)));
  }
  return out;
}

Matrix parse_matrix(const json& v, const std::string& field) {
  if (!v.is_array()) parse_fail(field, "expected an array of rows");
  Matrix out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(parse_vector(v[i], fmt::format("{}[{}]", field, i)));
  }
  return out;
}

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) parse_fail(key, "missing required field");
  return doc.at(key);
}

Eigen::MatrixXd to_eigen(const Matrix& m, const std::string& field) {
  const auto rows = static_cast<Eigen::Index>(m.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(m.front().size());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(m[i].size()) != cols) {
      parse_fail(field, fmt::format("row {} has {} entries, expected {}", i, m[i].size(), cols));
    }
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = m[i][j];
  }
  return out;
}

json from_eigen(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

LinearGaussModel parse_lqg(const json& doc) {
  LinearGaussModel m;
  m.A = to_eigen(parse_matrix(require(doc, "A"), "lqg.A"), "lqg.A");
  m.C = to_eigen(parse_matrix(require(doc, "C"), "lqg.C"), "lqg.C");
  m.W = to_eigen(parse_matrix(require(doc, "W"), "lqg.W"), "lqg.W");
  m.R = to_eigen(parse_matrix(require(doc, "R"), "lqg.R"), "lqg.R");
  m.Sigma0 = to_eigen(parse_matrix(require(doc, "Sigma0"), "lqg.Sigma0"), "lqg.Sigma0");
  m.Qcost = to_eigen(parse_matrix(require(doc, "Qcost"), "lqg.Qcost"), "lqg.Qcost");
  m.horizon = parse_int(require(doc, "horizon"), "lqg.horizon");
  const auto& rates = require(doc, "rate_schedule");
  if (!rates.is_array()) parse_fail("lqg.rate_schedule", "expected an array");
  for (std::size_t t = 0; t < rates.size(); ++t) {
    m.rate_schedule.push_back(parse_int(rates[t], fmt::format("lqg.rate_schedule[{}]", t)));
  }
  return m;
}

FiniteModel parse_finite(const json& doc) {
  FiniteModel m;
  m.num_states = parse_int(require(doc, "num_states"), "num_states");
  m.transition = parse_matrix(require(doc, "transition"), "transition");
  m.initial = parse_vector(require(doc, "initial"), "initial");
  const auto& channels = require(doc, "obs_channels");
  if (!channels.is_array()) parse_fail("obs_channels", "expected a list of matrices");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    m.obs_channels.push_back(parse_matrix(channels[i], fmt::format("obs_channels[{}]", i)));
  }
  if (doc.contains("joint_obs") && !doc.at("joint_obs").is_null()) {
    const auto& joint = doc.at("joint_obs");
    if (!joint.is_array()) parse_fail("joint_obs", "expected [x][y1][y2] nested arrays");
    std::vector<Matrix> table;
    for (std::size_t x = 0; x < joint.size(); ++x) {
      table.push_back(parse_matrix(joint[x], fmt::format("joint_obs[{}]", x)));
    }
    m.joint_obs = std::move(table);
  }
  if (doc.contains("squared_error_target") && !doc.at("squared_error_target").is_null()) {
    m.squared_error_target = parse_vector(doc.at("squared_error_target"), "squared_error_target");
  }
  if (doc.contains("cost")) {
    m.cost = parse_matrix(doc.at("cost"), "cost");
  } else if (!m.squared_error_target) {
    parse_fail("cost", "missing required field");
  }
  m.num_decisions = doc.contains("num_decisions") ? parse_int(doc.at("num_decisions"), "num_decisions")
                    : m.squared_error_target ? 0
                                             : parse_int(require(doc, "num_decisions"), "num_decisions");
  m.horizon = parse_int(require(doc, "horizon"), "horizon");

  // A flat list is shorthand for a single encoder's schedule.
  const auto& rates = require(doc, "rate_schedule");
  if (!rates.is_array()) parse_fail("rate_schedule", "expected an array");
  if (!rates.empty() && rates.front().is_array()) {
    for (std::size_t i = 0; i < rates.size(); ++i) {
      std::vector<int> row;
      for (std::size_t t = 0; t < rates[i].size(); ++t) {
        row.push_back(parse_int(rates[i][t], fmt::format("rate_schedule[{}][{}]", i, t)));
      }
      m.rate_schedule.push_back(std::move(row));
    }
  } else {
    std::vector<int> row;
    for (std::size_t t = 0; t < rates.size(); ++t) {
      row.push_back(parse_int(rates[t], fmt::format("rate_schedule[{}]", t)));
    }
    m.rate_schedule.push_back(std::move(row));
  }
  return m;
}

void check_stochastic_row(const std::vector<double>& row, const std::string& field,
                          std::vector<Violation>& out) {
  double sum = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!std::isfinite(row[j]) || row[j] < 0.0) {
      out.push_back({fmt::format("{}[{}]", field, j),
                     fmt::format("probability {} is negative or not finite", row[j])});
    }
    sum += row[j];
  }
  if (std::abs(sum - 1.0) > kKernelTol) {
    out.push_back({field, fmt::format("row sums to {:.17g}, expected 1 within {:g}", sum, kKernelTol)});
  }
}

void check_kernel(const Matrix& k, std::size_t rows, const std::string& field,
                  std::vector<Violation>& out) {
  if (k.size() != rows) {
    out.push_back({field, fmt::format("has {} rows, expected {}", k.size(), rows)});
    return;
  }
  if (k.empty() || k.front().empty()) {
    out.push_back({field, "has no columns"});
    return;
  }
  const auto cols = k.front().size();
  for (std::size_t i = 0; i < k.size(); ++i) {
    const auto name = fmt::format("{}[{}]", field, i);
    if (k[i].size() != cols) {
      out.push_back({name, fmt::format("has {} entries, expected {}", k[i].size(), cols)});
      continue;
    }
    check_stochastic_row(k[i], name, out);
  }
}

bool symmetric(const Eigen::MatrixXd& m) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= kCovTol;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (m + m.transpose()),
                                                        Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

void check_cov(const Eigen::MatrixXd& m, Eigen::Index dim, bool definite, const std::string& field,
               std::vector<Violation>& out) {
  if (m.rows() != dim || m.cols() != dim) {
    out.push_back({field, fmt::format("is {}x{}, expected {}x{}", m.rows(), m.cols(), dim, dim)});
    return;
  }
  if (dim == 0) return;
  if (!symmetric(m)) {
    out.push_back({field, fmt::format("is not symmetric within {:g}", kCovTol)});
    return;
  }
  const double lo = min_eigenvalue(m);
  if (definite ? lo <= kCovTol : lo < -kCovTol) {
    out.push_back({field, fmt::format("minimum eigenvalue {:g} violates positive {}definiteness", lo,
                                      definite ? "" : "semi-")});
  }
}

}  // namespace

double FiniteModel::max_cost() const {
  if (squared_error_target) {
    const auto [lo, hi] = std::minmax_element(squared_error_target->begin(), squared_error_target->end());
    return (*hi - *lo) * (*hi - *lo);
  }
  double best = 0.0;
  for (const auto& row : cost) {
    for (double c : row) best = std::max(best, c);
  }
  return best;
}

std::vector<Violation> validate(const FiniteModel& m) {
  std::vector<Violation> out;
  if (m.num_states < 1) {
    out.push_back({"num_states", fmt::format("is {}, expected >= 1", m.num_states)});
    return out;
  }
  const auto n = static_cast<std::size_t>(m.num_states);
  check_kernel(m.transition, n, "transition", out);
  if (m.initial.size() != n) {
    out.push_back({"initial", fmt::format("has {} entries, expected {}", m.initial.size(), n)});
  } else {
    check_stochastic_row(m.initial, "initial", out);
  }

  if (m.obs_channels.empty() || m.obs_channels.size() > 2) {
    out.push_back({"obs_channels", fmt::format("has {} channels, expected 1 or 2", m.obs_channels.size())});
  }
  for (std::size_t i = 0; i < m.obs_channels.size(); ++i) {
    check_kernel(m.obs_channels[i], n, fmt::format("obs_channels[{}]", i), out);
  }

  if (m.joint_obs) {
    const auto& joint = *m.joint_obs;
    if (m.obs_channels.size() != 2) {
      out.push_back({"joint_obs", "requires exactly two obs_channels"});
    } else if (joint.size() != n) {
      out.push_back({"joint_obs", fmt::format("has {} states, expected {}", joint.size(), n)});
    } else if (out.empty()) {
      const auto n1 = m.obs_channels[0].front().size();
      const auto n2 = m.obs_channels[1].front().size();
      for (std::size_t x = 0; x < n; ++x) {
        const auto name = fmt::format("joint_obs[{}]", x);
        if (joint[x].size() != n1 ||
            std::any_of(joint[x].begin(), joint[x].end(), [&](const auto& r) { return r.size() != n2; })) {
          out.push_back({name, fmt::format("expected a {}x{} table", n1, n2)});
          continue;
        }
        std::vector<double> flat;
        for (const auto& r : joint[x]) flat.insert(flat.end(), r.begin(), r.end());
        check_stochastic_row(flat, name, out);
        // One violation per marginal, reporting the largest deviation.
        double dev1 = 0.0, dev2 = 0.0;
        for (std::size_t a = 0; a < n1; ++a) {
          const double marg = std::accumulate(joint[x][a].begin(), joint[x][a].end(), 0.0);
          dev1 = std::max(dev1, std::abs(marg - m.obs_channels[0][x][a]));
        }
        for (std::size_t b = 0; b < n2; ++b) {
          double marg = 0.0;
          for (std::size_t a = 0; a < n1; ++a) marg += joint[x][a][b];
          dev2 = std::max(dev2, std::abs(marg - m.obs_channels[1][x][b]));
        }
        if (dev1 > kKernelTol) {
          out.push_back({fmt::format("joint_obs[{}]", x),
                         fmt::format("y1-marginal differs from obs_channels[0][{}] by {:.3g}, tolerance {:g}", x, dev1,
                                     kKernelTol)});
        }
        if (dev2 > kKernelTol) {
          out.push_back({fmt::format("joint_obs[{}]", x),
                         fmt::format("y2-marginal differs from obs_channels[1][{}] by {:.3g}, tolerance {:g}", x, dev2,
                                     kKernelTol)});
        }
      }
    }
  }

  if (m.squared_error_target) {
    if (m.squared_error_target->size() != n) {
      out.push_back({"squared_error_target",
                     fmt::format("has {} entries, expected {}", m.squared_error_target->size(), n)});
    }
    for (std::size_t x = 0; x < m.squared_error_target->size(); ++x) {
      if (!std::isfinite((*m.squared_error_target)[x])) {
        out.push_back({fmt::format("squared_error_target[{}]", x), "is not finite"});
      }
    }
  } else {
    if (m.num_decisions < 1) {
      out.push_back({"num_decisions", fmt::format("is {}, expected >= 1", m.num_decisions)});
    }
    if (m.cost.size() != n) {
      out.push_back({"cost", fmt::format("has {} rows, expected {}", m.cost.size(), n)});
    } else {
      for (std::size_t x = 0; x < n; ++x) {
        if (static_cast<int>(m.cost[x].size()) != m.num_decisions) {
          out.push_back({fmt::format("cost[{}]", x),
                         fmt::format("has {} entries, expected num_decisions = {}", m.cost[x].size(),
                                     m.num_decisions)});
          continue;
        }
        for (std::size_t v = 0; v < m.cost[x].size(); ++v) {
          const double c = m.cost[x][v];
          if (!std::isfinite(c) || c < 0.0) {
            out.push_back({fmt::format("cost[{}][{}]", x, v),
                           fmt::format("is {}, expected a finite value >= 0", c)});
          }
        }
      }
    }
  }

  if (m.horizon < 1) out.push_back({"horizon", fmt::format("is {}, expected >= 1", m.horizon)});
  if (m.rate_schedule.size() != m.obs_channels.size()) {
    out.push_back({"rate_schedule", fmt::format("has {} encoder schedules, expected {}",
                                                m.rate_schedule.size(), m.obs_channels.size())});
  }
  for (std::size_t i = 0; i < m.rate_schedule.size(); ++i) {
    const auto& row = m.rate_schedule[i];
    if (m.horizon >= 1 && static_cast<int>(row.size()) != m.horizon) {
      out.push_back({fmt::format("rate_schedule[{}]", i),
                     fmt::format("has {} entries, expected horizon = {}", row.size(), m.horizon)});
    }
    for (std::size_t t = 0; t < row.size(); ++t) {
      if (row[t] < 1) {
        out.push_back({fmt::format("rate_schedule[{}][{}]", i, t), fmt::format("is {}, expected >= 1", row[t])});
      }
    }
  }
  return out;
}

std::vector<Violation> validate(const LinearGaussModel& m) {
  std::vector<Violation> out;
  const auto n = m.A.rows();
  if (n < 1 || m.A.cols() != n) {
    out.push_back({"lqg.A", fmt::format("is {}x{}, expected square with n >= 1", m.A.rows(), m.A.cols())});
    return out;
  }
  const auto p = m.C.rows();
  if (p < 1 || m.C.cols() != n) {
    out.push_back({"lqg.C", fmt::format("is {}x{}, expected m x {}", m.C.rows(), m.C.cols(), n)});
  }
  check_cov(m.W, n, false, "lqg.W", out);
  check_cov(m.Sigma0, n, false, "lqg.Sigma0", out);
  check_cov(m.Qcost, n, true, "lqg.Qcost", out);
  if (p >= 1) check_cov(m.R, p, true, "lqg.R", out);
  if (m.horizon < 1) out.push_back({"lqg.horizon", fmt::format("is {}, expected >= 1", m.horizon)});
  if (static_cast<int>(m.rate_schedule.size()) != m.horizon) {
    out.push_back({"lqg.rate_schedule",
                   fmt::format("has {} entries, expected horizon = {}", m.rate_schedule.size(), m.horizon)});
  }
  for (std::size_t t = 0; t < m.rate_schedule.size(); ++t) {
    if (m.rate_schedule[t] < 0) {
      out.push_back({fmt::format("lqg.rate_schedule[{}]", t),
                     fmt::format("is {}, expected >= 1 (or 0 for unquantized)", m.rate_schedule[t])});
    }
  }
  return out;
}

AnyModel model_from_json(const json& doc) {
  if (!doc.is_object()) parse_fail("<root>", "expected a JSON object");
  if (doc.contains("lqg")) return parse_lqg(doc.at("lqg"));
  return parse_finite(doc);
}

json model_to_json(const FiniteModel& m) {
  json doc;
  doc["num_states"] = m.num_states;
  doc["transition"] = m.transition;
  doc["initial"] = m.initial;
  doc["obs_channels"] = m.obs_channels;
  if (m.joint_obs) doc["joint_obs"] = *m.joint_obs;
  doc["cost"] = m.cost;
  doc["num_decisions"] = m.num_decisions;
  if (m.squared_error_target) doc["squared_error_target"] = *m.squared_error_target;
  doc["rate_schedule"] = m.rate_schedule;
  doc["horizon"] = m.horizon;
  return doc;
}

json model_to_json(const LinearGaussModel& m) {
  json lqg;
  lqg["A"] = from_eigen(m.A);
  lqg["C"] = from_eigen(m.C);
  lqg["W"] = from_eigen(m.W);
  lqg["R"] = from_eigen(m.R);
  lqg["Sigma0"] = from_eigen(m.Sigma0);
  lqg["Qcost"] = from_eigen(m.Qcost);
  lqg["horizon"] = m.horizon;
  lqg["rate_schedule"] = m.rate_schedule;
  return json{{"lqg", lqg}};
}

AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(ModelError::Kind::Parse, fmt::format("cannot open model file '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelError(ModelError::Kind::Parse, fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
  AnyModel model = model_from_json(doc);
  auto violations = std::visit([](const auto& m) { return validate(m); }, model);
  if (!violations.empty()) {
    std::string what = fmt::format("{}: {} violation(s)", path.string(), violations.size());
    for (const auto& v : violations) what += fmt::format("\n  {}: {}", v.field, v.message);
    throw ModelError(ModelError::Kind::Validation, what, std::move(violations));
  }
  return model;
}

FiniteModel load_finite_model(const std::filesystem::path& path) {
  auto model = load_model(path);
  if (!std::holds_alternative<FiniteModel>(model)) {
    throw ModelError(ModelError::Kind::Parse,
                     fmt::format("{}: expected a finite-alphabet model, found an lqg model", path.string()));
  }
  return std::get<FiniteModel>(std::move(model));
}

void save_model(const std::filesystem::path& path, const AnyModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write model file '{}'", path.string()));
  out << std::visit([](const auto& m) { return model_to_json(m); }, model).dump(2) << '\n';
}

Matrix joint_kernel(const FiniteModel& m) {
  if (m.num_encoders() == 1) return m.obs_channels.front();
  const int n1 = m.num_obs(0);
  const int n2 = m.num_obs(1);
  Matrix k(m.num_states, std::vector<double>(static_cast<std::size_t>(n1 * n2)));
  for (int x = 0; x < m.num_states; ++x) {
    for (int a = 0; a < n1; ++a) {
      for (int b = 0; b < n2; ++b) {
        k[x][a * n2 + b] = m.joint_obs ? (*m.joint_obs)[x][a][b] : m.obs_channels[0][x][a] * m.obs_channels[1][x][b];
      }
    }
  }
  return k;
}

int joint_obs_size(const FiniteModel& m) {
  int size = 1;
  for (int i = 0; i < m.num_encoders(); ++i) size *= m.num_obs(i);
  return size;
}

FiniteModel with_horizon(FiniteModel model, int horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  for (auto& row : model.rate_schedule) {
    if (row.empty()) throw std::invalid_argument("empty rate schedule cannot be extended");
    row.resize(static_cast<std::size_t>(horizon), row.back());
  }
  model.horizon = horizon;
  return model;
}

FiniteModel augment_state(const FiniteModel& model, int order, int delay) {
  if (model.num_encoders() != 1 || model.joint_obs) {
    throw std::invalid_argument("augment_state: only single-encoder models can be augmented");
  }
  if (order < 1 || delay < 0) throw std::invalid_argument("augment_state: need order >= 1 and delay >= 0");

  const int n = model.num_states;
  const int window = std::max(delay + 1, order);
  int size = 1;
  for (int k = 0; k < window; ++k) {
    if (size > (1 << 20) / n) throw std::invalid_argument("augment_state: augmented state space too large");
    size *= n;
  }

  // Block (a_0, ..., a_{L-1}) with a_{L-1} = x_t is encoded base n, oldest digit most significant.
  auto digit = [&](int z, int k) {
    for (int j = window - 1; j > k; --j) z /= n;
    return z % n;
  };

  FiniteModel out;
  out.num_states = size;
  out.transition.assign(size, std::vector<double>(size, 0.0));
  out.initial.assign(size, 0.0);
  for (int z = 0; z < size; ++z) {
    const int newest = digit(z, window - 1);
    const int shifted = (z * n) % size;
    for (int c = 0; c < n; ++c) out.transition[z][shifted + c] = model.transition[newest][c];
  }
  for (int x = 0; x < n; ++x) {
    int z = 0;
    for (int k = 0; k < window; ++k) z = z * n + x;
    out.initial[z] = model.initial[x];
  }

  const auto& channel = model.obs_channels.front();
  Matrix aug_channel(size);
  for (int z = 0; z < size; ++z) aug_channel[z] = channel[digit(z, window - 1)];
  out.obs_channels = {aug_channel};

  const int scored = window - 1 - delay;
  out.num_decisions = model.num_decisions;
  if (model.squared_error_target) {
    std::vector<double> target(size);
    for (int z = 0; z < size; ++z) target[z] = (*model.squared_error_target)[digit(z, scored)];
    out.squared_error_target = std::move(target);
  } else {
    out.cost.resize(size);
    for (int z = 0; z < size; ++z) out.cost[z] = model.cost[digit(z, scored)];
  }
  out.rate_schedule = model.rate_schedule;
  out.horizon = model.horizon;
  return out;
}

}  // namespace zdq
