#include "enumeration.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "zdq/oracle.hpp"
#include "zdq/policy.hpp"

namespace zdq::detail {
namespace {

std::uint64_t stage_alphabet(const FiniteModel& model, int t) {
  std::uint64_t n = 1;
  for (int i = 0; i < model.num_encoders(); ++i) n *= static_cast<std::uint64_t>(model.rate(i, t));
  return n;
}

// Classes are numbered by first occurrence in node order.
std::vector<int> number_classes(const std::vector<ClassKey>& keys, int& count) {
  std::map<ClassKey, int> ids;
  std::vector<int> out(keys.size());
  for (std::size_t n = 0; n < keys.size(); ++n) {
    auto [it, fresh] = ids.emplace(keys[n], static_cast<int>(ids.size()));
    out[n] = it->second;
  }
  count = static_cast<int>(ids.size());
  return out;
}

std::string budget_message(long long budget) {
  return fmt::format("search space exceeds the budget of {} policy evaluations; use a smaller instance "
                     "or raise --budget",
                     budget);
}

class Engine {
 public:
  explicit Engine(const EngineInput& in) : in_(in), model_(in.model), encoders_(in.model.num_encoders()) {
    current_.resize(static_cast<std::size_t>(model_.horizon));
    current_q_.resize(static_cast<std::size_t>(model_.horizon));
  }

  EngineResult run() {
    if (in_.static_keys) check_static_count();
    descend(0, std::vector<std::uint64_t>(in_.tree.levels[0].size(), 0), 0.0);
    return std::move(result_);
  }

 private:
  void check_static_count() {
    // Saturating product of |M^i_t|^{#classes}.
    const long double cap = static_cast<long double>(in_.budget);
    long double count = 1.0L;
    for (int t = 0; t < model_.horizon; ++t) {
      std::vector<std::vector<ClassKey>> keys(static_cast<std::size_t>(encoders_));
      in_.keyer(t, std::vector<std::uint64_t>(in_.tree.levels[t].size(), 0), keys);
      for (int i = 0; i < encoders_; ++i) {
        int classes = 0;
        number_classes(keys[i], classes);
        for (int c = 0; c < classes && count <= cap; ++c) count *= model_.rate(i, t);
      }
    }
    if (count > cap) throw BudgetExceeded(budget_message(in_.budget));
  }

  void descend(int t, const std::vector<std::uint64_t>& parent_q, double acc) {
    const auto& level = in_.tree.levels[t];
    const std::size_t nodes = level.size();
    std::vector<std::vector<ClassKey>> keys(static_cast<std::size_t>(encoders_));
    in_.keyer(t, parent_q, keys);
    std::vector<std::vector<int>> cls(static_cast<std::size_t>(encoders_));
    std::vector<int> ncls(static_cast<std::size_t>(encoders_));
    for (int i = 0; i < encoders_; ++i) cls[i] = number_classes(keys[i], ncls[i]);

    std::vector<std::vector<int>> msg(static_cast<std::size_t>(encoders_));
    for (int i = 0; i < encoders_; ++i) msg[i].assign(static_cast<std::size_t>(ncls[i]), 0);

    const std::uint64_t alphabet = stage_alphabet(model_, t);
    std::vector<std::uint64_t> q(nodes);
    std::vector<std::pair<std::uint64_t, std::size_t>> order(nodes);
    std::vector<double> bucket(static_cast<std::size_t>(model_.num_states));
    auto& node_msgs = current_[t];
    node_msgs.assign(static_cast<std::size_t>(encoders_), std::vector<int>(nodes, 0));

    const bool last = t + 1 == model_.horizon;
    std::vector<std::uint64_t> child_q;

    for (;;) {
      for (std::size_t n = 0; n < nodes; ++n) {
        std::uint64_t joint = 0;
        for (int i = 0; i < encoders_; ++i) {
          const int m = msg[i][static_cast<std::size_t>(cls[i][n])];
          node_msgs[i][n] = m;
          joint = joint * static_cast<std::uint64_t>(model_.rate(i, t)) + static_cast<std::uint64_t>(m);
        }
        q[n] = parent_q[n] * alphabet + joint;
        order[n] = {q[n], n};
      }
      current_q_[t] = q;

      // Stage cost: Bayes risk of every message-history cell, cells in id order.
      std::sort(order.begin(), order.end());
      double stage = 0.0;
      for (std::size_t a = 0; a < nodes;) {
        std::fill(bucket.begin(), bucket.end(), 0.0);
        std::size_t b = a;
        for (; b < nodes && order[b].first == order[a].first; ++b) {
          const auto& w = in_.weights[t][order[b].second];
          for (std::size_t x = 0; x < bucket.size(); ++x) bucket[x] += w[x];
        }
        stage += bayes_risk(model_, bucket);
        a = b;
      }

      if (last) {
        if (++result_.evaluated > in_.budget) throw BudgetExceeded(budget_message(in_.budget));
        if (acc + stage < result_.cost) {
          result_.cost = acc + stage;
          result_.messages = current_;
          result_.qhist = current_q_;
        }
      } else {
        const auto& next = in_.tree.levels[t + 1];
        child_q.resize(next.size());
        for (std::size_t m = 0; m < next.size(); ++m) child_q[m] = q[static_cast<std::size_t>(next[m].parent)];
        descend(t + 1, child_q, acc + stage);
      }

      // Odometer: encoder 0, class 0 most significant.
      bool advanced = false;
      for (int i = encoders_ - 1; i >= 0 && !advanced; --i) {
        for (int c = ncls[i] - 1; c >= 0; --c) {
          if (++msg[i][c] < model_.rate(i, t)) {
            advanced = true;
            break;
          }
          msg[i][c] = 0;
        }
      }
      if (!advanced) break;
    }
  }

  const EngineInput& in_;
  const FiniteModel& model_;
  const int encoders_;
  EngineResult result_;
  std::vector<std::vector<std::vector<int>>> current_;
  std::vector<std::vector<std::uint64_t>> current_q_;
};

}  // namespace

EngineResult run_engine(const EngineInput& input) {
  if (input.budget <= 0) throw std::invalid_argument("budget must be positive");
  return Engine(input).run();
}

std::uint64_t extend_history(const FiniteModel& model, int t, std::uint64_t parent_q, const std::vector<int>& msgs) {
  std::uint64_t joint = 0;
  for (int i = 0; i < model.num_encoders(); ++i) {
    joint = joint * static_cast<std::uint64_t>(model.rate(i, t)) + static_cast<std::uint64_t>(msgs[i]);
  }
  return parent_q * stage_alphabet(model, t) + joint;
}

std::vector<int> joint_messages(const FiniteModel& model, int t, std::uint64_t q) {
  std::vector<int> out(static_cast<std::size_t>(t + 1));
  for (int s = t; s >= 0; --s) {
    const auto a = stage_alphabet(model, s);
    out[s] = static_cast<int>(q % a);
    q /= a;
  }
  return out;
}

StageWeights joint_weights(const ObservationTree& tree) {
  StageWeights out(tree.levels.size());
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    for (const auto& node : tree.levels[t]) out[t].push_back(node.joint);
  }
  return out;
}

}  // namespace zdq::detail
