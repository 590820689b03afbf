#pragma once

// Ranking metrics. Ranks are pessimistic (ties count against the model) and
// every step of every question carries equal weight.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "aqtc/core.hpp"
#include "aqtc/decoder.hpp"

namespace aqtc {

// 1 + #{j != gt : s_j >= s_gt}. Throws IndexError on a bad gt.
int rank_of(const Eigen::VectorXd& scores, int gt);

struct StepRecord {
  std::string qa_id;  // "<task_id>/<qa id>" so ids are unique across tasks
  int step = 0;
  int rank = 0;
  int n_candidates = 0;

  bool operator==(const StepRecord&) const = default;
};

struct EvalReport {
  double r1 = 0.0;   // percent
  double r3 = 0.0;   // percent
  double mr = 0.0;
  double mrr = 0.0;  // mean of 1/rank
  std::vector<StepRecord> steps;
  std::string mode;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Throws EmptyEval when `records` is empty.
EvalReport aggregate(const std::vector<StepRecord>& records, const std::string& mode);

// True when re-aggregating `steps` reproduces the header values exactly.
bool self_consistent(const EvalReport& report);

// Exact expectations under a uniform random scorer: 1/n, min(3, n)/n,
// (n + 1)/2 and H_n/n per step, averaged over steps.
EvalReport random_baseline_expectation(const std::vector<int>& candidate_counts);

// Uniform random scores per step, averaged over trials.
EvalReport monte_carlo_random(const std::vector<int>& candidate_counts, int trials, std::uint64_t seed);

std::vector<int> candidate_counts(const std::vector<TaskInstance>& tasks);

// Runs the model over every question of the given tasks.
EvalReport evaluate(const std::vector<TaskInstance>& tasks, const std::vector<FeatureBundle>& bundles,
                    const Q2AParams& params, UnrollMode mode);

// One-decimal fixed formatting used in tables.
std::string format_metric(double v, int decimals);

}  // namespace aqtc
