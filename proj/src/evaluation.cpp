#include "aqtc/evaluation.hpp"

#include <algorithm>
#include <cstdio>

#include "aqtc/errors.hpp"
#include "aqtc/rng.hpp"

using nlohmann::json;

namespace aqtc {

int rank_of(const Eigen::VectorXd& scores, int gt) {
  if (gt < 0 || gt >= scores.size())
    throw IndexError("gt " + std::to_string(gt) + " outside " + std::to_string(scores.size()) + " scores");
  int rank = 1;
  for (Eigen::Index j = 0; j < scores.size(); ++j)
    if (j != gt && scores[j] >= scores[gt]) ++rank;
  return rank;
}

json EvalReport::to_json() const {
  json s = json::array();
  for (const auto& r : steps)
    s.push_back({{"qa_id", r.qa_id}, {"step", r.step}, {"rank", r.rank}, {"n_candidates", r.n_candidates}});
  return {{"r1", r1}, {"r3", r3}, {"mr", mr}, {"mrr", mrr}, {"steps", s}, {"mode", mode}};
}

EvalReport EvalReport::from_json(const json& j) {
  try {
    EvalReport r;
    r.r1 = j.at("r1").get<double>();
    r.r3 = j.at("r3").get<double>();
    r.mr = j.at("mr").get<double>();
    r.mrr = j.at("mrr").get<double>();
    r.mode = j.at("mode").get<std::string>();
    for (const auto& s : j.at("steps"))
      r.steps.push_back({s.at("qa_id").get<std::string>(), s.at("step").get<int>(), s.at("rank").get<int>(),
                         s.at("n_candidates").get<int>()});
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("eval report: ") + e.what());
  }
}

EvalReport aggregate(const std::vector<StepRecord>& records, const std::string& mode) {
  if (records.empty()) throw EmptyEval("no step records to aggregate");
  double hit1 = 0, hit3 = 0, rank_sum = 0, rr_sum = 0;
  for (const auto& r : records) {
    if (r.rank < 1) throw RangeError("rank must be >= 1");
    hit1 += r.rank <= 1 ? 1 : 0;
    hit3 += r.rank <= 3 ? 1 : 0;
    rank_sum += r.rank;
    rr_sum += 1.0 / r.rank;
  }
  const double n = static_cast<double>(records.size());
  EvalReport rep;
  rep.r1 = 100.0 * hit1 / n;
  rep.r3 = 100.0 * hit3 / n;
  rep.mr = rank_sum / n;
  rep.mrr = rr_sum / n;
  rep.steps = records;
  rep.mode = mode;
  return rep;
}

bool self_consistent(const EvalReport& report) {
  if (report.steps.empty()) return false;
  const auto again = aggregate(report.steps, report.mode);
  return again.r1 == report.r1 && again.r3 == report.r3 && again.mr == report.mr && again.mrr == report.mrr;
}

EvalReport random_baseline_expectation(const std::vector<int>& counts) {
  if (counts.empty()) throw EmptyEval("no steps");
  double r1 = 0, r3 = 0, mr = 0, mrr = 0;
  for (int n : counts) {
    if (n < 1) throw RangeError("candidate count must be >= 1");
    double harmonic = 0;
    for (int k = 1; k <= n; ++k) harmonic += 1.0 / k;
    r1 += 1.0 / n;
    r3 += std::min(3, n) / static_cast<double>(n);
    mr += (n + 1) / 2.0;
    mrr += harmonic / n;
  }
  const double s = static_cast<double>(counts.size());
  EvalReport rep;
  rep.r1 = 100.0 * r1 / s;
  rep.r3 = 100.0 * r3 / s;
  rep.mr = mr / s;
  rep.mrr = mrr / s;
  rep.mode = "random_expectation";
  return rep;
}

EvalReport monte_carlo_random(const std::vector<int>& counts, int trials, std::uint64_t seed) {
  if (trials < 1) throw RangeError("trials must be >= 1");
  if (counts.empty()) throw EmptyEval("no steps");
  Rng rng(seed);
  double hit1 = 0, hit3 = 0, rank_sum = 0, rr_sum = 0;
  Eigen::VectorXd scores;
  for (int t = 0; t < trials; ++t) {
    for (int n : counts) {
      if (n < 1) throw RangeError("candidate count must be >= 1");
      scores.resize(n);
      for (int j = 0; j < n; ++j) scores[j] = rng.uniform();
      const int r = rank_of(scores, 0);
      hit1 += r <= 1;
      hit3 += r <= 3;
      rank_sum += r;
      rr_sum += 1.0 / r;
    }
  }
  const double total = static_cast<double>(trials) * static_cast<double>(counts.size());
  EvalReport rep;
  rep.r1 = 100.0 * hit1 / total;
  rep.r3 = 100.0 * hit3 / total;
  rep.mr = rank_sum / total;
  rep.mrr = rr_sum / total;
  rep.mode = "random_monte_carlo";
  return rep;
}

std::vector<int> candidate_counts(const std::vector<TaskInstance>& tasks) {
  std::vector<int> out;
  for (const auto& t : tasks)
    for (const auto& qa : t.qas)
      for (const auto& s : qa.steps) out.push_back(static_cast<int>(s.candidates.size()));
  return out;
}

EvalReport evaluate(const std::vector<TaskInstance>& tasks, const std::vector<FeatureBundle>& bundles,
                    const Q2AParams& params, UnrollMode mode) {
  if (tasks.size() != bundles.size()) throw DimensionMismatch("tasks and bundles differ in count");
  std::vector<StepRecord> records;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (const auto& qa : tasks[t].qas) {
      const auto trace = unroll(qa, bundles[t], params, mode);
      for (std::size_t i = 0; i < qa.steps.size(); ++i)
        records.push_back({tasks[t].task_id + "/" + qa.qa_id, static_cast<int>(i), rank_of(trace.scores[i], qa.steps[i].correct),
                           static_cast<int>(qa.steps[i].candidates.size())});
    }
  }
  return aggregate(records, to_string(mode));
}

std::string format_metric(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace aqtc
