#include "aqtc/core.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace aqtc {

namespace {

const std::regex& placeholder_regex() {
  static const std::regex re("<button([0-9]{1,3})>");
  return re;
}

}  // namespace

std::vector<int> QASample::ground_truth() const {
  std::vector<int> gt;
  gt.reserve(steps.size());
  for (const auto& s : steps) gt.push_back(s.correct);
  return gt;
}

const Button* TaskInstance::find_button(int button_id) const {
  for (const auto& b : buttons)
    if (b.button_id == button_id) return &b;
  return nullptr;
}

const QASample* TaskInstance::find_qa(std::string_view qa_id) const {
  for (const auto& q : qas)
    if (q.qa_id == qa_id) return &q;
  return nullptr;
}

int FeatureBundle::d_b() const {
  for (const auto& qa : qas)
    for (const auto& s : qa.steps) return static_cast<int>(s.button.cols());
  return 0;
}

const QAFeatures* FeatureBundle::find_qa(std::string_view qa_id) const {
  for (const auto& q : qas)
    if (q.qa_id == qa_id) return &q;
  return nullptr;
}

StepPrediction make_prediction(const Eigen::VectorXd& scores) {
  StepPrediction p;
  p.scores = scores;
  const auto n = static_cast<int>(scores.size());
  p.ranks.resize(n);
  for (int j = 0; j < n; ++j) {
    int rank = 1;
    for (int k = 0; k < n; ++k)
      if (k != j && scores[k] >= scores[j]) ++rank;
    p.ranks[j] = rank;
  }
  int best = 0;
  for (int j = 1; j < n; ++j)
    if (scores[j] > scores[best]) best = j;
  p.chosen = best;
  return p;
}

std::vector<int> find_button_placeholders(std::string_view text) {
  std::vector<int> ids;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), placeholder_regex()); it != std::sregex_iterator(); ++it)
    ids.push_back(std::stoi((*it)[1].str()));
  return ids;
}

std::string replace_button_placeholders(std::string_view text, std::string_view replacement) {
  return std::regex_replace(std::string(text), placeholder_regex(), std::string(replacement));
}

std::vector<std::string> validate_task(const TaskInstance& task) {
  std::vector<std::string> out;
  const std::string where = "task '" + task.task_id + "': ";

  if (task.frames.empty()) out.push_back(where + "frames: empty video (f >= 1 required)");
  if (task.script.empty()) out.push_back(where + "script: no sentences (e >= 1 required)");

  std::set<int> ids;
  for (const auto& b : task.buttons) {
    const std::string bw = where + "button " + std::to_string(b.button_id) + ": ";
    if (b.button_id < 0) out.push_back(bw + "negative button_id");
    if (!ids.insert(b.button_id).second) out.push_back(bw + "duplicate button_id");
    if (b.box.x1 >= b.box.x2 || b.box.y1 >= b.box.y2) {
      out.push_back(bw + "degenerate box");
      continue;
    }
    auto img = task.user_images.find(b.image_id);
    if (img == task.user_images.end()) {
      out.push_back(bw + "image '" + b.image_id + "' not in user_images");
      continue;
    }
    if (b.box.x1 < 0 || b.box.y1 < 0 || b.box.x2 > img->second.width || b.box.y2 > img->second.height)
      out.push_back(bw + "box outside image bounds");
  }

  std::set<std::string> qa_ids;
  for (const auto& qa : task.qas) {
    const std::string qw = where + "qa '" + qa.qa_id + "': ";
    if (!qa_ids.insert(qa.qa_id).second) out.push_back(qw + "duplicate qa_id");
    if (qa.steps.empty()) out.push_back(qw + "no steps (I >= 1 required)");
    for (std::size_t i = 0; i < qa.steps.size(); ++i) {
      const auto& step = qa.steps[i];
      const std::string sw = qw + "step " + std::to_string(i) + ": ";
      const auto n = static_cast<int>(step.candidates.size());
      if (n < 2) out.push_back(sw + "fewer than 2 candidates");
      if (step.correct < 0 || step.correct >= n) out.push_back(sw + "correct index out of range");
      for (int j = 0; j < n; ++j) {
        const auto& c = step.candidates[j];
        const std::string cw = sw + "candidate " + std::to_string(j) + ": ";
        const auto ph = find_button_placeholders(c.text);
        if (ph.size() > 1) out.push_back(cw + "more than one button placeholder");
        if (!ph.empty() && (!c.button_ref || *c.button_ref != ph.front()))
          out.push_back(cw + "placeholder does not match button_ref");
        if (c.button_ref && task.find_button(*c.button_ref) == nullptr)
          out.push_back(cw + "unresolved button_ref " + std::to_string(*c.button_ref));
      }
    }
  }
  return out;
}

std::vector<std::string> validate_bundle(const FeatureBundle& bundle, const TaskInstance& task) {
  std::vector<std::string> out;
  const std::string where = "bundle '" + bundle.task_id + "': ";
  if (bundle.video.rows() != static_cast<Eigen::Index>(task.frames.size()))
    out.push_back(where + "video rows != frame count");
  if (bundle.script.rows() != static_cast<Eigen::Index>(task.script.size()))
    out.push_back(where + "script rows != sentence count");
  if (!bundle.video.allFinite() || !bundle.script.allFinite()) out.push_back(where + "non-finite context features");
  if (bundle.qas.size() != task.qas.size()) out.push_back(where + "qa count mismatch");
  const int d_b = bundle.d_b();
  for (std::size_t q = 0; q < std::min(bundle.qas.size(), task.qas.size()); ++q) {
    const auto& fq = bundle.qas[q];
    const auto& tq = task.qas[q];
    if (fq.qa_id != tq.qa_id) out.push_back(where + "qa order mismatch at " + tq.qa_id);
    if (fq.question.size() != bundle.script.cols()) out.push_back(where + fq.qa_id + ": d_q != d_s");
    if (!fq.question.allFinite()) out.push_back(where + fq.qa_id + ": non-finite question");
    if (fq.steps.size() != tq.steps.size()) {
      out.push_back(where + fq.qa_id + ": step count mismatch");
      continue;
    }
    for (std::size_t i = 0; i < fq.steps.size(); ++i) {
      const auto& s = fq.steps[i];
      const auto n = static_cast<Eigen::Index>(tq.steps[i].candidates.size());
      if (s.text.rows() != n || s.button.rows() != n) out.push_back(where + fq.qa_id + ": candidate count mismatch");
      if (s.text.cols() != bundle.script.cols()) out.push_back(where + fq.qa_id + ": text width != d_s");
      if (s.button.cols() != d_b) out.push_back(where + fq.qa_id + ": inconsistent d_b");
      if (!s.text.allFinite() || !s.button.allFinite()) out.push_back(where + fq.qa_id + ": non-finite candidate");
    }
  }
  return out;
}

}  // namespace aqtc
