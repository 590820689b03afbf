#pragma once

// Domain types for affordance-centric question-driven task completion.
//
// A task is one device: an instructional video (frames at 1 fps), its
// sentence-segmented narration script, one or more user-view images with
// annotated buttons, and multi-step multiple-choice questions. Everything is
// immutable once built and may be shared across threads.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace aqtc {

// Half-open pixel box: x1 <= x < x2, y1 <= y < y2.
struct Box {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  bool contains(int x, int y) const { return x >= x1 && x < x2 && y >= y1 && y < y2; }
  bool operator==(const Box&) const = default;
};

struct Button {
  int button_id = 0;
  std::string image_id;
  Box box;

  bool operator==(const Button&) const = default;
};

// One multiple-choice option. `text` may hold a single `<buttonK>` token, in
// which case `button_ref` is K.
struct Candidate {
  std::string text;
  std::optional<int> button_ref;

  bool operator==(const Candidate&) const = default;
};

struct StepSpec {
  std::vector<Candidate> candidates;
  int correct = 0;

  bool operator==(const StepSpec&) const = default;
};

struct QASample {
  std::string qa_id;
  std::string question;
  std::vector<StepSpec> steps;

  std::vector<int> ground_truth() const;
  bool operator==(const QASample&) const = default;
};

// A user-view image on disk. Only its size is needed for validation; pixels
// are loaded by the embedding module.
struct ImageRef {
  std::filesystem::path path;
  int width = 0;
  int height = 0;

  bool operator==(const ImageRef&) const = default;
};

struct TaskInstance {
  std::string task_id;
  std::vector<std::filesystem::path> frames;  // 1 fps, in order
  std::vector<std::string> script;            // one sentence per entry
  std::map<std::string, ImageRef> user_images;
  std::vector<Button> buttons;
  std::vector<QASample> qas;

  const Button* find_button(int button_id) const;
  const QASample* find_qa(std::string_view qa_id) const;
  bool operator==(const TaskInstance&) const = default;
};

// Numeric encodings of one task. Rows of `text` / `button` are candidates.
struct StepFeatures {
  Eigen::MatrixXd text;    // n_i x d_s
  Eigen::MatrixXd button;  // n_i x d_b (d_b may be 0)
};

struct QAFeatures {
  std::string qa_id;
  Eigen::VectorXd question;  // d_q == d_s
  std::vector<StepFeatures> steps;
};

struct FeatureBundle {
  std::string task_id;
  Eigen::MatrixXd video;   // f x d_v
  Eigen::MatrixXd script;  // e x d_s
  std::vector<QAFeatures> qas;

  int d_v() const { return static_cast<int>(video.cols()); }
  int d_s() const { return static_cast<int>(script.cols()); }
  int d_b() const;
  const QAFeatures* find_qa(std::string_view qa_id) const;
};

// Scores and pessimistic ranks for one step. `chosen` is the argmax with
// ties going to the lowest index.
struct StepPrediction {
  Eigen::VectorXd scores;
  std::vector<int> ranks;
  int chosen = 0;
};

StepPrediction make_prediction(const Eigen::VectorXd& scores);

// Decimal ids of every `<buttonK>` token in `text`, in order of appearance.
std::vector<int> find_button_placeholders(std::string_view text);

// Replaces every `<buttonK>` token with `replacement`.
std::string replace_button_placeholders(std::string_view text, std::string_view replacement);

// Every broken invariant, one message each, naming the field and the rule.
// Empty when the task is valid.
std::vector<std::string> validate_task(const TaskInstance& task);

// Structural checks on a bundle against its task (shapes, finiteness).
std::vector<std::string> validate_bundle(const FeatureBundle& bundle, const TaskInstance& task);

}  // namespace aqtc
