#pragma once

// Model configuration: every ablation axis plus layer widths.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "aqtc/embedding.hpp"

namespace aqtc {

enum class StepsKind { kGru, kMlp };

std::string to_string(StepsKind kind);
StepsKind steps_kind_from_string(const std::string& s);

struct Q2AConfig {
  ButtonMode button_mode = ButtonMode::kReverse;
  bool use_video = true;
  bool use_script = true;
  bool att_qa_s = true;
  bool att_s_v = true;
  bool att_transfer = true;
  StepsKind steps_kind = StepsKind::kGru;
  bool use_history = true;
  bool append_question = false;  // concatenate Q to the fusion input

  int d_a = 128;     // attention
  int d_h = 256;     // fusion hidden
  int d_c = 128;     // context feature
  int d_r = 128;     // step state
  int d_head = 256;  // prediction head hidden

  // Start the QA->S key projection from the same draw as its query projection.
  bool tie_qs_init = true;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  // Missing keys keep defaults, unknown keys throw ConfigError.
  static Q2AConfig from_json(const nlohmann::json& j);
  bool operator==(const Q2AConfig&) const = default;
};

// Widths of the frozen inputs (d_b follows the button mode).
struct InputDims {
  int d_s = 0;
  int d_v = 0;
  int d_b = 0;

  bool operator==(const InputDims&) const = default;
};

InputDims input_dims(const FeatureBundle& bundle);

// Which context terms enter the fusion MLP.
//
// With the script: QA->S when att_qa_s. With video and att_s_v as well, the
// transfer term when att_transfer, otherwise the sentence-mean of S->V as a
// question-independent summary. Without the script, video enters through a
// direct QA->V attention. Transfer attention needs QA->S, S->V and video;
// asking for it otherwise is a ConfigError.
struct GroundingPlan {
  bool qa_s = false;
  bool transfer = false;
  bool s_v_summary = false;
  bool qa_v = false;
  bool question = false;
  int fusion_in = 0;

  bool needs_s_v() const { return transfer || s_v_summary; }
  bool has_video_term() const { return transfer || s_v_summary || qa_v; }
};

GroundingPlan plan_grounding(const Q2AConfig& config, const InputDims& dims);

}  // namespace aqtc
