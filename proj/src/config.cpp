#include "aqtc/config.hpp"

#include <set>

#include "aqtc/errors.hpp"

using nlohmann::json;

namespace aqtc {

namespace {

bool get_bool(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw ConfigError(std::string("model config: '") + key + "' must be a boolean");
  return j[key].get<bool>();
}

int get_dim(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer() || j[key].get<int>() < 1)
    throw ConfigError(std::string("model config: dims.") + key + " must be a positive integer");
  return j[key].get<int>();
}

}  // namespace

std::string to_string(StepsKind kind) { return kind == StepsKind::kGru ? "gru" : "mlp"; }

StepsKind steps_kind_from_string(const std::string& s) {
  if (s == "gru") return StepsKind::kGru;
  if (s == "mlp") return StepsKind::kMlp;
  throw ConfigError("unknown steps_kind '" + s + "'");
}

json Q2AConfig::to_json() const {
  return {{"button_mode", aqtc::to_string(button_mode)},
          {"use_video", use_video},
          {"use_script", use_script},
          {"att_qa_s", att_qa_s},
          {"att_s_v", att_s_v},
          {"att_transfer", att_transfer},
          {"steps_kind", aqtc::to_string(steps_kind)},
          {"use_history", use_history},
          {"append_question", append_question},
          {"dims", {{"d_a", d_a}, {"d_h", d_h}, {"d_c", d_c}, {"d_r", d_r}, {"d_head", d_head}}},
          {"tie_qs_init", tie_qs_init},
          {"seed", seed}};
}

Q2AConfig Q2AConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  static const std::set<std::string> known = {"button_mode", "use_video",   "use_script",      "att_qa_s",
                                              "att_s_v",     "att_transfer", "steps_kind",      "use_history",
                                              "append_question", "dims",     "tie_qs_init",     "seed"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("model config: unknown key '" + k + "'");
  Q2AConfig c;
  if (j.contains("button_mode")) {
    if (!j["button_mode"].is_string()) throw ConfigError("model config: 'button_mode' must be a string");
    c.button_mode = button_mode_from_string(j["button_mode"].get<std::string>());
  }
  if (j.contains("steps_kind")) {
    if (!j["steps_kind"].is_string()) throw ConfigError("model config: 'steps_kind' must be a string");
    c.steps_kind = steps_kind_from_string(j["steps_kind"].get<std::string>());
  }
  c.use_video = get_bool(j, "use_video", c.use_video);
  c.use_script = get_bool(j, "use_script", c.use_script);
  c.att_qa_s = get_bool(j, "att_qa_s", c.att_qa_s);
  c.att_s_v = get_bool(j, "att_s_v", c.att_s_v);
  c.att_transfer = get_bool(j, "att_transfer", c.att_transfer);
  c.use_history = get_bool(j, "use_history", c.use_history);
  c.append_question = get_bool(j, "append_question", c.append_question);
  c.tie_qs_init = get_bool(j, "tie_qs_init", c.tie_qs_init);
  if (j.contains("dims")) {
    const auto& d = j["dims"];
    if (!d.is_object()) throw ConfigError("model config: 'dims' must be an object");
    static const std::set<std::string> dims = {"d_a", "d_h", "d_c", "d_r", "d_head"};
    for (const auto& [k, v] : d.items())
      if (!dims.contains(k)) throw ConfigError("model config: unknown key 'dims." + k + "'");
    c.d_a = get_dim(d, "d_a", c.d_a);
    c.d_h = get_dim(d, "d_h", c.d_h);
    c.d_c = get_dim(d, "d_c", c.d_c);
    c.d_r = get_dim(d, "d_r", c.d_r);
    c.d_head = get_dim(d, "d_head", c.d_head);
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw ConfigError("model config: 'seed' must be an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  return c;
}

InputDims input_dims(const FeatureBundle& bundle) { return {bundle.d_s(), bundle.d_v(), bundle.d_b()}; }

GroundingPlan plan_grounding(const Q2AConfig& c, const InputDims& dims) {
  if (c.att_transfer) {
    if (!c.use_script) throw ConfigError("transfer attention requested without the script");
    if (!c.use_video) throw ConfigError("transfer attention requested without the video");
    if (!c.att_qa_s || !c.att_s_v) throw ConfigError("transfer attention needs both QA->S and S->V attention");
  }
  GroundingPlan p;
  p.qa_s = c.use_script && c.att_qa_s;
  p.transfer = c.att_transfer;
  p.s_v_summary = c.use_script && c.use_video && c.att_s_v && !c.att_transfer;
  p.qa_v = !c.use_script && c.use_video;
  p.question = c.append_question;
  p.fusion_in = dims.d_s + dims.d_b;
  if (p.qa_s) p.fusion_in += dims.d_s;
  if (p.has_video_term()) p.fusion_in += dims.d_v;
  if (p.question) p.fusion_in += dims.d_s;
  return p;
}

}  // namespace aqtc
