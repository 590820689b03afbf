#pragma once

// Procedural device panels in the on-disk task format, with an exact oracle.
//
// Each device has 3-8 coloured buttons on a 224x224 panel and a handful of
// functions (1-4 button presses each). The narration describes every step
// of every function and also explicitly rules out a set of decoy actions
// ("do not push the blue button to ..."); wrong candidates are drawn from
// those decoys. Every step's candidate set covers all buttons and contains at
// least one decoy with the correct step's verb.
//
// With history_dependent set, all steps of a question share one candidate
// set, so only the carried state tells steps apart.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aqtc/core.hpp"
#include "aqtc/raster.hpp"

namespace aqtc {

class EmbeddingBackend;

struct SynthConfig {
  int tasks = 100;
  int buttons = 5;
  int functions = 5;
  int max_steps = 4;
  int candidates_per_step = 6;
  bool history_dependent = false;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending key.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthAction {
  int button = 0;
  std::string verb;
  std::string phrase;
};

struct SynthFunction {
  std::string goal;
  std::vector<SynthAction> steps;
};

struct PanelButton {
  int button_id = 0;
  std::string color;
  std::array<std::uint8_t, 3> rgb{};
  Box box;
};

struct DeviceSpec {
  std::vector<PanelButton> buttons;
  std::vector<SynthFunction> functions;
  std::vector<SynthAction> decoys;
  bool history_dependent = false;
};

DeviceSpec make_device(const SynthConfig& config, std::uint64_t task_seed);

struct OracleQA {
  std::vector<int> buttons;       // ground-truth button per step
  std::vector<int> correct;       // ground-truth candidate index per step
  std::vector<int> script_lines;  // script sentence narrating each step
};

struct OracleMeta {
  std::string task_id;
  std::map<std::string, OracleQA> qas;

  nlohmann::json to_json() const;
  static OracleMeta from_json(const nlohmann::json& j);
};

struct GeneratedTask {
  TaskInstance task;  // frames / image paths are relative to the task directory
  Raster panel;
  std::vector<Raster> frames;
  OracleMeta meta;
};

// Copy of `task` with frame and image paths prefixed by `dir`.
TaskInstance rebased(const TaskInstance& task, const std::filesystem::path& dir);

// Task `index` of a corpus. Its randomness comes from derive_seed(seed, index).
GeneratedTask generate_task(const SynthConfig& config, int index);

struct GeneratorSummary {
  int tasks = 0;
  int qa = 0;
  int steps = 0;
  int video_seconds = 0;
  std::map<int, int> step_hist;
  std::map<int, int> candidate_hist;

  nlohmann::json to_json() const;
};

// Writes task_000, task_001, ... under `out` plus generator.json (config and
// emitted counts). Existing task directories are overwritten.
GeneratorSummary generate_dataset(const SynthConfig& config, const std::filesystem::path& out);

void write_generated_task(const std::filesystem::path& dir, const GeneratedTask& g);
OracleMeta read_oracle(const std::filesystem::path& task_dir);

// (step, correct candidate index) for every step of the question.
std::vector<std::pair<int, int>> oracle_answer(const OracleMeta& meta, const std::string& qa_id);

// Mismatches between the oracle and the task's `correct` fields; empty when
// consistent.
std::vector<std::string> check_oracle(const TaskInstance& task, const OracleMeta& meta);

struct ProbeReport {
  int steps = 0;
  int passed = 0;
  double pass_rate() const { return steps == 0 ? 0.0 : static_cast<double>(passed) / steps; }
  nlohmann::json to_json() const;
};

// For every step: does the narration sentence of the correct action have a
// strictly higher cosine to embed(question + " " + correct answer prompt)
// than the mean cosine over the wrong candidates? With `shuffle_seed`, the
// index treated as correct is drawn uniformly instead (control).
ProbeReport learnability_probe(const std::vector<std::pair<TaskInstance, OracleMeta>>& tasks,
                               const EmbeddingBackend& backend, std::optional<std::uint64_t> shuffle_seed = {});
ProbeReport learnability_probe(const std::filesystem::path& dataset, const EmbeddingBackend& backend,
                               std::optional<std::uint64_t> shuffle_seed = {});

}  // namespace aqtc
