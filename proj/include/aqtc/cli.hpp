#pragma once

// Subcommands of the `aqtc` tool. run_cli parses argv and dispatches; the
// cmd_* functions hold the logic so tests can call them directly.
//
// Exit codes: 0 ok, 1 data / validation error, 2 usage or configuration
// error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aqtc/config.hpp"
#include "aqtc/dataset_io.hpp"
#include "aqtc/embedding.hpp"
#include "aqtc/evaluation.hpp"
#include "aqtc/synthbench.hpp"
#include "aqtc/training.hpp"

namespace aqtc {

enum class Backend { kSynthetic, kCache };

struct RunConfig {
  std::string subcommand;
  std::filesystem::path data;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> model_config;
  std::optional<std::filesystem::path> train_config;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> synth_config;
  std::uint64_t seed = 0;
  Backend backend = Backend::kCache;
  int trials = 10000;
  UnrollMode eval_mode = UnrollMode::kFreeRunning;
  std::optional<int> tasks;  // generate: overrides the synth config
  bool history_dependent = false;
};

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Resolves the manifest: --manifest, else <data>/manifest.json, else an 8:2
// split of the tasks under <data> with --seed.
DatasetManifest resolve_manifest(const RunConfig& rc);
Q2AConfig resolve_model_config(const RunConfig& rc);
TrainConfig resolve_train_config(const RunConfig& rc);
Corpus resolve_corpus(const RunConfig& rc, const DatasetManifest& manifest, ButtonMode mode);

// Synthetic backend used by `features` and `--backend synthetic`.
SyntheticBackend default_backend(std::uint64_t seed);

GeneratorSummary cmd_generate(const RunConfig& rc);
// Violations across all tasks (empty when valid).
std::vector<std::string> cmd_validate(const RunConfig& rc);
DatasetStats cmd_stats(const RunConfig& rc);
int cmd_features(const RunConfig& rc);  // returns the number of caches written
TrainResult cmd_train(const RunConfig& rc);
EvalReport cmd_eval(const RunConfig& rc);
nlohmann::json cmd_baseline(const RunConfig& rc);

struct AblationCell {
  std::string grid;  // button | modality | grounding | steps
  std::string name;
  Q2AConfig config;
};

std::vector<AblationCell> ablation_cells(const Q2AConfig& base);
nlohmann::json cmd_ablate(const RunConfig& rc, std::ostream* progress = nullptr);

}  // namespace aqtc
