#pragma once

// Cross-entropy over teacher-forced unrolls, momentum SGD with a linear
// warmup + cosine schedule stepped per epoch, and checkpoints.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqtc/config.hpp"
#include "aqtc/dataset_io.hpp"
#include "aqtc/decoder.hpp"
#include "aqtc/evaluation.hpp"

namespace aqtc {

struct TrainConfig {
  int batch_size = 16;
  double base_lr = 2e-3;
  double warmup_epochs = 1.0;
  int max_epochs = 6;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

// -log(max(scores[gt], 1e-12)).
double step_loss(const Eigen::VectorXd& scores, int gt);

// Linear 0 -> base_lr over [0, warmup], then half-cosine down to 0 at
// max_epochs. Throws RangeError outside [0, max_epochs].
double lr_at(double epoch_fraction, const TrainConfig& config);

// The rate used for every update of epoch `epoch` (0-based): the schedule
// sampled at the middle of the epoch.
double epoch_lr(int epoch, const TrainConfig& config);

// Mean step loss of one question under teacher forcing. When `grad` is set,
// accumulates weight * dloss/dparams into it.
double qa_loss(const QASample& qa, const FeatureBundle& bundle, const Q2AParams& params, double weight = 1.0,
               Q2AParams* grad = nullptr);

// v <- momentum * v + g (+ weight_decay * p); p <- p - lr * v.
void sgd_step(Q2AParams& params, Q2AParams& velocity, Q2AParams& grad, double lr, const TrainConfig& config);

struct Checkpoint {
  Q2AParams params;
  TrainConfig train_config;
  int epoch = 0;
  std::uint64_t rng_state = 0;

  std::string serialize() const;
  static Checkpoint parse(std::string_view bytes);
  void save(const std::filesystem::path& file) const;
  static Checkpoint load(const std::filesystem::path& file);
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  EvalReport val;

  nlohmann::json to_json() const;
};

// Tasks paired with their features.
struct SplitData {
  std::vector<TaskInstance> tasks;
  std::vector<FeatureBundle> bundles;
};

struct Corpus {
  SplitData train;
  SplitData val;
};

// Reads the feature cache of every task of the manifest (MissingCache when
// one is absent).
Corpus load_corpus(const DatasetManifest& manifest, ButtonMode mode);
// Computes features in memory instead of reading caches.
Corpus build_corpus(const DatasetManifest& manifest, const EmbeddingBackend& backend, ButtonMode mode);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;  // entry 0 is the untrained model
};

// Serial and deterministic given the configs. With `log_out`, one JSON line
// per log entry is written as soon as it is known.
TrainResult train(const Corpus& corpus, const Q2AConfig& model_config, const TrainConfig& train_config,
                  std::ostream* log_out = nullptr);

}  // namespace aqtc
