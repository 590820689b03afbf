#pragma once

// Steps network (GRU or MLP over [C, h]), prediction head, and the two ways
// of unrolling a multi-step question: teacher forcing (carry the state of
// the ground-truth candidate) and free running (carry the argmax).

#include <vector>

#include <Eigen/Dense>

#include "aqtc/config.hpp"
#include "aqtc/core.hpp"
#include "aqtc/grounding.hpp"
#include "aqtc/nn.hpp"

namespace aqtc {

struct DecoderParams {
  GRUCell gru;          // steps_kind == gru: C -> h
  MLP2 steps_mlp;       // steps_kind == mlp: [C, h] -> d_h -> d_r
  MLP2 head;            // d_r -> d_head -> 1
  Eigen::VectorXd h0;   // fixed initial state, not trained

  static DecoderParams zeros(const Q2AConfig& config);
  void collect(std::vector<TensorRef>& out);  // trainable tensors only
};

struct Q2AParams {
  Q2AConfig config;
  InputDims dims;
  GroundingParams ground;
  DecoderParams decoder;

  // Trainable tensors in a fixed order (grounding, then decoder).
  std::vector<TensorRef> trainable();
  Q2AParams zeros_like() const;
};

// Seeded initialization. Every matrix is uniform(-1/sqrt(fan_in),
// 1/sqrt(fan_in)), biases are zero, h0 is standard normal. Each component
// draws from its own stream derive_seed(config.seed, k).
Q2AParams init_params(const Q2AConfig& config, const InputDims& dims);

struct StepCache {
  GroundCache ground;
  GRUCell::Cache gru;
  MLP2::Cache steps;
  MLP2::Cache head;
  Eigen::VectorXd h_in;
};

struct StepOutput {
  Eigen::MatrixXd H;       // n x d_r, one state per candidate
  Eigen::VectorXd scores;  // softmax over candidates
};

// Every candidate receives the same incoming state. With history off the
// incoming state is h0 whatever h_prev is.
StepOutput step_forward(const Eigen::VectorXd& h_prev, const Eigen::MatrixXd& contexts, const DecoderParams& p,
                        StepsKind kind, bool history, StepCache* cache = nullptr);

enum class UnrollMode { kTeacherForced, kFreeRunning };

std::string to_string(UnrollMode mode);

struct UnrollTrace {
  TaskContext context;
  std::vector<StepCache> steps;
  std::vector<Eigen::MatrixXd> states;  // H per step
  std::vector<Eigen::VectorXd> scores;
  std::vector<int> carried;             // candidate whose state moved on
};

UnrollTrace unroll(const QASample& qa, const FeatureBundle& bundle, const Q2AParams& params, UnrollMode mode);

// Backpropagates dL/dlogits of every step (one vector per step) through the
// unroll and accumulates into grad.
void unroll_backward(const UnrollTrace& trace, const QASample& qa, const FeatureBundle& bundle,
                     const std::vector<Eigen::VectorXd>& d_logits, const Q2AParams& params, Q2AParams& grad);

std::vector<Eigen::VectorXd> teacher_forced_unroll(const QASample& qa, const FeatureBundle& bundle,
                                                   const Q2AParams& params);
std::vector<StepPrediction> free_running_infer(const QASample& qa, const FeatureBundle& bundle,
                                               const Q2AParams& params);

}  // namespace aqtc
