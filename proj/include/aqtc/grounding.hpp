#pragma once

// Context grounding: the attention primitive, transfer attention
// (QA -> S -> V through the script), and the fusion MLP that produces the
// context feature C for every candidate of a step.

#include <vector>

#include <Eigen/Dense>

#include "aqtc/config.hpp"
#include "aqtc/core.hpp"
#include "aqtc/nn.hpp"

namespace aqtc {

struct AttentionParams {
  Linear q;  // query width -> d_a
  Linear k;  // key width -> d_a
};

struct AttentionCache {
  Eigen::MatrixXd query, keys, values;
  Eigen::MatrixXd qp, kp;     // projected
  Eigen::MatrixXd weights;    // m x n, row-stochastic
};

struct AttentionResult {
  Eigen::MatrixXd weights;  // m x n
  Eigen::MatrixXd context;  // m x d_val, weights * values
};

// weights = row-softmax(proj_q(query) proj_k(keys)^T / sqrt(d_a)); values are
// used unprojected. Throws DimensionMismatch on inconsistent shapes.
AttentionResult attention(const Eigen::MatrixXd& query, const Eigen::MatrixXd& keys, const Eigen::MatrixXd& values,
                          const AttentionParams& p, AttentionCache* cache = nullptr);

// Parameter gradients given dL/dweights (already including any path through
// the context). Inputs are frozen features, so no input gradient is formed.
void attention_backward(const AttentionCache& cache, const Eigen::MatrixXd& d_weights, const AttentionParams& p,
                        AttentionParams& g);

// mask_qs (m x e) times mask_sv (e x f). Both must be row-stochastic in shape
// terms; the result is checked by tests, not assumed.
Eigen::MatrixXd transfer_mask(const Eigen::MatrixXd& mask_qs, const Eigen::MatrixXd& mask_sv);

struct GroundingParams {
  AttentionParams qa_s;  // d_s -> d_a, d_s -> d_a
  AttentionParams s_v;   // d_s -> d_a, d_v -> d_a
  AttentionParams qa_v;  // d_s -> d_a, d_v -> d_a
  MLP2 fuse;             // fusion_in -> d_h -> d_c

  // Only the tensors the plan uses are allocated; others stay empty.
  static GroundingParams zeros(const Q2AConfig& config, const InputDims& dims);
  void collect(std::vector<TensorRef>& out);
};

// Question-independent part of one task, shared by every candidate and step:
// the script/video matrices and, when used, the S->V attention.
struct TaskContext {
  const Eigen::MatrixXd* script = nullptr;
  const Eigen::MatrixXd* video = nullptr;
  AttentionCache s_v;
  Eigen::MatrixXd s_v_summary;  // 1 x d_v
};

TaskContext prepare_context(const FeatureBundle& bundle, const GroundingParams& p, const GroundingPlan& plan);

struct TaskContextGrad {
  Eigen::MatrixXd d_s_v_weights;  // e x f
};

// Finishes the S->V parameter gradients accumulated over all steps.
void context_backward(const TaskContext& ctx, const TaskContextGrad& tg, const GroundingParams& p,
                      const GroundingPlan& plan, GroundingParams& g);

struct GroundCache {
  AttentionCache qa_s;
  AttentionCache qa_v;
  Eigen::MatrixXd transfer;  // n x f
  MLP2::Cache fuse;
  int n = 0;
};

// C for every candidate of one step: n x d_c. T: n x d_s, B: n x d_b,
// question: d_s (used only with append_question).
Eigen::MatrixXd ground_step(const TaskContext& ctx, const Eigen::MatrixXd& T, const Eigen::MatrixXd& B,
                            const Eigen::VectorXd& question, const GroundingParams& p, const GroundingPlan& plan,
                            GroundCache* cache = nullptr);

void ground_step_backward(const TaskContext& ctx, const GroundCache& cache, const Eigen::MatrixXd& dC,
                          const GroundingParams& p, const GroundingPlan& plan, GroundingParams& g,
                          TaskContextGrad& tg);

// C for a single candidate (step and candidate index into the bundle's QA).
Eigen::VectorXd ground(const FeatureBundle& bundle, const std::string& qa_id, int step, int candidate,
                       const GroundingParams& p, const Q2AConfig& config);

}  // namespace aqtc
