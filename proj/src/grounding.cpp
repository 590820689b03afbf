#include "aqtc/grounding.hpp"

#include <cmath>

#include "aqtc/errors.hpp"

namespace aqtc {

namespace {

std::string shape(const Eigen::MatrixXd& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

AttentionParams zero_attention(int dq, int dk, int da) { return {Linear(dq, da), Linear(dk, da)}; }

void collect_attention(const std::string& prefix, AttentionParams& a, std::vector<TensorRef>& out) {
  if (a.q.W.size() == 0) return;
  a.q.collect(prefix + ".q", out);
  a.k.collect(prefix + ".k", out);
}

void ensure_shape(Eigen::MatrixXd& acc, const Eigen::MatrixXd& like) {
  if (acc.size() == 0) acc = Eigen::MatrixXd::Zero(like.rows(), like.cols());
}

}  // namespace

AttentionResult attention(const Eigen::MatrixXd& query, const Eigen::MatrixXd& keys, const Eigen::MatrixXd& values,
                          const AttentionParams& p, AttentionCache* cache) {
  if (keys.rows() < 1) throw DimensionMismatch("attention needs at least one key");
  if (keys.rows() != values.rows())
    throw DimensionMismatch("keys " + shape(keys) + " and values " + shape(values) + " differ in rows");
  if (query.cols() != p.q.in()) throw DimensionMismatch("query width " + std::to_string(query.cols()) +
                                                        " vs projection input " + std::to_string(p.q.in()));
  if (keys.cols() != p.k.in())
    throw DimensionMismatch("key width " + std::to_string(keys.cols()) + " vs projection input " +
                            std::to_string(p.k.in()));
  if (p.q.out() != p.k.out()) throw DimensionMismatch("query and key projections map to different widths");

  Eigen::MatrixXd qp = p.q.forward(query);
  Eigen::MatrixXd kp = p.k.forward(keys);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.q.out()));
  AttentionResult r;
  r.weights = softmax_rows((qp * kp.transpose()) * scale);
  r.context = r.weights * values;
  if (cache) *cache = {query, keys, values, std::move(qp), std::move(kp), r.weights};
  return r;
}

void attention_backward(const AttentionCache& c, const Eigen::MatrixXd& d_weights, const AttentionParams& p,
                        AttentionParams& g) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.q.out()));
  const Eigen::MatrixXd d_logits = softmax_rows_backward(c.weights, d_weights) * scale;
  p.q.backward(c.query, d_logits * c.kp, g.q, false);
  p.k.backward(c.keys, d_logits.transpose() * c.qp, g.k, false);
}

Eigen::MatrixXd transfer_mask(const Eigen::MatrixXd& mask_qs, const Eigen::MatrixXd& mask_sv) {
  if (mask_qs.cols() != mask_sv.rows())
    throw DimensionMismatch("transfer mask: " + shape(mask_qs) + " times " + shape(mask_sv));
  return mask_qs * mask_sv;
}

GroundingParams GroundingParams::zeros(const Q2AConfig& config, const InputDims& dims) {
  const auto plan = plan_grounding(config, dims);
  GroundingParams p;
  if (plan.qa_s) p.qa_s = zero_attention(dims.d_s, dims.d_s, config.d_a);
  if (plan.needs_s_v()) p.s_v = zero_attention(dims.d_s, dims.d_v, config.d_a);
  if (plan.qa_v) p.qa_v = zero_attention(dims.d_s, dims.d_v, config.d_a);
  p.fuse = MLP2(plan.fusion_in, config.d_h, config.d_c);
  return p;
}

void GroundingParams::collect(std::vector<TensorRef>& out) {
  collect_attention("ground.qa_s", qa_s, out);
  collect_attention("ground.s_v", s_v, out);
  collect_attention("ground.qa_v", qa_v, out);
  fuse.collect("ground.fuse", out);
}

TaskContext prepare_context(const FeatureBundle& bundle, const GroundingParams& p, const GroundingPlan& plan) {
  TaskContext ctx;
  ctx.script = &bundle.script;
  ctx.video = &bundle.video;
  if (plan.needs_s_v()) {
    const auto r = attention(bundle.script, bundle.video, bundle.video, p.s_v, &ctx.s_v);
    if (plan.s_v_summary) ctx.s_v_summary = r.context.colwise().mean();
  }
  return ctx;
}

void context_backward(const TaskContext& ctx, const TaskContextGrad& tg, const GroundingParams& p,
                      const GroundingPlan& plan, GroundingParams& g) {
  if (!plan.needs_s_v() || tg.d_s_v_weights.size() == 0) return;
  attention_backward(ctx.s_v, tg.d_s_v_weights, p.s_v, g.s_v);
}

Eigen::MatrixXd ground_step(const TaskContext& ctx, const Eigen::MatrixXd& T, const Eigen::MatrixXd& B,
                            const Eigen::VectorXd& question, const GroundingParams& p, const GroundingPlan& plan,
                            GroundCache* cache) {
  const auto n = T.rows();
  if (B.rows() != n) throw DimensionMismatch("text has " + std::to_string(n) + " rows, button " + std::to_string(B.rows()));
  GroundCache local;
  GroundCache& c = cache ? *cache : local;
  c.n = static_cast<int>(n);

  std::vector<Eigen::MatrixXd> parts{T, B};
  if (plan.qa_s) {
    const auto r = attention(T, *ctx.script, *ctx.script, p.qa_s, &c.qa_s);
    parts.push_back(r.context);
  }
  if (plan.transfer) {
    c.transfer = transfer_mask(c.qa_s.weights, ctx.s_v.weights);
    parts.push_back(c.transfer * *ctx.video);
  } else if (plan.s_v_summary) {
    parts.push_back(ctx.s_v_summary.replicate(n, 1));
  } else if (plan.qa_v) {
    const auto r = attention(T, *ctx.video, *ctx.video, p.qa_v, &c.qa_v);
    parts.push_back(r.context);
  }
  if (plan.question) {
    if (question.size() != T.cols()) throw DimensionMismatch("question width differs from text width");
    parts.push_back(question.transpose().replicate(n, 1));
  }
  Eigen::Index width = 0;
  for (const auto& m : parts) width += m.cols();
  if (width != plan.fusion_in)
    throw DimensionMismatch("fusion input width " + std::to_string(width) + " vs expected " +
                            std::to_string(plan.fusion_in));
  Eigen::MatrixXd X(n, width);
  Eigen::Index col = 0;
  for (const auto& m : parts) {
    X.middleCols(col, m.cols()) = m;
    col += m.cols();
  }
  return p.fuse.forward(X, &c.fuse);
}

void ground_step_backward(const TaskContext& ctx, const GroundCache& c, const Eigen::MatrixXd& dC,
                          const GroundingParams& p, const GroundingPlan& plan, GroundingParams& g,
                          TaskContextGrad& tg) {
  const Eigen::MatrixXd dX = p.fuse.backward(c.fuse, dC, g.fuse);
  const Eigen::Index d_s = ctx.script->cols();
  const Eigen::Index d_v = ctx.video->cols();
  const Eigen::Index d_b = plan.fusion_in - d_s - (plan.qa_s ? d_s : 0) - (plan.has_video_term() ? d_v : 0) -
                           (plan.question ? d_s : 0);
  Eigen::Index col = d_s + d_b;  // T and B are frozen inputs

  Eigen::MatrixXd d_qs_weights;
  if (plan.qa_s) {
    const Eigen::MatrixXd d_ctx = dX.middleCols(col, d_s);
    d_qs_weights = d_ctx * ctx.script->transpose();
    col += d_s;
  }
  if (plan.has_video_term()) {
    const Eigen::MatrixXd d_ctx = dX.middleCols(col, d_v);
    col += d_v;
    if (plan.transfer) {
      const Eigen::MatrixXd dM = d_ctx * ctx.video->transpose();  // n x f
      d_qs_weights += dM * ctx.s_v.weights.transpose();
      ensure_shape(tg.d_s_v_weights, ctx.s_v.weights);
      tg.d_s_v_weights.noalias() += c.qa_s.weights.transpose() * dM;
    } else if (plan.s_v_summary) {
      // summary = mean over sentences of (W_sv V)
      const Eigen::RowVectorXd d_summary = d_ctx.colwise().sum();
      const Eigen::RowVectorXd d_row = (*ctx.video * d_summary.transpose()).transpose() /
                                       static_cast<double>(ctx.s_v.weights.rows());
      ensure_shape(tg.d_s_v_weights, ctx.s_v.weights);
      tg.d_s_v_weights.rowwise() += d_row;
    } else if (plan.qa_v) {
      attention_backward(c.qa_v, d_ctx * ctx.video->transpose(), p.qa_v, g.qa_v);
    }
  }
  if (plan.qa_s) attention_backward(c.qa_s, d_qs_weights, p.qa_s, g.qa_s);
}

Eigen::VectorXd ground(const FeatureBundle& bundle, const std::string& qa_id, int step, int candidate,
                       const GroundingParams& p, const Q2AConfig& config) {
  const auto plan = plan_grounding(config, input_dims(bundle));
  const QAFeatures* qa = bundle.find_qa(qa_id);
  if (qa == nullptr) throw UnknownQA(qa_id);
  if (step < 0 || step >= static_cast<int>(qa->steps.size())) throw IndexError("step " + std::to_string(step));
  const auto& s = qa->steps[static_cast<std::size_t>(step)];
  if (candidate < 0 || candidate >= s.text.rows()) throw IndexError("candidate " + std::to_string(candidate));
  const auto ctx = prepare_context(bundle, p, plan);
  return ground_step(ctx, s.text, s.button, qa->question, p, plan).row(candidate).transpose();
}

}  // namespace aqtc
