#include "aqtc/decoder.hpp"

#include "aqtc/errors.hpp"
#include "aqtc/rng.hpp"

namespace aqtc {

namespace {

const QAFeatures& features_for(const QASample& qa, const FeatureBundle& bundle) {
  const QAFeatures* f = bundle.find_qa(qa.qa_id);
  if (f == nullptr) throw UnknownQA(qa.qa_id);
  if (f->steps.size() != qa.steps.size())
    throw DimensionMismatch(qa.qa_id + ": features have " + std::to_string(f->steps.size()) + " steps, qa has " +
                            std::to_string(qa.steps.size()));
  return *f;
}

void init_attention(AttentionParams& a, std::uint64_t seed, std::uint64_t k) {
  if (a.q.W.size() == 0) return;
  Rng rq(derive_seed(seed, k));
  a.q.init_uniform(rq);
  Rng rk(derive_seed(seed, k + 1));
  a.k.init_uniform(rk);
}

}  // namespace

DecoderParams DecoderParams::zeros(const Q2AConfig& c) {
  DecoderParams p;
  if (c.steps_kind == StepsKind::kGru)
    p.gru = GRUCell(c.d_c, c.d_r);
  else
    p.steps_mlp = MLP2(c.d_c + c.d_r, c.d_h, c.d_r);
  p.head = MLP2(c.d_r, c.d_head, 1);
  p.h0 = Eigen::VectorXd::Zero(c.d_r);
  return p;
}

void DecoderParams::collect(std::vector<TensorRef>& out) {
  if (gru.ih.W.size() != 0) gru.collect("decoder.gru", out);
  if (steps_mlp.l1.W.size() != 0) steps_mlp.collect("decoder.steps", out);
  head.collect("decoder.head", out);
}

std::vector<TensorRef> Q2AParams::trainable() {
  std::vector<TensorRef> out;
  ground.collect(out);
  decoder.collect(out);
  return out;
}

Q2AParams Q2AParams::zeros_like() const {
  Q2AParams z;
  z.config = config;
  z.dims = dims;
  z.ground = GroundingParams::zeros(config, dims);
  z.decoder = DecoderParams::zeros(config);
  return z;
}

Q2AParams init_params(const Q2AConfig& config, const InputDims& dims) {
  Q2AParams p;
  p.config = config;
  p.dims = dims;
  p.ground = GroundingParams::zeros(config, dims);
  p.decoder = DecoderParams::zeros(config);
  const auto seed = config.seed;
  init_attention(p.ground.qa_s, seed, 1);
  if (config.tie_qs_init && p.ground.qa_s.k.W.size() != 0) p.ground.qa_s.k.W = p.ground.qa_s.q.W;
  init_attention(p.ground.s_v, seed, 3);
  init_attention(p.ground.qa_v, seed, 5);
  Rng rf(derive_seed(seed, 7));
  p.ground.fuse.init_uniform(rf);
  Rng rs(derive_seed(seed, 8));
  if (config.steps_kind == StepsKind::kGru)
    p.decoder.gru.init_uniform(rs);
  else
    p.decoder.steps_mlp.init_uniform(rs);
  Rng rh(derive_seed(seed, 9));
  p.decoder.head.init_uniform(rh);
  Rng r0(derive_seed(seed, 10));
  for (Eigen::Index i = 0; i < p.decoder.h0.size(); ++i) p.decoder.h0[i] = r0.normal();
  return p;
}

StepOutput step_forward(const Eigen::VectorXd& h_prev, const Eigen::MatrixXd& C, const DecoderParams& p,
                        StepsKind kind, bool history, StepCache* cache) {
  if (C.rows() < 1) throw DimensionMismatch("step_forward needs at least one context");
  const Eigen::VectorXd& h = history ? h_prev : p.h0;
  if (h.size() != p.h0.size())
    throw DimensionMismatch("state width " + std::to_string(h.size()) + " vs " + std::to_string(p.h0.size()));
  const Eigen::MatrixXd Hin = h.transpose().replicate(C.rows(), 1);
  StepOutput out;
  if (kind == StepsKind::kGru) {
    if (C.cols() != p.gru.ih.in()) throw DimensionMismatch("context width does not match the GRU input");
    out.H = p.gru.forward(C, Hin, cache ? &cache->gru : nullptr);
  } else {
    if (C.cols() + h.size() != p.steps_mlp.l1.in()) throw DimensionMismatch("context width does not match the MLP");
    Eigen::MatrixXd X(C.rows(), C.cols() + h.size());
    X << C, Hin;
    out.H = p.steps_mlp.forward(X, cache ? &cache->steps : nullptr);
  }
  const Eigen::MatrixXd logits = p.head.forward(out.H, cache ? &cache->head : nullptr);
  out.scores = softmax_rows(logits.transpose()).transpose();
  if (cache) cache->h_in = h;
  return out;
}

std::string to_string(UnrollMode mode) {
  return mode == UnrollMode::kTeacherForced ? "teacher_forced" : "free_running";
}

UnrollTrace unroll(const QASample& qa, const FeatureBundle& bundle, const Q2AParams& params, UnrollMode mode) {
  const auto& f = features_for(qa, bundle);
  const auto plan = plan_grounding(params.config, params.dims);
  UnrollTrace t;
  t.context = prepare_context(bundle, params.ground, plan);
  t.steps.resize(qa.steps.size());
  Eigen::VectorXd h = params.decoder.h0;
  for (std::size_t i = 0; i < qa.steps.size(); ++i) {
    auto& cache = t.steps[i];
    const Eigen::MatrixXd C =
        ground_step(t.context, f.steps[i].text, f.steps[i].button, f.question, params.ground, plan, &cache.ground);
    auto out = step_forward(h, C, params.decoder, params.config.steps_kind, params.config.use_history, &cache);
    const int next = mode == UnrollMode::kTeacherForced ? qa.steps[i].correct : make_prediction(out.scores).chosen;
    if (next < 0 || next >= out.H.rows()) throw IndexError(qa.qa_id + ": correct index out of range");
    h = out.H.row(next).transpose();
    t.carried.push_back(next);
    t.states.push_back(std::move(out.H));
    t.scores.push_back(std::move(out.scores));
  }
  return t;
}

void unroll_backward(const UnrollTrace& t, const QASample& qa, const FeatureBundle& bundle,
                     const std::vector<Eigen::VectorXd>& d_logits, const Q2AParams& params, Q2AParams& grad) {
  (void)features_for(qa, bundle);
  const auto plan = plan_grounding(params.config, params.dims);
  const auto& dp = params.decoder;
  auto& dg = grad.decoder;
  TaskContextGrad tg;
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(dp.h0.size());
  for (std::size_t k = t.steps.size(); k-- > 0;) {
    const auto& cache = t.steps[k];
    Eigen::MatrixXd dH = dp.head.backward(cache.head, d_logits[k], dg.head);
    if (params.config.use_history && k + 1 < t.steps.size()) dH.row(t.carried[k]) += dh_next.transpose();
    Eigen::MatrixXd dC;
    Eigen::VectorXd dh_in;
    if (params.config.steps_kind == StepsKind::kGru) {
      auto [dX, dHin] = dp.gru.backward(cache.gru, dH, dg.gru);
      dC = std::move(dX);
      dh_in = dHin.colwise().sum().transpose();
    } else {
      const Eigen::MatrixXd dX = dp.steps_mlp.backward(cache.steps, dH, dg.steps_mlp);
      const auto d_c = dX.cols() - dp.h0.size();
      dC = dX.leftCols(d_c);
      dh_in = dX.rightCols(dp.h0.size()).colwise().sum().transpose();
    }
    dh_next = dh_in;
    ground_step_backward(t.context, cache.ground, dC, params.ground, plan, grad.ground, tg);
  }
  context_backward(t.context, tg, params.ground, plan, grad.ground);
}

std::vector<Eigen::VectorXd> teacher_forced_unroll(const QASample& qa, const FeatureBundle& bundle,
                                                   const Q2AParams& params) {
  return unroll(qa, bundle, params, UnrollMode::kTeacherForced).scores;
}

std::vector<StepPrediction> free_running_infer(const QASample& qa, const FeatureBundle& bundle,
                                               const Q2AParams& params) {
  const auto t = unroll(qa, bundle, params, UnrollMode::kFreeRunning);
  std::vector<StepPrediction> out;
  for (const auto& s : t.scores) out.push_back(make_prediction(s));
  return out;
}

}  // namespace aqtc
