#include "aqtc/training.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <set>

#include "aqtc/errors.hpp"
#include "aqtc/rng.hpp"
#include "aqtc/tensor_file.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aqtc {

namespace {

constexpr double kProbFloor = 1e-12;

template <class T>
T get_number(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(std::string("train config: '") + key + "' must be a number");
  return j[key].get<T>();
}

SplitData load_split(const DatasetManifest& m, const std::vector<std::string>& ids, ButtonMode mode) {
  SplitData s;
  for (const auto& id : ids) {
    s.tasks.push_back(load_task(m.root / id));
    s.bundles.push_back(read_cache(cache_path(m.root, id, mode), s.tasks.back()));
  }
  return s;
}

SplitData build_split(const DatasetManifest& m, const std::vector<std::string>& ids,
                      const EmbeddingBackend& backend, ButtonMode mode) {
  SplitData s;
  for (const auto& id : ids) {
    s.tasks.push_back(load_task(m.root / id));
    s.bundles.push_back(bundle(s.tasks.back(), backend, mode));
  }
  return s;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train config: batch_size must be positive");
  if (!(base_lr > 0.0)) throw ConfigError("train config: base_lr must be positive");
  if (max_epochs < 0) throw ConfigError("train config: max_epochs must be non-negative");
  if (!(warmup_epochs >= 0.0) || (max_epochs > 0 && !(warmup_epochs < max_epochs)))
    throw ConfigError("train config: warmup_epochs must be in [0, max_epochs)");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train config: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train config: weight_decay must be non-negative");
}

json TrainConfig::to_json() const {
  return {{"batch_size", batch_size}, {"base_lr", base_lr},           {"warmup_epochs", warmup_epochs},
          {"max_epochs", max_epochs}, {"momentum", momentum},         {"weight_decay", weight_decay},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const std::set<std::string> known = {"batch_size", "base_lr",      "warmup_epochs", "max_epochs",
                                              "momentum",   "weight_decay", "seed"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("train config: unknown key '" + k + "'");
  TrainConfig c;
  c.batch_size = get_number(j, "batch_size", c.batch_size);
  c.base_lr = get_number(j, "base_lr", c.base_lr);
  c.warmup_epochs = get_number(j, "warmup_epochs", c.warmup_epochs);
  c.max_epochs = get_number(j, "max_epochs", c.max_epochs);
  c.momentum = get_number(j, "momentum", c.momentum);
  c.weight_decay = get_number(j, "weight_decay", c.weight_decay);
  c.seed = get_number(j, "seed", c.seed);
  c.validate();
  return c;
}

double step_loss(const Eigen::VectorXd& scores, int gt) {
  if (gt < 0 || gt >= scores.size()) throw IndexError("gt " + std::to_string(gt) + " out of range");
  return -std::log(std::max(scores[gt], kProbFloor));
}

double lr_at(double t, const TrainConfig& c) {
  if (!(t >= 0.0 && t <= c.max_epochs))
    throw RangeError("epoch fraction " + std::to_string(t) + " outside [0, " + std::to_string(c.max_epochs) + "]");
  if (t < c.warmup_epochs) return c.base_lr * t / c.warmup_epochs;
  const double span = c.max_epochs - c.warmup_epochs;
  return c.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * (t - c.warmup_epochs) / span));
}

double epoch_lr(int epoch, const TrainConfig& c) { return lr_at(epoch + 0.5, c); }

double qa_loss(const QASample& qa, const FeatureBundle& bundle, const Q2AParams& params, double weight,
               Q2AParams* grad) {
  const auto trace = unroll(qa, bundle, params, UnrollMode::kTeacherForced);
  const double steps = static_cast<double>(qa.steps.size());
  double loss = 0.0;
  std::vector<Eigen::VectorXd> d_logits;
  for (std::size_t i = 0; i < qa.steps.size(); ++i) {
    const auto& p = trace.scores[i];
    const int gt = qa.steps[i].correct;
    loss += step_loss(p, gt);
    if (grad) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(p.size());
      if (p[gt] >= kProbFloor) {
        d = p;
        d[gt] -= 1.0;
        d *= weight / steps;
      }
      d_logits.push_back(std::move(d));
    }
  }
  if (grad) unroll_backward(trace, qa, bundle, d_logits, params, *grad);
  return loss / steps;
}

void sgd_step(Q2AParams& params, Q2AParams& velocity, Q2AParams& grad, double lr, const TrainConfig& c) {
  auto p = params.trainable();
  auto v = velocity.trainable();
  auto g = grad.trainable();
  if (p.size() != v.size() || p.size() != g.size()) throw DimensionMismatch("parameter lists differ");
  for (std::size_t k = 0; k < p.size(); ++k) {
    Eigen::Map<Eigen::ArrayXd> pk(p[k].data, p[k].size());
    Eigen::Map<Eigen::ArrayXd> vk(v[k].data, v[k].size());
    Eigen::Map<Eigen::ArrayXd> gk(g[k].data, g[k].size());
    if (c.weight_decay > 0.0)
      vk = c.momentum * vk + gk + c.weight_decay * pk;
    else
      vk = c.momentum * vk + gk;
    pk -= lr * vk;
  }
}

std::string Checkpoint::serialize() const {
  TensorFile f;
  f.magic = kCheckpointMagic;
  auto& mut = const_cast<Q2AParams&>(params);
  for (const auto& t : mut.trainable()) {
    Eigen::Map<const Eigen::MatrixXd> m(t.data, t.rows, t.cols);
    f.entries.push_back(t.is_vector ? TensorEntry::from_vector(t.name, m.col(0), DType::kF64)
                                    : TensorEntry::from_matrix(t.name, m, DType::kF64));
  }
  f.entries.push_back(TensorEntry::from_vector("decoder.h0", params.decoder.h0, DType::kF64));
  const json trailer = {{"model_config", params.config.to_json()},
                        {"input_dims", {{"d_s", params.dims.d_s}, {"d_v", params.dims.d_v}, {"d_b", params.dims.d_b}}},
                        {"train_config", train_config.to_json()},
                        {"epoch", epoch},
                        {"rng_state", rng_state}};
  f.trailer = trailer.dump();
  return serialize_tensor_file(f);
}

Checkpoint Checkpoint::parse(std::string_view bytes) {
  const auto f = parse_tensor_file(bytes, kCheckpointMagic, true);
  json trailer;
  try {
    trailer = json::parse(*f.trailer);
  } catch (const json::exception& e) {
    throw CorruptCache(std::string("checkpoint trailer: ") + e.what());
  }
  Checkpoint ck;
  try {
    const auto config = Q2AConfig::from_json(trailer.at("model_config"));
    const auto& d = trailer.at("input_dims");
    const InputDims dims{d.at("d_s").get<int>(), d.at("d_v").get<int>(), d.at("d_b").get<int>()};
    ck.train_config = TrainConfig::from_json(trailer.at("train_config"));
    ck.epoch = trailer.at("epoch").get<int>();
    ck.rng_state = trailer.at("rng_state").get<std::uint64_t>();
    Q2AParams z;
    z.config = config;
    z.dims = dims;
    ck.params = z.zeros_like();
  } catch (const json::exception& e) {
    throw CorruptCache(std::string("checkpoint trailer: ") + e.what());
  }
  auto load_into = [&](const std::string& name, double* data, Eigen::Index rows, Eigen::Index cols, bool is_vector) {
    const auto* e = f.find(name);
    if (e == nullptr) throw CorruptCache("checkpoint is missing tensor '" + name + "'");
    const bool ok = is_vector ? (e->dims.size() == 1 && e->dims[0] == rows)
                              : (e->dims.size() == 2 && e->dims[0] == rows && e->dims[1] == cols);
    if (!ok) throw CorruptCache("checkpoint tensor '" + name + "' has the wrong shape");
    Eigen::Map<Eigen::MatrixXd> m(data, rows, cols);
    m = is_vector ? Eigen::MatrixXd(e->to_vector()) : e->to_matrix();
  };
  for (const auto& t : ck.params.trainable()) load_into(t.name, t.data, t.rows, t.cols, t.is_vector);
  auto& h0 = ck.params.decoder.h0;
  load_into("decoder.h0", h0.data(), h0.size(), 1, true);
  if (f.entries.size() != ck.params.trainable().size() + 1) throw CorruptCache("checkpoint has unexpected tensors");
  return ck;
}

void Checkpoint::save(const fs::path& file) const {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_text_file_atomic(file, serialize());
}

Checkpoint Checkpoint::load(const fs::path& file) { return parse(read_binary_file(file)); }

json EpochLog::to_json() const {
  return {{"epoch", epoch}, {"train_loss", train_loss}, {"val_r1", val.r1},
          {"val_r3", val.r3}, {"val_mr", val.mr},        {"val_mrr", val.mrr}};
}

Corpus load_corpus(const DatasetManifest& m, ButtonMode mode) {
  return {load_split(m, m.train_ids(), mode), load_split(m, m.val_ids(), mode)};
}

Corpus build_corpus(const DatasetManifest& m, const EmbeddingBackend& backend, ButtonMode mode) {
  return {build_split(m, m.train_ids(), backend, mode), build_split(m, m.val_ids(), backend, mode)};
}

TrainResult train(const Corpus& corpus, const Q2AConfig& model_config, const TrainConfig& tc, std::ostream* log_out) {
  tc.validate();
  if (corpus.train.tasks.empty()) throw EmptyEval("no training tasks");
  if (corpus.train.tasks.size() != corpus.train.bundles.size() || corpus.val.tasks.size() != corpus.val.bundles.size())
    throw DimensionMismatch("tasks and bundles differ in count");
  const InputDims dims = input_dims(corpus.train.bundles.front());
  if (button_width(model_config.button_mode, dims.d_v) != dims.d_b)
    throw ConfigError("feature button width " + std::to_string(dims.d_b) + " does not match button_mode '" +
                      to_string(model_config.button_mode) + "'");
  for (const auto* split : {&corpus.train, &corpus.val})
    for (const auto& b : split->bundles)
      if (!(input_dims(b) == dims) && !b.qas.empty()) throw DimensionMismatch("bundle '" + b.task_id + "' has other widths");

  TrainResult result;
  Q2AParams params = init_params(model_config, dims);
  Q2AParams velocity = params.zeros_like();
  Rng rng(derive_seed(tc.seed, 0x7A11));

  struct Item {
    std::size_t task;
    std::size_t qa;
  };
  std::vector<Item> items;
  for (std::size_t t = 0; t < corpus.train.tasks.size(); ++t)
    for (std::size_t q = 0; q < corpus.train.tasks[t].qas.size(); ++q) items.push_back({t, q});
  if (items.empty()) throw EmptyEval("no training questions");

  auto val_report = [&]() -> EvalReport {
    if (corpus.val.tasks.empty()) return {};
    return evaluate(corpus.val.tasks, corpus.val.bundles, params, UnrollMode::kFreeRunning);
  };
  auto emit = [&](EpochLog entry) {
    if (log_out) *log_out << entry.to_json().dump() << "\n" << std::flush;
    result.log.push_back(std::move(entry));
  };

  {
    double total = 0.0;
    for (const auto& it : items)
      total += qa_loss(corpus.train.tasks[it.task].qas[it.qa], corpus.train.bundles[it.task], params);
    emit({0, total / static_cast<double>(items.size()), val_report()});
  }

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    const double lr = epoch_lr(epoch, tc);
    rng.shuffle(items);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < items.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(items.size(), start + static_cast<std::size_t>(tc.batch_size));
      const double weight = 1.0 / static_cast<double>(end - start);
      Q2AParams grad = params.zeros_like();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& it = items[k];
        batch_loss += weight * qa_loss(corpus.train.tasks[it.task].qas[it.qa], corpus.train.bundles[it.task], params,
                                       weight, &grad);
      }
      if (!std::isfinite(batch_loss)) throw NonFiniteLoss(epoch + 1, batches);
      sgd_step(params, velocity, grad, lr, tc);
      epoch_loss += batch_loss;
      ++batches;
    }
    emit({epoch + 1, epoch_loss / batches, val_report()});
  }

  result.checkpoint.params = std::move(params);
  result.checkpoint.train_config = tc;
  result.checkpoint.epoch = tc.max_epochs;
  result.checkpoint.rng_state = rng.state();
  return result;
}

}  // namespace aqtc
