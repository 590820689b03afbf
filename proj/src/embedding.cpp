#include "aqtc/embedding.hpp"

#include <cctype>
#include <cmath>

#include "aqtc/dataset_io.hpp"
#include "aqtc/errors.hpp"
#include "aqtc/rng.hpp"
#include "aqtc/tensor_file.hpp"

namespace fs = std::filesystem;

namespace aqtc {

namespace {

constexpr int kGrid = 8;
constexpr int kCellFeatures = kGrid * kGrid * 3;

Eigen::VectorXd to_float_precision(Eigen::VectorXd v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(v[i]));
  return v;
}

Eigen::VectorXd rescale(Eigen::VectorXd v, double norm) {
  const double n = v.norm();
  if (n == 0.0) return v;
  return to_float_precision(v * (norm / n));
}

std::string btn_key(const std::string& qa, std::size_t step, std::size_t j) {
  return "cand_" + qa + "_" + std::to_string(step) + "_" + std::to_string(j) + "_btn";
}

std::string text_key(const std::string& qa, std::size_t step, std::size_t j) {
  return "cand_" + qa + "_" + std::to_string(step) + "_" + std::to_string(j) + "_text";
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

SyntheticBackend::SyntheticBackend() : SyntheticBackend(Options{}) {}

SyntheticBackend::SyntheticBackend(Options options) : options_(options) {
  if (options_.d_s < 1 || options_.d_v < 1) throw ConfigError("synthetic backend dims must be positive");
  if (!(options_.norm > 0.0)) throw ConfigError("synthetic backend norm must be positive");
  projection_.resize(options_.d_v, kCellFeatures);
  Rng rng(derive_seed(options_.seed, 0x1A6E));
  for (int r = 0; r < options_.d_v; ++r)
    for (int c = 0; c < kCellFeatures; ++c) projection_(r, c) = rng.normal();
}

Eigen::VectorXd SyntheticBackend::token_vector(std::string_view token) const {
  Rng rng(fnv1a64(token) ^ splitmix64(options_.seed));
  Eigen::VectorXd v(options_.d_s);
  for (int i = 0; i < options_.d_s; ++i) v[i] = rng.normal();
  return v;
}

Eigen::VectorXd SyntheticBackend::embed_text(std::string_view text) const {
  const auto tokens = tokenize(text);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(options_.d_s);
  if (tokens.empty()) return sum;
  for (const auto& t : tokens) sum += token_vector(t);
  return rescale(sum / static_cast<double>(tokens.size()), options_.norm);
}

Eigen::VectorXd SyntheticBackend::embed_image(const Raster& image) const {
  if (image.width < kGrid || image.height < kGrid)
    throw DimensionMismatch("image smaller than the 8x8 grid: " + std::to_string(image.width) + "x" +
                            std::to_string(image.height));
  Eigen::VectorXd cells(kCellFeatures);
  for (int cy = 0; cy < kGrid; ++cy) {
    const int y0 = cy * image.height / kGrid;
    const int y1 = (cy + 1) * image.height / kGrid;
    for (int cx = 0; cx < kGrid; ++cx) {
      const int x0 = cx * image.width / kGrid;
      const int x1 = (cx + 1) * image.width / kGrid;
      double acc[3] = {0, 0, 0};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const auto* p = image.at(x, y);
          for (int ch = 0; ch < 3; ++ch) acc[ch] += p[ch];
        }
      const double count = static_cast<double>(y1 - y0) * (x1 - x0);
      for (int ch = 0; ch < 3; ++ch) cells[(cy * kGrid + cx) * 3 + ch] = acc[ch] / (255.0 * count) - 0.5;
    }
  }
  return rescale(projection_ * cells, options_.norm);
}

std::string to_string(ButtonMode mode) {
  switch (mode) {
    case ButtonMode::kNone:
      return "none";
    case ButtonMode::kMask:
      return "mask";
    case ButtonMode::kReverse:
      return "reverse";
    case ButtonMode::kBoth:
      return "both";
  }
  return "none";
}

ButtonMode button_mode_from_string(std::string_view s) {
  if (s == "none") return ButtonMode::kNone;
  if (s == "mask") return ButtonMode::kMask;
  if (s == "reverse") return ButtonMode::kReverse;
  if (s == "both") return ButtonMode::kBoth;
  throw ConfigError("unknown button mode '" + std::string(s) + "'");
}

int button_width(ButtonMode mode, int d_v) {
  switch (mode) {
    case ButtonMode::kNone:
      return 0;
    case ButtonMode::kMask:
    case ButtonMode::kReverse:
      return d_v;
    case ButtonMode::kBoth:
      return 2 * d_v;
  }
  return 0;
}

std::vector<Raster> sample_frames(std::span<const fs::path> frames, std::optional<double> duration_hint) {
  if (frames.empty()) throw EmptyVideo("no frames");
  std::vector<std::size_t> pick;
  const std::size_t n = frames.size();
  if (duration_hint && *duration_hint < static_cast<double>(n)) {
    const auto want = static_cast<std::size_t>(std::max(1.0, std::floor(*duration_hint)));
    for (std::size_t k = 0; k < want; ++k) pick.push_back(k * n / want);
  } else {
    for (std::size_t k = 0; k < n; ++k) pick.push_back(k);
  }
  std::vector<Raster> out;
  out.reserve(pick.size());
  for (auto k : pick) out.push_back(read_png(frames[k]));
  return out;
}

std::vector<Raster> sample_frames(const fs::path& frame_dir, std::optional<double> duration_hint) {
  if (!fs::is_directory(frame_dir)) throw EmptyVideo(frame_dir.string() + " is not a directory");
  const auto files = list_frame_files(frame_dir);
  return sample_frames(std::span<const fs::path>(files), duration_hint);
}

Eigen::MatrixXd encode_script(std::span<const std::string> sentences, const EmbeddingBackend& backend) {
  if (sentences.empty()) throw EmptyText("script has no sentences");
  Eigen::MatrixXd s(static_cast<Eigen::Index>(sentences.size()), backend.d_s());
  for (std::size_t i = 0; i < sentences.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = backend.embed_text(sentences[i]);
  return s;
}

Eigen::VectorXd encode_question(std::string_view text, const EmbeddingBackend& backend) {
  if (text.empty()) throw EmptyText("empty question");
  return backend.embed_text("Question: " + std::string(text));
}

std::string candidate_prompt(const Candidate& candidate) {
  return "Answer: " + replace_button_placeholders(candidate.text, "this button");
}

ButtonRasters build_button_rasters(const Raster& user_image, std::span<const Button> buttons, const Button& target) {
  const Box& t = target.box;
  if (t.x1 < 0 || t.y1 < 0 || t.x2 > user_image.width || t.y2 > user_image.height || t.x1 >= t.x2 || t.y1 >= t.y2)
    throw ButtonNotOnImage("button " + std::to_string(target.button_id) + " does not lie on image '" +
                           target.image_id + "'");
  ButtonRasters out{user_image, user_image};
  out.mask.fill_box(t, 0, 0, 0);
  for (const auto& b : buttons) {
    if (b.button_id == target.button_id || b.image_id != target.image_id) continue;
    const int x1 = std::max(b.box.x1, 0), y1 = std::max(b.box.y1, 0);
    const int x2 = std::min(b.box.x2, user_image.width), y2 = std::min(b.box.y2, user_image.height);
    for (int y = y1; y < y2; ++y)
      for (int x = x1; x < x2; ++x) {
        if (t.contains(x, y)) continue;
        auto* p = out.reverse.at(x, y);
        p[0] = p[1] = p[2] = 0;
      }
  }
  return out;
}

ImageStore load_user_images(const TaskInstance& task) {
  ImageStore store;
  for (const auto& [id, ref] : task.user_images) store.emplace(id, read_png(ref.path));
  return store;
}

CandidateEncoding encode_candidate(const Candidate& candidate, const TaskInstance& task, const ImageStore& images,
                                   const EmbeddingBackend& backend, ButtonMode mode) {
  CandidateEncoding enc;
  enc.text = backend.embed_text(candidate_prompt(candidate));
  enc.button = Eigen::VectorXd::Zero(button_width(mode, backend.d_v()));
  if (mode == ButtonMode::kNone || !candidate.button_ref) return enc;
  const Button* target = task.find_button(*candidate.button_ref);
  if (target == nullptr) throw ButtonNotOnImage("button " + std::to_string(*candidate.button_ref) + " not in task");
  const auto it = images.find(target->image_id);
  if (it == images.end()) throw ButtonNotOnImage("image '" + target->image_id + "' not loaded");
  const auto rasters = build_button_rasters(it->second, task.buttons, *target);
  const int d_v = backend.d_v();
  switch (mode) {
    case ButtonMode::kMask:
      enc.button = backend.embed_image(rasters.mask);
      break;
    case ButtonMode::kReverse:
      enc.button = backend.embed_image(rasters.reverse);
      break;
    case ButtonMode::kBoth:
      enc.button.head(d_v) = backend.embed_image(rasters.mask);
      enc.button.tail(d_v) = backend.embed_image(rasters.reverse);
      break;
    case ButtonMode::kNone:
      break;
  }
  return enc;
}

FeatureBundle bundle(const TaskInstance& task, const EmbeddingBackend& backend, ButtonMode mode) {
  FeatureBundle b;
  b.task_id = task.task_id;
  const auto frames = sample_frames(std::span<const fs::path>(task.frames));
  b.video.resize(static_cast<Eigen::Index>(frames.size()), backend.d_v());
  for (std::size_t i = 0; i < frames.size(); ++i) b.video.row(static_cast<Eigen::Index>(i)) = backend.embed_image(frames[i]);
  b.script = encode_script(task.script, backend);
  const auto images = load_user_images(task);
  const int d_b = button_width(mode, backend.d_v());
  for (const auto& qa : task.qas) {
    QAFeatures q;
    q.qa_id = qa.qa_id;
    q.question = encode_question(qa.question, backend);
    for (const auto& step : qa.steps) {
      const auto n = static_cast<Eigen::Index>(step.candidates.size());
      StepFeatures s{Eigen::MatrixXd(n, backend.d_s()), Eigen::MatrixXd(n, d_b)};
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto enc = encode_candidate(step.candidates[static_cast<std::size_t>(j)], task, images, backend, mode);
        s.text.row(j) = enc.text;
        s.button.row(j) = enc.button;
      }
      q.steps.push_back(std::move(s));
    }
    b.qas.push_back(std::move(q));
  }
  return b;
}

fs::path cache_path(const fs::path& dir, const std::string& task_id, ButtonMode mode) {
  return dir / task_id / ("features_" + to_string(mode) + ".bin");
}

std::string serialize_cache(const FeatureBundle& b) {
  TensorFile f;
  f.magic = kFeatureMagic;
  f.entries.push_back(TensorEntry::from_matrix("video", b.video, DType::kF32));
  f.entries.push_back(TensorEntry::from_matrix("script", b.script, DType::kF32));
  for (const auto& qa : b.qas) {
    f.entries.push_back(TensorEntry::from_vector("question_" + qa.qa_id, qa.question, DType::kF32));
    for (std::size_t i = 0; i < qa.steps.size(); ++i) {
      const auto& s = qa.steps[i];
      for (Eigen::Index j = 0; j < s.text.rows(); ++j) {
        const auto jj = static_cast<std::size_t>(j);
        f.entries.push_back(TensorEntry::from_vector(text_key(qa.qa_id, i, jj), s.text.row(j).transpose(), DType::kF32));
        f.entries.push_back(TensorEntry::from_vector(btn_key(qa.qa_id, i, jj), s.button.row(j).transpose(), DType::kF32));
      }
    }
  }
  return serialize_tensor_file(f);
}

void write_cache(const fs::path& file, const FeatureBundle& b) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_text_file_atomic(file, serialize_cache(b));
}

FeatureBundle parse_cache(std::string_view bytes, const TaskInstance& task) {
  const auto f = parse_tensor_file(bytes, kFeatureMagic, false);
  auto get = [&](const std::string& key, std::size_t ndim) -> const TensorEntry& {
    const auto* e = f.find(key);
    if (e == nullptr) throw CorruptCache("missing tensor '" + key + "'");
    if (e->dims.size() != ndim) throw CorruptCache("tensor '" + key + "' has wrong rank");
    return *e;
  };
  FeatureBundle b;
  b.task_id = task.task_id;
  b.video = get("video", 2).to_matrix();
  b.script = get("script", 2).to_matrix();
  const auto d_s = b.script.cols();
  std::optional<Eigen::Index> d_b;
  for (const auto& qa : task.qas) {
    QAFeatures q;
    q.qa_id = qa.qa_id;
    q.question = get("question_" + qa.qa_id, 1).to_vector();
    if (q.question.size() != d_s) throw CorruptCache("question_" + qa.qa_id + " width differs from script");
    for (std::size_t i = 0; i < qa.steps.size(); ++i) {
      const auto n = qa.steps[i].candidates.size();
      std::vector<Eigen::VectorXd> texts, btns;
      for (std::size_t j = 0; j < n; ++j) {
        texts.push_back(get(text_key(qa.qa_id, i, j), 1).to_vector());
        btns.push_back(get(btn_key(qa.qa_id, i, j), 1).to_vector());
        if (texts.back().size() != d_s) throw CorruptCache(text_key(qa.qa_id, i, j) + " width differs from script");
        if (!d_b) d_b = btns.back().size();
        if (btns.back().size() != *d_b) throw CorruptCache(btn_key(qa.qa_id, i, j) + " has inconsistent width");
      }
      StepFeatures s{Eigen::MatrixXd(static_cast<Eigen::Index>(n), d_s),
                     Eigen::MatrixXd(static_cast<Eigen::Index>(n), d_b.value_or(0))};
      for (std::size_t j = 0; j < n; ++j) {
        s.text.row(static_cast<Eigen::Index>(j)) = texts[j];
        s.button.row(static_cast<Eigen::Index>(j)) = btns[j];
      }
      q.steps.push_back(std::move(s));
    }
    b.qas.push_back(std::move(q));
  }
  return b;
}

FeatureBundle read_cache(const fs::path& file, const TaskInstance& task) {
  return parse_cache(read_binary_file(file), task);
}

}  // namespace aqtc
