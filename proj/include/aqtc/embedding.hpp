#pragma once

// Input encoders: turns a TaskInstance into a FeatureBundle through a frozen
// embedding backend. Frames are read at 1 fps, questions and answers get
// "Question: " / "Answer: " prefixes, and the visual button feature is built
// from mask / reverse-mask copies of the user image.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aqtc/core.hpp"
#include "aqtc/raster.hpp"

namespace aqtc {

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual Eigen::VectorXd embed_text(std::string_view text) const = 0;
  virtual Eigen::VectorXd embed_image(const Raster& image) const = 0;
  virtual int d_s() const = 0;
  virtual int d_v() const = 0;
};

// Deterministic stand-in for frozen pretrained encoders.
//
// Text: lowercase, split on non-alphanumeric ASCII; every token seeds an
// xorshift64* stream with fnv1a64(token) ^ splitmix64(seed), which emits d_s
// Box-Muller normals; the sentence vector is the mean of its token vectors,
// rescaled to L2 norm `norm`. A text without tokens maps to zeros.
//
// Image: an 8x8 grid of per-cell mean RGB (in [0,1], centred by -0.5; 192
// values, cell-major then channel) times a d_v x 192 standard-normal
// projection drawn from Rng(derive_seed(seed, 0x1A6E)) in row-major order,
// rescaled to L2 norm `norm`.
//
// Every output is rounded to float precision so feature caches round-trip
// exactly.
class SyntheticBackend final : public EmbeddingBackend {
 public:
  struct Options {
    int d_s = 64;
    int d_v = 64;
    std::uint64_t seed = 0;
    double norm = 32.0;
  };

  SyntheticBackend();
  explicit SyntheticBackend(Options options);

  Eigen::VectorXd embed_text(std::string_view text) const override;
  Eigen::VectorXd embed_image(const Raster& image) const override;
  int d_s() const override { return options_.d_s; }
  int d_v() const override { return options_.d_v; }

  Eigen::VectorXd token_vector(std::string_view token) const;
  const Options& options() const { return options_; }

 private:
  Options options_;
  Eigen::MatrixXd projection_;  // d_v x 192
};

std::vector<std::string> tokenize(std::string_view text);

enum class ButtonMode { kNone, kMask, kReverse, kBoth };

std::string to_string(ButtonMode mode);
ButtonMode button_mode_from_string(std::string_view s);
int button_width(ButtonMode mode, int d_v);

// Frames in numeric order. With a duration hint shorter than the frame
// count, frames are subsampled evenly to one per second (at least one).
std::vector<Raster> sample_frames(const std::filesystem::path& frame_dir, std::optional<double> duration_hint = {});
std::vector<Raster> sample_frames(std::span<const std::filesystem::path> frames, std::optional<double> duration_hint = {});

Eigen::MatrixXd encode_script(std::span<const std::string> sentences, const EmbeddingBackend& backend);
Eigen::VectorXd encode_question(std::string_view text, const EmbeddingBackend& backend);

// Text fed to the text encoder for a candidate: the placeholder becomes
// "this button" and the whole string gets the "Answer: " prefix.
std::string candidate_prompt(const Candidate& candidate);

struct ButtonRasters {
  Raster mask;     // target box zeroed
  Raster reverse;  // every other box on the image zeroed, target box kept
};

// `buttons` may contain buttons on other images; only those sharing the
// target's image are masked in the reverse raster.
ButtonRasters build_button_rasters(const Raster& user_image, std::span<const Button> buttons, const Button& target);

// Loaded user images keyed by image id.
using ImageStore = std::map<std::string, Raster>;
ImageStore load_user_images(const TaskInstance& task);

struct CandidateEncoding {
  Eigen::VectorXd text;
  Eigen::VectorXd button;
};

CandidateEncoding encode_candidate(const Candidate& candidate, const TaskInstance& task, const ImageStore& images,
                                   const EmbeddingBackend& backend, ButtonMode mode);

FeatureBundle bundle(const TaskInstance& task, const EmbeddingBackend& backend, ButtonMode mode);

// Feature cache: one file per task and button mode.
std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& task_id, ButtonMode mode);
void write_cache(const std::filesystem::path& file, const FeatureBundle& bundle);
std::string serialize_cache(const FeatureBundle& bundle);
// Needs the task for qa ids and candidate counts. Throws CorruptCache on any
// missing key or inconsistent shape.
FeatureBundle read_cache(const std::filesystem::path& file, const TaskInstance& task);
FeatureBundle parse_cache(std::string_view bytes, const TaskInstance& task);

}  // namespace aqtc
