#pragma once

// Fixtures shared by the unit tests and the acceptance runner.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aqtc/config.hpp"
#include "aqtc/core.hpp"
#include "aqtc/decoder.hpp"
#include "aqtc/raster.hpp"
#include "aqtc/rng.hpp"
#include "aqtc/training.hpp"

namespace aqtc::test {

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Random row-stochastic matrix.
inline Eigen::MatrixXd random_stochastic(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) s += m(i, j) = rng.uniform() + 1e-3;
    m.row(i) /= s;
  }
  return m;
}

// Every width of the model set to d.
inline Q2AConfig tiny_config(int d, ButtonMode mode = ButtonMode::kReverse) {
  Q2AConfig c;
  c.button_mode = mode;
  c.d_a = c.d_h = c.d_c = c.d_r = c.d_head = d;
  return c;
}

// An in-memory task with random features. `steps` lists the candidate count
// of every step of one QA; ground truth is step index modulo n.
struct TinyInstance {
  TaskInstance task;
  FeatureBundle bundle;
  QASample& qa() { return task.qas.front(); }
};

inline TinyInstance make_tiny(int f, int e, const std::vector<int>& steps, int d_s, int d_v, int d_b,
                              std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  TinyInstance t;
  t.task.task_id = "tiny";
  for (int i = 0; i < f; ++i) t.task.frames.push_back(std::to_string(i + 1) + ".png");
  for (int i = 0; i < e; ++i) t.task.script.push_back("sentence " + std::to_string(i));
  t.task.user_images["panel"] = ImageRef{"panel.png", 16, 16};
  t.task.buttons.push_back(Button{1, "panel", Box{0, 0, 4, 4}});
  QASample qa;
  qa.qa_id = "q0";
  qa.question = "how?";
  t.bundle.task_id = "tiny";
  t.bundle.video = random_matrix(rng, f, d_v, scale);
  t.bundle.script = random_matrix(rng, e, d_s, scale);
  QAFeatures qf;
  qf.qa_id = "q0";
  qf.question = random_matrix(rng, d_s, 1, scale).col(0);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    StepSpec s;
    for (int j = 0; j < steps[i]; ++j) s.candidates.push_back(Candidate{"press <button1>", 1});
    s.correct = static_cast<int>(i) % steps[i];
    qa.steps.push_back(s);
    qf.steps.push_back(StepFeatures{random_matrix(rng, steps[i], d_s, scale), random_matrix(rng, steps[i], d_b, scale)});
  }
  t.task.qas.push_back(qa);
  t.bundle.qas.push_back(qf);
  return t;
}

// Allocates parameters for `config` and overwrites every trainable tensor
// (and h0) with normal draws times `scale`.
inline Q2AParams random_params(const Q2AConfig& config, const InputDims& dims, std::uint64_t seed, double scale) {
  Q2AParams p = init_params(config, dims);
  Rng rng(seed);
  for (auto& t : p.trainable())
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = scale * rng.normal();
  for (Eigen::Index i = 0; i < p.decoder.h0.size(); ++i) p.decoder.h0[i] = rng.normal();
  return p;
}

inline InputDims dims_of(int d_s, int d_v, int d_b) { return InputDims{d_s, d_v, d_b}; }

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  int checked = 0;
};

// Central differences of `loss` against the analytic gradient in `grad` for
// every trainable scalar of `params`.
inline GradCheck check_gradients(Q2AParams& params, Q2AParams& grad, const std::function<double()>& loss,
                                 double h = 1e-6, double floor = 1e-6) {
  GradCheck out;
  auto tp = params.trainable();
  auto tg = grad.trainable();
  for (std::size_t k = 0; k < tp.size(); ++k) {
    for (Eigen::Index i = 0; i < tp[k].size(); ++i) {
      double& x = tp[k].data[i];
      const double saved = x;
      x = saved + h;
      const double up = loss();
      x = saved - h;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = tg[k].data[i];
      const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor});
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = tp[k].name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) + " numeric " +
                    std::to_string(numeric);
      }
      ++out.checked;
    }
  }
  return out;
}

// A solid-colour PNG of the given size.
inline void write_solid_png(const std::filesystem::path& file, int w, int h, std::uint8_t v = 128) {
  std::filesystem::create_directories(file.parent_path());
  write_png(file, Raster(w, h, v, v, v));
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("aqtc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace aqtc::test
