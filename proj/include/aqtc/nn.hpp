#pragma once

// Small dense layers with explicit backward passes. All layers work on a
// batch of rows (one row per candidate). Backward functions accumulate
// parameter gradients into a gradient object of the same type.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aqtc/rng.hpp"

namespace aqtc {

// A named view of one parameter tensor. Matrices are column-major in memory.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool is_vector = false;

  Eigen::Index size() const { return rows * cols; }
};

struct Linear {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out

  Linear() = default;
  Linear(int in, int out) : W(Eigen::MatrixXd::Zero(out, in)), b(Eigen::VectorXd::Zero(out)) {}

  int in() const { return static_cast<int>(W.cols()); }
  int out() const { return static_cast<int>(W.rows()); }

  // W ~ uniform(-1/sqrt(in), 1/sqrt(in)) drawn row-major; b = 0.
  void init_uniform(Rng& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;
  // Accumulates dW, db into g. Returns dX (empty when !need_dx).
  Eigen::MatrixXd backward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dY, Linear& g, bool need_dx = true) const;

  void collect(const std::string& prefix, std::vector<TensorRef>& out);
};

// Linear -> ReLU -> Linear.
struct MLP2 {
  Linear l1, l2;

  struct Cache {
    Eigen::MatrixXd X, Z1, A1;
  };

  MLP2() = default;
  MLP2(int in, int hidden, int out) : l1(in, hidden), l2(hidden, out) {}

  void init_uniform(Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Cache* cache = nullptr) const;
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& dY, MLP2& g, bool need_dx = true) const;
  void collect(const std::string& prefix, std::vector<TensorRef>& out);
};

// Gated recurrent cell with the usual gate layout (reset, update, new):
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
struct GRUCell {
  Linear ih;  // in -> 3 * hidden
  Linear hh;  // hidden -> 3 * hidden

  struct Cache {
    Eigen::MatrixXd X, H, r, z, n, hn;
  };

  GRUCell() = default;
  GRUCell(int in, int hidden) : ih(in, 3 * hidden), hh(hidden, 3 * hidden) {}

  int hidden() const { return hh.in(); }
  void init_uniform(Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& H, Cache* cache = nullptr) const;
  // Returns {dX, dH}.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> backward(const Cache& cache, const Eigen::MatrixXd& dHout,
                                                       GRUCell& g) const;
  void collect(const std::string& prefix, std::vector<TensorRef>& out);
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
// Gradient w.r.t. logits given the softmax output P and dL/dP.
Eigen::MatrixXd softmax_rows_backward(const Eigen::MatrixXd& P, const Eigen::MatrixXd& dP);

}  // namespace aqtc
