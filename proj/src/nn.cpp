#include "aqtc/nn.hpp"

#include <cmath>

namespace aqtc {

namespace {

void fill_uniform(Eigen::MatrixXd& W, double bound, Rng& rng) {
  for (Eigen::Index r = 0; r < W.rows(); ++r)
    for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-bound, bound);
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

void Linear::init_uniform(Rng& rng) {
  fill_uniform(W, 1.0 / std::sqrt(static_cast<double>(in())), rng);
  b.setZero();
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd Y = X * W.transpose();
  Y.rowwise() += b.transpose();
  return Y;
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dY, Linear& g, bool need_dx) const {
  g.W.noalias() += dY.transpose() * X;
  g.b += dY.colwise().sum().transpose();
  if (!need_dx) return {};
  return dY * W;
}

void Linear::collect(const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + ".weight", W.data(), W.rows(), W.cols(), false});
  out.push_back({prefix + ".bias", b.data(), b.size(), 1, true});
}

void MLP2::init_uniform(Rng& rng) {
  l1.init_uniform(rng);
  l2.init_uniform(rng);
}

Eigen::MatrixXd MLP2::forward(const Eigen::MatrixXd& X, Cache* cache) const {
  Eigen::MatrixXd Z1 = l1.forward(X);
  Eigen::MatrixXd A1 = Z1.cwiseMax(0.0);
  Eigen::MatrixXd Y = l2.forward(A1);
  if (cache) *cache = {X, std::move(Z1), std::move(A1)};
  return Y;
}

Eigen::MatrixXd MLP2::backward(const Cache& c, const Eigen::MatrixXd& dY, MLP2& g, bool need_dx) const {
  Eigen::MatrixXd dA1 = l2.backward(c.A1, dY, g.l2);
  Eigen::MatrixXd dZ1 = (c.Z1.array() > 0.0).select(dA1, 0.0);
  return l1.backward(c.X, dZ1, g.l1, need_dx);
}

void MLP2::collect(const std::string& prefix, std::vector<TensorRef>& out) {
  l1.collect(prefix + ".0", out);
  l2.collect(prefix + ".2", out);
}

void GRUCell::init_uniform(Rng& rng) {
  ih.init_uniform(rng);
  hh.init_uniform(rng);
}

Eigen::MatrixXd GRUCell::forward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& H, Cache* cache) const {
  const Eigen::Index d = hidden();
  const Eigen::MatrixXd gi = ih.forward(X);
  const Eigen::MatrixXd gh = hh.forward(H);
  Eigen::MatrixXd r = sigmoid(gi.leftCols(d) + gh.leftCols(d));
  Eigen::MatrixXd z = sigmoid(gi.middleCols(d, d) + gh.middleCols(d, d));
  Eigen::MatrixXd hn = gh.rightCols(d);
  // Scalar tanh/exp: packet and tail lanes must agree so equal rows give
  // bitwise-equal outputs.
  Eigen::MatrixXd n = (gi.rightCols(d).array() + r.array() * hn.array()).matrix().unaryExpr([](double v) {
    return std::tanh(v);
  });
  Eigen::MatrixXd out = ((1.0 - z.array()) * n.array() + z.array() * H.array()).matrix();
  if (cache) *cache = {X, H, std::move(r), std::move(z), std::move(n), std::move(hn)};
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> GRUCell::backward(const Cache& c, const Eigen::MatrixXd& dOut,
                                                              GRUCell& g) const {
  const Eigen::Index d = hidden();
  const auto rows = c.X.rows();
  const Eigen::ArrayXXd dn = dOut.array() * (1.0 - c.z.array());
  const Eigen::ArrayXXd dz = dOut.array() * (c.H.array() - c.n.array());
  const Eigen::ArrayXXd dan = dn * (1.0 - c.n.array().square());
  const Eigen::ArrayXXd dr = dan * c.hn.array();
  const Eigen::ArrayXXd dar = dr * c.r.array() * (1.0 - c.r.array());
  const Eigen::ArrayXXd daz = dz * c.z.array() * (1.0 - c.z.array());

  Eigen::MatrixXd dgi(rows, 3 * d), dgh(rows, 3 * d);
  dgi << dar.matrix(), daz.matrix(), dan.matrix();
  dgh << dar.matrix(), daz.matrix(), (dan * c.r.array()).matrix();
  Eigen::MatrixXd dX = ih.backward(c.X, dgi, g.ih);
  Eigen::MatrixXd dH = hh.backward(c.H, dgh, g.hh);
  dH.array() += dOut.array() * c.z.array();
  return {std::move(dX), std::move(dH)};
}

void GRUCell::collect(const std::string& prefix, std::vector<TensorRef>& out) {
  ih.collect(prefix + ".ih", out);
  hh.collect(prefix + ".hh", out);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd P(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    P.row(i) = logits.row(i).unaryExpr([m](double v) { return std::exp(v - m); });
    P.row(i) /= P.row(i).sum();
  }
  return P;
}

Eigen::MatrixXd softmax_rows_backward(const Eigen::MatrixXd& P, const Eigen::MatrixXd& dP) {
  const Eigen::VectorXd inner = (P.array() * dP.array()).rowwise().sum();
  return (P.array() * (dP.array().colwise() - inner.array())).matrix();
}

}  // namespace aqtc
