#include "b2p/train/adam.hpp"

#include <cmath>

#include "b2p/error.hpp"

namespace b2p::train {

AdamState adam_init(const sparse::ParamStore& params) {
  AdamState s;
  for (const auto& e : params) {
    s.m.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
    s.v.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
  }
  return s;
}

void adam_step(sparse::ParamStore& params, const std::vector<Matrix>& grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adam: gradient or state count does not match the parameter store");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params.value(i);
    const Matrix& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols()) throw DimensionError("adam: gradient shape mismatch");
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p.array() -= cfg.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + cfg.eps);
  }
}

}  // namespace b2p::train
