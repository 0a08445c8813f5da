#pragma once

#include <vector>

#include "b2p/common.hpp"
#include "b2p/sparse/params.hpp"

namespace b2p::train {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m, v;
  long step = 0;
};

AdamState adam_init(const sparse::ParamStore& params);

// Bias-corrected Adam update of every store entry.
void adam_step(sparse::ParamStore& params, const std::vector<Matrix>& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace b2p::train
