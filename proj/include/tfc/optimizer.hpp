#pragma once

#include <cstdint>
#include <vector>

#include "tfc/autodiff.hpp"

namespace tfc::optim {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // L2 penalty folded into the gradient before the moment updates.
  double weight_decay = 5e-4;

  void validate() const;
};

struct AdamState {
  AdamConfig config;
  std::vector<NumArray> m, v;  // one per store entry, lazily shaped
  std::uint64_t step = 0;
};

// One Adam update with bias correction over every parameter in the store.
// Throws NumericError naming the parameter on a non-finite gradient; no
// parameter is modified in that case.
void adam_step(ad::ParamStore& store, AdamState& state);

}  // namespace tfc::optim
