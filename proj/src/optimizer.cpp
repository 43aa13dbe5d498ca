#include "tfc/optimizer.hpp"

#include <cmath>

#include "tfc/errors.hpp"

namespace tfc::optim {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optimizer.lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
}

void adam_step(ad::ParamStore& store, AdamState& state) {
  auto entries = store.entries();
  for (const auto& p : entries) {
    if (p.grad.size() != p.value.size()) {
      throw ContractError("parameter '" + p.name + "' has no gradient buffer");
    }
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        throw NumericError("non-finite gradient in parameter '" + p.name + "' at index " +
                           std::to_string(i));
      }
    }
  }
  if (state.m.size() != entries.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : entries) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& p = entries[k];
    double* m = state.m[k].ptr();
    double* v = state.v[k].ptr();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + c.weight_decay * p.value[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace tfc::optim
