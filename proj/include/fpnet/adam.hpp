#ifndef FPNET_ADAM_HPP
#define FPNET_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "fpnet/layers.hpp"

namespace fpnet::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Holds first/second moment state per parameter,
/// keyed by the registry's declaration order. The registry's slot pointers
/// must stay valid for the optimizer's lifetime.
class Adam {
 public:
  Adam(const ParamRegistry& reg, AdamConfig cfg) : reg_(&reg), cfg_(cfg) {
    m_.assign(reg.param_count(), 0.0);
    v_.assign(reg.param_count(), 0.0);
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t steps() const { return t_; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    size_t k = 0;
    for (const auto& slot : reg_->slots()) {
      double* p = slot.value->data();
      const double* g = slot.grad->data();
      const size_t n = slot.value->size();
      for (size_t i = 0; i < n; ++i, ++k) {
        m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g[i];
        v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m_[k] / bc1;
        const double vhat = v_[k] / bc2;
        p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  const ParamRegistry* reg_;
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace fpnet::nn

#endif  // FPNET_ADAM_HPP
