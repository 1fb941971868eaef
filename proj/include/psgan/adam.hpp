#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "psgan/net.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

// ADAM with bias correction: p -= lr * m_hat / (sqrt(v_hat) + eps).
template <typename T>
struct Adam {
  double lr = 2e-4, beta1 = 0.5, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<ParamRef<T>> params;
  std::vector<Tensor<T>> m, v;

  void attach(std::vector<ParamRef<T>> p) {
    params = std::move(p);
    m.clear();
    v.clear();
    for (auto& pr : params) {
      m.emplace_back(pr.value->shape());
      v.emplace_back(pr.value->shape());
    }
  }

  void step() {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i].value;
      const Tensor<T>& g = *params[i].grad;
      Tensor<T>& mi = m[i];
      Tensor<T>& vi = v[i];
      if (g.numel() != p.numel()) throw std::logic_error("Adam: grad/param size mismatch");
      for (int64_t j = 0; j < p.numel(); ++j) {
        const double gj = g[j];
        const double mj = beta1 * mi[j] + (1 - beta1) * gj;
        const double vj = beta2 * vi[j] + (1 - beta2) * gj * gj;
        mi[j] = static_cast<T>(mj);
        vi[j] = static_cast<T>(vj);
        p[j] = static_cast<T>(p[j] - lr * (mj / bc1) / (std::sqrt(vj / bc2) + eps));
      }
    }
  }

  void zero_grads() {
    for (auto& pr : params) pr.grad->zero();
  }
};

}  // namespace psgan
