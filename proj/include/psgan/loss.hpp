#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "psgan/tensor.hpp"

namespace psgan {

// Adversarial field losses: the per-position GAN losses averaged over every
// field position (and over the batch when the leading axis is a batch).
// Probabilities are clamped to [eps, 1-eps] before the log.

inline constexpr double kProbClamp = 1e-7;

template <typename T>
double clamp_prob(T p) {
  double q = static_cast<double>(p);
  if (q < kProbClamp) q = kProbClamp;
  if (q > 1.0 - kProbClamp) q = 1.0 - kProbClamp;
  return q;
}

template <typename T>
void check_prob_field(const Tensor<T>& f, const char* what) {
  if (f.numel() == 0) throw std::invalid_argument(std::string(what) + ": empty field");
}

// -[ mean log(1 - d_fake) + mean log(d_real) ]
template <typename T>
double discriminator_loss(const Tensor<T>& d_fake, const Tensor<T>& d_real) {
  check_prob_field(d_fake, "discriminator_loss(d_fake)");
  check_prob_field(d_real, "discriminator_loss(d_real)");
  double acc_f = 0, acc_r = 0;
  for (int64_t i = 0; i < d_fake.numel(); ++i) acc_f += std::log(1.0 - clamp_prob(d_fake[i]));
  for (int64_t i = 0; i < d_real.numel(); ++i) acc_r += std::log(clamp_prob(d_real[i]));
  return -(acc_f / static_cast<double>(d_fake.numel()) +
           acc_r / static_cast<double>(d_real.numel()));
}

// -mean log(d_fake)  (non-saturating generator objective)
template <typename T>
double generator_loss(const Tensor<T>& d_fake) {
  check_prob_field(d_fake, "generator_loss");
  double acc = 0;
  for (int64_t i = 0; i < d_fake.numel(); ++i) acc += std::log(clamp_prob(d_fake[i]));
  return -acc / static_cast<double>(d_fake.numel());
}

// Gradients w.r.t. the probability fields; entries pinned by the clamp get 0.
// The two sides of the discriminator loss are independent, so they can be
// backpropagated in separate passes.
template <typename T>
Tensor<T> discriminator_fake_grad(const Tensor<T>& d_fake) {
  Tensor<T> gf(d_fake.shape());
  const double nf = static_cast<double>(d_fake.numel());
  for (int64_t i = 0; i < d_fake.numel(); ++i) {
    const double p = d_fake[i];
    gf[i] = (p > kProbClamp && p < 1.0 - kProbClamp)
                ? static_cast<T>(1.0 / ((1.0 - p) * nf))
                : T(0);
  }
  return gf;
}

template <typename T>
Tensor<T> discriminator_real_grad(const Tensor<T>& d_real) {
  Tensor<T> gr(d_real.shape());
  const double nr = static_cast<double>(d_real.numel());
  for (int64_t i = 0; i < d_real.numel(); ++i) {
    const double p = d_real[i];
    gr[i] = (p > kProbClamp && p < 1.0 - kProbClamp) ? static_cast<T>(-1.0 / (p * nr)) : T(0);
  }
  return gr;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> discriminator_loss_grad(const Tensor<T>& d_fake,
                                                        const Tensor<T>& d_real) {
  return {discriminator_fake_grad(d_fake), discriminator_real_grad(d_real)};
}

template <typename T>
Tensor<T> generator_loss_grad(const Tensor<T>& d_fake) {
  Tensor<T> g(d_fake.shape());
  const double n = static_cast<double>(d_fake.numel());
  for (int64_t i = 0; i < d_fake.numel(); ++i) {
    const double p = d_fake[i];
    g[i] = (p > kProbClamp && p < 1.0 - kProbClamp) ? static_cast<T>(-1.0 / (p * n)) : T(0);
  }
  return g;
}

}  // namespace psgan
