#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mtvqa/autodiff/tensor.hpp"

namespace mtvqa::ad {

struct NadamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SgdConfig {
  double lr = 1e-4;
  double momentum = 0.9;
};

/// Adam with Nesterov momentum, constant momentum schedule (mu_t = beta1):
///
///   m <- b1 m + (1-b1) g          v <- b2 v + (1-b2) g^2
///   m_hat = b1 m / (1 - b1^(t+1)) + (1-b1) g / (1 - b1^t)
///   v_hat = v / (1 - b2^t)
///   p <- p - lr m_hat / (sqrt(v_hat) + eps)
///
/// Non-trainable parameters are skipped.
class Nadam {
 public:
  explicit Nadam(NadamConfig cfg = {}) : cfg_(cfg) {}

  /// Throws NumericError naming the first parameter with a non-finite
  /// gradient; in that case no parameter is modified.
  void step(std::span<Parameter> params);

  std::size_t steps() const noexcept { return t_; }
  const NadamConfig& config() const noexcept { return cfg_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

 private:
  NadamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

/// v <- mu v - lr g ; p <- p + v
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Parameter> params);

  std::size_t steps() const noexcept { return t_; }
  const SgdConfig& config() const noexcept { return cfg_; }
  const std::vector<Tensor>& velocities() const noexcept { return velocity_; }

 private:
  SgdConfig cfg_;
  std::vector<Tensor> velocity_;
  std::size_t t_ = 0;
};

}  // namespace mtvqa::ad
