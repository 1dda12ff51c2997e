#include "mtvqa/autodiff/optim.hpp"

#include <cmath>

#include "mtvqa/error.hpp"

namespace mtvqa::ad {

namespace {

void check_finite(std::span<Parameter> params, const char* who) {
  for (const auto& p : params) {
    if (p.trainable && !p.grad.all_finite()) {
      throw NumericError("autodiff", std::string(who) + ": non-finite gradient in parameter '" + p.name + "'");
    }
  }
}

void sync_state(std::vector<Tensor>& state, std::span<Parameter> params, const char* who) {
  if (state.empty()) {
    state.reserve(params.size());
    for (const auto& p : params) state.emplace_back(p.value.shape());
    return;
  }
  if (state.size() != params.size()) {
    throw ShapeError(std::string(who) + ": optimizer state holds " + std::to_string(state.size()) +
                     " tensors for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state[i].shape() != params[i].value.shape()) {
      throw ShapeError(std::string(who) + ": state shape " + shape_string(state[i].shape()) +
                       " does not match parameter '" + params[i].name + "' " +
                       shape_string(params[i].value.shape()));
    }
  }
}

}  // namespace

void Nadam::step(std::span<Parameter> params) {
  check_finite(params, "nadam");
  sync_state(m_, params, "nadam");
  sync_state(v_, params, "nadam");
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double t = static_cast<double>(t_);
  const double m_corr_next = 1.0 - std::pow(b1, t + 1.0);
  const double g_corr = 1.0 - std::pow(b1, t);
  const double v_corr = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (!p.trainable) continue;
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = b1 * m[i] / m_corr_next + (1.0 - b1) * g / g_corr;
      const double v_hat = v[i] / v_corr;
      p.value[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

void SgdMomentum::step(std::span<Parameter> params) {
  check_finite(params, "sgd");
  sync_state(velocity_, params, "sgd");
  ++t_;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (!p.trainable) continue;
    auto& vel = velocity_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      vel[i] = cfg_.momentum * vel[i] - cfg_.lr * p.grad[i];
      p.value[i] += vel[i];
    }
  }
}

}  // namespace mtvqa::ad
