#include "emoconv/optim.hpp"

#include <cmath>

#include "emoconv/errors.hpp"

namespace emoconv {

Adam::Adam(nn::ParamList params, AdamConfig config)
    : params_(std::move(params)), config_(config), lr_(config.lr) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape(), 0.0);
    v_.emplace_back(p.var.shape(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Var p = params_[i].var;
    if (!p.has_grad()) continue;
    const Tensor& g = p.node()->grad;
    Tensor& w = p.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
      const double mh = m[k] / bc1;
      const double vh = v[k] / bc2;
      w[k] -= lr_ * mh / (std::sqrt(vh) + config_.eps);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

void Adam::restore(std::uint64_t steps, double lr, std::vector<Tensor> m, std::vector<Tensor> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ConfigError("optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].shape() != params_[i].var.shape() || v[i].shape() != params_[i].var.shape()) {
      throw ConfigError("optimizer moment shape mismatch for '" + params_[i].name + "'");
    }
  }
  steps_ = steps;
  lr_ = lr;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace emoconv
