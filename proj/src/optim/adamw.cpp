#include "vivqa/optim/adamw.hpp"

#include <cmath>

#include "vivqa/core/errors.hpp"

namespace vivqa::optim {

void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t step, double lr, const AdamWConfig& cfg, bool apply_decay) {
    if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
        throw ShapeError("adamw_update: parameter, gradient and moment sizes differ");
    }
    if (lr < 0.0) throw ArgumentError("adamw_update: negative learning rate");
    if (step == 0) throw ArgumentError("adamw_update: step index is 1-based");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        if (apply_decay) param[i] -= lr * cfg.weight_decay * param[i];
    }
}

AdamW::AdamW(std::vector<Parameter> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        if (!p.value.requires_grad()) {
            throw ArgumentError("AdamW: parameter '" + p.name + "' is frozen and cannot be optimized");
        }
        state_.m.emplace_back(p.value.numel(), 0.0);
        state_.v.emplace_back(p.value.numel(), 0.0);
    }
}

void AdamW::step(double lr) {
    ++state_.t;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& value = params_[i].value;
        std::vector<double> zeros;
        std::span<const double> g = value.grad();
        if (g.empty()) {
            zeros.assign(value.numel(), 0.0);
            g = zeros;
        }
        adamw_update(value.mutable_data(), g, state_.m[i], state_.v[i], state_.t, lr, cfg_,
                     !params_[i].decay_exempt);
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
}

}  // namespace vivqa::optim
