#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vivqa/core/tensor.hpp"

namespace vivqa::optim {

struct Parameter {
    std::string name;
    Tensor value;
    /// Norm scales and biases skip weight decay.
    bool decay_exempt = false;
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// One AdamW update on flat buffers. `step` is the 1-based step index used
/// for bias correction. Decoupled decay p <- p - lr*wd*p is applied to the
/// post-Adam value.
void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::uint64_t step, double lr, const AdamWConfig& cfg, bool apply_decay);

struct AdamWState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t t = 0;
};

class AdamW {
  public:
    AdamW(std::vector<Parameter> params, AdamWConfig cfg = {});

    /// Applies one update with the given learning rate. Parameters without
    /// an accumulated gradient are treated as having a zero gradient.
    void step(double lr);
    void zero_grad();

    const std::vector<Parameter>& params() const noexcept { return params_; }
    const AdamWState& state() const noexcept { return state_; }
    AdamWState& mutable_state() noexcept { return state_; }
    const AdamWConfig& config() const noexcept { return cfg_; }

  private:
    std::vector<Parameter> params_;
    AdamWConfig cfg_;
    AdamWState state_;
};

}  // namespace vivqa::optim
