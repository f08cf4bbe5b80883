#pragma once

#include "vivqa/core/ops.hpp"
#include "vivqa/core/rng.hpp"
#include "vivqa/core/tensor.hpp"

namespace vivqa {

struct AffineParams {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]

    /// Normal(0, stddev) weights, zero bias. stddev <= 0 selects 1/sqrt(in).
    static AffineParams create(std::size_t in, std::size_t out, RngStream& rng, double stddev = 0.0);
    Tensor operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }
};

struct LayerNormParams {
    Tensor gamma;  // ones
    Tensor beta;   // zeros
    double eps = 1e-5;

    static LayerNormParams create(std::size_t width);
    Tensor operator()(const Tensor& x) const { return ops::layer_norm(x, gamma, beta, eps); }
};

}  // namespace vivqa
