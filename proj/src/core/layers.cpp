#include "vivqa/core/layers.hpp"

#include <cmath>

namespace vivqa {

AffineParams AffineParams::create(std::size_t in, std::size_t out, RngStream& rng, double stddev) {
    if (stddev <= 0.0) stddev = 1.0 / std::sqrt(static_cast<double>(in));
    return {Tensor::randn({in, out}, rng, stddev, true), Tensor::zeros({out}, true)};
}

LayerNormParams LayerNormParams::create(std::size_t width) {
    return {Tensor::full({width}, 1.0, true), Tensor::zeros({width}, true)};
}

}  // namespace vivqa
