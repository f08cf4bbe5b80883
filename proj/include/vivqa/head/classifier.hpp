#pragma once

#include <string>
#include <vector>

#include "vivqa/core/layers.hpp"
#include "vivqa/core/tensor.hpp"

namespace vivqa::head {

struct ClassifierParams {
    AffineParams hidden;      // width -> 2 * width
    LayerNormParams norm;     // over 2 * width
    AffineParams projection;  // 2 * width -> classes

    static ClassifierParams create(std::size_t width, std::size_t classes, RngStream& rng);
    std::size_t classes() const { return projection.weight.dim(1); }
};

/// affine -> layer norm -> GELU -> affine. Returns [1 x classes] logits.
/// `hidden_shape`, when given, receives the shape after the first affine.
Tensor classify(const Tensor& pooled, const ClassifierParams& p, Shape* hidden_shape = nullptr);

struct AnswerDistribution {
    std::vector<double> probabilities;
    std::size_t predicted = 0;
    std::string answer;
};

/// Softmax over the logits, argmax with ties going to the lowest index.
/// `answers` may be empty, in which case the answer string stays empty.
AnswerDistribution predict(const Tensor& logits, const std::vector<std::string>& answers);

}  // namespace vivqa::head
