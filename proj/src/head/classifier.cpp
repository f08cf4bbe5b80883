#include "vivqa/head/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "vivqa/core/errors.hpp"
#include "vivqa/core/ops.hpp"

namespace vivqa::head {

ClassifierParams ClassifierParams::create(std::size_t width, std::size_t classes, RngStream& rng) {
    return {AffineParams::create(width, 2 * width, rng), LayerNormParams::create(2 * width),
            AffineParams::create(2 * width, classes, rng)};
}

Tensor classify(const Tensor& pooled, const ClassifierParams& p, Shape* hidden_shape) {
    if (pooled.rank() != 2 || pooled.dim(0) != 1 || pooled.dim(1) != p.hidden.weight.dim(0)) {
        throw ShapeError("classify: expected [1 x " + std::to_string(p.hidden.weight.dim(0)) + "], got " +
                         shape_str(pooled.shape()));
    }
    const Tensor h = p.hidden(pooled);
    if (hidden_shape) *hidden_shape = h.shape();
    return p.projection(ops::gelu(p.norm(h)));
}

AnswerDistribution predict(const Tensor& logits, const std::vector<std::string>& answers) {
    const auto l = logits.data();
    if (l.empty()) throw ArgumentError("predict: empty logits");
    if (!answers.empty() && answers.size() != l.size()) {
        throw ConfigError("predict: " + std::to_string(l.size()) + " logits for " + std::to_string(answers.size()) +
                          " answers");
    }
    AnswerDistribution out;
    const double mx = *std::max_element(l.begin(), l.end());
    out.probabilities.resize(l.size());
    double z = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
        out.probabilities[i] = std::exp(l[i] - mx);
        z += out.probabilities[i];
    }
    for (double& p : out.probabilities) p /= z;
    // Argmax on the logits themselves so ties are exact.
    out.predicted = static_cast<std::size_t>(std::max_element(l.begin(), l.end()) - l.begin());
    if (!answers.empty()) out.answer = answers[out.predicted];
    return out;
}

}  // namespace vivqa::head
