#include "vivqa/core/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "vivqa/core/errors.hpp"

namespace vivqa {

double gradient_relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
    Tensor leaf = x.clone(true);
    backward(f(leaf));
    std::vector<double> analytic(leaf.numel(), 0.0);
    if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

    NoGradGuard no_grad;
    double worst = 0.0;
    auto data = leaf.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + h;
        const double up = f(leaf).item();
        data[i] = saved - h;
        const double down = f(leaf).item();
        data[i] = saved;
        worst = std::max(worst, gradient_relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
    return worst;
}

ParamCheckResult grad_check_params(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                   const ParamCheckOptions& options) {
    for (auto& p : params) {
        if (!p.requires_grad()) throw ArgumentError("grad_check_params: parameter does not require a gradient");
        p.zero_grad();
    }
    backward(loss());

    ParamCheckResult result;
    RngStream rng(options.seed);
    NoGradGuard no_grad;
    for (auto& p : params) {
        std::vector<double> analytic(p.numel(), 0.0);
        if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
        std::vector<std::size_t> coords;
        if (options.max_coords_per_param == 0 || options.max_coords_per_param >= p.numel()) {
            coords.resize(p.numel());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        } else {
            auto perm = rng.permutation(p.numel());
            coords.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(options.max_coords_per_param));
        }
        auto data = p.mutable_data();
        for (std::size_t i : coords) {
            const double saved = data[i];
            data[i] = saved + options.h;
            const double up = loss().item();
            data[i] = saved - options.h;
            const double down = loss().item();
            data[i] = saved;
            const double numeric = (up - down) / (2.0 * options.h);
            result.max_relative_error =
                std::max(result.max_relative_error, gradient_relative_error(analytic[i], numeric));
            ++result.coordinates_checked;
        }
        p.zero_grad();
    }
    return result;
}

}  // namespace vivqa
