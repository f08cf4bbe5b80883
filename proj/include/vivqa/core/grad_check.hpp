#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "vivqa/core/rng.hpp"
#include "vivqa/core/tensor.hpp"

namespace vivqa {

/// Relative error used by the checks: |a - n| / max(|a|, |n|, 1e-8).
double gradient_relative_error(double analytic, double numeric);

/// Central-difference check of a scalar function of one tensor. Returns the
/// maximum relative error over every coordinate of x.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

struct ParamCheckOptions {
    double h = 1e-5;
    /// Coordinates sampled per parameter; 0 checks all of them.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

struct ParamCheckResult {
    double max_relative_error = 0.0;
    std::size_t coordinates_checked = 0;
};

/// Same check over a set of parameter leaves that loss() closes over.
/// Parameters are perturbed in place and restored bit-exactly.
ParamCheckResult grad_check_params(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                   const ParamCheckOptions& options = {});

}  // namespace vivqa
