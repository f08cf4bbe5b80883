#include "vivqa/vision/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vivqa/core/errors.hpp"
#include "vivqa/core/ops.hpp"
#include "vivqa/core/rng.hpp"

namespace vivqa::vision {

void VisionDims::validate() const {
    if (grid == 0 || image_size == 0 || image_size % grid != 0) {
        throw ConfigError("vision: image size " + std::to_string(image_size) + " is not a multiple of grid " +
                          std::to_string(grid));
    }
    if (global_tokens == 0 || hidden == 0 || local_channels == 0) {
        throw ConfigError("vision: token count, hidden width and local channels must be positive");
    }
}

ImageTensor::ImageTensor(Tensor pixels, const VisionDims& dims) : pixels_(std::move(pixels)) {
    const Shape expected{3, dims.image_size, dims.image_size};
    if (pixels_.shape() != expected) {
        throw ShapeError("image must have shape " + shape_str(expected) + ", got " + shape_str(pixels_.shape()));
    }
    for (double v : pixels_.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("image values must lie in [0, 1]");
    }
}

std::vector<double> patch_means(const ImageTensor& image, std::size_t grid) {
    const std::size_t size = image.size();
    const std::size_t patch = size / grid;
    const auto px = image.pixels().data();
    std::vector<double> means(3 * grid * grid, 0.0);
    const double inv = 1.0 / static_cast<double>(patch * patch);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t gi = 0; gi < grid; ++gi) {
            for (std::size_t gj = 0; gj < grid; ++gj) {
                double acc = 0.0;
                for (std::size_t y = gi * patch; y < (gi + 1) * patch; ++y) {
                    const double* row = px.data() + (c * size + y) * size;
                    for (std::size_t x = gj * patch; x < (gj + 1) * patch; ++x) acc += row[x];
                }
                means[(c * grid + gi) * grid + gj] = acc * inv;
            }
        }
    }
    return means;
}

StubExtractorParams StubExtractorParams::create(const VisionDims& dims, std::uint64_t seed) {
    dims.validate();
    StubExtractorParams p;
    p.dims = dims;
    p.seed = seed;
    RngStream root(seed);
    RngStream gw = root.split("stub.global.weight");
    RngStream gb = root.split("stub.global.bias");
    RngStream lw = root.split("stub.local.weight");
    RngStream lb = root.split("stub.local.bias");
    const std::size_t in_global = 3 * dims.grid;
    const std::size_t out_global = dims.global_tokens * dims.hidden;
    p.global_weight = Tensor::randn({in_global, out_global}, gw, 1.0 / std::sqrt(static_cast<double>(in_global)));
    p.global_bias = Tensor::randn({out_global}, gb, 0.1);
    p.local_weight = Tensor::randn({3, dims.local_channels}, lw, 1.0 / std::sqrt(3.0));
    p.local_bias = Tensor::randn({dims.local_channels}, lb, 0.1);
    return p;
}

void StubExtractorParams::set_trainable(bool trainable) {
    for (Tensor* t : {&global_weight, &global_bias, &local_weight, &local_bias}) t->set_requires_grad(trainable);
}

std::size_t StubExtractorParams::parameter_count() const {
    return global_weight.numel() + global_bias.numel() + local_weight.numel() + local_bias.numel();
}

std::vector<std::uint8_t> StubExtractorParams::snapshot_bytes() const {
    std::vector<std::uint8_t> bytes;
    for (const Tensor& t : tensors()) {
        const auto d = t.data();
        const auto* raw = reinterpret_cast<const std::uint8_t*>(d.data());
        bytes.insert(bytes.end(), raw, raw + d.size_bytes());
    }
    return bytes;
}

namespace {

void check_image(const ImageTensor& image, const VisionDims& dims) {
    if (image.size() != dims.image_size) {
        throw ShapeError("image of size " + std::to_string(image.size()) + " given to extractor expecting " +
                         std::to_string(dims.image_size));
    }
}

// Patch means mapped from [0, 1] to [-1, 1], the usual input normalization.
std::vector<double> normalized_patch_means(const ImageTensor& image, std::size_t grid) {
    auto means = patch_means(image, grid);
    for (double& m : means) m = 2.0 * (m - 0.5);
    return means;
}

}  // namespace

Tensor extract_global_stub(const ImageTensor& image, const StubExtractorParams& params) {
    const auto& dims = params.dims;
    check_image(image, dims);
    const auto means = normalized_patch_means(image, dims.grid);
    // Row profile: average each patch row over its columns.
    std::vector<double> profile(3 * dims.grid, 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t gi = 0; gi < dims.grid; ++gi) {
            double acc = 0.0;
            for (std::size_t gj = 0; gj < dims.grid; ++gj) acc += means[(c * dims.grid + gi) * dims.grid + gj];
            profile[c * dims.grid + gi] = acc / static_cast<double>(dims.grid);
        }
    }
    const std::size_t width = profile.size();
    const Tensor row = Tensor::from({1, width}, std::move(profile));
    const Tensor flat = ops::linear(row, params.global_weight, params.global_bias);
    return ops::reshape(flat, {dims.global_tokens, dims.hidden});
}

Tensor extract_local_stub(const ImageTensor& image, const StubExtractorParams& params) {
    const auto& dims = params.dims;
    check_image(image, dims);
    const std::size_t cells = dims.grid * dims.grid;
    const auto means = normalized_patch_means(image, dims.grid);
    // [cells x 3] so each cell is one row of the channel map.
    std::vector<double> by_cell(cells * 3);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 0; k < cells; ++k) by_cell[k * 3 + c] = means[c * cells + k];
    }
    const Tensor cell_rows = Tensor::from({cells, 3}, std::move(by_cell));
    const Tensor mapped = ops::gelu(ops::linear(cell_rows, params.local_weight, params.local_bias));  // cells x C
    return ops::reshape(ops::transpose(mapped), {dims.local_channels, dims.grid, dims.grid});
}

Tensor adapt_local(const Tensor& local, std::size_t tokens, std::size_t hidden, AdapterTrace* trace) {
    if (local.rank() != 3) throw ShapeError("adapt_local: expected C x g x g, got " + shape_str(local.shape()));
    auto note = [trace](const Tensor& t) {
        if (trace) trace->shapes.push_back(t.shape());
    };
    note(local);
    Tensor x = ops::adaptive_avg_pool(local, {1, tokens});
    note(x);
    x = ops::permute(x, {2, 1, 0});
    note(x);
    x = ops::adaptive_avg_pool(x, {1, hidden});
    note(x);
    x = ops::flatten(x, 0);
    note(x);
    return x;
}

std::string_view fusion_display_name(FusionOp op) {
    switch (op) {
        case FusionOp::multiply:
            return "Element-wise Multiplication";
        case FusionOp::add:
            return "Element-wise Addition";
        case FusionOp::concatenate:
            return "Concatenation";
    }
    return "";
}

std::string_view fusion_key(FusionOp op) {
    switch (op) {
        case FusionOp::multiply:
            return "multiply";
        case FusionOp::add:
            return "add";
        case FusionOp::concatenate:
            return "concatenate";
    }
    return "";
}

FusionOp parse_fusion_op(std::string_view key) {
    if (key == "multiply" || key == "mul") return FusionOp::multiply;
    if (key == "add") return FusionOp::add;
    if (key == "concatenate" || key == "concat") return FusionOp::concatenate;
    throw ConfigError("unknown fusion op '" + std::string(key) + "'");
}

std::size_t fused_rows(FusionOp op, std::size_t tokens) { return op == FusionOp::concatenate ? 2 * tokens : tokens; }

Tensor fuse(const Tensor& global, const Tensor& local_adapted, FusionOp op) {
    if (global.rank() != 2 || global.shape() != local_adapted.shape()) {
        throw ShapeError("fuse: operands must share a 2-d shape, got " + shape_str(global.shape()) + " and " +
                         shape_str(local_adapted.shape()));
    }
    switch (op) {
        case FusionOp::multiply:
            return ops::mul(global, local_adapted);
        case FusionOp::add:
            return ops::add(global, local_adapted);
        case FusionOp::concatenate:
            return ops::concat({global, local_adapted}, 0);
    }
    throw ArgumentError("fuse: unknown op");
}

namespace {

double median_of(const std::vector<double>& sorted, std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const std::size_t mid = begin + n / 2;
    if (n % 2 == 1) return sorted[mid];
    return 0.5 * (sorted[mid - 1] + sorted[mid]);
}

}  // namespace

SparsityStats sparsity_stats(std::span<const double> values) {
    if (values.empty()) throw ArgumentError("sparsity_stats: empty tensor");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    SparsityStats s;
    double total = 0.0;
    for (double x : v) total += x;
    s.mean = total / static_cast<double>(n);
    s.min = v.front();
    s.max = v.back();
    s.median = median_of(v, 0, n);
    if (n == 1) {
        s.q1 = s.q3 = v[0];
    } else {
        const std::size_t half = n / 2;
        s.q1 = median_of(v, 0, half);
        s.q3 = median_of(v, n - half, n);
    }
    return s;
}

}  // namespace vivqa::vision
