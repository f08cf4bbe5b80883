#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vivqa/core/tensor.hpp"

namespace vivqa::vision {

/// Dimensions of the visual pathway. `paper()` gives the full-size
/// contracts (32x768 global, 2560x7x7 local, 3x224x224 images).
struct VisionDims {
    std::size_t image_size = 224;
    std::size_t grid = 7;
    std::size_t global_tokens = 32;
    std::size_t hidden = 768;
    std::size_t local_channels = 2560;

    static VisionDims paper() { return {}; }
    static VisionDims tiny() { return {28, 7, 8, 24, 16}; }
    std::size_t patch() const { return image_size / grid; }
    void validate() const;
};

/// Image of shape 3 x S x S with values in [0, 1].
class ImageTensor {
  public:
    ImageTensor(Tensor pixels, const VisionDims& dims);
    const Tensor& pixels() const noexcept { return pixels_; }
    std::size_t size() const { return pixels_.dim(1); }

  private:
    Tensor pixels_;
};

/// Mean of each non-overlapping patch: [3 x grid x grid].
std::vector<double> patch_means(const ImageTensor& image, std::size_t grid);

/// Fixed seeded projections standing in for the frozen extractors. Both
/// read patch means rescaled to [-1, 1].
///  - global: row profile of the patch grid (mean over columns, 3*grid
///    values) -> tokens*hidden, reshaped to tokens x hidden.
///  - local: per-cell 3 -> local_channels map followed by GELU, like the
///    activated output of a CNN head.
struct StubExtractorParams {
    VisionDims dims;
    std::uint64_t seed = 0;
    Tensor global_weight;  // [3*grid x tokens*hidden]
    Tensor global_bias;    // [tokens*hidden]
    Tensor local_weight;   // [3 x local_channels]
    Tensor local_bias;     // [local_channels]

    static StubExtractorParams create(const VisionDims& dims, std::uint64_t seed);
    /// Registers (or unregisters) the projections as trainable leaves.
    void set_trainable(bool trainable);
    std::vector<Tensor> tensors() const { return {global_weight, global_bias, local_weight, local_bias}; }
    std::size_t parameter_count() const;
    /// Raw bytes of every projection value, for bitwise freeze checks.
    std::vector<std::uint8_t> snapshot_bytes() const;
};

/// Global features [tokens x hidden]. Off the tape unless the projections
/// were made trainable.
Tensor extract_global_stub(const ImageTensor& image, const StubExtractorParams& params);
/// Local features [local_channels x grid x grid].
Tensor extract_local_stub(const ImageTensor& image, const StubExtractorParams& params);

/// Shapes visited by adapt_local, in order.
struct AdapterTrace {
    std::vector<Shape> shapes;
};

/// C x g x g -> pool(1, tokens) -> permute(2,1,0) -> pool(1, hidden) ->
/// flatten -> tokens x hidden.
Tensor adapt_local(const Tensor& local, std::size_t tokens, std::size_t hidden, AdapterTrace* trace = nullptr);

enum class FusionOp { multiply, add, concatenate };

/// Table-style display name ("Element-wise Multiplication", ...).
std::string_view fusion_display_name(FusionOp op);
/// Config token ("multiply" | "add" | "concatenate").
std::string_view fusion_key(FusionOp op);
FusionOp parse_fusion_op(std::string_view key);
/// Rows produced by fuse() for `tokens` rows per operand.
std::size_t fused_rows(FusionOp op, std::size_t tokens);

/// Combines global and adapted local features. Concatenation stacks the
/// global rows first.
Tensor fuse(const Tensor& global, const Tensor& local_adapted, FusionOp op);

struct SparsityStats {
    double mean = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double iqr() const { return q3 - q1; }
};

/// Order statistics over all elements. Quartiles use the median-exclusive
/// midpoint rule: q1/q3 are the medians of the lower/upper halves, the
/// middle element being excluded from both halves for odd counts.
SparsityStats sparsity_stats(std::span<const double> values);

}  // namespace vivqa::vision
