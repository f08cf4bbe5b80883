#pragma once

#include <cstddef>
#include <vector>

#include "vivqa/core/layers.hpp"
#include "vivqa/core/rng.hpp"
#include "vivqa/core/tensor.hpp"

namespace vivqa::fusion {

/// Which fused row feeds the pooler: row 0 (the first visual token) or
/// row k (the question's [CLS]).
enum class ClsRow { first, text_cls };

struct FusionConfig {
    std::size_t layers = 6;
    std::size_t heads = 6;
    std::size_t hidden = 768;
    std::size_t expert_ffn_width = 3072;
    double drop_path_rate = 0.3;
    bool use_position_embeddings = true;
    bool use_modality_type_embeddings = true;
    ClsRow cls_row = ClsRow::first;

    std::size_t head_dim() const { return hidden / heads; }
    /// Throws ConfigError when heads does not divide hidden.
    void validate() const;
};

/// Fused token rows with the vision/text boundary and key mask.
struct FusedSequence {
    Tensor x;                // [rows x hidden]
    std::size_t boundary;    // rows [0, boundary) are visual
    std::vector<bool> mask;  // false on padded text rows

    std::size_t rows() const { return x.dim(0); }
};

struct ExpertParams {
    AffineParams up;
    AffineParams down;
};

struct MultiwayBlockParams {
    LayerNormParams attention_norm;
    AffineParams query;
    AffineParams key;
    AffineParams value;
    AffineParams output;
    LayerNormParams vision_norm;
    LayerNormParams language_norm;
    ExpertParams vision_expert;
    ExpertParams language_expert;

    static MultiwayBlockParams create(const FusionConfig& cfg, RngStream& rng);
};

/// Optional learned embeddings added on concatenation.
struct SequenceEmbeddings {
    Tensor position;       // [max_rows x hidden], may be undefined
    Tensor modality_type;  // [2 x hidden], may be undefined

    static SequenceEmbeddings create(const FusionConfig& cfg, std::size_t max_rows, RngStream& rng);
};

/// Visual rows first, then text rows. Embeddings are added when present.
FusedSequence concat_modalities(const Tensor& vision, const Tensor& text, const std::vector<bool>& text_mask,
                                const SequenceEmbeddings* embeddings = nullptr);

/// Multi-head self-attention shared by both modalities (pre-normalized
/// input in, pre-residual output out). Keys where mask is false get -inf.
Tensor shared_attention(const Tensor& x, const std::vector<bool>& mask, const MultiwayBlockParams& p,
                        std::size_t heads);

/// Expert feed-forward: up -> GELU -> down.
Tensor expert_forward(const Tensor& x, const ExpertParams& p);

/// Pre-norm multiway block: shared attention residual, then per-modality
/// expert residuals with vision rows [0, k) and text rows [k, end).
FusedSequence multiway_block(const FusedSequence& in, const MultiwayBlockParams& p, std::size_t heads,
                             double drop_rate, bool training, RngStream& rng);

/// Drop-path rate for block `index` of `layers`: linear from 0 to the
/// configured rate.
double block_drop_rate(std::size_t index, const FusionConfig& cfg);

FusedSequence encode(const FusedSequence& in, const std::vector<MultiwayBlockParams>& blocks,
                     const FusionConfig& cfg, bool training, RngStream& rng);

struct PoolerParams {
    LayerNormParams norm;
    AffineParams dense;

    static PoolerParams create(std::size_t hidden, RngStream& rng);
};

std::size_t cls_row_index(const FusedSequence& seq, ClsRow which);

/// Norm -> affine -> tanh over the selected row: [1 x hidden].
Tensor pool_cls(const FusedSequence& seq, const PoolerParams& p, ClsRow which = ClsRow::first);

}  // namespace vivqa::fusion
