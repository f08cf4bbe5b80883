#include "vivqa/fusion/multiway.hpp"

#include <cmath>

#include "vivqa/core/errors.hpp"
#include "vivqa/core/ops.hpp"

namespace vivqa::fusion {

void FusionConfig::validate() const {
    if (hidden == 0 || heads == 0 || hidden % heads != 0) {
        throw ConfigError("fusion: hidden width " + std::to_string(hidden) + " is not divisible by " +
                          std::to_string(heads) + " heads");
    }
    if (expert_ffn_width == 0) throw ConfigError("fusion: expert FFN width must be positive");
    if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0)) throw ConfigError("fusion: drop path rate must lie in [0, 1)");
}

MultiwayBlockParams MultiwayBlockParams::create(const FusionConfig& cfg, RngStream& rng) {
    const std::size_t h = cfg.hidden;
    const std::size_t f = cfg.expert_ffn_width;
    MultiwayBlockParams p;
    p.attention_norm = LayerNormParams::create(h);
    p.query = AffineParams::create(h, h, rng);
    p.key = AffineParams::create(h, h, rng);
    p.value = AffineParams::create(h, h, rng);
    p.output = AffineParams::create(h, h, rng);
    p.vision_norm = LayerNormParams::create(h);
    p.language_norm = LayerNormParams::create(h);
    p.vision_expert = {AffineParams::create(h, f, rng), AffineParams::create(f, h, rng)};
    p.language_expert = {AffineParams::create(h, f, rng), AffineParams::create(f, h, rng)};
    return p;
}

SequenceEmbeddings SequenceEmbeddings::create(const FusionConfig& cfg, std::size_t max_rows, RngStream& rng) {
    SequenceEmbeddings e;
    if (cfg.use_position_embeddings) e.position = Tensor::randn({max_rows, cfg.hidden}, rng, 0.02, true);
    if (cfg.use_modality_type_embeddings) e.modality_type = Tensor::randn({2, cfg.hidden}, rng, 0.02, true);
    return e;
}

FusedSequence concat_modalities(const Tensor& vision, const Tensor& text, const std::vector<bool>& text_mask,
                                const SequenceEmbeddings* embeddings) {
    if (vision.rank() != 2 || text.rank() != 2 || vision.dim(1) != text.dim(1)) {
        throw ShapeError("concat_modalities: widths differ, " + shape_str(vision.shape()) + " vs " +
                         shape_str(text.shape()));
    }
    if (text_mask.size() != text.dim(0)) throw ShapeError("concat_modalities: text mask length mismatch");
    const std::size_t k = vision.dim(0);
    const std::size_t rows = k + text.dim(0);
    Tensor x = ops::concat({vision, text}, 0);
    if (embeddings && embeddings->position.defined()) {
        if (embeddings->position.dim(0) < rows) {
            throw ShapeError("concat_modalities: position table has " + std::to_string(embeddings->position.dim(0)) +
                             " rows, sequence needs " + std::to_string(rows));
        }
        x = ops::add(x, ops::slice(embeddings->position, 0, 0, rows));
    }
    if (embeddings && embeddings->modality_type.defined()) {
        std::vector<std::size_t> types(rows, 1);
        for (std::size_t i = 0; i < k; ++i) types[i] = 0;
        x = ops::add(x, ops::embedding_lookup(embeddings->modality_type, types));
    }
    std::vector<bool> mask(k, true);
    mask.insert(mask.end(), text_mask.begin(), text_mask.end());
    return {std::move(x), k, std::move(mask)};
}

Tensor shared_attention(const Tensor& x, const std::vector<bool>& mask, const MultiwayBlockParams& p,
                        std::size_t heads) {
    const std::size_t hidden = x.dim(1);
    const std::size_t d = hidden / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const Tensor q = p.query(x);
    const Tensor k = p.key(x);
    const Tensor v = p.value(x);
    std::vector<Tensor> head_outputs;
    head_outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor qh = ops::slice(q, 1, h * d, (h + 1) * d);
        const Tensor kh = ops::slice(k, 1, h * d, (h + 1) * d);
        const Tensor vh = ops::slice(v, 1, h * d, (h + 1) * d);
        Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), scale);
        scores = ops::mask_columns(scores, mask);
        head_outputs.push_back(ops::matmul(ops::softmax(scores, 1), vh));
    }
    const Tensor merged = heads == 1 ? head_outputs.front() : ops::concat(head_outputs, 1);
    return p.output(merged);
}

Tensor expert_forward(const Tensor& x, const ExpertParams& p) { return p.down(ops::gelu(p.up(x))); }

FusedSequence multiway_block(const FusedSequence& in, const MultiwayBlockParams& p, std::size_t heads,
                             double drop_rate, bool training, RngStream& rng) {
    const std::size_t rows = in.rows();
    const std::size_t k = in.boundary;
    if (k == 0 || k >= rows) {
        throw ArgumentError("multiway_block: boundary " + std::to_string(k) + " outside (0, " +
                            std::to_string(rows) + ")");
    }
    if (in.mask.size() != rows) throw ShapeError("multiway_block: mask length does not match rows");

    const Tensor attended = shared_attention(p.attention_norm(in.x), in.mask, p, heads);
    const Tensor x = ops::add(in.x, ops::drop_path(attended, drop_rate, training, rng));

    const Tensor vision_rows = ops::slice(x, 0, 0, k);
    const Tensor text_rows = ops::slice(x, 0, k, rows);
    const Tensor vision_out = expert_forward(p.vision_norm(vision_rows), p.vision_expert);
    const Tensor text_out = expert_forward(p.language_norm(text_rows), p.language_expert);
    const Tensor branch = ops::concat({vision_out, text_out}, 0);
    return {ops::add(x, ops::drop_path(branch, drop_rate, training, rng)), k, in.mask};
}

double block_drop_rate(std::size_t index, const FusionConfig& cfg) {
    if (cfg.layers <= 1) return 0.0;
    return cfg.drop_path_rate * static_cast<double>(index) / static_cast<double>(cfg.layers - 1);
}

FusedSequence encode(const FusedSequence& in, const std::vector<MultiwayBlockParams>& blocks,
                     const FusionConfig& cfg, bool training, RngStream& rng) {
    if (blocks.size() != cfg.layers) {
        throw ConfigError("encode: " + std::to_string(blocks.size()) + " blocks for " + std::to_string(cfg.layers) +
                          " configured layers");
    }
    FusedSequence seq = in;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        seq = multiway_block(seq, blocks[i], cfg.heads, block_drop_rate(i, cfg), training, rng);
    }
    return seq;
}

PoolerParams PoolerParams::create(std::size_t hidden, RngStream& rng) {
    return {LayerNormParams::create(hidden), AffineParams::create(hidden, hidden, rng)};
}

std::size_t cls_row_index(const FusedSequence& seq, ClsRow which) {
    return which == ClsRow::first ? 0 : seq.boundary;
}

Tensor pool_cls(const FusedSequence& seq, const PoolerParams& p, ClsRow which) {
    if (seq.rows() == 0) throw ArgumentError("pool_cls: empty sequence");
    const std::size_t r = cls_row_index(seq, which);
    return ops::tanh(p.dense(p.norm(ops::slice(seq.x, 0, r, r + 1))));
}

}  // namespace vivqa::fusion
