#include "vivqa/harness/model.hpp"

#include "vivqa/core/errors.hpp"
#include "vivqa/core/ops.hpp"
#include "vivqa/vision/feature_file.hpp"

namespace vivqa::harness {

const Shape& ForwardTrace::get(const std::string& name) const {
    for (const auto& [n, s] : steps) {
        if (n == name) return s;
    }
    throw ArgumentError("forward trace has no step '" + name + "'");
}

VqaModel::VqaModel(RunConfig cfg, text::Vocabulary vocab, data::AnswerVocab answers)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), answers_(std::move(answers)) {
    cfg_.validate();
    if (answers_.size() == 0) throw ConfigError("model needs at least one answer class");
    const vision::VisionDims dims = cfg_.vision_dims();
    const fusion::FusionConfig fc = cfg_.fusion_config();

    stub_ = vision::StubExtractorParams::create(dims, cfg_.stub_seed);
    stub_.set_trainable(!cfg_.freeze_extractors);

    const RngStream root = RngStream(cfg_.seed).split("model");
    RngStream text_rng = root.split("text");
    text_encoder_ = text::TextEncoderParams::create(vocab_.size(), cfg_.max_question_len, cfg_.text_dim(), text_rng);
    RngStream proj_rng = root.split("projection");
    projection_ = text::ProjectionParams::create(cfg_.text_dim(), dims.hidden, proj_rng);
    RngStream emb_rng = root.split("embeddings");
    embeddings_ =
        fusion::SequenceEmbeddings::create(fc, cfg_.visual_tokens() + cfg_.max_question_len + 2, emb_rng);
    for (std::size_t i = 0; i < fc.layers; ++i) {
        RngStream block_rng = root.split("block").split(i);
        blocks_.push_back(fusion::MultiwayBlockParams::create(fc, block_rng));
    }
    RngStream pool_rng = root.split("pooler");
    pooler_ = fusion::PoolerParams::create(dims.hidden, pool_rng);
    RngStream head_rng = root.split("classifier");
    classifier_ = head::ClassifierParams::create(dims.hidden, answers_.size(), head_rng);
}

std::pair<Tensor, Tensor> VqaModel::extract(const data::Example& ex, ForwardTrace* trace) const {
    const vision::VisionDims dims = cfg_.vision_dims();
    Tensor global;
    Tensor local;
    if (data::is_synthetic(ex.image)) {
        const vision::ImageTensor image = data::render_synthetic(data::SyntheticSpec::decode(ex.image), dims);
        if (trace) trace->add("image", image.pixels().shape());
        global = vision::extract_global_stub(image, stub_);
        local = vision::extract_local_stub(image, stub_);
    } else {
        std::filesystem::path base(ex.image);
        if (base.is_relative() && !data_root_.empty()) base = data_root_ / base;
        global = vision::read_feature_file(base.string() + ".global.vvqf");
        local = vision::read_feature_file(base.string() + ".local.vvqf");
        const Shape want_global{dims.global_tokens, dims.hidden};
        const Shape want_local{dims.local_channels, dims.grid, dims.grid};
        if (global.shape() != want_global || local.shape() != want_local) {
            throw DataError("example '" + ex.id + "': feature files have shapes " + shape_str(global.shape()) +
                            " and " + shape_str(local.shape()) + ", expected " + shape_str(want_global) + " and " +
                            shape_str(want_local));
        }
    }
    if (trace) {
        trace->add("global", global.shape());
        trace->add("local", local.shape());
    }
    return {global, local};
}

Tensor VqaModel::visual(const data::Example& ex, ForwardTrace* trace) {
    const bool cacheable = cfg_.freeze_extractors && trace == nullptr;
    if (cacheable) {
        if (auto it = cache_.find(ex.id); it != cache_.end()) return it->second;
    }
    auto compute = [&] {
        const vision::VisionDims dims = cfg_.vision_dims();
        auto [global, local] = extract(ex, trace);
        if (cfg_.extractors == ExtractorMode::global_only) return global;
        vision::AdapterTrace adapter;
        const Tensor adapted = vision::adapt_local(local, dims.global_tokens, dims.hidden, &adapter);
        if (trace) {
            for (std::size_t i = 0; i < adapter.shapes.size(); ++i) {
                trace->add("adapter." + std::to_string(i), adapter.shapes[i]);
            }
        }
        if (cfg_.extractors == ExtractorMode::local_only) return adapted;
        return vision::fuse(global, adapted, cfg_.fusion);
    };
    Tensor v;
    if (cfg_.freeze_extractors) {
        NoGradGuard guard;
        v = compute();
    } else {
        v = compute();
    }
    if (trace) trace->add("visual", v.shape());
    if (cacheable) cache_.emplace(ex.id, v);
    return v;
}

Tensor VqaModel::forward(const Tensor& visual_rows, const text::TokenizedQuestion& q, bool training, RngStream& rng,
                         ForwardTrace* trace) const {
    if (q.max_len != cfg_.max_question_len) {
        throw ShapeError("forward: question tokenized to " + std::to_string(q.max_len) + " words, model expects " +
                         std::to_string(cfg_.max_question_len));
    }
    const fusion::FusionConfig fc = cfg_.fusion_config();
    const Tensor encoded = text::encode(q, text_encoder_);
    const Tensor projected = text::project(encoded, projection_);
    fusion::FusedSequence seq = fusion::concat_modalities(visual_rows, projected, q.mask, &embeddings_);
    if (trace) {
        trace->add("text", encoded.shape());
        trace->add("text_projected", projected.shape());
        trace->add("sequence", seq.x.shape());
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        seq = fusion::multiway_block(seq, blocks_[i], fc.heads, fusion::block_drop_rate(i, fc), training, rng);
        if (trace) trace->add("block." + std::to_string(i), seq.x.shape());
    }
    const Tensor pooled = fusion::pool_cls(seq, pooler_, fc.cls_row);
    Shape hidden_shape;
    Tensor logits = head::classify(pooled, classifier_, &hidden_shape);
    if (trace) {
        trace->add("pooled", pooled.shape());
        trace->add("classifier_hidden", hidden_shape);
        trace->add("logits", logits.shape());
    }
    return logits;
}

namespace {

void add_affine(std::vector<optim::Parameter>& out, const std::string& prefix, const AffineParams& p) {
    out.push_back({prefix + ".weight", p.weight, false});
    out.push_back({prefix + ".bias", p.bias, true});
}

void add_norm(std::vector<optim::Parameter>& out, const std::string& prefix, const LayerNormParams& p) {
    out.push_back({prefix + ".gamma", p.gamma, true});
    out.push_back({prefix + ".beta", p.beta, true});
}

}  // namespace

std::vector<optim::Parameter> VqaModel::named_parameters() const {
    std::vector<optim::Parameter> out;
    out.push_back({"extractor.global_weight", stub_.global_weight, false});
    out.push_back({"extractor.global_bias", stub_.global_bias, true});
    out.push_back({"extractor.local_weight", stub_.local_weight, false});
    out.push_back({"extractor.local_bias", stub_.local_bias, true});
    out.push_back({"text.token_table", text_encoder_.token_table, false});
    out.push_back({"text.position_table", text_encoder_.position_table, false});
    out.push_back({"projection.weight", projection_.weight, false});
    out.push_back({"projection.bias", projection_.bias, true});
    if (embeddings_.position.defined()) out.push_back({"embeddings.position", embeddings_.position, false});
    if (embeddings_.modality_type.defined()) {
        out.push_back({"embeddings.modality_type", embeddings_.modality_type, false});
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const std::string b = "blocks." + std::to_string(i);
        const auto& p = blocks_[i];
        add_norm(out, b + ".attention_norm", p.attention_norm);
        add_affine(out, b + ".query", p.query);
        add_affine(out, b + ".key", p.key);
        add_affine(out, b + ".value", p.value);
        add_affine(out, b + ".output", p.output);
        add_norm(out, b + ".vision_norm", p.vision_norm);
        add_norm(out, b + ".language_norm", p.language_norm);
        add_affine(out, b + ".vision_expert.up", p.vision_expert.up);
        add_affine(out, b + ".vision_expert.down", p.vision_expert.down);
        add_affine(out, b + ".language_expert.up", p.language_expert.up);
        add_affine(out, b + ".language_expert.down", p.language_expert.down);
    }
    add_norm(out, "pooler.norm", pooler_.norm);
    add_affine(out, "pooler.dense", pooler_.dense);
    add_affine(out, "classifier.hidden", classifier_.hidden);
    add_norm(out, "classifier.norm", classifier_.norm);
    add_affine(out, "classifier.projection", classifier_.projection);
    if (!cfg_.decay_exempt_norms_and_biases) {
        for (auto& p : out) p.decay_exempt = false;
    }
    return out;
}

std::vector<optim::Parameter> VqaModel::trainable_parameters() const {
    std::vector<optim::Parameter> out;
    for (auto& p : named_parameters()) {
        if (p.value.requires_grad()) out.push_back(std::move(p));
    }
    return out;
}

ParameterCounts VqaModel::parameter_counts() const {
    ParameterCounts c;
    for (const auto& p : named_parameters()) {
        c.total += p.value.numel();
        if (p.value.requires_grad()) c.trainable += p.value.numel();
    }
    c.frozen = c.total - c.trainable;
    return c;
}

}  // namespace vivqa::harness
