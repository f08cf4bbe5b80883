#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vivqa/data/dataset.hpp"
#include "vivqa/fusion/multiway.hpp"
#include "vivqa/harness/config.hpp"
#include "vivqa/head/classifier.hpp"
#include "vivqa/optim/adamw.hpp"
#include "vivqa/text/text.hpp"
#include "vivqa/vision/features.hpp"

namespace vivqa::harness {

/// Named shapes in the order one forward pass produced them.
struct ForwardTrace {
    std::vector<std::pair<std::string, Shape>> steps;

    void add(std::string name, const Shape& shape) { steps.emplace_back(std::move(name), shape); }
    /// First shape recorded under `name`; throws ArgumentError if absent.
    const Shape& get(const std::string& name) const;
};

struct ParameterCounts {
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::size_t frozen = 0;
};

/// The full VQA model: stub extractors, adapter and fusion, text encoder and
/// projection, multiway encoder, pooler and classifier head.
class VqaModel {
  public:
    /// Parameters are drawn from the run seed; the stub extractors use the
    /// config's stub_seed so every run sees the same "pretrained" weights.
    VqaModel(RunConfig cfg, text::Vocabulary vocab, data::AnswerVocab answers);

    const RunConfig& config() const noexcept { return cfg_; }
    const text::Vocabulary& vocab() const noexcept { return vocab_; }
    const data::AnswerVocab& answers() const noexcept { return answers_; }
    const vision::StubExtractorParams& extractor() const noexcept { return stub_; }
    std::size_t classes() const { return classifier_.classes(); }

    /// Feature files named by non-synthetic examples are resolved against
    /// this directory when relative.
    void set_data_root(std::filesystem::path root) { data_root_ = std::move(root); }

    /// Raw extractor outputs for one example: (global [T x H], local [C x g x g]).
    std::pair<Tensor, Tensor> extract(const data::Example& ex, ForwardTrace* trace = nullptr) const;

    /// Visual rows V fed to the encoder. With frozen extractors the result is
    /// cached per example id and carries no gradient.
    Tensor visual(const data::Example& ex, ForwardTrace* trace = nullptr);

    /// Logits [1 x classes] for one example.
    Tensor forward(const Tensor& visual_rows, const text::TokenizedQuestion& q, bool training, RngStream& rng,
                   ForwardTrace* trace = nullptr) const;

    /// Every parameter tensor under a stable name, extractor projections included.
    std::vector<optim::Parameter> named_parameters() const;
    /// The subset the optimizer updates; frozen extractors are left out.
    std::vector<optim::Parameter> trainable_parameters() const;
    ParameterCounts parameter_counts() const;

    void clear_feature_cache() { cache_.clear(); }

  private:
    RunConfig cfg_;
    text::Vocabulary vocab_;
    data::AnswerVocab answers_;
    std::filesystem::path data_root_;

    vision::StubExtractorParams stub_;
    text::TextEncoderParams text_encoder_;
    text::ProjectionParams projection_;
    fusion::SequenceEmbeddings embeddings_;
    std::vector<fusion::MultiwayBlockParams> blocks_;
    fusion::PoolerParams pooler_;
    head::ClassifierParams classifier_;

    std::unordered_map<std::string, Tensor> cache_;
};

}  // namespace vivqa::harness
