#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "vivqa/fusion/multiway.hpp"
#include "vivqa/vision/features.hpp"

namespace vivqa::harness {

enum class Preset { paper, tiny };

/// Which visual representation feeds the fusion encoder.
enum class ExtractorMode { combined, global_only, local_only };

std::string_view preset_key(Preset p);
std::string_view extractor_mode_key(ExtractorMode m);
ExtractorMode parse_extractor_mode(std::string_view key);

/// Training and architecture settings. Defaults are the reference training
/// hyperparameters; the preset decides the model dimensions.
struct RunConfig {
    Preset preset = Preset::paper;

    // Optimization.
    std::size_t epochs = 20;
    std::size_t batch_size = 65;
    double lr = 3e-5;
    double adam_eps = 1e-8;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double weight_decay = 0.01;
    std::string scheduler = "cosine";
    double warmup_ratio = 0.1;
    double floor_lr = 0.0;
    bool decay_exempt_norms_and_biases = true;
    bool dropout = false;

    // Fusion encoder.
    std::size_t layers = 6;
    std::size_t heads = 6;
    double drop_path = 0.3;
    bool use_position_embeddings = true;
    bool use_modality_type_embeddings = true;
    fusion::ClsRow cls_row = fusion::ClsRow::first;

    // Visual pathway.
    vision::FusionOp fusion = vision::FusionOp::concatenate;
    ExtractorMode extractors = ExtractorMode::combined;
    bool freeze_extractors = true;
    std::uint64_t stub_seed = 1234;

    // Dimension overrides (tiny preset only).
    std::optional<std::size_t> hidden;
    std::optional<std::size_t> text_width;
    std::optional<std::size_t> global_tokens;
    std::optional<std::size_t> local_channels;
    std::optional<std::size_t> image_size;
    std::optional<std::size_t> expert_ffn_width;

    // Data and run.
    std::uint64_t seed = 0;
    std::size_t max_question_len = 26;
    std::size_t min_token_count = 1;
    double split_ratio = 0.8;
    std::string train_data;
    std::string test_data;
    std::string out_dir;

    /// Applies the preset defaults that differ from the reference settings
    /// (tiny: 2 layers, 2 heads, lr 1e-3).
    static RunConfig for_preset(Preset p);

    vision::VisionDims vision_dims() const;
    std::size_t text_dim() const;
    fusion::FusionConfig fusion_config() const;
    std::size_t visual_tokens() const;  // rows of V fed to the encoder

    /// Throws ConfigError on inconsistent settings.
    void validate() const;

    nlohmann::ordered_json to_json() const;
    /// Unknown keys are rejected. Missing keys keep the preset defaults.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
};

}  // namespace vivqa::harness
