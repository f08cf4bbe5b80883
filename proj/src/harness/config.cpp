#include "vivqa/harness/config.hpp"

#include <fstream>
#include <set>

#include "vivqa/core/errors.hpp"

namespace vivqa::harness {

std::string_view preset_key(Preset p) { return p == Preset::paper ? "paper" : "tiny"; }

std::string_view extractor_mode_key(ExtractorMode m) {
    switch (m) {
        case ExtractorMode::combined:
            return "combined";
        case ExtractorMode::global_only:
            return "global_only";
        case ExtractorMode::local_only:
            return "local_only";
    }
    return "";
}

ExtractorMode parse_extractor_mode(std::string_view key) {
    if (key == "combined") return ExtractorMode::combined;
    if (key == "global_only") return ExtractorMode::global_only;
    if (key == "local_only") return ExtractorMode::local_only;
    throw ConfigError("unknown extractor mode '" + std::string(key) + "'");
}

namespace {

Preset parse_preset(std::string_view key) {
    if (key == "paper") return Preset::paper;
    if (key == "tiny") return Preset::tiny;
    throw ConfigError("unknown preset '" + std::string(key) + "'");
}

fusion::ClsRow parse_cls_row(const nlohmann::json& v) {
    if (v.is_number_integer() && v.get<long long>() == 0) return fusion::ClsRow::first;
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "0" || s == "first") return fusion::ClsRow::first;
        if (s == "k" || s == "text_cls") return fusion::ClsRow::text_cls;
    }
    throw ConfigError("cls_row must be 0 or \"k\"");
}

}  // namespace

RunConfig RunConfig::for_preset(Preset p) {
    RunConfig c;
    c.preset = p;
    if (p == Preset::tiny) {
        c.layers = 2;
        c.heads = 2;
        c.lr = 1e-3;
        c.max_question_len = 8;
    }
    return c;
}

vision::VisionDims RunConfig::vision_dims() const {
    vision::VisionDims d = preset == Preset::paper ? vision::VisionDims::paper() : vision::VisionDims::tiny();
    if (hidden) d.hidden = *hidden;
    if (global_tokens) d.global_tokens = *global_tokens;
    if (local_channels) d.local_channels = *local_channels;
    if (image_size) d.image_size = *image_size;
    return d;
}

std::size_t RunConfig::text_dim() const {
    if (text_width) return *text_width;
    return preset == Preset::paper ? 1024 : 32;
}

fusion::FusionConfig RunConfig::fusion_config() const {
    fusion::FusionConfig f;
    f.layers = layers;
    f.heads = heads;
    f.hidden = vision_dims().hidden;
    f.expert_ffn_width = expert_ffn_width ? *expert_ffn_width : 4 * f.hidden;
    f.drop_path_rate = drop_path;
    f.use_position_embeddings = use_position_embeddings;
    f.use_modality_type_embeddings = use_modality_type_embeddings;
    f.cls_row = cls_row;
    return f;
}

std::size_t RunConfig::visual_tokens() const {
    const std::size_t t = vision_dims().global_tokens;
    return extractors == ExtractorMode::combined ? vision::fused_rows(fusion, t) : t;
}

void RunConfig::validate() const {
    if (preset == Preset::paper) {
        if (hidden || text_width || global_tokens || local_channels || image_size || expert_ffn_width) {
            throw ConfigError("the 'paper' preset fixes all model dimensions; remove the dimension overrides");
        }
        if (dropout) throw ConfigError("the 'paper' preset trains without dropout");
    }
    if (dropout) throw ConfigError("dropout is not supported; use drop_path");
    vision_dims().validate();
    fusion_config().validate();
    if (text_dim() == 0) throw ConfigError("text width must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (max_question_len == 0) throw ConfigError("max_question_len must be at least 1");
    if (lr < 0.0) throw ConfigError("lr must be non-negative");
    if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw ConfigError("warmup_ratio must lie in [0, 1)");
    if (scheduler != "cosine") throw ConfigError("only the cosine scheduler is supported");
    if (!(split_ratio > 0.0 && split_ratio <= 1.0)) throw ConfigError("split_ratio must lie in (0, 1]");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("AdamW betas must lie in [0, 1)");
    }
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["preset"] = preset_key(preset);
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["adam_eps"] = adam_eps;
    j["adam_betas"] = {adam_beta1, adam_beta2};
    j["weight_decay"] = weight_decay;
    j["scheduler"] = scheduler;
    j["warmup_ratio"] = warmup_ratio;
    j["floor_lr"] = floor_lr;
    j["decay_exempt_norms_and_biases"] = decay_exempt_norms_and_biases;
    j["dropout"] = dropout;
    j["layers"] = layers;
    j["heads"] = heads;
    j["drop_path"] = drop_path;
    j["use_position_embeddings"] = use_position_embeddings;
    j["use_modality_type_embeddings"] = use_modality_type_embeddings;
    j["cls_row"] = cls_row == fusion::ClsRow::first ? "0" : "k";
    j["fusion"] = vision::fusion_key(fusion);
    j["extractors"] = extractor_mode_key(extractors);
    j["freeze_extractors"] = freeze_extractors;
    j["stub_seed"] = stub_seed;
    if (hidden) j["hidden"] = *hidden;
    if (text_width) j["text_width"] = *text_width;
    if (global_tokens) j["global_tokens"] = *global_tokens;
    if (local_channels) j["local_channels"] = *local_channels;
    if (image_size) j["image_size"] = *image_size;
    if (expert_ffn_width) j["expert_ffn_width"] = *expert_ffn_width;
    j["seed"] = seed;
    j["max_question_len"] = max_question_len;
    j["min_token_count"] = min_token_count;
    j["split_ratio"] = split_ratio;
    j["train_data"] = train_data;
    j["test_data"] = test_data;
    j["out_dir"] = out_dir;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known = {
        "preset", "epochs", "batch_size", "lr", "adam_eps", "adam_betas", "weight_decay", "scheduler",
        "warmup_ratio", "floor_lr", "decay_exempt_norms_and_biases", "dropout", "layers", "heads", "drop_path",
        "use_position_embeddings", "use_modality_type_embeddings", "cls_row", "fusion", "extractors",
        "freeze_extractors", "stub_seed", "hidden", "text_width", "global_tokens", "local_channels", "image_size",
        "expert_ffn_width", "seed", "max_question_len", "min_token_count", "split_ratio", "train_data",
        "test_data", "out_dir"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");
    }
    RunConfig c = for_preset(j.contains("preset") ? parse_preset(j["preset"].get<std::string>()) : Preset::paper);
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
        };
        auto get_opt = [&](const char* key, std::optional<std::size_t>& field) {
            if (j.contains(key) && !j[key].is_null()) field = j[key].get<std::size_t>();
        };
        get("epochs", c.epochs);
        get("batch_size", c.batch_size);
        get("lr", c.lr);
        get("adam_eps", c.adam_eps);
        if (j.contains("adam_betas")) {
            const auto& b = j["adam_betas"];
            if (!b.is_array() || b.size() != 2) throw ConfigError("adam_betas must be a pair");
            c.adam_beta1 = b[0].get<double>();
            c.adam_beta2 = b[1].get<double>();
        }
        get("weight_decay", c.weight_decay);
        get("scheduler", c.scheduler);
        get("warmup_ratio", c.warmup_ratio);
        get("floor_lr", c.floor_lr);
        get("decay_exempt_norms_and_biases", c.decay_exempt_norms_and_biases);
        get("dropout", c.dropout);
        get("layers", c.layers);
        get("heads", c.heads);
        get("drop_path", c.drop_path);
        get("use_position_embeddings", c.use_position_embeddings);
        get("use_modality_type_embeddings", c.use_modality_type_embeddings);
        if (j.contains("cls_row")) c.cls_row = parse_cls_row(j["cls_row"]);
        if (j.contains("fusion")) c.fusion = vision::parse_fusion_op(j["fusion"].get<std::string>());
        if (j.contains("extractors")) c.extractors = parse_extractor_mode(j["extractors"].get<std::string>());
        get("freeze_extractors", c.freeze_extractors);
        get("stub_seed", c.stub_seed);
        get_opt("hidden", c.hidden);
        get_opt("text_width", c.text_width);
        get_opt("global_tokens", c.global_tokens);
        get_opt("local_channels", c.local_channels);
        get_opt("image_size", c.image_size);
        get_opt("expert_ffn_width", c.expert_ffn_width);
        get("seed", c.seed);
        get("max_question_len", c.max_question_len);
        get("min_token_count", c.min_token_count);
        get("split_ratio", c.split_ratio);
        get("train_data", c.train_data);
        get("test_data", c.test_data);
        get("out_dir", c.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field has the wrong type: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

}  // namespace vivqa::harness
