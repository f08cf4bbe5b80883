#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "vivqa/core/errors.hpp"
#include "vivqa/data/dataset.hpp"
#include "vivqa/harness/ablation.hpp"
#include "vivqa/harness/checkpoint.hpp"
#include "vivqa/harness/config.hpp"
#include "vivqa/harness/run.hpp"
#include "vivqa/metrics/metrics.hpp"

namespace fs = std::filesystem;
using namespace vivqa;
using harness::RunConfig;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct CommonOptions {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string data;
    std::string test_data;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_data = true) {
    cmd->add_option("--config", o.config, "RunConfig JSON file");
    cmd->add_option("--preset", o.preset, "paper or tiny")->check(CLI::IsMember({"paper", "tiny"}));
    cmd->add_option("--seed", o.seed, "run seed");
    if (with_data) {
        cmd->add_option("--data", o.data, "training corpus (JSON Lines)");
        cmd->add_option("--test-data", o.test_data, "held-out corpus; default splits --data");
    }
    cmd->add_option("--out", o.out, "output directory");
}

RunConfig load_config(const std::string& path, const std::string& preset) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config " + path);
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config " + path + " is not valid JSON: " + e.what());
        }
    }
    if (!preset.empty()) {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        j["preset"] = preset;
    }
    return RunConfig::from_json(j);
}

RunConfig resolve(const CommonOptions& o) {
    RunConfig cfg = load_config(o.config, o.preset);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.data.empty()) cfg.train_data = o.data;
    if (!o.test_data.empty()) cfg.test_data = o.test_data;
    if (!o.out.empty()) cfg.out_dir = o.out;
    cfg.validate();
    return cfg;
}

/// Corpus from the config, or the default complementary-cue corpus.
harness::RunData run_data_or_synthetic(const RunConfig& cfg) {
    if (!cfg.train_data.empty()) return harness::load_run_data(cfg);
    return harness::synthetic_run_data(cfg);
}

fs::path out_dir(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("no output directory given (--out)");
    return cfg.out_dir;
}

std::vector<std::size_t> parse_values(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("bad sweep value '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("--values is empty");
    return out;
}

int cmd_train(const CommonOptions& o) {
    const RunConfig cfg = resolve(o);
    const fs::path dir = out_dir(cfg);
    const harness::RunData data = harness::load_run_data(cfg);
    const harness::TrainResult result = harness::train(cfg, data);
    harness::write_run_outputs(dir, result);
    std::cout << result.report.to_markdown();
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_path, const std::string& out) {
    harness::LoadedCheckpoint loaded = harness::load_checkpoint(ckpt);
    const auto examples = data::load_jsonl(data_path);
    loaded.model->set_data_root(fs::path(data_path).parent_path());
    const harness::EvalResult r = harness::evaluate(*loaded.model, examples);
    if (!out.empty()) {
        const fs::path dir(out);
        fs::create_directories(dir);
        metrics::write_predictions(dir / "predictions.jsonl", r.predictions);
        harness::write_text(dir / "metrics.json", harness::metrics_json(r.metrics).dump(2) + "\n");
    }
    std::cout << harness::metrics_json(r.metrics).dump(2) << "\n";
    return 0;
}

int cmd_ablate(const std::string& which, const CommonOptions& o, std::size_t n_seeds) {
    const RunConfig cfg = resolve(o);
    const fs::path dir = out_dir(cfg);
    const harness::RunData data = run_data_or_synthetic(cfg);
    if (which == "fusion") {
        const auto r = harness::ablate_fusion(cfg, data);
        harness::write_text(dir / "fusion.md", r.to_markdown());
        harness::write_text(dir / "fusion.csv", r.to_csv());
        harness::write_text(dir / "fusion_sparsity.csv", r.sparsity_csv());
        std::cout << r.to_markdown();
    } else if (which == "extractors") {
        const auto r = harness::ablate_extractors(cfg, data, n_seeds);
        harness::write_text(dir / "extractors.md", r.to_markdown());
        harness::write_text(dir / "extractors.csv", r.to_csv());
        std::cout << r.to_markdown();
    } else {
        const auto r = harness::ablate_freeze(cfg, data);
        harness::write_text(dir / "freeze.md", r.to_markdown());
        harness::write_text(dir / "freeze.csv", r.to_csv());
        nlohmann::ordered_json timing;
        timing["frozen_seconds"] = r.frozen.train_seconds;
        timing["unfrozen_seconds"] = r.unfrozen.train_seconds;
        harness::write_text(dir / "timing.json", timing.dump(2) + "\n");
        std::cout << r.to_markdown();
    }
    return 0;
}

int cmd_sweep(const std::string& axis, const std::string& values, const CommonOptions& o) {
    const RunConfig cfg = resolve(o);
    const auto parsed = parse_values(values);
    const auto ax = harness::parse_sweep_axis(axis);
    const fs::path dir = out_dir(cfg);
    const harness::RunData data = run_data_or_synthetic(cfg);
    const auto r = harness::sweep(cfg, ax, parsed, data);
    harness::write_text(dir / ("sweep_" + axis + ".csv"), r.to_csv());
    std::cout << r.to_csv();
    return 0;
}

int cmd_significance(const std::string& config_a, const std::string& config_b, std::size_t seeds,
                     const CommonOptions& o) {
    CommonOptions oa = o;
    oa.config = config_a;
    CommonOptions ob = o;
    ob.config = config_b;
    const RunConfig a = resolve(oa);
    const RunConfig b = resolve(ob);
    const fs::path dir = out_dir(a);
    const harness::RunData data = run_data_or_synthetic(a);
    const auto r = harness::significance(a, b, seeds, data);
    harness::write_text(dir / "significance.csv", r.to_csv());
    harness::write_text(dir / "significance.md", r.to_markdown());
    std::cout << r.to_markdown();
    return 0;
}

int cmd_stats(const std::string& data_path) {
    const auto examples = data::load_jsonl(data_path);
    std::cout << data::render_stats(data::corpus_stats(examples));
    return 0;
}

int cmd_synth(std::size_t n, std::size_t g, std::size_t l, std::uint64_t seed, const std::string& out) {
    const auto examples = data::make_synthetic(n, g, l, seed);
    const fs::path dir(out);
    fs::create_directories(dir);
    data::save_jsonl(dir / "synthetic.jsonl", examples);
    std::cout << "wrote " << examples.size() << " examples to " << (dir / "synthetic.jsonl").string() << "\n";
    return 0;
}

int cmd_metrics(const std::string& predictions, bool multiset) {
    const auto records = metrics::read_predictions(predictions);
    const auto m = metrics::evaluate(records, multiset ? metrics::TokenSemantics::multiset : metrics::TokenSemantics::set);
    std::cout << harness::metrics_json(m).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vietnamese VQA training and ablation harness"};
    app.require_subcommand(1);

    CommonOptions train_opts;
    auto* train = app.add_subcommand("train", "train one model");
    add_common(train, train_opts);

    std::string ckpt, eval_data, eval_out;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "corpus (JSON Lines)")->required();
    eval->add_option("--out", eval_out, "output directory");

    CommonOptions ablate_opts;
    std::string which;
    std::size_t ablate_seeds = 5;
    auto* ablate = app.add_subcommand("ablate", "fusion, extractor or freeze ablation");
    ablate->add_option("which", which, "fusion | extractors | freeze")
        ->required()
        ->check(CLI::IsMember({"fusion", "extractors", "freeze"}));
    ablate->add_option("--seeds", ablate_seeds, "seeds per arm (extractors)");
    add_common(ablate, ablate_opts);

    CommonOptions sweep_opts;
    std::string axis, values;
    auto* sweep = app.add_subcommand("sweep", "heads or layers sweep");
    sweep->add_option("--axis", axis, "heads | layers")->required()->check(CLI::IsMember({"heads", "layers"}));
    sweep->add_option("--values", values, "comma separated values")->required();
    add_common(sweep, sweep_opts);

    CommonOptions sig_opts;
    std::string config_a, config_b;
    std::size_t sig_seeds = 10;
    auto* sig = app.add_subcommand("significance", "multi-seed Welch test of two configs");
    sig->add_option("--config-a", config_a, "first config")->required();
    sig->add_option("--config-b", config_b, "second config")->required();
    sig->add_option("--seeds", sig_seeds, "number of seeds");
    sig->add_option("--preset", sig_opts.preset, "paper or tiny")->check(CLI::IsMember({"paper", "tiny"}));
    sig->add_option("--seed", sig_opts.seed, "first seed");
    sig->add_option("--data", sig_opts.data, "training corpus (JSON Lines)");
    sig->add_option("--test-data", sig_opts.test_data, "held-out corpus");
    sig->add_option("--out", sig_opts.out, "output directory");

    std::string stats_data;
    auto* stats = app.add_subcommand("stats", "corpus statistics table");
    stats->add_option("--data", stats_data, "corpus (JSON Lines)")->required();

    std::size_t synth_n = 160, synth_g = 4, synth_l = 4;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write a complementary-cue synthetic corpus");
    synth->add_option("--n", synth_n, "examples");
    synth->add_option("--global", synth_g, "global cue count");
    synth->add_option("--local", synth_l, "local cue count");
    synth->add_option("--seed", synth_seed, "seed");
    synth->add_option("--out", synth_out, "output directory")->required();

    std::string predictions;
    bool multiset = false;
    auto* metrics_cmd = app.add_subcommand("metrics", "score a predictions file");
    metrics_cmd->add_option("--predictions", predictions, "predictions (JSON Lines)")->required();
    metrics_cmd->add_flag("--multiset", multiset, "count repeated tokens");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*train) return cmd_train(train_opts);
        if (*eval) return cmd_eval(ckpt, eval_data, eval_out);
        if (*ablate) return cmd_ablate(which, ablate_opts, ablate_seeds);
        if (*sweep) return cmd_sweep(axis, values, sweep_opts);
        if (*sig) return cmd_significance(config_a, config_b, sig_seeds, sig_opts);
        if (*stats) return cmd_stats(stats_data);
        if (*synth) return cmd_synth(synth_n, synth_g, synth_l, synth_seed, synth_out);
        if (*metrics_cmd) return cmd_metrics(predictions, multiset);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}
