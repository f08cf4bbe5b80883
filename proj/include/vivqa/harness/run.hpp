#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vivqa/data/dataset.hpp"
#include "vivqa/harness/config.hpp"
#include "vivqa/harness/model.hpp"
#include "vivqa/metrics/metrics.hpp"
#include "vivqa/optim/adamw.hpp"

namespace vivqa::harness {

struct RunData {
    std::vector<data::Example> train;
    std::vector<data::Example> test;
    std::filesystem::path root;  // where relative feature paths resolve
};

/// Reads cfg.train_data; when cfg.test_data is empty the corpus is split with
/// split_ratio under cfg.seed.
RunData load_run_data(const RunConfig& cfg);

/// make_synthetic(n, n_global, n_local, cfg.seed) split like any corpus.
RunData synthetic_run_data(const RunConfig& cfg, std::size_t n = 160, std::size_t n_global = 4,
                           std::size_t n_local = 4);

/// Wraps in-memory examples, splitting them the same way load_run_data does.
RunData split_run_data(const std::vector<data::Example>& corpus, const RunConfig& cfg);

struct RunReport {
    nlohmann::ordered_json config;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::size_t optimizer_steps = 0;
    std::vector<double> epoch_losses;  // mean per-example loss of each epoch
    metrics::MetricsReport train_metrics;
    std::optional<metrics::MetricsReport> test_metrics;
    ParameterCounts parameters;
    std::size_t backward_visits = 0;  // tape nodes visited over the whole run
    double train_seconds = 0.0;       // wall clock; not part of to_json()

    /// Deterministic for a given config, seed and corpus.
    nlohmann::ordered_json to_json() const;
    std::string to_markdown() const;
};

struct TrainResult {
    std::unique_ptr<VqaModel> model;
    optim::AdamWState optimizer;
    RunReport report;
    std::vector<metrics::PredictionRecord> train_predictions;
    std::vector<metrics::PredictionRecord> test_predictions;
};

/// Cross-entropy training with AdamW and the warmup-cosine schedule, one
/// optimizer step per batch. Evaluates both splits at the end.
TrainResult train(const RunConfig& cfg, const RunData& data);

struct EvalResult {
    metrics::MetricsReport metrics;
    std::vector<metrics::PredictionRecord> predictions;
};

/// Eval-mode inference (drop path off). Throws ArgumentError on an empty
/// corpus.
EvalResult evaluate(VqaModel& model, const std::vector<data::Example>& examples);

nlohmann::ordered_json metrics_json(const metrics::MetricsReport& m);

/// report.json, report.md, losses.csv, timing.json, predictions and the
/// checkpoint under `dir`.
void write_run_outputs(const std::filesystem::path& dir, const TrainResult& result);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vivqa::harness
