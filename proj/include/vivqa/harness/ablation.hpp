#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vivqa/harness/config.hpp"
#include "vivqa/harness/run.hpp"
#include "vivqa/metrics/ttest.hpp"
#include "vivqa/vision/features.hpp"

namespace vivqa::harness {

/// Test accuracy when a test split exists, otherwise train accuracy.
double headline_accuracy(const RunReport& r);

/// `n` consecutive seeds starting at `first`.
std::vector<std::uint64_t> seed_list(std::uint64_t first, std::size_t n);

// ---------------------------------------------------------------------------

struct FusionRow {
    vision::FusionOp op;
    std::string operation;  // display name
    std::string fused_dims;  // "rows×hidden"
    double accuracy = 0.0;
    vision::SparsityStats sparsity;  // over every fused feature of the test split
};

struct FusionAblation {
    std::vector<FusionRow> rows;  // multiply, add, concatenate
    std::string to_markdown() const;
    std::string to_csv() const;
    std::string sparsity_csv() const;
};

/// Trains one run per fusion op under the same seed.
FusionAblation ablate_fusion(const RunConfig& cfg, const RunData& data);

/// Sparsity statistics of the fused visual features over `examples`.
vision::SparsityStats fused_sparsity(VqaModel& model, const std::vector<data::Example>& examples);

// ---------------------------------------------------------------------------

struct ExtractorArm {
    ExtractorMode mode;
    std::string name;
    std::vector<double> accuracies;  // one per seed
    double mean_accuracy = 0.0;
};

struct ExtractorAblation {
    std::vector<std::uint64_t> seeds;
    std::vector<ExtractorArm> arms;  // EfficientNet-stub only, BLIP-2-stub only, combined
    /// Welch test of combined against each single-extractor arm.
    std::vector<metrics::TTestResult> versus_combined;  // aligned with arms[0..1]

    std::string to_markdown() const;
    std::string to_csv() const;
};

std::string_view extractor_arm_name(ExtractorMode mode);

ExtractorAblation ablate_extractors(const RunConfig& cfg, const RunData& data, std::size_t n_seeds);

// ---------------------------------------------------------------------------

struct FreezeRow {
    bool frozen = true;
    double accuracy = 0.0;
    std::size_t epochs = 0;
    double train_seconds = 0.0;
    std::size_t trainable_parameters = 0;
    std::size_t backward_visits = 0;
    bool extractor_bytes_unchanged = false;
};

struct FreezeAblation {
    FreezeRow frozen;
    FreezeRow unfrozen;

    /// Accuracy / Epoch / Training Time (s). Includes wall clock.
    std::string to_markdown() const;
    /// Everything except wall clock; deterministic.
    std::string to_csv() const;
};

FreezeAblation ablate_freeze(const RunConfig& cfg, const RunData& data);

// ---------------------------------------------------------------------------

enum class SweepAxis { heads, layers };
SweepAxis parse_sweep_axis(std::string_view key);
std::string_view sweep_axis_key(SweepAxis axis);

struct SweepPoint {
    std::size_t value = 0;
    double accuracy = 0.0;
    double final_loss = 0.0;
};

struct Sweep {
    SweepAxis axis = SweepAxis::heads;
    std::vector<SweepPoint> points;
    std::string to_csv() const;
};

/// Validates every value before training anything; an invalid head count
/// raises ConfigError.
Sweep sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<std::size_t>& values, const RunData& data);

// ---------------------------------------------------------------------------

struct Significance {
    std::vector<std::uint64_t> seeds;
    std::vector<double> accuracies_a;
    std::vector<double> accuracies_b;
    metrics::TTestResult test;

    std::string to_csv() const;
    std::string to_markdown() const;
};

/// Runs both configs over the same seeds and applies the Welch test. A
/// degenerate sample raises StatsError.
Significance significance(const RunConfig& a, const RunConfig& b, std::size_t n_seeds, const RunData& data);

}  // namespace vivqa::harness
