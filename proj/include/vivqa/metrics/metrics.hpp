#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vivqa::metrics {

struct PredictionRecord {
    std::string id;
    std::string prediction;
    std::string ground_truth;
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t count = 0;
};

/// How P_i and GT_i intersect.
enum class TokenSemantics { set, multiset };

/// Lowercases code points in the Latin blocks used by Vietnamese (ASCII,
/// Latin-1, Latin Extended-A/B subsets, Latin Extended Additional).
/// Diacritics are preserved.
std::string casefold(std::string_view utf8);

/// Trim, collapse whitespace runs to one space, casefold.
std::string canonicalize(std::string_view answer);

/// Whitespace tokens of the canonical form.
std::vector<std::string> answer_tokens(std::string_view answer);

double accuracy(std::span<const PredictionRecord> records);
/// Per-record recall; throws DataError when the ground truth is empty.
double record_recall(const PredictionRecord& r, TokenSemantics sem = TokenSemantics::set);
/// Per-record precision; an empty prediction scores 0.
double record_precision(const PredictionRecord& r, TokenSemantics sem = TokenSemantics::set);
/// 0 when precision and recall are both 0, else their harmonic mean.
double f1_from(double precision, double recall);

double recall(std::span<const PredictionRecord> records, TokenSemantics sem = TokenSemantics::set);
double precision(std::span<const PredictionRecord> records, TokenSemantics sem = TokenSemantics::set);
double f1(std::span<const PredictionRecord> records, TokenSemantics sem = TokenSemantics::set);

MetricsReport evaluate(std::span<const PredictionRecord> records, TokenSemantics sem = TokenSemantics::set);

/// JSON Lines with fields id, prediction, ground_truth.
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace vivqa::metrics
