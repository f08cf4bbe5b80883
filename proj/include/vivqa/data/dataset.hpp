#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vivqa/text/text.hpp"
#include "vivqa/vision/features.hpp"

namespace vivqa::data {

struct Example {
    std::string id;
    /// "<base>" resolving to <base>.global.vvqf + <base>.local.vvqf, or
    /// "synthetic:<spec>".
    std::string image;
    std::string question;
    std::string answer;
};

/// Parses JSON Lines with fields id, image, question, answer. Blank lines
/// are skipped. Throws ParseError (with line number) on malformed lines
/// and DataError on duplicate ids or empty answers.
std::vector<Example> parse_jsonl(std::string_view text);
std::vector<Example> load_jsonl(const std::filesystem::path& path);
void save_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples);

/// Closed answer set built from training answers, ordered by descending
/// frequency then bytewise.
class AnswerVocab {
  public:
    AnswerVocab() = default;
    explicit AnswerVocab(std::vector<std::string> answers);

    std::size_t size() const noexcept { return answers_.size(); }
    std::optional<std::size_t> index(std::string_view answer) const;
    const std::string& answer(std::size_t index) const { return answers_.at(index); }
    const std::vector<std::string>& answers() const noexcept { return answers_; }
    /// Label used for test answers outside the vocabulary; never predicted.
    std::size_t oov_index() const noexcept { return answers_.size(); }

    std::string serialize() const;
    static AnswerVocab deserialize(std::string_view text);

  private:
    std::vector<std::string> answers_;
    std::unordered_map<std::string, std::size_t> index_;
};

AnswerVocab build_answer_vocab(const std::vector<Example>& train);

/// Seeded shuffle; the first ceil(ratio * N) examples form the train split.
std::pair<std::vector<Example>, std::vector<Example>> split_train_test(const std::vector<Example>& examples,
                                                                       double ratio, std::uint64_t seed);

/// fold_of[i] is the fold of example i; fold sizes differ by at most one.
struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> fold_of;

    /// (training indices, held-out indices) for fold f, both ascending.
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> fold(std::size_t f) const;
};

FoldPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed);

struct CorpusStats {
    std::size_t count = 0;
    std::size_t longest_question = 0;
    std::size_t longest_answer = 0;
    std::size_t question_tokens = 0;  // exact totals behind the averages
    std::size_t answer_tokens = 0;

    /// Mean rendered with two decimals, rounding half up, computed exactly.
    std::string average_question() const;
    std::string average_answer() const;
};

CorpusStats corpus_stats(const std::vector<Example>& examples);
/// Markdown table: count, longest and average question/answer lengths.
std::string render_stats(const CorpusStats& s);

/// Exact ratio num/den rounded half up to two decimals.
std::string format_ratio_2dp(std::size_t num, std::size_t den);

// ---------------------------------------------------------------------------
// Synthetic complementary-cue corpus
// ---------------------------------------------------------------------------

/// One synthetic image. The global cue is the order of a fixed set of
/// per-row tints (a cyclic shift chosen by the cue), so every patch column
/// sees the same multiset of tints whatever the cue. The local cue is a
/// +color/-color pair of adjacent patch columns in the middle, so every
/// patch row keeps its mean. The global stub only sees row means and the
/// adapted local pathway averages over rows, so each is blind to the other
/// cue.
struct SyntheticSpec {
    std::size_t global_cue = 0;
    std::size_t local_cue = 0;
    std::uint64_t noise_seed = 0;

    std::string encode() const;  // "synthetic:g=..;l=..;noise=.."
    static SyntheticSpec decode(std::string_view image_field);
};

bool is_synthetic(std::string_view image_field);
std::string global_cue_name(std::size_t index);
std::string local_cue_name(std::size_t index);
std::string synthetic_answer(std::size_t global_cue, std::size_t local_cue);

/// Renders the image at the requested size (multiple of the 7-patch grid).
vision::ImageTensor render_synthetic(const SyntheticSpec& spec, const vision::VisionDims& dims);

/// n examples cycling through all n_global * n_local joint classes in a
/// seeded order.
std::vector<Example> make_synthetic(std::size_t n, std::size_t n_global, std::size_t n_local, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct Batch {
    std::vector<std::size_t> indices;  // positions in the split
    std::vector<text::TokenizedQuestion> questions;
    std::vector<std::size_t> labels;
};

enum class SplitRole { train, test };

/// Seeded per-epoch order; the last batch may be partial. Train answers
/// outside the vocabulary raise DataError; test answers map to oov_index().
std::vector<Batch> make_batches(const std::vector<Example>& split, std::size_t batch_size, std::size_t max_len,
                                const text::Vocabulary& vocab, const AnswerVocab& answers, std::uint64_t seed,
                                std::size_t epoch, SplitRole role = SplitRole::train, bool shuffle = true);

}  // namespace vivqa::data
