#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vivqa/core/rng.hpp"
#include "vivqa/core/tensor.hpp"

namespace vivqa::text {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kClsId = 1;
inline constexpr std::size_t kSepId = 2;
inline constexpr std::size_t kUnkId = 3;
inline constexpr std::size_t kReservedIds = 4;

/// Splits on ASCII whitespace; empty tokens are dropped.
std::vector<std::string> split_words(std::string_view text);

/// Word vocabulary with four reserved ids ([PAD], [CLS], [SEP], [UNK]).
/// Regular tokens are ordered by descending frequency, then bytewise.
class Vocabulary {
  public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens);

    std::size_t size() const noexcept { return kReservedIds + tokens_.size(); }
    /// [UNK] for unknown tokens.
    std::size_t id(std::string_view token) const;
    const std::string& token(std::size_t id) const;
    bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    /// One token per line; line n holds id n + 4.
    std::string serialize() const;
    static Vocabulary deserialize(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_count = 1);

struct TokenizedQuestion {
    std::vector<std::size_t> ids;  // length max_len + 2
    std::vector<bool> mask;        // true on the content_len + 2 real positions
    std::size_t content_len = 0;   // words kept after truncation
    std::size_t max_len = 0;
};

TokenizedQuestion tokenize(std::string_view question, const Vocabulary& vocab, std::size_t max_len);
/// Content tokens joined by single spaces.
std::string detokenize(const TokenizedQuestion& tq, const Vocabulary& vocab);

/// Trainable token + learned position tables.
struct TextEncoderParams {
    Tensor token_table;     // [V x width]
    Tensor position_table;  // [(max_len + 2) x width]

    static TextEncoderParams create(std::size_t vocab_size, std::size_t max_len, std::size_t width, RngStream& rng);
};

/// [(max_len + 2) x width]: token embedding plus position embedding.
Tensor encode(const TokenizedQuestion& tq, const TextEncoderParams& params);

struct ProjectionParams {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]

    static ProjectionParams create(std::size_t in, std::size_t out, RngStream& rng);
};

/// Row-wise affine map from the encoder width to the fusion width.
Tensor project(const Tensor& q, const ProjectionParams& params);

}  // namespace vivqa::text
