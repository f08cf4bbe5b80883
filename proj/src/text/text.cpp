#include "vivqa/text/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "vivqa/core/errors.hpp"
#include "vivqa/core/ops.hpp"

namespace vivqa::text {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

const std::string kReservedNames[kReservedIds] = {"[PAD]", "[CLS]", "[SEP]", "[UNK]"};

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], kReservedIds + i).second) {
            throw DataError("vocabulary: duplicate token '" + tokens_[i] + "'");
        }
    }
}

std::size_t Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
    if (id < kReservedIds) return kReservedNames[id];
    if (id >= size()) throw IndexError("vocabulary: id " + std::to_string(id) + " out of range");
    return tokens_[id - kReservedIds];
}

std::string Vocabulary::serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        tokens.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << serialize();
    if (!out) throw DataError("failed writing " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vocabulary " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_count) {
    if (corpus.empty()) throw ArgumentError("build_vocab: empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const auto& q : corpus) {
        for (auto& w : split_words(q)) ++counts[w];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [w, c] : counts) {
        if (c >= min_count) kept.emplace_back(w, c);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> tokens;
    tokens.reserve(kept.size());
    for (auto& [w, c] : kept) tokens.push_back(w);
    return Vocabulary(std::move(tokens));
}

TokenizedQuestion tokenize(std::string_view question, const Vocabulary& vocab, std::size_t max_len) {
    if (max_len == 0) throw ArgumentError("tokenize: max_len must be at least 1");
    auto words = split_words(question);
    if (words.size() > max_len) words.resize(max_len);
    TokenizedQuestion tq;
    tq.max_len = max_len;
    tq.content_len = words.size();
    tq.ids.assign(max_len + 2, kPadId);
    tq.mask.assign(max_len + 2, false);
    tq.ids[0] = kClsId;
    for (std::size_t i = 0; i < words.size(); ++i) tq.ids[i + 1] = vocab.id(words[i]);
    tq.ids[words.size() + 1] = kSepId;
    for (std::size_t i = 0; i < words.size() + 2; ++i) tq.mask[i] = true;
    return tq;
}

std::string detokenize(const TokenizedQuestion& tq, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 1; i <= tq.content_len; ++i) {
        if (i > 1) out += ' ';
        out += vocab.token(tq.ids[i]);
    }
    return out;
}

TextEncoderParams TextEncoderParams::create(std::size_t vocab_size, std::size_t max_len, std::size_t width,
                                            RngStream& rng) {
    TextEncoderParams p;
    p.token_table = Tensor::randn({vocab_size, width}, rng, 0.02 * std::sqrt(768.0 / static_cast<double>(width)), true);
    p.position_table = Tensor::randn({max_len + 2, width}, rng, 0.02 * std::sqrt(768.0 / static_cast<double>(width)), true);
    return p;
}

Tensor encode(const TokenizedQuestion& tq, const TextEncoderParams& params) {
    if (params.position_table.dim(0) != tq.ids.size()) {
        throw ShapeError("encode: position table has " + std::to_string(params.position_table.dim(0)) +
                         " rows for a sequence of " + std::to_string(tq.ids.size()));
    }
    const Tensor tokens = ops::embedding_lookup(params.token_table, tq.ids);
    return ops::add(tokens, params.position_table);
}

ProjectionParams ProjectionParams::create(std::size_t in, std::size_t out, RngStream& rng) {
    ProjectionParams p;
    p.weight = Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)), true);
    p.bias = Tensor::zeros({out}, true);
    return p;
}

Tensor project(const Tensor& q, const ProjectionParams& params) {
    if (q.rank() != 2 || q.dim(1) != params.weight.dim(0)) {
        throw ShapeError("project: expected width " + std::to_string(params.weight.dim(0)) + ", got " +
                         shape_str(q.shape()));
    }
    return ops::linear(q, params.weight, params.bias);
}

}  // namespace vivqa::text
