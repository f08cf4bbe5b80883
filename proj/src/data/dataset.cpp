#include "vivqa/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vivqa/core/errors.hpp"
#include "vivqa/core/rng.hpp"

namespace vivqa::data {

namespace {

std::string field_as_string(const nlohmann::json& j, const char* key, std::size_t line) {
    if (!j.contains(key)) throw ParseError(line, std::string("missing field '") + key + "'");
    const auto& v = j[key];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return v.dump();
    throw ParseError(line, std::string("field '") + key + "' must be a string");
}

}  // namespace

std::vector<Example> parse_jsonl(std::string_view text) {
    std::vector<Example> out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
        Example ex;
        ex.id = field_as_string(j, "id", line_no);
        ex.image = field_as_string(j, "image", line_no);
        ex.question = field_as_string(j, "question", line_no);
        ex.answer = field_as_string(j, "answer", line_no);
        if (text::split_words(ex.answer).empty()) {
            throw DataError("line " + std::to_string(line_no) + ": example '" + ex.id + "' has an empty answer");
        }
        if (!ids.insert(ex.id).second) {
            throw DataError("line " + std::to_string(line_no) + ": duplicate id '" + ex.id + "'");
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Example> load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_jsonl(ss.str());
}

void save_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    for (const auto& ex : examples) {
        nlohmann::ordered_json j;
        j["id"] = ex.id;
        j["image"] = ex.image;
        j["question"] = ex.question;
        j["answer"] = ex.answer;
        out << j.dump() << '\n';
    }
}

AnswerVocab::AnswerVocab(std::vector<std::string> answers) : answers_(std::move(answers)) {
    for (std::size_t i = 0; i < answers_.size(); ++i) {
        if (!index_.emplace(answers_[i], i).second) throw DataError("answer vocabulary: duplicate '" + answers_[i] + "'");
    }
}

std::optional<std::size_t> AnswerVocab::index(std::string_view answer) const {
    auto it = index_.find(std::string(answer));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string AnswerVocab::serialize() const {
    std::string out;
    for (const auto& a : answers_) {
        out += a;
        out += '\n';
    }
    return out;
}

AnswerVocab AnswerVocab::deserialize(std::string_view text) {
    std::vector<std::string> answers;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        answers.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return AnswerVocab(std::move(answers));
}

AnswerVocab build_answer_vocab(const std::vector<Example>& train) {
    std::map<std::string, std::size_t> counts;
    for (const auto& ex : train) ++counts[ex.answer];
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> answers;
    for (auto& [a, c] : items) answers.push_back(a);
    return AnswerVocab(std::move(answers));
}

std::pair<std::vector<Example>, std::vector<Example>> split_train_test(const std::vector<Example>& examples,
                                                                       double ratio, std::uint64_t seed) {
    if (examples.empty()) throw ArgumentError("split_train_test: empty corpus");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ArgumentError("split_train_test: ratio must lie in (0, 1]");
    RngStream rng = RngStream(seed).split("split_train_test");
    const auto order = rng.permutation(examples.size());
    // ceil(ratio * N), guarded against 0.8 * 10 = 8.000000000000002 style error.
    const double raw = ratio * static_cast<double>(examples.size());
    std::size_t n_train = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    n_train = std::min(n_train, examples.size());
    std::pair<std::vector<Example>, std::vector<Example>> out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? out.first : out.second).push_back(examples[order[i]]);
    }
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> FoldPlan::fold(std::size_t f) const {
    if (f >= k) throw IndexError("fold " + std::to_string(f) + " out of range for " + std::to_string(k) + " folds");
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? out.second : out.first).push_back(i);
    return out;
}

FoldPlan kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k == 0 || k > n) {
        throw ArgumentError("kfold: cannot make " + std::to_string(k) + " folds from " + std::to_string(n) + " examples");
    }
    RngStream rng = RngStream(seed).split("kfold");
    const auto order = rng.permutation(n);
    FoldPlan plan;
    plan.k = k;
    plan.fold_of.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) plan.fold_of[order[pos]] = pos % k;
    return plan;
}

std::string format_ratio_2dp(std::size_t num, std::size_t den) {
    if (den == 0) return "0.00";
    // round(num * 100 / den) half up, in integers.
    const std::uint64_t scaled = (static_cast<std::uint64_t>(num) * 200 + den) / (2 * static_cast<std::uint64_t>(den));
    std::ostringstream os;
    os << scaled / 100 << '.';
    const std::uint64_t frac = scaled % 100;
    if (frac < 10) os << '0';
    os << frac;
    return os.str();
}

std::string CorpusStats::average_question() const { return format_ratio_2dp(question_tokens, count); }
std::string CorpusStats::average_answer() const { return format_ratio_2dp(answer_tokens, count); }

CorpusStats corpus_stats(const std::vector<Example>& examples) {
    if (examples.empty()) throw ArgumentError("corpus_stats: empty corpus");
    CorpusStats s;
    s.count = examples.size();
    for (const auto& ex : examples) {
        const std::size_t q = text::split_words(ex.question).size();
        const std::size_t a = text::split_words(ex.answer).size();
        s.longest_question = std::max(s.longest_question, q);
        s.longest_answer = std::max(s.longest_answer, a);
        s.question_tokens += q;
        s.answer_tokens += a;
    }
    return s;
}

std::string render_stats(const CorpusStats& s) {
    std::ostringstream os;
    os << "| Statistic | Value |\n|---|---|\n"
       << "| No. Samples | " << s.count << " |\n"
       << "| Longest Question Length | " << s.longest_question << " |\n"
       << "| Longest Answer Length | " << s.longest_answer << " |\n"
       << "| Average Question Length | " << s.average_question() << " |\n"
       << "| Average Answer Length | " << s.average_answer() << " |\n";
    return os.str();
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kSyntheticPrefix = "synthetic:";

const std::array<std::string_view, 8> kGlobalNames = {"đỏ", "xanh", "vàng", "tím", "cam", "hồng", "nâu", "xám"};
const std::array<std::string_view, 8> kLocalNames = {"tròn", "vuông", "sao", "tim", "lá", "mây", "sóng", "núi"};

// Unit-ish RGB directions; later entries are reused with a sign flip.
const std::array<std::array<double, 3>, 8> kDirections = {{{1, 0, 0},
                                                           {0, 1, 0},
                                                           {0, 0, 1},
                                                           {0.7, 0.7, 0},
                                                           {0.7, 0, 0.7},
                                                           {0, 0.7, 0.7},
                                                           {-0.6, 0.6, 0.5},
                                                           {0.6, -0.5, 0.6}}};

std::array<double, 3> cue_color(std::size_t index, double amplitude) {
    const auto& d = kDirections[index % kDirections.size()];
    const double sign = (index / kDirections.size()) % 2 == 0 ? 1.0 : -1.0;
    const double shrink = 1.0 / (1.0 + static_cast<double>(index / (2 * kDirections.size())));
    return {sign * shrink * amplitude * d[0], sign * shrink * amplitude * d[1], sign * shrink * amplitude * d[2]};
}

std::string cue_name(const std::array<std::string_view, 8>& names, std::size_t index) {
    std::string n(names[index % names.size()]);
    if (index >= names.size()) n += std::to_string(index / names.size() + 1);
    return n;
}

const std::array<std::string_view, 3> kQuestionTemplates = {
    "ảnh này có màu gì và hình gì", "màu nền và hình khối là gì", "cho biết màu và hình trong ảnh"};

constexpr double kGlobalAmplitude = 0.2;
constexpr double kLocalAmplitude = 0.25;
constexpr double kNoise = 0.02;

}  // namespace

std::string SyntheticSpec::encode() const {
    return std::string(kSyntheticPrefix) + "g=" + std::to_string(global_cue) + ";l=" + std::to_string(local_cue) +
           ";noise=" + std::to_string(noise_seed);
}

bool is_synthetic(std::string_view image_field) { return image_field.starts_with(kSyntheticPrefix); }

SyntheticSpec SyntheticSpec::decode(std::string_view field) {
    if (!is_synthetic(field)) throw DataError("not a synthetic image reference: '" + std::string(field) + "'");
    SyntheticSpec spec;
    bool has_g = false, has_l = false;
    std::string_view rest = field.substr(kSyntheticPrefix.size());
    while (!rest.empty()) {
        const std::size_t semi = rest.find(';');
        const std::string_view item = rest.substr(0, semi);
        rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
        const std::size_t eq = item.find('=');
        if (eq == std::string_view::npos) throw DataError("malformed synthetic spec '" + std::string(field) + "'");
        const std::string key(item.substr(0, eq));
        const std::string value(item.substr(eq + 1));
        std::uint64_t v = 0;
        try {
            std::size_t used = 0;
            v = std::stoull(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw DataError("malformed synthetic spec value '" + value + "'");
        }
        if (key == "g") {
            spec.global_cue = v;
            has_g = true;
        } else if (key == "l") {
            spec.local_cue = v;
            has_l = true;
        } else if (key == "noise") {
            spec.noise_seed = v;
        } else {
            throw DataError("unknown synthetic spec key '" + key + "'");
        }
    }
    if (!has_g || !has_l) throw DataError("synthetic spec needs g and l: '" + std::string(field) + "'");
    return spec;
}

std::string global_cue_name(std::size_t index) { return cue_name(kGlobalNames, index); }
std::string local_cue_name(std::size_t index) { return cue_name(kLocalNames, index); }

std::string synthetic_answer(std::size_t global_cue, std::size_t local_cue) {
    return global_cue_name(global_cue) + " " + local_cue_name(local_cue);
}

vision::ImageTensor render_synthetic(const SyntheticSpec& spec, const vision::VisionDims& dims) {
    dims.validate();
    const std::size_t g = dims.grid;
    if (g < 3 || g % 2 == 0) throw ConfigError("synthetic images need an odd patch grid of at least 3");
    const std::size_t size = dims.image_size;
    const std::size_t patch = dims.patch();
    const std::size_t mid = g / 2;
    if (spec.global_cue >= g) {
        throw ConfigError("synthetic global cue " + std::to_string(spec.global_cue) + " needs a grid larger than " +
                          std::to_string(g));
    }
    // Row r carries tint list entry (r + cue) mod g: every global cue uses
    // the same set of row tints, only their order differs.
    std::vector<std::array<double, 3>> tints(g);
    for (std::size_t r = 0; r < g; ++r) tints[r] = cue_color((r + spec.global_cue) % g, kGlobalAmplitude);
    const auto mark = cue_color(spec.local_cue, kLocalAmplitude);
    RngStream noise(spec.noise_seed);
    std::vector<double> px(3 * size * size);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < size; ++y) {
            const std::size_t row = y / patch;
            for (std::size_t x = 0; x < size; ++x) {
                const std::size_t col = x / patch;
                double v = 0.5 + tints[row][c];
                if (col == mid) v += mark[c];
                if (col == mid + 1) v -= mark[c];
                v += noise.uniform(-kNoise, kNoise);
                px[(c * size + y) * size + x] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return vision::ImageTensor(Tensor::from({3, size, size}, std::move(px)), dims);
}

std::vector<Example> make_synthetic(std::size_t n, std::size_t n_global, std::size_t n_local, std::uint64_t seed) {
    if (n == 0) throw ArgumentError("make_synthetic: n must be at least 1");
    if (n_global < 2 || n_local < 2) throw ArgumentError("make_synthetic: cue counts must be at least 2");
    RngStream root(seed);
    RngStream order_rng = root.split("synthetic.order");
    RngStream question_rng = root.split("synthetic.question");
    RngStream noise_rng = root.split("synthetic.noise");
    const std::size_t classes = n_global * n_local;
    const auto order = order_rng.permutation(n);
    std::vector<Example> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t joint = order[i] % classes;
        SyntheticSpec spec{joint / n_local, joint % n_local, noise_rng.next_u64()};
        Example& ex = out[i];
        ex.id = "syn-" + std::to_string(i);
        ex.image = spec.encode();
        ex.question = std::string(kQuestionTemplates[question_rng.below(kQuestionTemplates.size())]);
        ex.answer = synthetic_answer(spec.global_cue, spec.local_cue);
    }
    return out;
}

std::vector<Batch> make_batches(const std::vector<Example>& split, std::size_t batch_size, std::size_t max_len,
                                const text::Vocabulary& vocab, const AnswerVocab& answers, std::uint64_t seed,
                                std::size_t epoch, SplitRole role, bool shuffle) {
    if (batch_size == 0) throw ArgumentError("make_batches: batch size must be at least 1");
    std::vector<std::size_t> labels(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) {
        const auto idx = answers.index(split[i].answer);
        if (!idx) {
            if (role == SplitRole::train) {
                throw DataError("training answer '" + split[i].answer + "' of example '" + split[i].id +
                                "' is not in the answer vocabulary");
            }
            labels[i] = answers.oov_index();
        } else {
            labels[i] = *idx;
        }
    }
    std::vector<std::size_t> order(split.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (shuffle) order = RngStream(seed).split("batches").split(epoch).permutation(split.size());
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        Batch b;
        for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
            b.indices.push_back(order[i]);
            b.questions.push_back(text::tokenize(split[order[i]].question, vocab, max_len));
            b.labels.push_back(labels[order[i]]);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

}  // namespace vivqa::data
