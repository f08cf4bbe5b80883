#include "vivqa/metrics/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "vivqa/core/errors.hpp"
#include "vivqa/text/text.hpp"

namespace vivqa::metrics {

namespace {

char32_t lower_code_point(char32_t c) {
    if (c >= U'A' && c <= U'Z') return c + 0x20;
    if (c < 0x80) return c;
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
    if ((c >= 0x100 && c <= 0x12F) || (c >= 0x132 && c <= 0x137) || (c >= 0x14A && c <= 0x177)) {
        return (c % 2 == 0) ? c + 1 : c;
    }
    if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c % 2 == 1) ? c + 1 : c;
    if (c == 0x178) return 0xFF;
    if (c == 0x1A0 || c == 0x1AF) return c + 1;  // O/U with horn
    if ((c >= 0x1E00 && c <= 0x1E95) || (c >= 0x1EA0 && c <= 0x1EFF)) return (c % 2 == 0) ? c + 1 : c;
    return c;
}

void append_utf8(std::string& out, char32_t c) {
    if (c < 0x80) {
        out += static_cast<char>(c);
    } else if (c < 0x800) {
        out += static_cast<char>(0xC0 | (c >> 6));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
        out += static_cast<char>(0xE0 | (c >> 12));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (c >> 18));
        out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    }
}

std::size_t intersection_size(const std::vector<std::string>& p, const std::vector<std::string>& gt,
                              TokenSemantics sem) {
    if (sem == TokenSemantics::set) {
        const std::set<std::string> ps(p.begin(), p.end());
        const std::set<std::string> gs(gt.begin(), gt.end());
        std::size_t n = 0;
        for (const auto& t : ps) n += gs.count(t);
        return n;
    }
    std::map<std::string, std::size_t> pc;
    std::map<std::string, std::size_t> gc;
    for (const auto& t : p) ++pc[t];
    for (const auto& t : gt) ++gc[t];
    std::size_t n = 0;
    for (const auto& [t, c] : pc) {
        auto it = gc.find(t);
        if (it != gc.end()) n += std::min(c, it->second);
    }
    return n;
}

std::size_t token_count(const std::vector<std::string>& tokens, TokenSemantics sem) {
    if (sem == TokenSemantics::multiset) return tokens.size();
    return std::set<std::string>(tokens.begin(), tokens.end()).size();
}

void require_nonempty(std::span<const PredictionRecord> records, const char* what) {
    if (records.empty()) throw ArgumentError(std::string(what) + ": empty record set");
}

std::vector<std::string> ground_truth_tokens(const PredictionRecord& r) {
    auto gt = answer_tokens(r.ground_truth);
    if (gt.empty()) throw DataError("record '" + r.id + "' has an empty ground truth answer");
    return gt;
}

}  // namespace

std::string casefold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool valid = len > 0 && i + len <= s.size();
        for (std::size_t k = 1; valid && k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) valid = false;
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!valid) {
            out += s[i];  // pass malformed bytes through untouched
            ++i;
            continue;
        }
        append_utf8(out, lower_code_point(cp));
        i += len;
    }
    return out;
}

std::string canonicalize(std::string_view answer) {
    std::string joined;
    for (const auto& w : text::split_words(answer)) {
        if (!joined.empty()) joined += ' ';
        joined += w;
    }
    return casefold(joined);
}

std::vector<std::string> answer_tokens(std::string_view answer) { return text::split_words(canonicalize(answer)); }

double accuracy(std::span<const PredictionRecord> records) {
    require_nonempty(records, "accuracy");
    std::size_t hits = 0;
    for (const auto& r : records) hits += canonicalize(r.prediction) == canonicalize(r.ground_truth) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

double record_recall(const PredictionRecord& r, TokenSemantics sem) {
    const auto gt = ground_truth_tokens(r);
    const auto p = answer_tokens(r.prediction);
    return static_cast<double>(intersection_size(p, gt, sem)) / static_cast<double>(token_count(gt, sem));
}

double record_precision(const PredictionRecord& r, TokenSemantics sem) {
    const auto gt = ground_truth_tokens(r);
    const auto p = answer_tokens(r.prediction);
    if (p.empty()) return 0.0;
    return static_cast<double>(intersection_size(p, gt, sem)) / static_cast<double>(token_count(p, sem));
}

double f1_from(double p, double r) {
    if (p == 0.0 && r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

double recall(std::span<const PredictionRecord> records, TokenSemantics sem) {
    require_nonempty(records, "recall");
    double total = 0.0;
    for (const auto& r : records) total += record_recall(r, sem);
    return total / static_cast<double>(records.size());
}

double precision(std::span<const PredictionRecord> records, TokenSemantics sem) {
    require_nonempty(records, "precision");
    double total = 0.0;
    for (const auto& r : records) total += record_precision(r, sem);
    return total / static_cast<double>(records.size());
}

double f1(std::span<const PredictionRecord> records, TokenSemantics sem) {
    require_nonempty(records, "f1");
    double total = 0.0;
    for (const auto& r : records) total += f1_from(record_precision(r, sem), record_recall(r, sem));
    return total / static_cast<double>(records.size());
}

MetricsReport evaluate(std::span<const PredictionRecord> records, TokenSemantics sem) {
    MetricsReport m;
    m.accuracy = accuracy(records);
    m.precision = precision(records, sem);
    m.recall = recall(records, sem);
    m.f1 = f1(records, sem);
    m.count = records.size();
    return m;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["prediction"] = r.prediction;
        j["ground_truth"] = r.ground_truth;
        out << j.dump() << '\n';
    }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open predictions " + path.string());
    std::vector<PredictionRecord> records;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
        PredictionRecord r;
        for (const char* key : {"id", "prediction", "ground_truth"}) {
            if (!j.contains(key)) throw ParseError(line_no, std::string("missing field '") + key + "'");
        }
        r.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        if (!j["prediction"].is_string() || !j["ground_truth"].is_string()) {
            throw ParseError(line_no, "prediction and ground_truth must be strings");
        }
        r.prediction = j["prediction"].get<std::string>();
        r.ground_truth = j["ground_truth"].get<std::string>();
        if (!ids.insert(r.id).second) throw DataError("duplicate prediction id '" + r.id + "'");
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace vivqa::metrics
