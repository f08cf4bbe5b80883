#include "vivqa/harness/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <unordered_map>

#include "vivqa/core/errors.hpp"

namespace vivqa::harness {

namespace {

constexpr char kMagic[4] = {'V', 'V', 'Q', 'C'};

class Writer {
  public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t>& out() { return out_; }

  private:
    std::vector<std::uint8_t> out_;
};

class Reader {
  public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("VVQC: file truncated at byte " + std::to_string(pos_));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint64_t n = u64();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

  private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const VqaModel& model, const optim::AdamWState& state) {
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.str(model.config().to_json().dump());
    w.str(model.vocab().serialize());
    w.str(model.answers().serialize());

    const auto params = model.named_parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        w.str(p.name);
        w.u32(static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t d : p.value.shape()) w.u64(d);
        for (double v : p.value.data()) w.f64(v);
    }

    const auto trainable = model.trainable_parameters();
    const bool has_state = !state.m.empty();
    if (has_state && (state.m.size() != trainable.size() || state.v.size() != trainable.size())) {
        throw ArgumentError("checkpoint: optimizer state does not match the trainable parameters");
    }
    w.u64(state.t);
    w.u32(has_state ? static_cast<std::uint32_t>(trainable.size()) : 0);
    if (has_state) {
        for (std::size_t i = 0; i < trainable.size(); ++i) {
            w.str(trainable[i].name);
            for (double v : state.m[i]) w.f64(v);
            for (double v : state.v[i]) w.f64(v);
        }
    }
    w.u32(crc_of(w.out()));
    return std::move(w.out());
}

LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12) throw FormatError("VVQC: file truncated");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("VVQC: bad magic");
    const auto body = bytes.first(bytes.size() - 4);
    Reader tail(bytes.subspan(bytes.size() - 4));
    if (tail.u32() != crc_of(body)) throw FormatError("VVQC: checksum mismatch");

    Reader r(body);
    r.u32();  // magic
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) throw FormatError("VVQC: unsupported version " + std::to_string(version));
    RunConfig cfg;
    try {
        cfg = RunConfig::from_json(nlohmann::json::parse(r.str()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("VVQC: config is not valid JSON: ") + e.what());
    }
    text::Vocabulary vocab = text::Vocabulary::deserialize(r.str());
    data::AnswerVocab answers = data::AnswerVocab::deserialize(r.str());

    LoadedCheckpoint out;
    out.model = std::make_unique<VqaModel>(cfg, std::move(vocab), std::move(answers));

    std::unordered_map<std::string, Tensor> by_name;
    for (const auto& p : out.model->named_parameters()) by_name.emplace(p.name, p.value);
    const std::uint32_t count = r.u32();
    if (count != by_name.size()) {
        throw FormatError("VVQC: " + std::to_string(count) + " tensors stored, model has " +
                          std::to_string(by_name.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("VVQC: unknown tensor '" + name + "'");
        Shape shape(r.u32());
        for (auto& d : shape) d = r.u64();
        if (shape != it->second.shape()) {
            if (name == "classifier.projection.weight" || name == "classifier.projection.bias" ||
                name == "text.token_table") {
                throw ConfigError("VVQC: tensor '" + name + "' does not match the stored vocabulary sizes");
            }
            throw FormatError("VVQC: tensor '" + name + "' stored as " + shape_str(shape) + ", model expects " +
                              shape_str(it->second.shape()));
        }
        auto dst = it->second.mutable_data();
        for (double& v : dst) v = r.f64();
    }

    out.optimizer.t = r.u64();
    const std::uint32_t slots = r.u32();
    if (slots != 0) {
        const auto trainable = out.model->trainable_parameters();
        if (slots != trainable.size()) throw FormatError("VVQC: optimizer slot count mismatch");
        for (std::uint32_t i = 0; i < slots; ++i) {
            if (r.str() != trainable[i].name) throw FormatError("VVQC: optimizer slot order mismatch");
            const std::size_t n = trainable[i].value.numel();
            std::vector<double> m(n);
            std::vector<double> v(n);
            for (double& x : m) x = r.f64();
            for (double& x : v) x = r.f64();
            out.optimizer.m.push_back(std::move(m));
            out.optimizer.v.push_back(std::move(v));
        }
    }
    if (r.pos() != body.size()) throw FormatError("VVQC: trailing bytes before checksum");
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const VqaModel& model, const optim::AdamWState& state) {
    const auto bytes = encode_checkpoint(model, state);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace vivqa::harness
