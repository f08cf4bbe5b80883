#include "vivqa/harness/ablation.hpp"

#include <sstream>

#include "vivqa/core/errors.hpp"

namespace vivqa::harness {

namespace {

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

std::string percent(double accuracy) { return fixed(100.0 * accuracy, 2); }

// Full precision for CSV so reruns can be compared byte for byte.
std::string exact(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

double headline_accuracy(const RunReport& r) {
    return r.test_metrics ? r.test_metrics->accuracy : r.train_metrics.accuracy;
}

std::vector<std::uint64_t> seed_list(std::uint64_t first, std::size_t n) {
    std::vector<std::uint64_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = first + i;
    return out;
}

// ---------------------------------------------------------------------------

vision::SparsityStats fused_sparsity(VqaModel& model, const std::vector<data::Example>& examples) {
    std::vector<double> values;
    for (const auto& ex : examples) {
        const Tensor v = model.visual(ex);
        values.insert(values.end(), v.data().begin(), v.data().end());
    }
    return vision::sparsity_stats(values);
}

FusionAblation ablate_fusion(const RunConfig& cfg, const RunData& data) {
    FusionAblation out;
    const auto dims = cfg.vision_dims();
    for (vision::FusionOp op : {vision::FusionOp::multiply, vision::FusionOp::add, vision::FusionOp::concatenate}) {
        RunConfig c = cfg;
        c.fusion = op;
        c.extractors = ExtractorMode::combined;
        TrainResult r = train(c, data);
        FusionRow row;
        row.op = op;
        row.operation = std::string(vision::fusion_display_name(op));
        row.fused_dims = std::to_string(vision::fused_rows(op, dims.global_tokens)) + "×" + std::to_string(dims.hidden);
        row.accuracy = headline_accuracy(r.report);
        row.sparsity = fused_sparsity(*r.model, data.test.empty() ? data.train : data.test);
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::string FusionAblation::to_markdown() const {
    std::ostringstream os;
    os << "| Operation | Fused dims | Accuracy (%) |\n|---|---|---|\n";
    for (const auto& r : rows) os << "| " << r.operation << " | " << r.fused_dims << " | " << percent(r.accuracy) << " |\n";
    return os.str();
}

std::string FusionAblation::to_csv() const {
    std::ostringstream os;
    os << "operation,fused_dims,accuracy\n";
    for (const auto& r : rows) os << r.operation << ',' << r.fused_dims << ',' << exact(r.accuracy) << '\n';
    return os.str();
}

std::string FusionAblation::sparsity_csv() const {
    std::ostringstream os;
    os << "operation,mean,min,q1,median,q3,max,iqr\n";
    for (const auto& r : rows) {
        const auto& s = r.sparsity;
        os << r.operation << ',' << exact(s.mean) << ',' << exact(s.min) << ',' << exact(s.q1) << ','
           << exact(s.median) << ',' << exact(s.q3) << ',' << exact(s.max) << ',' << exact(s.iqr()) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------

std::string_view extractor_arm_name(ExtractorMode mode) {
    switch (mode) {
        case ExtractorMode::local_only:
            return "EfficientNet-stub only";
        case ExtractorMode::global_only:
            return "BLIP-2-stub only";
        case ExtractorMode::combined:
            return "combined";
    }
    return "";
}

ExtractorAblation ablate_extractors(const RunConfig& cfg, const RunData& data, std::size_t n_seeds) {
    if (n_seeds < 2) throw ConfigError("ablate extractors needs at least two seeds");
    ExtractorAblation out;
    out.seeds = seed_list(cfg.seed, n_seeds);
    for (ExtractorMode mode : {ExtractorMode::local_only, ExtractorMode::global_only, ExtractorMode::combined}) {
        ExtractorArm arm;
        arm.mode = mode;
        arm.name = std::string(extractor_arm_name(mode));
        for (std::uint64_t seed : out.seeds) {
            RunConfig c = cfg;
            c.extractors = mode;
            c.seed = seed;
            arm.accuracies.push_back(headline_accuracy(train(c, data).report));
        }
        double sum = 0.0;
        for (double a : arm.accuracies) sum += a;
        arm.mean_accuracy = sum / static_cast<double>(arm.accuracies.size());
        out.arms.push_back(std::move(arm));
    }
    const auto& combined = out.arms[2].accuracies;
    for (std::size_t i = 0; i < 2; ++i) {
        out.versus_combined.push_back(metrics::welch_t_test(combined, out.arms[i].accuracies));
    }
    return out;
}

std::string ExtractorAblation::to_markdown() const {
    std::ostringstream os;
    os << "| Extractor | Accuracy (%) | p vs combined |\n|---|---|---|\n";
    for (std::size_t i = 0; i < arms.size(); ++i) {
        os << "| " << arms[i].name << " | " << percent(arms[i].mean_accuracy) << " | ";
        if (i < versus_combined.size()) {
            os << fixed(versus_combined[i].p_value, 6) << (versus_combined[i].significant ? " *" : "");
        } else {
            os << "-";
        }
        os << " |\n";
    }
    os << "\nMean over seeds";
    for (std::uint64_t s : seeds) os << ' ' << s;
    os << ". * marks p < 0.05 (Welch).\n";
    return os.str();
}

std::string ExtractorAblation::to_csv() const {
    std::ostringstream os;
    os << "extractor,seed,accuracy\n";
    for (const auto& arm : arms) {
        for (std::size_t i = 0; i < seeds.size(); ++i) os << arm.name << ',' << seeds[i] << ',' << exact(arm.accuracies[i]) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------

FreezeAblation ablate_freeze(const RunConfig& cfg, const RunData& data) {
    FreezeAblation out;
    const auto before = vision::StubExtractorParams::create(cfg.vision_dims(), cfg.stub_seed).snapshot_bytes();
    for (bool frozen : {true, false}) {
        RunConfig c = cfg;
        c.freeze_extractors = frozen;
        const TrainResult r = train(c, data);
        FreezeRow row;
        row.frozen = frozen;
        row.accuracy = headline_accuracy(r.report);
        row.epochs = r.report.epochs;
        row.train_seconds = r.report.train_seconds;
        row.trainable_parameters = r.report.parameters.trainable;
        row.backward_visits = r.report.backward_visits;
        row.extractor_bytes_unchanged = r.model->extractor().snapshot_bytes() == before;
        (frozen ? out.frozen : out.unfrozen) = row;
    }
    return out;
}

std::string FreezeAblation::to_markdown() const {
    std::ostringstream os;
    os << "| Visual extractor | Accuracy (%) | Epoch | Training Time (s) |\n|---|---|---|---|\n";
    for (const FreezeRow* r : {&frozen, &unfrozen}) {
        os << "| " << (r->frozen ? "Frozen" : "Unfrozen") << " | " << percent(r->accuracy) << " | " << r->epochs
           << " | " << fixed(r->train_seconds, 1) << " |\n";
    }
    return os.str();
}

std::string FreezeAblation::to_csv() const {
    std::ostringstream os;
    os << "extractor,accuracy,epochs,trainable_parameters,backward_visits,extractor_bytes_unchanged\n";
    for (const FreezeRow* r : {&frozen, &unfrozen}) {
        os << (r->frozen ? "frozen" : "unfrozen") << ',' << exact(r->accuracy) << ',' << r->epochs << ','
           << r->trainable_parameters << ',' << r->backward_visits << ',' << (r->extractor_bytes_unchanged ? 1 : 0)
           << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------

SweepAxis parse_sweep_axis(std::string_view key) {
    if (key == "heads") return SweepAxis::heads;
    if (key == "layers") return SweepAxis::layers;
    throw ConfigError("unknown sweep axis '" + std::string(key) + "'");
}

std::string_view sweep_axis_key(SweepAxis axis) { return axis == SweepAxis::heads ? "heads" : "layers"; }

Sweep sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<std::size_t>& values, const RunData& data) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    std::vector<RunConfig> configs;
    for (std::size_t v : values) {
        RunConfig c = cfg;
        (axis == SweepAxis::heads ? c.heads : c.layers) = v;
        if (v == 0) throw ConfigError("sweep value must be positive");
        c.validate();
        configs.push_back(std::move(c));
    }
    Sweep out;
    out.axis = axis;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const TrainResult r = train(configs[i], data);
        out.points.push_back({values[i], headline_accuracy(r.report),
                              r.report.epoch_losses.empty() ? 0.0 : r.report.epoch_losses.back()});
    }
    return out;
}

std::string Sweep::to_csv() const {
    std::ostringstream os;
    os << sweep_axis_key(axis) << ",accuracy,final_loss\n";
    for (const auto& p : points) os << p.value << ',' << exact(p.accuracy) << ',' << exact(p.final_loss) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------

Significance significance(const RunConfig& a, const RunConfig& b, std::size_t n_seeds, const RunData& data) {
    if (n_seeds < 2) throw ConfigError("significance needs at least two seeds");
    a.validate();
    b.validate();
    Significance out;
    out.seeds = seed_list(a.seed, n_seeds);
    for (std::uint64_t seed : out.seeds) {
        RunConfig ca = a;
        RunConfig cb = b;
        ca.seed = seed;
        cb.seed = seed;
        out.accuracies_a.push_back(headline_accuracy(train(ca, data).report));
        out.accuracies_b.push_back(headline_accuracy(train(cb, data).report));
    }
    out.test = metrics::welch_t_test(out.accuracies_a, out.accuracies_b);
    return out;
}

std::string Significance::to_csv() const {
    std::ostringstream os;
    os << "seed,accuracy_a,accuracy_b\n";
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        os << seeds[i] << ',' << exact(accuracies_a[i]) << ',' << exact(accuracies_b[i]) << '\n';
    }
    return os.str();
}

std::string Significance::to_markdown() const {
    std::ostringstream os;
    os << "| Seed | Accuracy A (%) | Accuracy B (%) |\n|---|---|---|\n";
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        os << "| " << seeds[i] << " | " << percent(accuracies_a[i]) << " | " << percent(accuracies_b[i]) << " |\n";
    }
    os << "\nWelch t = " << fixed(test.t, 6) << ", df = " << fixed(test.df, 4) << ", p = " << fixed(test.p_value, 6)
       << (test.significant ? " (significant at 0.05)" : " (not significant at 0.05)") << ".\n";
    return os.str();
}

}  // namespace vivqa::harness
