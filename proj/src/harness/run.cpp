#include "vivqa/harness/run.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "vivqa/core/errors.hpp"
#include "vivqa/core/ops.hpp"
#include "vivqa/harness/checkpoint.hpp"
#include "vivqa/head/classifier.hpp"
#include "vivqa/optim/schedule.hpp"

namespace vivqa::harness {

RunData split_run_data(const std::vector<data::Example>& corpus, const RunConfig& cfg) {
    RunData d;
    if (cfg.split_ratio >= 1.0) {
        d.train = corpus;
        return d;
    }
    auto [train, test] = data::split_train_test(corpus, cfg.split_ratio, cfg.seed);
    d.train = std::move(train);
    d.test = std::move(test);
    return d;
}

RunData synthetic_run_data(const RunConfig& cfg, std::size_t n, std::size_t n_global, std::size_t n_local) {
    return split_run_data(data::make_synthetic(n, n_global, n_local, cfg.seed), cfg);
}

RunData load_run_data(const RunConfig& cfg) {
    if (cfg.train_data.empty()) throw ConfigError("no training data given");
    const std::filesystem::path train_path(cfg.train_data);
    const auto corpus = data::load_jsonl(train_path);
    RunData d;
    if (cfg.test_data.empty()) {
        d = split_run_data(corpus, cfg);
    } else {
        d.train = corpus;
        d.test = data::load_jsonl(cfg.test_data);
    }
    d.root = train_path.parent_path();
    return d;
}

nlohmann::ordered_json metrics_json(const metrics::MetricsReport& m) {
    nlohmann::ordered_json j;
    j["count"] = m.count;
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    return j;
}

nlohmann::ordered_json RunReport::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["epochs"] = epochs;
    j["optimizer_steps"] = optimizer_steps;
    j["epoch_losses"] = epoch_losses;
    j["train"] = metrics_json(train_metrics);
    j["test"] = test_metrics ? metrics_json(*test_metrics) : nlohmann::ordered_json();
    j["parameters"] = {{"total", parameters.total}, {"trainable", parameters.trainable}, {"frozen", parameters.frozen}};
    j["backward_visits"] = backward_visits;
    j["config"] = config;
    return j;
}

namespace {

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

}  // namespace

std::string RunReport::to_markdown() const {
    std::ostringstream os;
    os << "| Split | Count | Accuracy | Precision | Recall | F1 |\n";
    os << "|---|---|---|---|---|---|\n";
    auto row = [&](const char* name, const metrics::MetricsReport& m) {
        os << "| " << name << " | " << m.count << " | " << fixed(m.accuracy) << " | " << fixed(m.precision) << " | "
           << fixed(m.recall) << " | " << fixed(m.f1) << " |\n";
    };
    row("train", train_metrics);
    if (test_metrics) row("test", *test_metrics);
    os << "\nSeed " << seed << ", " << epochs << " epochs, " << optimizer_steps << " optimizer steps.\n";
    os << "Parameters: " << parameters.total << " total, " << parameters.trainable << " trainable, "
       << parameters.frozen << " frozen.\n";
    if (!epoch_losses.empty()) os << "Final epoch loss: " << fixed(epoch_losses.back(), 6) << ".\n";
    return os.str();
}

EvalResult evaluate(VqaModel& model, const std::vector<data::Example>& examples) {
    if (examples.empty()) throw ArgumentError("evaluate: empty corpus");
    NoGradGuard guard;
    RngStream unused(0);
    EvalResult out;
    out.predictions.reserve(examples.size());
    for (const auto& ex : examples) {
        const Tensor v = model.visual(ex);
        const auto q = text::tokenize(ex.question, model.vocab(), model.config().max_question_len);
        const Tensor logits = model.forward(v, q, false, unused);
        const auto dist = head::predict(logits, model.answers().answers());
        out.predictions.push_back({ex.id, dist.answer, ex.answer});
    }
    out.metrics = metrics::evaluate(out.predictions);
    return out;
}

TrainResult train(const RunConfig& cfg, const RunData& data) {
    cfg.validate();
    if (data.train.empty()) throw DataError("training split is empty");

    std::vector<std::string> questions;
    questions.reserve(data.train.size());
    for (const auto& ex : data.train) questions.push_back(ex.question);
    text::Vocabulary vocab = text::build_vocab(questions, cfg.min_token_count);
    data::AnswerVocab answers = data::build_answer_vocab(data.train);

    TrainResult result;
    result.model = std::make_unique<VqaModel>(cfg, std::move(vocab), std::move(answers));
    VqaModel& model = *result.model;
    model.set_data_root(data.root);

    optim::AdamW optimizer(model.trainable_parameters(),
                           {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay});
    const std::size_t steps_per_epoch = (data.train.size() + cfg.batch_size - 1) / cfg.batch_size;
    const optim::ScheduleConfig schedule{cfg.lr, cfg.epochs * steps_per_epoch, cfg.warmup_ratio, cfg.floor_lr};
    const RngStream drop_rng = RngStream(cfg.seed).split("drop_path");

    Tape& tape = Tape::current();
    tape.clear();
    tape.reset_counters();

    RunReport& report = result.report;
    report.config = cfg.to_json();
    report.seed = cfg.seed;
    report.parameters = model.parameter_counts();

    const auto started = std::chrono::steady_clock::now();
    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = data::make_batches(data.train, cfg.batch_size, cfg.max_question_len, model.vocab(),
                                                model.answers(), cfg.seed, epoch);
        double epoch_loss = 0.0;
        for (const auto& batch : batches) {
            optimizer.zero_grad();
            RngStream rng = drop_rng.split(step);
            Tensor total;
            for (std::size_t i = 0; i < batch.indices.size(); ++i) {
                const Tensor v = model.visual(data.train[batch.indices[i]]);
                const Tensor logits = model.forward(v, batch.questions[i], true, rng);
                const Tensor loss = ops::cross_entropy(logits, batch.labels[i]);
                epoch_loss += loss.item();
                total = total.defined() ? ops::add(total, loss) : loss;
            }
            const Tensor mean = ops::scale(total, 1.0 / static_cast<double>(batch.indices.size()));
            backward(mean);
            ++step;
            // lr 0 is the frozen-at-init baseline; the schedule itself needs a positive peak.
            optimizer.step(cfg.lr > 0.0 ? optim::lr_at(step, schedule) : 0.0);
        }
        report.epoch_losses.push_back(epoch_loss / static_cast<double>(data.train.size()));
    }
    report.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs = cfg.epochs;
    report.optimizer_steps = step;
    report.backward_visits = tape.total_backward_visits();
    optimizer.zero_grad();
    result.optimizer = optimizer.state();

    EvalResult train_eval = evaluate(model, data.train);
    report.train_metrics = train_eval.metrics;
    result.train_predictions = std::move(train_eval.predictions);
    if (!data.test.empty()) {
        EvalResult test_eval = evaluate(model, data.test);
        report.test_metrics = test_eval.metrics;
        result.test_predictions = std::move(test_eval.predictions);
    }
    return result;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

void write_run_outputs(const std::filesystem::path& dir, const TrainResult& result) {
    std::filesystem::create_directories(dir);
    const RunReport& r = result.report;
    write_text(dir / "report.json", r.to_json().dump(2) + "\n");
    write_text(dir / "report.md", r.to_markdown());
    std::ostringstream losses;
    losses << "epoch,loss\n";
    losses.precision(17);
    for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) losses << e + 1 << ',' << r.epoch_losses[e] << '\n';
    write_text(dir / "losses.csv", losses.str());
    nlohmann::ordered_json timing;
    timing["train_seconds"] = r.train_seconds;
    write_text(dir / "timing.json", timing.dump(2) + "\n");
    metrics::write_predictions(dir / "predictions_train.jsonl", result.train_predictions);
    if (!result.test_predictions.empty()) {
        metrics::write_predictions(dir / "predictions_test.jsonl", result.test_predictions);
    }
    save_checkpoint(dir / "checkpoint.vvqc", *result.model, result.optimizer);
}

}  // namespace vivqa::harness
