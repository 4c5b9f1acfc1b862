#include "tnf/trainer/run.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "tnf/common.hpp"
#include "tnf/corpus/text.hpp"
#include "tnf/trainer/checkpoint.hpp"

namespace tnf::trainer {

namespace fs = std::filesystem;

std::string format_metric(const MetricRow& row) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", row.value);
    return std::to_string(row.step) + "," + row.split + "," + buf;
}

std::vector<MetricRow> read_metrics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<MetricRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line == kMetricsHeader) continue;
        if (line.empty()) continue;
        const auto a = line.find(',');
        const auto b = a == std::string::npos ? a : line.find(',', a + 1);
        if (b == std::string::npos) throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        try {
            std::size_t used = 0;
            MetricRow r;
            r.step = std::stoll(line.substr(0, a), &used);
            r.split = line.substr(a + 1, b - a - 1);
            r.value = std::stod(line.substr(b + 1));
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
    }
    return rows;
}

void write_metrics(const fs::path& path, const std::vector<MetricRow>& rows) {
    std::string text = std::string(kMetricsHeader) + "\n";
    for (const auto& r : rows) text += format_metric(r) + "\n";
    write_file_atomic(path, text);
}

PretrainData load_pretrain_data(const TrainConfig& cfg) {
    for (const auto& [key, value] : {std::pair{"data.train", &cfg.train_path}, std::pair{"data.valid", &cfg.valid_path},
                                     std::pair{"data.vocab", &cfg.vocab_path}, std::pair{"data.rare", &cfg.rare_path}}) {
        if (value->empty()) throw ConfigError(std::string(key) + ": path is required");
    }
    PretrainData d;
    d.vocab = corpus::SubwordVocab::load(cfg.vocab_path);
    d.rare = corpus::load_rare_set(cfg.rare_path);
    d.train = build_dataset(corpus::read_corpus(cfg.train_path), d.vocab, d.rare, cfg.max_len);
    d.valid = build_dataset(corpus::read_corpus(cfg.valid_path), d.vocab, d.rare, cfg.max_len);
    if (d.train.empty()) throw DataError("training split is empty: " + cfg.train_path);
    return d;
}

namespace {

class MetricsSink {
public:
    MetricsSink(fs::path path, std::vector<MetricRow>& rows) : path_(std::move(path)), rows_(rows) {
        if (path_.empty()) return;
        write_metrics(path_, rows_);
        out_.open(path_, std::ios::app);
        if (!out_) throw DataError("cannot append to " + path_.string());
    }

    void add(std::int64_t step, std::string split, double value) {
        rows_.push_back({step, std::move(split), value});
        if (out_.is_open()) out_ << format_metric(rows_.back()) << '\n';
    }
    void flush() {
        if (out_.is_open()) out_.flush();
    }

private:
    fs::path path_;
    std::vector<MetricRow>& rows_;
    std::ofstream out_;
};

}  // namespace

RunResult run_pretraining(const TrainConfig& cfg, const PretrainData& data, const RunOptions& opts) {
    cfg.validate();
    if (opts.resume && opts.out_dir.empty()) throw ConfigError("resume: an output directory is required");
    if (data.train.empty()) throw DataError("training split is empty");

    RunResult res;
    const bool files = !opts.out_dir.empty();
    const fs::path last = opts.out_dir / "last.ckpt";
    if (files) fs::create_directories(opts.out_dir);

    if (opts.resume) {
        res.state = load_checkpoint(last);
        const auto changed = res.state.config.diff(cfg);
        if (!changed.empty()) {
            std::string keys;
            for (const auto& k : changed) keys += (keys.empty() ? "" : ", ") + k;
            throw ConfigError("resume: config differs from the checkpoint in " + keys);
        }
        if (res.state.vocab_size() != data.vocab.size()) throw DataError("resume: vocabulary size differs");
        const fs::path csv = opts.out_dir / "metrics.csv";
        if (fs::exists(csv)) {
            for (auto& r : read_metrics(csv)) {
                if (r.step <= res.state.step) res.metrics.push_back(std::move(r));
            }
        }
    } else {
        res.state = PretrainState::create(cfg, data.vocab.size(), data.rare);
    }
    if (files) cfg.save(opts.out_dir / "config.txt");

    auto& st = res.state;
    MetricsSink sink(files ? opts.out_dir / "metrics.csv" : fs::path{}, res.metrics);
    const BatchOrder order(data.train.size(), cfg.data_seed);
    const bool rtd = cfg.objective == Objective::rtd;

    while (st.step < cfg.steps) {
        if (opts.stop_at > 0 && st.step >= opts.stop_at) break;
        const auto stats = train_step(st, data.train, order);
        const auto s = st.step;
        sink.add(s, "train_loss", stats.loss);
        if (rtd) {
            sink.add(s, "train_mlm", stats.mlm);
            sink.add(s, "train_rtd", stats.rtd);
        }
        if (opts.on_step) opts.on_step(stats, s);

        const bool final_step = s == cfg.steps;
        if ((cfg.eval_every > 0 && s % cfg.eval_every == 0) || final_step) {
            const auto report = evaluate(st, data.valid, static_cast<std::size_t>(cfg.eval_samples), cfg.eval_seed);
            for (const auto& [name, value] : report.splits) {
                if (value) sink.add(s, name, *value);
            }
            if (opts.on_eval) opts.on_eval(report, s);
        }
        sink.flush();

        if (files && ((cfg.checkpoint_every > 0 && s % cfg.checkpoint_every == 0) || s == opts.stop_at || final_step)) {
            save_checkpoint(st, last);
        }
    }
    res.finished = st.step >= cfg.steps;
    if (files && res.finished) save_checkpoint(st, opts.out_dir / "final.ckpt");
    return res;
}

}  // namespace tnf::trainer
