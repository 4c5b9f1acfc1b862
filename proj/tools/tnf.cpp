#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <map>
#include <set>

#include "tnf/common.hpp"
#include "tnf/corpus/rare.hpp"
#include "tnf/corpus/sequence.hpp"
#include "tnf/corpus/synthetic.hpp"
#include "tnf/corpus/text.hpp"
#include "tnf/corpus/vocab.hpp"
#include "tnf/trainer/checkpoint.hpp"
#include "tnf/trainer/finetune.hpp"
#include "tnf/trainer/run.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tnf;

namespace {

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string file_hash(const fs::path& p) {
    if (p.empty() || !fs::exists(p)) return "";
    return hex64(fnv1a(fs::is_directory(p) ? corpus::read_corpus_bytes(p) : trainer::read_file_bytes(p)));
}

json config_json(const trainer::TrainConfig& c) {
    json j = json::object();
    for (const auto& k : trainer::TrainConfig::field_names()) {
        const auto v = c.get(k);
        char* end = nullptr;
        const double d = std::strtod(v.c_str(), &end);
        if (!v.empty() && end && *end == '\0') j[k] = d;
        else if (v == "true" || v == "false") j[k] = v == "true";
        else j[k] = v;
    }
    return j;
}

/// manifest.json: what ran, on which inputs, producing which files.
class Manifest {
public:
    Manifest(std::string command, int argc, char** argv) {
        j_["command"] = std::move(command);
        j_["argv"] = std::vector<std::string>(argv, argv + argc);
        j_["started"] = utc_now();
        j_["inputs"] = json::object();
        j_["outputs"] = json::array();
    }
    void input(const std::string& name, const fs::path& p) {
        j_["inputs"][name] = {{"path", p.string()}, {"fnv1a", file_hash(p)}};
    }
    void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }
    void config(const trainer::TrainConfig& c) {
        j_["config_hash"] = hex64(fnv1a(c.to_text()));
        j_["seeds"] = {{"seed", c.seed}, {"data_seed", c.data_seed}, {"eval_seed", c.eval_seed}};
        j_["config"] = config_json(c);
    }
    json& operator[](const std::string& k) { return j_[k]; }
    void write(const fs::path& dir) { write_file(dir / "manifest.json"); }
    void write_file(const fs::path& path) {
        j_["finished"] = utc_now();
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        trainer::write_file_atomic(path, j_.dump(2) + "\n");
    }

private:
    json j_;
};

double pct(double x) { return 100.0 * x; }

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
    corpus::SyntheticConfig cfg;
    fs::path out;
};

int run_synth(const SynthArgs& a, int argc, char** argv) {
    Manifest m("synth", argc, argv);
    const auto syn = corpus::generate_synthetic(a.cfg);
    corpus::write_synthetic(syn, a.out);
    for (const char* f : {"train.txt", "valid.txt", "planted.tsv", "probe_train.tsv", "probe_test.tsv"})
        m.output(a.out / f);
    m["seeds"] = {{"seed", a.cfg.seed}};
    m.write(a.out);
    std::printf("wrote %s: %zu planted rare words, %zu/%zu probe examples\n", a.out.c_str(), syn.planted.size(),
                syn.probe_train.size(), syn.probe_test.size());
    return 0;
}

// ---- build-vocab ---------------------------------------------------------

struct VocabArgs {
    fs::path corpus, out;
    int vocab_size = 1000;
    std::int64_t lo = 10, hi = 50;
};

int run_build_vocab(const VocabArgs& a, int argc, char** argv) {
    Manifest m("build-vocab", argc, argv);
    m.input("corpus", a.corpus);
    const auto c = corpus::read_corpus(a.corpus);
    const auto freq = corpus::count_word_frequencies(c);
    const auto vocab = corpus::train_bpe(freq, a.vocab_size);
    const auto rare = corpus::select_rare_words(freq, a.lo, a.hi);
    fs::create_directories(a.out);
    vocab.save(a.out / "vocab.txt");
    corpus::save_freq_table(freq, a.out / "freq.tsv");
    corpus::save_rare_set(rare, a.out / "rare.tsv");
    for (const char* f : {"vocab.txt", "freq.tsv", "rare.tsv"}) m.output(a.out / f);
    std::int64_t rare_mass = 0;
    for (auto n : rare.counts()) rare_mass += n;
    m["rare_band"] = {{"lo", a.lo}, {"hi", a.hi}, {"words", rare.size()}};
    m.write(a.out);
    std::printf("corpus: %zu documents, %zu sentences, %lld words, %zu word types\n", c.documents.size(),
                c.sentence_count(), static_cast<long long>(freq.total()), freq.counts.size());
    std::printf("vocab: %d tokens (%zu merges)\n", vocab.size(), vocab.merges().size());
    std::printf("rare band [%lld, %lld]: %zu words, %lld occurrences (%.2f%% of words)\n", static_cast<long long>(a.lo),
                static_cast<long long>(a.hi), rare.size(), static_cast<long long>(rare_mass),
                freq.total() ? pct(double(rare_mass) / double(freq.total())) : 0.0);
    return 0;
}

// ---- stats ---------------------------------------------------------------

struct StatsArgs {
    fs::path corpus, vocab, rare;
    int max_len = 128;
};

int run_stats(const StatsArgs& a) {
    if (!fs::exists(a.rare)) throw DataError("rare set not found: " + a.rare.string());
    const auto vocab = corpus::SubwordVocab::load(a.vocab);
    const auto rare = corpus::load_rare_set(a.rare);
    const auto seqs = corpus::tokenize_corpus(corpus::read_corpus(a.corpus), vocab);
    const auto r = corpus::corpus_rare_stats(seqs, rare, a.max_len);
    std::printf("rare words in set:        %zu\n", rare.size());
    std::printf("sentences with rare word: %lld / %lld (%.2f%%)\n", static_cast<long long>(r.rare_sentences),
                static_cast<long long>(r.sentences), pct(r.sentence_fraction()));
    std::printf("samples with rare word:   %lld / %lld (%.2f%%) at max_len %d\n",
                static_cast<long long>(r.rare_samples), static_cast<long long>(r.samples), pct(r.sample_fraction()),
                a.max_len);
    std::printf("rare-token mass:          %lld / %lld (%.2f%%)\n", static_cast<long long>(r.rare_tokens),
                static_cast<long long>(r.tokens), pct(r.rare_token_mass()));
    std::printf("reference (full-scale pre-training corpus): about 20%% of sentences and over 90%% of samples\n");
    return 0;
}

// ---- pretrain ------------------------------------------------------------

struct PretrainArgs {
    std::string preset = "desk";
    fs::path config, out;
    std::vector<std::string> sets;
    std::map<std::string, std::string> fields;
    bool no_tnf = false;
    bool resume = false;
    bool dry_run = false;
    bool quiet = false;
    std::int64_t stop_at = 0;
};

trainer::TrainConfig build_config(const PretrainArgs& a) {
    trainer::TrainConfig c;
    if (a.preset == "paper") c = trainer::TrainConfig::paper();
    else if (a.preset != "desk") throw ConfigError("preset: expected desk or paper, got '" + a.preset + "'");
    if (!a.config.empty()) c = trainer::TrainConfig::load(a.config, c);
    for (const auto& [k, v] : a.fields) c.set(k, v);
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (a.no_tnf) c.tnf = false;
    c.validate();
    return c;
}

int run_pretrain(const PretrainArgs& a, int argc, char** argv) {
    const auto cfg = build_config(a);
    if (a.out.empty()) throw ConfigError("out: an output directory is required");
    Manifest m("pretrain", argc, argv);
    m.config(cfg);
    if (a.dry_run) {
        fs::create_directories(a.out);
        cfg.save(a.out / "config.txt");
        m.output(a.out / "config.txt");
        m.write(a.out);
        std::fputs(cfg.to_text().c_str(), stdout);
        return 0;
    }
    m.input("train", cfg.train_path);
    m.input("valid", cfg.valid_path);
    m.input("vocab", cfg.vocab_path);
    m.input("rare", cfg.rare_path);
    m["corpus_hash"] = file_hash(cfg.train_path);
    const auto data = trainer::load_pretrain_data(cfg);
    trainer::RunOptions opts;
    opts.out_dir = a.out;
    opts.resume = a.resume;
    opts.stop_at = a.stop_at;
    const auto t0 = std::chrono::steady_clock::now();
    if (!a.quiet) {
        opts.on_eval = [&](const trainer::EvalReport& r, std::int64_t step) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("step %lld (%.0fs)", static_cast<long long>(step), secs);
            for (const auto& [name, v] : r.splits) {
                if (v) std::printf("  %s %.4f", name.c_str(), *v);
            }
            std::printf("\n");
            std::fflush(stdout);
        };
    }
    std::printf("%s %s: %zu train / %zu valid samples, vocab %d, %zu rare words\n",
                trainer::objective_name(cfg.objective).c_str(), cfg.tnf ? "tnf" : "baseline", data.train.size(),
                data.valid.size(), data.vocab.size(), data.rare.size());
    const auto res = trainer::run_pretraining(cfg, data, opts);
    for (const char* f : {"config.txt", "metrics.csv", "last.ckpt"}) m.output(a.out / f);
    if (res.finished) m.output(a.out / "final.ckpt");
    m["step"] = res.state.step;
    m["finished"] = res.finished;
    m.write(a.out);
    return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
    fs::path checkpoint, valid;
    int samples = -1;
    std::int64_t seed = -1;
};

int run_eval(const EvalArgs& a) {
    const auto st = trainer::load_checkpoint(a.checkpoint);
    const auto& cfg = st.config;
    const auto vocab = corpus::SubwordVocab::load(cfg.vocab_path);
    const auto rare = corpus::load_rare_set(cfg.rare_path);
    if (vocab.size() != st.vocab_size()) throw DataError("vocabulary does not match the checkpoint");
    const auto valid = trainer::build_dataset(corpus::read_corpus(a.valid.empty() ? fs::path(cfg.valid_path) : a.valid),
                                              vocab, rare, cfg.max_len);
    const auto n = a.samples >= 0 ? static_cast<std::size_t>(a.samples) : static_cast<std::size_t>(cfg.eval_samples);
    const auto seed = a.seed >= 0 ? static_cast<std::uint64_t>(a.seed) : cfg.eval_seed;
    const auto r = trainer::evaluate(st, valid, n, seed);
    std::printf("step %lld\n", static_cast<long long>(st.step));
    for (std::size_t i = 0; i < r.splits.size(); ++i) {
        const auto& [name, v] = r.splits[i];
        if (v) std::printf("%-26s %.6f  (%lld positions)\n", name.c_str(), *v, static_cast<long long>(r.counts[i]));
        else std::printf("%-26s absent\n", name.c_str());
    }
    return 0;
}

// ---- export / inspect -----------------------------------------------------

struct ExportArgs {
    fs::path checkpoint, out;
    std::string mode;
};

int run_export(const ExportArgs& a, int argc, char** argv) {
    const auto mode = trainer::parse_mode(a.mode);
    const auto st = trainer::load_checkpoint(a.checkpoint);
    const auto ft = trainer::export_finetune_checkpoint(st, mode);
    if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
    trainer::save_finetune_checkpoint(ft, a.out);
    Manifest m("export", argc, argv);
    m.input("checkpoint", a.checkpoint);
    m.output(a.out);
    m["mode"] = a.mode;
    m.write_file(a.out.string() + ".manifest.json");
    std::printf("exported %s (%s, %zu note entries)\n", a.out.c_str(), a.mode.c_str(), ft.notes ? ft.notes->size() : 0);
    return 0;
}

int run_inspect(const fs::path& path) {
    const auto s = trainer::inspect_checkpoint(path);
    std::printf("kind       %s\n", s.kind.c_str());
    std::printf("version    %u\n", s.version);
    if (s.kind == "pretrain") std::printf("step       %lld\n", static_cast<long long>(s.step));
    if (!s.mode.empty()) std::printf("mode       %s\n", s.mode.c_str());
    std::string sections;
    for (const auto& n : s.sections) sections += (sections.empty() ? "" : " ") + n;
    std::printf("sections   %s\n", sections.c_str());
    const bool has_notes = std::find(s.sections.begin(), s.sections.end(), "notes") != s.sections.end();
    if (has_notes) std::printf("dictionary %zu entries\n", s.note_entries);
    else std::printf("dictionary none\n");
    std::size_t total = 0;
    for (const auto& e : s.params) total += e.size();
    std::printf("parameters %zu in %zu tensors\n", total, s.params.size());
    for (const auto& e : s.params) std::printf("  %-16s %zu x %zu\n", e.name.c_str(), e.rows, e.cols);
    return 0;
}

// ---- probe ---------------------------------------------------------------

struct ProbeArgs {
    fs::path checkpoint, vocab, train, test, out;
    std::vector<std::string> modes{"discard", "tnf_f", "tnf_u"};
    trainer::ProbeConfig cfg;
    bool random_baseline = false;
};

std::vector<corpus::ProbeSequence> load_probe_set(const fs::path& p, const corpus::SubwordVocab& v) {
    std::vector<corpus::ProbeSequence> out;
    for (const auto& ex : corpus::load_probe(p)) out.push_back(corpus::tokenize_probe(ex, v));
    return out;
}

int run_probe(const ProbeArgs& a, int argc, char** argv) {
    const auto bytes = trainer::read_file_bytes(a.checkpoint);
    const auto kind = trainer::inspect_checkpoint_bytes(bytes).kind;
    const auto vocab = corpus::SubwordVocab::load(a.vocab);
    const auto train = load_probe_set(a.train, vocab);
    const auto test = load_probe_set(a.test, vocab);

    std::vector<std::pair<std::string, trainer::FinetuneCheckpoint>> runs;
    if (kind == "finetune") {
        auto ft = trainer::deserialize_finetune(bytes);
        runs.emplace_back(trainer::mode_name(ft.mode), std::move(ft));
    } else {
        const auto st = trainer::deserialize_pretrain(bytes);
        for (const auto& name : a.modes) {
            runs.emplace_back(name, trainer::export_finetune_checkpoint(st, trainer::parse_mode(name)));
        }
    }
    if (runs.empty()) throw ConfigError("modes: at least one mode is required");
    if (runs.front().second.model.config.vocab_size != vocab.size()) {
        throw DataError("vocabulary does not match the checkpoint");
    }
    if (a.random_baseline) {
        const auto& ref = runs.front().second;
        runs.emplace_back("random", trainer::random_finetune_checkpoint(ref.config, vocab.size(),
                                                                        derive_seed(a.cfg.seed, 7)));
    }

    json rows = json::array();
    std::printf("%-8s  %9s  %9s  %s\n", "mode", "train_acc", "test_acc", "notes");
    for (const auto& [name, ck] : runs) {
        const auto r = trainer::finetune_probe(ck, train, test, a.cfg);
        const char* notes = !ck.notes ? "none" : r.notes_changed ? "updated" : "fixed";
        std::printf("%-8s  %9.4f  %9.4f  %s\n", name.c_str(), r.train_accuracy, r.test_accuracy, notes);
        rows.push_back({{"mode", name}, {"train_accuracy", r.train_accuracy}, {"test_accuracy", r.test_accuracy},
                        {"notes", notes}});
    }
    if (!a.out.empty()) {
        Manifest m("probe", argc, argv);
        m.input("checkpoint", a.checkpoint);
        m.input("train", a.train);
        m.input("test", a.test);
        m["results"] = rows;
        m.write(a.out);
    }
    return 0;
}

// ---- curves --------------------------------------------------------------

struct CurvesArgs {
    std::vector<std::string> runs;
    std::string split = "val_loss";
    fs::path out;
};

int run_curves(const CurvesArgs& a) {
    std::vector<std::string> labels;
    std::vector<std::map<std::int64_t, double>> series;
    std::set<std::int64_t> steps;
    for (const auto& r : a.runs) {
        fs::path p = r;
        std::string label = fs::is_directory(p) ? p.filename().string() : p.stem().string();
        if (fs::is_directory(p)) p /= "metrics.csv";
        if (label.empty()) label = p.parent_path().filename().string();
        while (std::find(labels.begin(), labels.end(), label) != labels.end()) label += "_";
        std::map<std::int64_t, double> s;
        for (const auto& row : trainer::read_metrics(p)) {
            if (row.split == a.split) s[row.step] = row.value;
        }
        for (const auto& [k, v] : s) steps.insert(k);
        labels.push_back(label);
        series.push_back(std::move(s));
    }
    std::string text = "step";
    for (const auto& l : labels) text += "," + l;
    text += "\n";
    char buf[64];
    for (auto step : steps) {
        text += std::to_string(step);
        for (const auto& s : series) {
            text += ",";
            if (auto it = s.find(step); it != s.end()) {
                std::snprintf(buf, sizeof buf, "%.17g", it->second);
                text += buf;
            }
        }
        text += "\n";
    }
    if (a.out.empty()) std::fputs(text.c_str(), stdout);
    else trainer::write_file_atomic(a.out, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Taking Notes on the Fly: desk-scale pre-training with a rare-word note dictionary"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted rare words");
    c_synth->add_option("--out", synth.out, "Output directory")->required();
    c_synth->add_option("--words", synth.cfg.target_words, "Target corpus size in words");
    c_synth->add_option("--seed", synth.cfg.seed);
    c_synth->add_option("--common-words", synth.cfg.common_words);
    c_synth->add_option("--rare-words", synth.cfg.rare_words);
    c_synth->add_option("--attributes", synth.cfg.attributes);
    c_synth->add_option("--rare-min", synth.cfg.rare_min);
    c_synth->add_option("--rare-max", synth.cfg.rare_max);

    VocabArgs bv;
    auto* c_bv = app.add_subcommand("build-vocab", "Train BPE, count words, select the rare band");
    c_bv->add_option("--corpus", bv.corpus, "Corpus file or directory")->required();
    c_bv->add_option("--vocab-size", bv.vocab_size, "Learned tokens (base characters + merges)");
    c_bv->add_option("--rare-lo", bv.lo);
    c_bv->add_option("--rare-hi", bv.hi);
    c_bv->add_option("--out", bv.out)->required();

    StatsArgs sa;
    auto* c_stats = app.add_subcommand("stats", "Rare-word coverage of a corpus");
    c_stats->add_option("--corpus", sa.corpus)->required();
    c_stats->add_option("--vocab", sa.vocab)->required();
    c_stats->add_option("--rare", sa.rare)->required();
    c_stats->add_option("--max-len", sa.max_len);

    PretrainArgs pa;
    auto* c_pt = app.add_subcommand("pretrain", "MLM or RTD pre-training, baseline or TNF");
    c_pt->add_option("--preset", pa.preset, "desk or paper");
    c_pt->add_option("--config", pa.config, "key = value config file");
    c_pt->add_option("--out", pa.out, "Run directory");
    c_pt->add_option("--set", pa.sets, "key=value override (repeatable)");
    for (const auto& k : trainer::TrainConfig::field_names()) {
        c_pt->add_option_function<std::string>("--" + k, [&pa, k](const std::string& v) { pa.fields[k] = v; },
                                              "Override " + k);
    }
    c_pt->add_flag("--no-tnf", pa.no_tnf, "Baseline: no note dictionary");
    c_pt->add_flag("--resume", pa.resume, "Continue from <out>/last.ckpt");
    c_pt->add_option("--stop-at", pa.stop_at, "Checkpoint and stop after this step");
    c_pt->add_flag("--dry-run", pa.dry_run, "Validate, write config and manifest, do not train");
    c_pt->add_flag("--quiet", pa.quiet);

    EvalArgs ea;
    auto* c_eval = app.add_subcommand("eval", "Validation losses of a pre-training checkpoint");
    c_eval->add_option("--checkpoint", ea.checkpoint)->required();
    c_eval->add_option("--valid", ea.valid, "Validation corpus (default: from the checkpoint config)");
    c_eval->add_option("--samples", ea.samples);
    c_eval->add_option("--seed", ea.seed);

    ExportArgs xa;
    auto* c_export = app.add_subcommand("export", "Fine-tuning checkpoint: discard, tnf_f or tnf_u");
    c_export->add_option("--checkpoint", xa.checkpoint)->required();
    c_export->add_option("--mode", xa.mode)->required();
    c_export->add_option("--out", xa.out)->required();

    fs::path inspect_path;
    auto* c_inspect = app.add_subcommand("inspect", "Describe a checkpoint file");
    c_inspect->add_option("checkpoint", inspect_path)->required();

    ProbeArgs pr;
    auto* c_probe = app.add_subcommand("probe", "Fine-tune a sequence classifier per export mode");
    c_probe->add_option("--checkpoint", pr.checkpoint)->required();
    c_probe->add_option("--vocab", pr.vocab)->required();
    c_probe->add_option("--train", pr.train)->required();
    c_probe->add_option("--test", pr.test)->required();
    c_probe->add_option("--modes", pr.modes)->delimiter(',');
    c_probe->add_option("--epochs", pr.cfg.epochs);
    c_probe->add_option("--batch", pr.cfg.batch);
    c_probe->add_option("--head-lr", pr.cfg.head_lr);
    c_probe->add_option("--encoder-lr", pr.cfg.encoder_lr);
    c_probe->add_option("--note-lr", pr.cfg.note_lr);
    c_probe->add_option("--seed", pr.cfg.seed);
    c_probe->add_flag("!--freeze-encoder", pr.cfg.train_encoder, "Train only the head (and tnf_u notes)");
    c_probe->add_flag("--random-baseline", pr.random_baseline, "Add a randomly initialized encoder row");
    c_probe->add_option("--out", pr.out, "Directory for manifest.json");

    CurvesArgs ca;
    auto* c_curves = app.add_subcommand("curves", "Align one split of several runs into a step table");
    c_curves->add_option("runs", ca.runs, "Run directories or metrics.csv files")->required();
    c_curves->add_option("--split", ca.split);
    c_curves->add_option("--out", ca.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*c_synth) return run_synth(synth, argc, argv);
        if (*c_bv) return run_build_vocab(bv, argc, argv);
        if (*c_stats) return run_stats(sa);
        if (*c_pt) return run_pretrain(pa, argc, argv);
        if (*c_eval) return run_eval(ea);
        if (*c_export) return run_export(xa, argc, argv);
        if (*c_inspect) return run_inspect(inspect_path);
        if (*c_probe) return run_probe(pr, argc, argv);
        if (*c_curves) return run_curves(ca);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    }
    return 2;
}
