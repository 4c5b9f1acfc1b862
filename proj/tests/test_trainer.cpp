#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <fstream>

#include "data_fixture.hpp"
#include "test_support.hpp"
#include "tnf/trainer/checkpoint.hpp"
#include "tnf/trainer/finetune.hpp"
#include "tnf/trainer/loss.hpp"
#include "tnf/trainer/optim.hpp"
#include "tnf/trainer/rtd.hpp"
#include "tnf/trainer/run.hpp"

using namespace tnf;
using namespace tnf::trainer;
using nn::Matrix;

namespace {

std::vector<MetricRow> run_rows(const TrainConfig& cfg, const PretrainData& data) {
    return run_pretraining(cfg, data, {}).metrics;
}

}  // namespace

TEST(LrSchedule, AnchorsAndShape) {
    EXPECT_DOUBLE_EQ(lr_schedule(100, 1e-3, 100, 1000), 1e-3);
    EXPECT_DOUBLE_EQ(lr_schedule(50, 1e-3, 100, 1000), 5e-4);
    EXPECT_EQ(lr_schedule(1000, 1e-3, 100, 1000), 0.0);
    EXPECT_EQ(lr_schedule(1500, 1e-3, 100, 1000), 0.0);
    EXPECT_EQ(lr_schedule(0, 1e-3, 100, 1000), 0.0);
    const auto p = TrainConfig::paper();
    EXPECT_DOUBLE_EQ(lr_schedule(p.warmup, p.lr, p.warmup, p.steps), 1e-4);
}

TEST(LrSchedule, PiecewiseLinearSinglePeak) {
    const std::int64_t warm = 37, total = 400;
    int peaks = 0;
    double prev = lr_schedule(0, 1.0, warm, total);
    for (std::int64_t s = 1; s <= total; ++s) {
        const double cur = lr_schedule(s, 1.0, warm, total);
        const double next = lr_schedule(s + 1, 1.0, warm, total);
        if (cur > prev && cur > next) ++peaks;
        EXPECT_LE(std::abs(cur - prev), 1.0 / warm + 1e-12);
        prev = cur;
    }
    EXPECT_EQ(peaks, 1);
}

TEST(Adam, ZeroGradientsLeaveParamsWithoutDecay) {
    std::vector<double> p{1.0, -2.0, 3.0}, g(3, 0.0);
    Adam a(3, {0.9, 0.98, 1e-6, 0.0});
    for (int i = 0; i < 5; ++i) a.step(p, g, 0.1);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, DecoupledDecayScalesParams) {
    std::vector<double> p{2.0}, g{0.0};
    Adam a(1, {0.9, 0.98, 1e-6, 0.01});
    a.step(p, g, 0.5);
    EXPECT_DOUBLE_EQ(p[0], 2.0 * (1 - 0.5 * 0.01));
    a.step(p, g, 0.5);
    EXPECT_DOUBLE_EQ(p[0], 2.0 * (1 - 0.5 * 0.01) * (1 - 0.5 * 0.01));
}

TEST(Adam, ScalarRecurrenceOracle) {
    const double b1 = 0.9, b2 = 0.98, eps = 1e-6, wd = 0.01, lr = 0.05;
    std::vector<double> p{0.7};
    Adam a(1, {b1, b2, eps, wd});
    double x = 0.7, m = 0, v = 0;
    const double grads[] = {0.3, -1.2, 0.05, 2.0};
    for (int t = 1; t <= 4; ++t) {
        const double g = grads[t - 1];
        std::vector<double> gv{g};
        a.step(p, gv, lr);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
        x = x * (1 - lr * wd) - lr * mh / (std::sqrt(vh) + eps);
        EXPECT_NEAR(p[0], x, 1e-8);
    }
    EXPECT_EQ(a.steps(), 4);
}

TEST(Adam, NonFiniteGradientRejectedWithoutChange) {
    std::vector<double> p{1.0, 2.0};
    Adam a(2, {});
    std::vector<double> g{0.1, NAN};
    EXPECT_THROW(a.step(p, g, 0.1), NumericError);
    EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(a.steps(), 0);
}

TEST(Loss, UniformLogitsGiveLogV) {
    Matrix z(3, 17);
    const auto l = mlm_loss(z, std::vector<int>{1, 5, 16});
    EXPECT_NEAR(l.loss, std::log(17.0), 1e-12);
    EXPECT_EQ(l.count, 3u);
}

TEST(Loss, PerfectLogitsApproachZeroAndEmptyIsFlagged) {
    Matrix z(1, 4);
    z(0, 2) = 60.0;
    EXPECT_LT(mlm_loss(z, std::vector<int>{2}).loss, 1e-20);
    const auto e = mlm_loss(z, std::vector<int>{-1});
    EXPECT_TRUE(e.empty);
    EXPECT_EQ(e.loss, 0.0);
}

TEST(Loss, CrossEntropyMatchesScalarOracleAndGradient) {
    Rng rng(3);
    Matrix z = test::random_matrix(4, 9, rng, 3.0);
    const std::vector<int> t{0, 8, 3, 3};
    Matrix d;
    const auto rows = cross_entropy_rows(z, t, &d, 0.5);
    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 9; ++c) s += std::exp(z(r, c));
        EXPECT_NEAR(rows[r], std::log(s) - z(r, t[r]), 1e-6);
    }
    auto loss = [&] {
        double s = 0;
        for (double l : cross_entropy_rows(z, t, nullptr, 1.0)) s += 0.5 * l;
        return s;
    };
    EXPECT_LT(test::fd_check(z.values(), d.values(), loss, 1e-5), 1e-7);
}

TEST(Loss, BceAtZeroIsLn2AndGradientMatches) {
    std::vector<double> z(5, 0.0);
    const std::vector<std::uint8_t> y{0, 1, 1, 0, 0};
    for (double l : bce_with_logits(z, y, {}, 1.0)) EXPECT_NEAR(l, std::log(2.0), 1e-15);
    z = {-3.0, 0.4, 40.0, -40.0, 2.5};
    std::vector<double> d(5);
    bce_with_logits(z, y, d, 2.0);
    auto loss = [&] {
        double s = 0;
        for (double l : bce_with_logits(z, y, {}, 1.0)) s += 2.0 * l;
        return s;
    };
    EXPECT_LT(test::fd_check(z, d, loss, 1e-5), 1e-7);
    for (double l : bce_with_logits(z, y, {}, 1.0)) EXPECT_TRUE(std::isfinite(l));
}

TEST(Config, TextRoundTripCoversEveryField) {
    auto c = TrainConfig::paper();
    c.objective = Objective::rtd;
    c.note.gamma = 0.123456789012345;
    c.train_path = "/a b/train.txt";
    const auto text = c.to_text();
    EXPECT_EQ(TrainConfig::from_text(text), c);
    std::size_t lines = 0;
    for (char ch : text) lines += ch == '\n';
    EXPECT_EQ(lines, TrainConfig::field_names().size());
    for (const auto& k : TrainConfig::field_names()) EXPECT_NO_THROW(c.get(k));
}

TEST(Config, PaperPresetValues) {
    const auto p = TrainConfig::paper();
    EXPECT_EQ(p.lr, 1e-4);
    EXPECT_EQ(p.warmup, 10000);
    EXPECT_EQ(p.beta1, 0.9);
    EXPECT_EQ(p.beta2, 0.98);
    EXPECT_EQ(p.eps, 1e-6);
    EXPECT_EQ(p.weight_decay, 0.01);
    EXPECT_EQ(p.dropout, 0.1);
    EXPECT_EQ(p.batch, 256);
    EXPECT_EQ(p.max_len, 512);
    EXPECT_EQ(p.steps, 1000000);
    EXPECT_EQ(p.note.k, 16);
    EXPECT_EQ(p.note.lambda, 0.5);
    EXPECT_EQ(p.note.gamma, 0.1);
    EXPECT_NO_THROW(p.validate());
}

TEST(Config, ErrorsNameTheField) {
    TrainConfig c;
    EXPECT_THROW(c.set("no.such", "1"), ConfigError);
    EXPECT_THROW(c.set("steps", "x"), ConfigError);
    c.set("tnf.lambda", "2");
    try {
        c.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("tnf.lambda"), std::string::npos);
    }
    const auto parsed = TrainConfig::from_text("# comment\nsteps = 7\n\nbatch=3\n");
    EXPECT_EQ(parsed.steps, 7);
    EXPECT_EQ(parsed.batch, 3);
    EXPECT_EQ(parsed.diff(TrainConfig{}), (std::vector<std::string>{"steps", "batch"}));
}

TEST(Data, OccurrencesComeFromWholeRareSpans) {
    const auto& d = test::tiny_data();
    ASSERT_FALSE(d.data.rare.empty());
    std::size_t total = 0;
    for (const auto& s : d.data.train.samples) {
        for (const auto& o : s.occurrences) {
            bool found = false;
            for (const auto& sp : s.seq.spans) {
                if (sp.begin == o.begin && sp.end == o.end) {
                    found = sp.whole && d.data.rare.key(sp.word) == o.key;
                }
            }
            ASSERT_TRUE(found);
            ++total;
        }
        ASSERT_EQ(s.sentence_rare.size(), s.seq.sentences.size());
    }
    EXPECT_GT(total, 0u);
}

TEST(Data, BatchOrderIsAPermutationPerEpoch) {
    BatchOrder o(13, 5);
    for (int e = 0; e < 3; ++e) {
        std::vector<int> seen(13, 0);
        for (int i = 0; i < 13; ++i) ++seen[o.at(e * 13 + i)];
        EXPECT_EQ(seen, std::vector<int>(13, 1));
    }
    BatchOrder again(13, 5);
    EXPECT_EQ(o.at(20), again.at(20));
    EXPECT_THROW(BatchOrder(0, 1).at(0), DataError);
}

TEST(Pretrain, LambdaZeroMatchesBaselineBitForBit) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    cfg.tnf = true;
    cfg.note.lambda = 0.0;
    const auto tnf_rows = run_rows(cfg, d.data);
    cfg.tnf = false;
    EXPECT_EQ(run_rows(cfg, d.data), tnf_rows);
}

TEST(Pretrain, EmptyRareSetMatchesBaseline) {
    auto data = test::tiny_data().data;
    for (auto& s : data.train.samples) s.occurrences.clear(), std::fill(s.sentence_rare.begin(), s.sentence_rare.end(), 0);
    for (auto& s : data.valid.samples) s.occurrences.clear(), std::fill(s.sentence_rare.begin(), s.sentence_rare.end(), 0);
    data.rare = corpus::RareWordSet{};
    auto cfg = test::tiny_config();
    cfg.tnf = true;
    const auto tnf_rows = run_rows(cfg, data);
    cfg.tnf = false;
    EXPECT_EQ(run_rows(cfg, data), tnf_rows);
}

TEST(Pretrain, BatchWithoutRareWordsLeavesNotesUnchanged) {
    const auto& d = test::tiny_data();
    Dataset plain;
    for (const auto& s : d.data.train.samples) {
        if (!s.has_rare()) plain.samples.push_back(s);
    }
    ASSERT_FALSE(plain.empty());
    auto st = PretrainState::create(test::tiny_config(), d.data.vocab.size(), d.data.rare);
    const auto before = *st.notes;
    BatchOrder order(plain.size(), 1);
    const auto stats = train_step(st, plain, order);
    EXPECT_EQ(stats.note_updates, 0u);
    EXPECT_EQ(*st.notes, before);
}

TEST(Pretrain, NotesUpdateOnRareBatches) {
    const auto& d = test::tiny_data();
    auto st = PretrainState::create(test::tiny_config(), d.data.vocab.size(), d.data.rare);
    const auto before = *st.notes;
    BatchOrder order(d.data.train.size(), 1);
    std::size_t updates = 0;
    for (int i = 0; i < 5; ++i) updates += train_step(st, d.data.train, order).note_updates;
    ASSERT_GT(updates, 0u);
    EXPECT_NE(*st.notes, before);
    std::int64_t counted = 0;
    for (auto c : st.notes->counters()) counted += c;
    EXPECT_EQ(counted, static_cast<std::int64_t>(updates));
}

TEST(Pretrain, OverfitsATinyCorpus) {
    const auto& d = test::tiny_data();
    Dataset small;
    small.samples.assign(d.data.train.samples.begin(), d.data.train.samples.begin() + 4);
    auto cfg = test::tiny_config();
    cfg.steps = 300;
    cfg.warmup = 10;
    cfg.lr = 3e-3;
    cfg.dropout = 0.0;
    cfg.weight_decay = 0.0;
    cfg.batch = 4;
    cfg.d_model = 32;
    cfg.ffn_dim = 64;
    cfg.layers = 2;
    auto st = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
    BatchOrder order(small.size(), 1);
    double first = 0, last = 0;
    for (int i = 0; i < cfg.steps; ++i) {
        const double l = train_step(st, small, order).loss;
        if (i < 3) first += l / 3;
        if (i >= cfg.steps - 3) last += l / 3;
    }
    EXPECT_LT(last, 0.5 * first);
}

TEST(Pretrain, DeterministicGivenSeeds) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    cfg.steps = 6;
    const auto a = run_rows(cfg, d.data);
    EXPECT_EQ(run_rows(cfg, d.data), a);
    cfg.seed = 99;
    EXPECT_NE(run_rows(cfg, d.data), a);
}

TEST(Pretrain, StepIsIndependentOfThreadCount) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    const int saved = omp_get_max_threads();
    std::vector<nn::ParamStore> models;
    std::vector<notes::NoteDict> dicts;
    for (int threads : {1, 4}) {
        omp_set_num_threads(threads);
        auto st = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
        BatchOrder order(d.data.train.size(), cfg.data_seed);
        for (int i = 0; i < 3; ++i) train_step(st, d.data.train, order);
        models.push_back(st.model.store);
        dicts.push_back(*st.notes);
    }
    omp_set_num_threads(saved);
    EXPECT_EQ(models[0], models[1]);
    EXPECT_EQ(dicts[0], dicts[1]);
}

TEST(Eval, UniformModelReportsLogV) {
    const auto& d = test::tiny_data();
    auto st = PretrainState::create(test::tiny_config(), d.data.vocab.size(), d.data.rare);
    for (double& v : st.model.store.flat()) v = 0.0;
    for (double& v : st.notes->mutable_values().values()) v = 0.0;
    const auto r = evaluate(st, d.data.valid, 0, 3);
    const double lnv = std::log(static_cast<double>(d.data.vocab.size()));
    for (const auto& [name, v] : r.splits) {
        ASSERT_TRUE(v.has_value()) << name;
        EXPECT_NEAR(*v, lnv, 1e-9) << name;
    }
}

TEST(Eval, OverallLossIsTheWeightedCombinationOfSplits) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    auto st = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
    BatchOrder order(d.data.train.size(), 1);
    for (int i = 0; i < 3; ++i) train_step(st, d.data.train, order);
    const auto r = evaluate(st, d.data.valid, 0, 3);
    const auto n = r.count("val_loss"), nr = r.count("val_rare_sample"), nn_ = r.count("val_nonrare_sample");
    ASSERT_EQ(n, nr + nn_);
    ASSERT_GT(nr, 0);
    ASSERT_GT(nn_, 0);
    const double combined = (*r.get("val_rare_sample") * nr + *r.get("val_nonrare_sample") * nn_) / n;
    EXPECT_NEAR(*r.get("val_loss"), combined, 1e-6);
    const auto sr = r.count("val_rare_sent"), sn = r.count("val_nonrare_sent");
    EXPECT_EQ(sr + sn, n);
    EXPECT_NEAR(*r.get("val_loss"), (*r.get("val_rare_sent") * sr + *r.get("val_nonrare_sent") * sn) / n, 1e-6);

    // Independent recomputation from per-sample losses.
    double sum = 0;
    std::int64_t cnt = 0;
    for (std::size_t i = 0; i < d.data.valid.size(); ++i) {
        const auto& s = d.data.valid.samples[i];
        Rng rng(derive_seed(3, i));
        const auto m = masking::apply_whole_word_masking(s.seq, rng, cfg.masking_policy(), st.vocab_size());
        const auto pos = m.masked_positions();
        if (pos.empty()) continue;
        const auto b = notes::blend_inputs(st.model, m.input_ids, s.occurrences, *st.notes, cfg.note.lambda);
        const auto tape = nn::forward(st.model, b.input);
        const auto logits = nn::mlm_logits(st.model, tape.output, pos);
        for (std::size_t r2 = 0; r2 < pos.size(); ++r2) {
            double mx = -1e300, z = 0;
            for (std::size_t c = 0; c < logits.cols(); ++c) mx = std::max(mx, logits(r2, c));
            for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits(r2, c) - mx);
            sum += mx + std::log(z) - logits(r2, static_cast<std::size_t>(m.original_ids[pos[r2]]));
            ++cnt;
        }
    }
    EXPECT_EQ(cnt, n);
    EXPECT_NEAR(*r.get("val_loss"), sum / cnt, 1e-9);
}

TEST(Eval, EmptySplitIsAbsent) {
    const auto& d = test::tiny_data();
    Dataset plain;
    for (const auto& s : d.data.valid.samples) {
        if (!s.has_rare()) plain.samples.push_back(s);
    }
    ASSERT_FALSE(plain.empty());
    auto st = PretrainState::create(test::tiny_config(), d.data.vocab.size(), d.data.rare);
    const auto r = evaluate(st, plain, 0, 3);
    EXPECT_FALSE(r.get("val_rare_sample").has_value());
    EXPECT_TRUE(r.get("val_nonrare_sample").has_value());
}

TEST(Rtd, GeneratorInputIgnoresNotesAndTargetsMatchBruteForce) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    cfg.objective = Objective::rtd;
    cfg.tnf = true;
    const auto with = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
    cfg.tnf = false;
    const auto without = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
    ASSERT_TRUE(with.notes);
    ASSERT_FALSE(without.notes);
    for (std::size_t i = 0; i < 40; ++i) {
        const auto& s = d.data.train.samples[i];
        const auto seeds = RtdSeeds::for_slot(cfg.seed, 0, static_cast<int>(i));
        const auto a = construct_rtd(with, s, seeds, cfg.dropout);
        const auto b = construct_rtd(without, s, seeds, cfg.dropout);
        ASSERT_EQ(a.gen_input, b.gen_input);
        ASSERT_EQ(a.corrupted, b.corrupted);
        for (std::size_t p = 0; p < a.corrupted.size(); ++p) {
            ASSERT_EQ(a.replaced[p], a.corrupted[p] != s.seq.ids[p] ? 1 : 0);
            if (!a.masked.mask_flags[p]) ASSERT_EQ(a.corrupted[p], s.seq.ids[p]);
        }
    }
}

TEST(Rtd, TrainingRunsAndLossesAreFinite) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    cfg.objective = Objective::rtd;
    cfg.steps = 8;
    cfg.eval_every = 4;
    const auto res = run_pretraining(cfg, d.data, {});
    ASSERT_TRUE(res.finished);
    bool gen = false;
    for (const auto& r : res.metrics) {
        EXPECT_TRUE(std::isfinite(r.value)) << r.split;
        gen |= r.split == "val_gen_mlm";
    }
    EXPECT_TRUE(gen);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    const auto& d = test::tiny_data();
    for (auto obj : {Objective::mlm, Objective::rtd}) {
        auto cfg = test::tiny_config();
        cfg.objective = obj;
        auto st = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
        BatchOrder order(d.data.train.size(), cfg.data_seed);
        train_step(st, d.data.train, order);
        const auto bytes = serialize_pretrain(st);
        const auto back = deserialize_pretrain(bytes);
        EXPECT_EQ(serialize_pretrain(back), bytes);
        EXPECT_EQ(back.model.store, st.model.store);
        EXPECT_EQ(back.adam, st.adam);
        EXPECT_EQ(*back.notes, *st.notes);
        EXPECT_EQ(back.step, 1);
    }
}

TEST(Checkpoint, TruncationAndVersionMismatchAreErrors) {
    const auto& d = test::tiny_data();
    const auto st = PretrainState::create(test::tiny_config(), d.data.vocab.size(), d.data.rare);
    const auto bytes = serialize_pretrain(st);
    for (std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        EXPECT_THROW(deserialize_pretrain(std::string_view(bytes).substr(0, cut)), DataError) << cut;
    }
    auto bumped = bytes;
    bumped[8] = 9;
    try {
        deserialize_pretrain(bumped);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("version 9"), std::string::npos);
    }
}

TEST(Checkpoint, ResumeReproducesContinuousRun) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    cfg.steps = 16;
    cfg.eval_every = 4;
    const auto dir_a = test::temp_dir("resume_a"), dir_b = test::temp_dir("resume_b");
    run_pretraining(cfg, d.data, {dir_a});
    RunOptions first{dir_b};
    first.stop_at = 8;
    EXPECT_FALSE(run_pretraining(cfg, d.data, first).finished);
    // A stale row newer than the checkpoint must be dropped on resume.
    std::ofstream(dir_b / "metrics.csv", std::ios::app) << "9,train_loss,123\n";
    RunOptions second{dir_b};
    second.resume = true;
    EXPECT_TRUE(run_pretraining(cfg, d.data, second).finished);
    EXPECT_EQ(read_file_bytes(dir_b / "metrics.csv"), read_file_bytes(dir_a / "metrics.csv"));
    EXPECT_EQ(read_file_bytes(dir_b / "final.ckpt"), read_file_bytes(dir_a / "final.ckpt"));
}

TEST(Checkpoint, ResumeWithDifferentConfigIsRejected) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    cfg.steps = 4;
    const auto dir = test::temp_dir("resume_bad");
    RunOptions o{dir};
    o.stop_at = 2;
    run_pretraining(cfg, d.data, o);
    cfg.lr = 0.5;
    RunOptions r{dir};
    r.resume = true;
    EXPECT_THROW(run_pretraining(cfg, d.data, r), ConfigError);
}

TEST(Export, ModesAndInspect) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    const auto st = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
    const auto discard = export_finetune_checkpoint(st, FinetuneMode::discard);
    EXPECT_FALSE(discard.notes.has_value());
    const auto s = inspect_checkpoint_bytes(serialize_finetune(discard));
    EXPECT_EQ(s.kind, "finetune");
    EXPECT_EQ(s.note_entries, 0u);
    EXPECT_EQ(std::count(s.sections.begin(), s.sections.end(), "notes"), 0);
    const auto f = export_finetune_checkpoint(st, FinetuneMode::tnf_u);
    const auto back = deserialize_finetune(serialize_finetune(f));
    EXPECT_TRUE(back.notes_trainable());
    EXPECT_EQ(*back.notes, *st.notes);
    EXPECT_EQ(inspect_checkpoint_bytes(serialize_finetune(f)).note_entries, st.notes->size());

    cfg.tnf = false;
    const auto base = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
    EXPECT_THROW(export_finetune_checkpoint(base, FinetuneMode::tnf_f), ConfigError);
    EXPECT_THROW(parse_mode("frozen"), ConfigError);
}

TEST(Probe, FixedNotesStayBitIdenticalTrainableNotesMove) {
    const auto& d = test::tiny_data();
    const auto st = PretrainState::create(test::tiny_config(), d.data.vocab.size(), d.data.rare);
    ProbeConfig pc;
    pc.epochs = 1;
    const auto ff = finetune_probe(export_finetune_checkpoint(st, FinetuneMode::tnf_f), d.probe_train, d.probe_test, pc);
    EXPECT_FALSE(ff.notes_changed);
    const auto fu = finetune_probe(export_finetune_checkpoint(st, FinetuneMode::tnf_u), d.probe_train, d.probe_test, pc);
    EXPECT_TRUE(fu.notes_changed);
}

TEST(Probe, NoteGradientMatchesFiniteDifferences) {
    const auto& d = test::tiny_data();
    auto cfg = test::tiny_config();
    cfg.init_std = 0.3;
    const auto st = PretrainState::create(cfg, d.data.vocab.size(), d.data.rare);
    ProbeModel m(export_finetune_checkpoint(st, FinetuneMode::tnf_u), 2, 1);
    const corpus::ProbeSequence* ex = nullptr;
    for (const auto& p : d.probe_train) {
        if (!notes::find_rare_occurrences(p.seq.spans, *m.checkpoint().notes).empty()) ex = &p;
    }
    ASSERT_NE(ex, nullptr);
    auto g = m.zero_grads();
    m.loss(*ex, &g, 1.0, false);
    auto values = m.checkpoint().notes->mutable_values().values();
    EXPECT_LT(test::fd_check(values, g.notes.values(), [&] { return m.loss(*ex); }, 1e-5, 1e-9), 1e-6);
}

TEST(Probe, MajorityClassProbeGivesMajorityFraction) {
    const auto& d = test::tiny_data();
    const auto st = PretrainState::create(test::tiny_config(), d.data.vocab.size(), d.data.rare);
    auto train = d.probe_train, test_set = d.probe_test;
    for (auto& p : train) p.label = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) test_set[i].label = i % 4 == 0 ? 1 : 0;
    ProbeConfig pc;
    pc.epochs = 2;
    pc.train_encoder = false;
    const auto r = finetune_probe(export_finetune_checkpoint(st, FinetuneMode::discard), train, test_set, pc);
    std::size_t zeros = 0;
    for (const auto& p : test_set) zeros += p.label == 0;
    EXPECT_DOUBLE_EQ(r.test_accuracy, double(zeros) / double(test_set.size()));
    EXPECT_DOUBLE_EQ(r.train_accuracy, 1.0);
}

TEST(Metrics, CsvRoundTripIsExact) {
    const auto dir = test::temp_dir("csv");
    const std::vector<MetricRow> rows{{1, "train_loss", 0.1 + 0.2}, {2, "val_loss", 1.0 / 3.0}, {3, "x", -1e-300}};
    write_metrics(dir / "m.csv", rows);
    EXPECT_EQ(read_metrics(dir / "m.csv"), rows);
}
