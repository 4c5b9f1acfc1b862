#include "tnf/trainer/pretrain.hpp"

#include <cmath>
#include <exception>

#include "tnf/trainer/loss.hpp"
#include "tnf/trainer/rtd.hpp"

namespace tnf::trainer {

namespace {

enum EvalSlot : std::uint64_t { kMask = 1, kSample = 3 };
enum InitSlot : std::uint64_t { kInitModel = 101, kInitGenerator = 102, kInitNotes = 103 };

AdamConfig adam_config(const TrainConfig& c) { return AdamConfig{c.beta1, c.beta2, c.eps, c.weight_decay}; }

notes::BlendedInput model_input(const PretrainState& st, std::span<const int> ids,
                                std::span<const notes::RareOccurrence> occs, bool use_notes) {
    if (use_notes && st.notes) return notes::blend_inputs(st.model, ids, occs, *st.notes, st.config.note.lambda);
    notes::BlendedInput b;
    b.input = nn::embed(st.model, ids);
    b.base_scale.assign(ids.size(), 1.0);
    b.note_key.assign(ids.size(), -1);
    return b;
}

std::vector<int> targets_at(const masking::MaskedSequence& m, std::span<const int> positions) {
    std::vector<int> t;
    t.reserve(positions.size());
    for (int p : positions) t.push_back(m.original_ids[static_cast<std::size_t>(p)]);
    return t;
}

struct SlotOut {
    nn::ParamStore grads;
    nn::ParamStore gen_grads;
    notes::NoteUpdateBatch notes;
    double mlm_sum = 0.0;
    double rtd_sum = 0.0;
};

void mlm_slot(const PretrainState& st, const Sample& s, const masking::MaskedSequence& m, std::uint64_t dropout_seed,
              double scale, SlotOut& out) {
    const auto& cfg = st.config;
    const auto& P = st.model;
    auto in = model_input(st, m.input_ids, s.occurrences, true);
    auto tape = nn::forward(P, in.input, nn::ForwardOptions{cfg.dropout, dropout_seed, {}});
    if (st.notes) {
        for (const auto& o : s.occurrences) out.notes.add(o.key, notes::compute_note(tape.contextual, o, cfg.note.k));
    }
    const auto positions = m.masked_positions();
    if (positions.empty()) return;
    const auto targets = targets_at(m, positions);
    nn::Matrix logits = nn::mlm_logits(P, tape.output, positions);
    nn::Matrix d_logits;
    for (double l : cross_entropy_rows(logits, targets, &d_logits, scale)) out.mlm_sum += l;
    nn::Matrix d_out(tape.output.rows(), tape.output.cols());
    nn::mlm_logits_backward(P, tape.output, positions, d_logits, out.grads, d_out);
    nn::Matrix dx;
    nn::backward(P, tape, d_out, out.grads, &dx);
    nn::embed_backward(P, m.input_ids, dx, in.base_scale, out.grads);
}

void rtd_slot(const PretrainState& st, const Sample& s, const RtdSeeds& seeds, double gen_scale, double disc_scale,
              SlotOut& out) {
    const auto& cfg = st.config;
    const auto& G = *st.generator;
    const auto& D = st.model;
    RtdConstruction c = construct_rtd(st, s, seeds, cfg.dropout);
    if (st.notes) {
        for (const auto& o : s.occurrences) out.notes.add(o.key, notes::compute_note(c.gen_tape.output, o, cfg.note.k));
    }

    auto in = model_input(st, c.corrupted, s.occurrences, true);
    auto tape = nn::forward(D, in.input, nn::ForwardOptions{cfg.dropout, seeds.disc_dropout, {}});
    const auto z = nn::rtd_logits(D, tape.contextual);
    std::vector<double> dz(z.size());
    for (double l : bce_with_logits(z, c.replaced, dz, disc_scale)) out.rtd_sum += l;
    nn::Matrix d_ctx(tape.contextual.rows(), tape.contextual.cols());
    nn::rtd_logits_backward(D, tape.contextual, dz, out.grads, d_ctx);
    nn::Matrix dx;
    nn::backward(D, tape, d_ctx, out.grads, &dx);
    nn::embed_backward(D, c.corrupted, dx, in.base_scale, out.grads);

    if (c.positions.empty()) return;
    const auto targets = targets_at(c.masked, c.positions);
    nn::Matrix d_logits;
    for (double l : cross_entropy_rows(c.gen_logits, targets, &d_logits, gen_scale)) out.mlm_sum += l;
    nn::Matrix d_out(c.gen_tape.output.rows(), c.gen_tape.output.cols());
    nn::mlm_logits_backward(G, c.gen_tape.output, c.positions, d_logits, out.gen_grads, d_out);
    nn::Matrix gdx;
    nn::backward(G, c.gen_tape, d_out, out.gen_grads, &gdx);
    nn::embed_backward(G, c.masked.input_ids, gdx, {}, out.gen_grads);
}

template <typename Fn>
void parallel_slots(int n, Fn&& fn) {
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
    for (int b = 0; b < n; ++b) {
        try {
            fn(b);
        } catch (...) {
#pragma omp critical(tnf_slot_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

PretrainState PretrainState::create(const TrainConfig& cfg, int vocab_size, const corpus::RareWordSet& rare) {
    cfg.validate();
    PretrainState st;
    st.config = cfg;
    Rng model_rng(derive_seed(cfg.seed, kInitModel));
    st.model = nn::EncoderParams::create(cfg.encoder_config(vocab_size), model_rng);
    st.adam = Adam(st.model.store.total(), adam_config(cfg));
    if (cfg.objective == Objective::rtd) {
        Rng gen_rng(derive_seed(cfg.seed, kInitGenerator));
        st.generator = nn::EncoderParams::create(cfg.generator_config(vocab_size), gen_rng);
        st.gen_adam = Adam(st.generator->store.total(), adam_config(cfg));
    }
    if (cfg.tnf) {
        Rng note_rng(derive_seed(cfg.seed, kInitNotes));
        st.notes = notes::NoteDict::init(rare, cfg.d_model, note_rng, cfg.init_std);
    }
    return st;
}

StepStats train_step(PretrainState& st, const Dataset& train, const BatchOrder& order) {
    const auto& cfg = st.config;
    const int B = cfg.batch;
    const int V = st.vocab_size();
    const bool rtd = cfg.objective == Objective::rtd;

    std::vector<const Sample*> batch(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) batch[b] = &train.samples[order.at(st.step * B + b)];

    // Masking first: the loss is a mean over every masked position of the batch.
    auto policy = cfg.masking_policy();
    policy.all_mask = rtd;
    std::vector<masking::MaskedSequence> masked(static_cast<std::size_t>(B));
    std::vector<RtdSeeds> seeds(static_cast<std::size_t>(B));
    std::size_t total_masked = 0, total_positions = 0;
    for (int b = 0; b < B; ++b) {
        seeds[b] = RtdSeeds::for_slot(cfg.seed, st.step, b);
        Rng rng(seeds[b].mask);
        masked[b] = masking::apply_whole_word_masking(batch[b]->seq, rng, policy, V);
        total_masked += masked[b].masked_positions().size();
        total_positions += batch[b]->seq.ids.size();
    }
    const double mlm_scale = total_masked ? 1.0 / static_cast<double>(total_masked) : 0.0;
    const double rtd_scale = total_positions ? cfg.rtd_weight / static_cast<double>(total_positions) : 0.0;

    std::vector<SlotOut> outs(static_cast<std::size_t>(B));
    for (auto& o : outs) {
        o.grads = st.model.store.zeros_like();
        if (rtd) o.gen_grads = st.generator->store.zeros_like();
    }
    parallel_slots(B, [&](int b) {
        if (rtd) rtd_slot(st, *batch[b], seeds[b], mlm_scale, rtd_scale, outs[b]);
        else mlm_slot(st, *batch[b], masked[b], seeds[b].disc_dropout, mlm_scale, outs[b]);
    });

    StepStats stats;
    nn::ParamStore grads = std::move(outs[0].grads);
    nn::ParamStore gen_grads = std::move(outs[0].gen_grads);
    double mlm_sum = outs[0].mlm_sum, rtd_sum = outs[0].rtd_sum;
    for (int b = 1; b < B; ++b) {
        grads.accumulate(outs[b].grads);
        if (rtd) gen_grads.accumulate(outs[b].gen_grads);
        mlm_sum += outs[b].mlm_sum;
        rtd_sum += outs[b].rtd_sum;
    }
    stats.masked = total_masked;
    stats.mlm = mlm_sum * mlm_scale;
    stats.rtd = total_positions ? rtd_sum / static_cast<double>(total_positions) : 0.0;
    stats.loss = rtd ? stats.mlm + cfg.rtd_weight * stats.rtd : stats.mlm;
    if (!std::isfinite(stats.loss)) {
        throw NumericError("non-finite training loss at step " + std::to_string(st.step + 1));
    }
    stats.lr = lr_schedule(st.step + 1, cfg.lr, cfg.warmup, cfg.steps);

    // Check every gradient before touching any state.
    if (rtd) {
        Adam gen_next = st.gen_adam;
        auto gen_params = st.generator->store.flat();
        std::vector<double> gen_saved(gen_params.begin(), gen_params.end());
        gen_next.step(gen_params, gen_grads.flat(), stats.lr);
        try {
            st.adam.step(st.model.store.flat(), grads.flat(), stats.lr);
        } catch (...) {
            std::copy(gen_saved.begin(), gen_saved.end(), gen_params.begin());
            throw;
        }
        st.gen_adam = std::move(gen_next);
    } else {
        st.adam.step(st.model.store.flat(), grads.flat(), stats.lr);
    }

    if (st.notes) {
        notes::NoteUpdateBatch all;
        for (auto& o : outs) all.append(std::move(o.notes));
        stats.note_updates = all.size();
        all.commit(*st.notes, cfg.note.gamma);
    }
    ++st.step;
    return stats;
}

std::optional<double> EvalReport::get(const std::string& name) const {
    for (const auto& [n, v] : splits) {
        if (n == name) return v;
    }
    return std::nullopt;
}

std::int64_t EvalReport::count(const std::string& name) const {
    for (std::size_t i = 0; i < splits.size() && i < counts.size(); ++i) {
        if (splits[i].first == name) return counts[i];
    }
    return 0;
}

namespace {

enum Split { kAll, kRareSample, kNonRareSample, kRareSent, kNonRareSent, kAllNo, kRareSampleNo, kRareSentNo, kGen, kSplits };
const char* kSplitNames[kSplits] = {"val_loss",         "val_rare_sample",         "val_nonrare_sample",
                                    "val_rare_sent",    "val_nonrare_sent",        "val_loss_nonotes",
                                    "val_rare_sample_nonotes", "val_rare_sent_nonotes", "val_gen_mlm"};

struct Acc {
    double sum[kSplits] = {};
    std::size_t n[kSplits] = {};

    void add(int split, double v) {
        sum[split] += v;
        ++n[split];
    }
};

int sentence_of(const Sample& s, int pos) {
    for (std::size_t i = 0; i < s.seq.sentences.size(); ++i) {
        if (pos >= s.seq.sentences[i].begin && pos < s.seq.sentences[i].end) return static_cast<int>(i);
    }
    return -1;
}

void add_position(Acc& acc, const Sample& s, int pos, double with, double without) {
    const bool rare_sample = s.has_rare();
    acc.add(kAll, with);
    acc.add(kAllNo, without);
    acc.add(rare_sample ? kRareSample : kNonRareSample, with);
    if (rare_sample) acc.add(kRareSampleNo, without);
    const int sent = sentence_of(s, pos);
    if (sent < 0) return;
    if (s.sentence_rare[static_cast<std::size_t>(sent)]) {
        acc.add(kRareSent, with);
        acc.add(kRareSentNo, without);
    } else {
        acc.add(kNonRareSent, with);
    }
}

void eval_mlm(const PretrainState& st, const Sample& s, std::uint64_t seed, Acc& acc) {
    Rng rng(seed);
    auto m = masking::apply_whole_word_masking(s.seq, rng, st.config.masking_policy(), st.vocab_size());
    const auto positions = m.masked_positions();
    if (positions.empty()) return;
    const auto targets = targets_at(m, positions);
    auto losses = [&](bool use_notes) {
        auto in = model_input(st, m.input_ids, s.occurrences, use_notes);
        auto tape = nn::forward(st.model, in.input);
        return cross_entropy_rows(nn::mlm_logits(st.model, tape.output, positions), targets, nullptr, 1.0);
    };
    const auto with = losses(true);
    const auto without = st.notes && !s.occurrences.empty() ? losses(false) : with;
    for (std::size_t r = 0; r < positions.size(); ++r) add_position(acc, s, positions[r], with[r], without[r]);
}

void eval_rtd(const PretrainState& st, const Sample& s, std::uint64_t seed, Acc& acc) {
    const RtdSeeds seeds{derive_seed(seed, kMask), 0, derive_seed(seed, kSample), 0};
    RtdConstruction c = construct_rtd(st, s, seeds, 0.0);
    if (!c.positions.empty()) {
        const auto targets = targets_at(c.masked, c.positions);
        for (double l : cross_entropy_rows(c.gen_logits, targets, nullptr, 1.0)) acc.add(kGen, l);
    }
    auto losses = [&](bool use_notes) {
        auto in = model_input(st, c.corrupted, s.occurrences, use_notes);
        auto tape = nn::forward(st.model, in.input);
        return bce_with_logits(nn::rtd_logits(st.model, tape.contextual), c.replaced, {}, 1.0);
    };
    const auto with = losses(true);
    const auto without = st.notes && !s.occurrences.empty() ? losses(false) : with;
    for (std::size_t i = 0; i < with.size(); ++i) add_position(acc, s, static_cast<int>(i), with[i], without[i]);
}

}  // namespace

EvalReport evaluate(const PretrainState& st, const Dataset& valid, std::size_t max_samples, std::uint64_t seed) {
    const std::size_t n = max_samples == 0 ? valid.size() : std::min(max_samples, valid.size());
    const bool rtd = st.config.objective == Objective::rtd;
    std::vector<Acc> parts(n);
    parallel_slots(static_cast<int>(n), [&](int i) {
        const auto& s = valid.samples[static_cast<std::size_t>(i)];
        const std::uint64_t sample_seed = derive_seed(seed, i);
        if (rtd) eval_rtd(st, s, sample_seed, parts[i]);
        else eval_mlm(st, s, sample_seed, parts[i]);
    });
    Acc total;
    for (const auto& p : parts) {
        for (int k = 0; k < kSplits; ++k) {
            total.sum[k] += p.sum[k];
            total.n[k] += p.n[k];
        }
    }
    EvalReport rep;
    for (int k = 0; k < kSplits; ++k) {
        if (k == kGen && !rtd) continue;
        std::optional<double> v;
        if (total.n[k] > 0) v = total.sum[k] / static_cast<double>(total.n[k]);
        rep.splits.emplace_back(kSplitNames[k], v);
        rep.counts.push_back(total.n[k]);
    }
    return rep;
}

}  // namespace tnf::trainer
