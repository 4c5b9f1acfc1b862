#include "tnf/trainer/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tnf/common.hpp"
#include "tnf/nn/encoder.hpp"
#include "tnf/notes.hpp"

namespace tnf::trainer {

void ProbeConfig::validate() const {
    if (epochs < 0) throw ConfigError("probe.epochs: must be >= 0");
    if (batch < 1) throw ConfigError("probe.batch: must be >= 1");
    if (!(head_lr >= 0) || !(encoder_lr >= 0) || !(note_lr >= 0)) throw ConfigError("probe.lr: must be >= 0");
    if (classes < 2) throw ConfigError("probe.classes: must be >= 2");
}

ProbeModel::ProbeModel(FinetuneCheckpoint ckpt, int classes, std::uint64_t seed)
    : ckpt_(std::move(ckpt)), classes_(classes) {
    const auto d = static_cast<std::size_t>(ckpt_.model.config.d_model);
    w_ = head_.add("probe.w", d, static_cast<std::size_t>(classes));
    b_ = head_.add("probe.b", 1, static_cast<std::size_t>(classes));
    Rng rng(seed);
    for (auto& x : head_.values(w_)) x = rng.normal(0.0, ckpt_.config.init_std);
}

ProbeGrads ProbeModel::zero_grads() const {
    ProbeGrads g;
    g.encoder = ckpt_.model.store.zeros_like();
    g.head = head_.zeros_like();
    if (ckpt_.notes) g.notes = nn::Matrix(ckpt_.notes->size(), static_cast<std::size_t>(ckpt_.notes->dim()));
    return g;
}

namespace {

struct Pass {
    notes::BlendedInput blend;
    nn::ForwardTape tape;
    std::vector<double> pooled;
    std::vector<double> logits;
};

Pass run(const FinetuneCheckpoint& ck, const nn::ParamStore& head, std::size_t w, std::size_t b, int C,
         const corpus::TokenizedSequence& seq) {
    Pass p;
    if (ck.notes) {
        const auto occs = notes::find_rare_occurrences(seq.spans, *ck.notes);
        p.blend = notes::blend_inputs(ck.model, seq.ids, occs, *ck.notes, ck.config.note.lambda);
    } else {
        p.blend.input = nn::embed(ck.model, seq.ids);
    }
    p.tape = nn::forward(ck.model, p.blend.input);
    const auto& c = p.tape.contextual;
    const std::size_t n = c.rows(), d = c.cols();
    p.pooled.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) p.pooled[j] += c(i, j);
    }
    for (auto& x : p.pooled) x /= static_cast<double>(n);
    const auto W = head.view(w);
    const auto bias = head.values(b);
    p.logits.assign(static_cast<std::size_t>(C), 0.0);
    for (int k = 0; k < C; ++k) {
        double z = bias[k];
        for (std::size_t j = 0; j < d; ++j) z += p.pooled[j] * W(j, k);
        p.logits[k] = z;
    }
    return p;
}

}  // namespace

std::vector<double> ProbeModel::logits(const corpus::TokenizedSequence& seq) const {
    return run(ckpt_, head_, w_, b_, classes_, seq).logits;
}

int ProbeModel::predict(const corpus::TokenizedSequence& seq) const {
    const auto z = logits(seq);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double ProbeModel::loss(const corpus::ProbeSequence& ex, ProbeGrads* grads, double scale, bool encoder) const {
    if (ex.label < 0 || ex.label >= classes_) throw DataError("probe label out of range");
    Pass p = run(ckpt_, head_, w_, b_, classes_, ex.seq);
    const double mx = *std::max_element(p.logits.begin(), p.logits.end());
    double z = 0.0;
    for (double l : p.logits) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    const double loss = lse - p.logits[ex.label];
    if (!grads) return loss;

    const auto C = static_cast<std::size_t>(classes_);
    std::vector<double> dz(C);
    for (std::size_t k = 0; k < C; ++k) dz[k] = scale * (std::exp(p.logits[k] - lse) - (k == std::size_t(ex.label)));
    const std::size_t d = p.pooled.size();
    auto dW = grads->head.view(w_);
    auto db = grads->head.values(b_);
    const auto W = head_.view(w_);
    std::vector<double> dpool(d, 0.0);
    for (std::size_t k = 0; k < C; ++k) {
        db[k] += dz[k];
        for (std::size_t j = 0; j < d; ++j) {
            dW(j, k) += p.pooled[j] * dz[k];
            dpool[j] += W(j, k) * dz[k];
        }
    }

    const bool notes_trainable = ckpt_.notes_trainable() && ckpt_.notes;
    if (!encoder && !notes_trainable) return loss;
    const std::size_t n = p.tape.length();
    nn::Matrix dc(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) dc(i, j) = dpool[j] / static_cast<double>(n);
    }
    nn::ParamStore scratch;
    nn::ParamStore& enc = encoder ? grads->encoder : (scratch = ckpt_.model.store.zeros_like());
    nn::Matrix d_input;
    nn::backward(ckpt_.model, p.tape, dc, enc, &d_input);
    if (encoder) nn::embed_backward(ckpt_.model, ex.seq.ids, d_input, p.blend.base_scale, enc);
    if (notes_trainable) notes::accumulate_note_gradient(p.blend, d_input, ckpt_.config.note.lambda, grads->notes);
    return loss;
}

ProbeTrainer::ProbeTrainer(const ProbeModel& model, const ProbeConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    head_ = Adam(model.head().total(), {});
    if (cfg_.train_encoder) encoder_ = Adam(model.checkpoint().model.store.total(), {});
    if (model.checkpoint().notes_trainable() && model.checkpoint().notes) {
        notes_ = Adam(model.checkpoint().notes->values().size(), {});
    }
}

double ProbeTrainer::step(ProbeModel& model, std::span<const corpus::ProbeSequence* const> batch) {
    if (batch.empty()) return 0.0;
    auto g = model.zero_grads();
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto* ex : batch) total += model.loss(*ex, &g, scale, cfg_.train_encoder);
    head_.step(model.head().flat(), g.head.flat(), cfg_.head_lr);
    auto& ck = model.checkpoint();
    if (cfg_.train_encoder) encoder_.step(ck.model.store.flat(), g.encoder.flat(), cfg_.encoder_lr);
    if (ck.notes_trainable() && ck.notes) notes_.step(ck.notes->mutable_values().values(), g.notes.values(), cfg_.note_lr);
    return total * scale;
}

double probe_accuracy(const ProbeModel& model, std::span<const corpus::ProbeSequence> set) {
    if (set.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& ex : set) correct += model.predict(ex.seq) == ex.label;
    return static_cast<double>(correct) / static_cast<double>(set.size());
}

ProbeResult finetune_probe(const FinetuneCheckpoint& ckpt, std::span<const corpus::ProbeSequence> train,
                           std::span<const corpus::ProbeSequence> test, const ProbeConfig& cfg, ProbeModel* trained) {
    cfg.validate();
    ProbeModel model(ckpt, cfg.classes, derive_seed(cfg.seed, 1));
    ProbeTrainer trainer(model, cfg);
    ProbeResult r;
    r.mode = ckpt.mode;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const corpus::ProbeSequence*> batch;
    for (int e = 0; e < cfg.epochs; ++e) {
        Rng rng(derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(e)));
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg.batch)) {
            batch.clear();
            for (std::size_t j = i; j < std::min(order.size(), i + static_cast<std::size_t>(cfg.batch)); ++j) {
                batch.push_back(&train[order[j]]);
            }
            r.final_loss = trainer.step(model, batch);
        }
    }
    r.train_accuracy = probe_accuracy(model, train);
    r.test_accuracy = probe_accuracy(model, test);
    r.notes_changed = ckpt.notes.has_value() && !(*ckpt.notes == *model.checkpoint().notes);
    if (trained) *trained = std::move(model);
    return r;
}

FinetuneCheckpoint random_finetune_checkpoint(const TrainConfig& cfg, int vocab_size, std::uint64_t seed) {
    FinetuneCheckpoint c;
    c.config = cfg;
    c.mode = FinetuneMode::discard;
    Rng rng(seed);
    c.model = nn::EncoderParams::create(cfg.encoder_config(vocab_size), rng);
    return c;
}

}  // namespace tnf::trainer
