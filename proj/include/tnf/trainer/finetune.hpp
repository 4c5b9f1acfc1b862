#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tnf/corpus/synthetic.hpp"
#include "tnf/nn/params.hpp"
#include "tnf/trainer/checkpoint.hpp"
#include "tnf/trainer/optim.hpp"

namespace tnf::trainer {

struct ProbeConfig {
    int epochs = 10;
    int batch = 16;
    double head_lr = 1e-2;
    double encoder_lr = 1e-4;
    double note_lr = 1e-3;
    bool train_encoder = true;
    int classes = 2;
    std::uint64_t seed = 7;

    void validate() const;
};

struct ProbeGrads {
    nn::ParamStore encoder;
    nn::ParamStore head;
    nn::Matrix notes;  // rows of the note dictionary; empty without notes
};

/// Sequence classifier: mean of the final-layer rows, then a d x C linear
/// head. In tnf_f/tnf_u modes rare-word rows are blended with the stored
/// notes exactly as in pre-training; dropout is off.
class ProbeModel {
public:
    ProbeModel(FinetuneCheckpoint ckpt, int classes, std::uint64_t seed);

    const FinetuneCheckpoint& checkpoint() const { return ckpt_; }
    FinetuneCheckpoint& checkpoint() { return ckpt_; }
    const nn::ParamStore& head() const { return head_; }
    nn::ParamStore& head() { return head_; }
    int classes() const { return classes_; }

    std::vector<double> logits(const corpus::TokenizedSequence& seq) const;
    int predict(const corpus::TokenizedSequence& seq) const;

    /// Cross-entropy of one example. With `grads`, accumulates scale times
    /// the gradient: head always, encoder when `encoder`, notes in tnf_u mode.
    double loss(const corpus::ProbeSequence& ex, ProbeGrads* grads = nullptr, double scale = 1.0,
                bool encoder = true) const;

    ProbeGrads zero_grads() const;

private:
    FinetuneCheckpoint ckpt_;
    int classes_;
    nn::ParamStore head_;
    std::size_t w_ = 0, b_ = 0;
};

/// Adam state for the three parameter groups of a ProbeModel.
class ProbeTrainer {
public:
    ProbeTrainer(const ProbeModel& model, const ProbeConfig& cfg);
    /// One step on the mean loss of `batch`; returns that loss.
    double step(ProbeModel& model, std::span<const corpus::ProbeSequence* const> batch);

private:
    ProbeConfig cfg_;
    Adam head_, encoder_, notes_;
};

double probe_accuracy(const ProbeModel& model, std::span<const corpus::ProbeSequence> set);

struct ProbeResult {
    FinetuneMode mode = FinetuneMode::discard;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double final_loss = 0.0;
    bool notes_changed = false;
};

ProbeResult finetune_probe(const FinetuneCheckpoint& ckpt, std::span<const corpus::ProbeSequence> train,
                           std::span<const corpus::ProbeSequence> test, const ProbeConfig& cfg,
                           ProbeModel* trained = nullptr);

/// Freshly initialized encoder of the same shape, discard mode.
FinetuneCheckpoint random_finetune_checkpoint(const TrainConfig& cfg, int vocab_size, std::uint64_t seed);

}  // namespace tnf::trainer
