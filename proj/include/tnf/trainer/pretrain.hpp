#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tnf/corpus/rare.hpp"
#include "tnf/nn/encoder.hpp"
#include "tnf/notes.hpp"
#include "tnf/trainer/config.hpp"
#include "tnf/trainer/data.hpp"
#include "tnf/trainer/optim.hpp"

namespace tnf::trainer {

/// Everything a run owns. Randomness is derived from the config seeds and
/// `step`, so this is the complete resumable state.
struct PretrainState {
    TrainConfig config;
    std::int64_t step = 0;
    nn::EncoderParams model;  // the discriminator for rtd
    std::optional<nn::EncoderParams> generator;
    Adam adam;
    Adam gen_adam;
    std::optional<notes::NoteDict> notes;

    int vocab_size() const { return model.config.vocab_size; }

    /// Fresh state. The note dictionary exists iff config.tnf; its keys are
    /// the rare-set keys.
    static PretrainState create(const TrainConfig& cfg, int vocab_size, const corpus::RareWordSet& rare);
};

struct StepStats {
    double loss = 0.0;  // mlm, or mlm + weight * rtd
    double mlm = 0.0;
    double rtd = 0.0;
    double lr = 0.0;
    std::size_t masked = 0;
    std::size_t note_updates = 0;
};

/// One optimizer step on batch `state.step`: occurrences -> blend (snapshot)
/// -> forward -> loss -> backward -> Adam -> notes from c_j -> commit.
/// Throws NumericError on a non-finite loss or gradient; the state is then
/// unchanged.
StepStats train_step(PretrainState& state, const Dataset& train, const BatchOrder& order);

/// Named validation losses. A split with no masked position is absent.
struct EvalReport {
    std::vector<std::pair<std::string, std::optional<double>>> splits;
    std::vector<std::int64_t> counts;  // scored positions, parallel to splits

    std::optional<double> get(const std::string& name) const;
    std::int64_t count(const std::string& name) const;
};

/// Validation on the first `max_samples` samples (0: all), masked with
/// seeds derived from `seed` and the sample index, dropout off. Reports
/// val_loss, val_{rare,nonrare}_{sample,sent}, and the same rare splits with
/// blending disabled (suffix _nonotes). For rtd the losses are the
/// discriminator's per-position BCE and val_gen_mlm is added.
EvalReport evaluate(const PretrainState& state, const Dataset& valid, std::size_t max_samples, std::uint64_t seed);

}  // namespace tnf::trainer
