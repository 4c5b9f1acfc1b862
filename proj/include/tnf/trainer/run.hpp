#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tnf/corpus/rare.hpp"
#include "tnf/corpus/vocab.hpp"
#include "tnf/trainer/config.hpp"
#include "tnf/trainer/data.hpp"
#include "tnf/trainer/pretrain.hpp"

namespace tnf::trainer {

/// One line of metrics.csv: "step,split,value".
struct MetricRow {
    std::int64_t step = 0;
    std::string split;
    double value = 0.0;

    friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline constexpr const char* kMetricsHeader = "step,split,value";

std::string format_metric(const MetricRow& row);
/// Throws DataError on a malformed line.
std::vector<MetricRow> read_metrics(const std::filesystem::path& path);
void write_metrics(const std::filesystem::path& path, const std::vector<MetricRow>& rows);

struct PretrainData {
    corpus::SubwordVocab vocab;
    corpus::RareWordSet rare;
    Dataset train;
    Dataset valid;
};

/// Reads config.train_path / valid_path / vocab_path / rare_path.
PretrainData load_pretrain_data(const TrainConfig& cfg);

struct RunOptions {
    std::filesystem::path out_dir;  // empty: keep everything in memory
    bool resume = false;            // continue from out_dir/last.ckpt
    std::int64_t stop_at = 0;       // >0: checkpoint and stop after this step
    std::function<void(const StepStats&, std::int64_t step)> on_step;
    std::function<void(const EvalReport&, std::int64_t step)> on_eval;
};

struct RunResult {
    PretrainState state;
    std::vector<MetricRow> metrics;  // the whole CSV, including resumed rows
    bool finished = false;
};

/// Train to config.steps. Per step: train_loss (and train_mlm/train_rtd for
/// rtd). Validation every eval.every steps and at the last step. Files in
/// out_dir: config.txt, metrics.csv, last.ckpt (every checkpoint.every steps,
/// at stop_at and at the end), final.ckpt.
///
/// Resume reloads last.ckpt, requires an identical config (ConfigError
/// listing the differing keys), and drops CSV rows newer than the checkpoint.
RunResult run_pretraining(const TrainConfig& cfg, const PretrainData& data, const RunOptions& opts);

}  // namespace tnf::trainer
