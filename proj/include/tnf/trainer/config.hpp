#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tnf/masking.hpp"
#include "tnf/nn/encoder.hpp"
#include "tnf/notes.hpp"

namespace tnf::trainer {

enum class Objective { mlm, rtd };

/// Every knob of a pre-training run; defaults are the desk preset. The text
/// form ("key = value" lines) is the canonical run artifact.
struct TrainConfig {
    Objective objective = Objective::mlm;
    std::int64_t steps = 2000;
    int batch = 16;
    double lr = 5e-4;
    std::int64_t warmup = 20;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-6;
    double weight_decay = 0.01;
    double dropout = 0.1;

    double mask_rate = 0.15;
    double mask_prob = 0.8;
    double random_prob = 0.1;

    bool tnf = true;
    notes::NoteConfig note{4, 0.5, 0.1};

    double rtd_weight = 50.0;
    int gen_width = 0;  // 0: d/3 rounded up to a multiple of heads

    int layers = 2;
    int d_model = 64;
    int heads = 4;
    int ffn_dim = 256;
    int max_len = 128;
    double init_std = 0.02;

    std::uint64_t seed = 1;
    std::uint64_t data_seed = 2;
    std::uint64_t eval_seed = 3;

    std::int64_t eval_every = 200;
    int eval_samples = 256;  // 0: whole validation split
    std::int64_t checkpoint_every = 0;

    std::string train_path;
    std::string valid_path;
    std::string vocab_path;
    std::string rare_path;

    static TrainConfig paper();
    static TrainConfig desk();

    /// Throws ConfigError naming the first invalid field.
    void validate() const;

    /// Set one field from its text form; throws ConfigError on an unknown
    /// key or unparsable value.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& field_names();

    std::string to_text() const;
    /// Fields absent from the text keep their value in `base`.
    static TrainConfig from_text(const std::string& text, const TrainConfig& base);
    static TrainConfig from_text(const std::string& text);
    static TrainConfig load(const std::filesystem::path& path, const TrainConfig& base);
    static TrainConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    nn::EncoderConfig encoder_config(int vocab_size) const;
    nn::EncoderConfig generator_config(int vocab_size) const;
    masking::MaskingPolicy masking_policy() const;

    /// Keys whose values differ.
    std::vector<std::string> diff(const TrainConfig& other) const;

    friend bool operator==(const TrainConfig& a, const TrainConfig& b) { return a.to_text() == b.to_text(); }
};

std::string objective_name(Objective o);

}  // namespace tnf::trainer
