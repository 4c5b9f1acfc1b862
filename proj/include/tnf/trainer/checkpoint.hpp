#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tnf/nn/encoder.hpp"
#include "tnf/notes.hpp"
#include "tnf/trainer/config.hpp"
#include "tnf/trainer/pretrain.hpp"

namespace tnf::trainer {

// File layout: "TNFCKPT\n", u32 version, u32 kind, then sections
// (u64 name length, name, u64 payload length, payload) ending with "end".
// Integers and doubles are stored little-endian, doubles bit for bit.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class FinetuneMode { discard, tnf_f, tnf_u };
std::string mode_name(FinetuneMode m);
/// Throws ConfigError on an unknown name.
FinetuneMode parse_mode(const std::string& name);

std::string serialize_pretrain(const PretrainState& state);
/// Throws DataError on truncation, corruption, or a version mismatch.
PretrainState deserialize_pretrain(std::string_view bytes);
void save_checkpoint(const PretrainState& state, const std::filesystem::path& path);
PretrainState load_checkpoint(const std::filesystem::path& path);

/// Encoder for fine-tuning. discard: no note storage at all; tnf_f: notes
/// fixed; tnf_u: notes trainable by back-propagation.
struct FinetuneCheckpoint {
    TrainConfig config;
    FinetuneMode mode = FinetuneMode::discard;
    nn::EncoderParams model;
    std::optional<notes::NoteDict> notes;

    bool notes_trainable() const { return mode == FinetuneMode::tnf_u; }
};

/// Throws ConfigError for tnf_f/tnf_u when the state has no note dictionary.
FinetuneCheckpoint export_finetune_checkpoint(const PretrainState& state, FinetuneMode mode);

std::string serialize_finetune(const FinetuneCheckpoint& ckpt);
FinetuneCheckpoint deserialize_finetune(std::string_view bytes);
void save_finetune_checkpoint(const FinetuneCheckpoint& ckpt, const std::filesystem::path& path);
FinetuneCheckpoint load_finetune_checkpoint(const std::filesystem::path& path);

struct CheckpointSummary {
    std::string kind;  // "pretrain" or "finetune"
    std::uint32_t version = 0;
    std::vector<std::string> sections;
    std::int64_t step = 0;
    std::string mode;  // finetune only
    std::size_t note_entries = 0;
    std::vector<nn::ParamEntry> params;
};

CheckpointSummary inspect_checkpoint_bytes(std::string_view bytes);
CheckpointSummary inspect_checkpoint(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
/// Write to a sibling temp file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace tnf::trainer
