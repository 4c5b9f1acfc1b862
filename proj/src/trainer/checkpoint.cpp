#include "tnf/trainer/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace tnf::trainer {

namespace {

constexpr char kMagic[8] = {'T', 'N', 'F', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kPretrain = 1;
constexpr std::uint32_t kFinetune = 2;

class Writer {
public:
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void i64(std::int64_t v) { raw(&v, sizeof v); }
    void str(std::string_view s) {
        u64(s.size());
        buf_.append(s);
    }
    void doubles(std::span<const double> v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }
    void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    std::string& bytes() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view b) : b_(b) {}
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    std::int64_t i64() { return pod<std::int64_t>(); }
    std::string str() {
        const auto n = u64();
        return std::string(take(n));
    }
    std::vector<double> doubles() {
        const auto n = u64();
        if (n > b_.size() / sizeof(double)) truncated();
        auto bytes = take(n * sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), bytes.data(), bytes.size());
        return v;
    }
    std::string_view take(std::uint64_t n) {
        if (n > b_.size() - pos_) truncated();
        auto s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    template <typename T>
    T pod() {
        T v;
        auto s = take(sizeof v);
        std::memcpy(&v, s.data(), sizeof v);
        return v;
    }
    [[noreturn]] static void truncated() { throw DataError("checkpoint is truncated or corrupt"); }

    std::string_view b_;
    std::size_t pos_ = 0;
};

using Sections = std::vector<std::pair<std::string, std::string>>;

std::string pack(std::uint32_t kind, const Sections& sections) {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    w.u32(kind);
    for (const auto& [name, payload] : sections) {
        w.str(name);
        w.str(payload);
    }
    w.str("end");
    w.str("");
    return std::move(w.bytes());
}

struct Unpacked {
    std::uint32_t version = 0;
    std::uint32_t kind = 0;
    Sections sections;

    const std::string* find(const std::string& name) const {
        for (const auto& [n, p] : sections) {
            if (n == name) return &p;
        }
        return nullptr;
    }
    const std::string& need(const std::string& name) const {
        if (auto p = find(name)) return *p;
        throw DataError("checkpoint lacks section '" + name + "'");
    }
};

Unpacked unpack(std::string_view bytes) {
    Reader r(bytes);
    if (r.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw DataError("not a TNF checkpoint");
    Unpacked u;
    u.version = r.u32();
    if (u.version != kCheckpointVersion) {
        throw DataError("checkpoint version " + std::to_string(u.version) + " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    u.kind = r.u32();
    for (;;) {
        std::string name = r.str();
        std::string payload = r.str();
        if (name == "end") break;
        u.sections.emplace_back(std::move(name), std::move(payload));
    }
    if (!r.done()) throw DataError("checkpoint has trailing bytes");
    return u;
}

std::string write_store(const nn::ParamStore& s) {
    Writer w;
    w.u64(s.entries().size());
    for (const auto& e : s.entries()) {
        w.str(e.name);
        w.u64(e.rows);
        w.u64(e.cols);
    }
    w.doubles(s.flat());
    return std::move(w.bytes());
}

// Values of a serialized store into `params`, whose layout must match.
void read_store(const std::string& payload, nn::EncoderParams& params, const char* what) {
    Reader r(payload);
    const auto n = r.u64();
    const auto& entries = params.store.entries();
    if (n != entries.size()) throw DataError(std::string(what) + ": parameter count mismatch");
    for (const auto& e : entries) {
        const std::string name = r.str();
        const auto rows = r.u64(), cols = r.u64();
        if (name != e.name || rows != e.rows || cols != e.cols) {
            throw DataError(std::string(what) + ": parameter '" + name + "' does not match the configured layout");
        }
    }
    auto values = r.doubles();
    if (values.size() != params.store.total() || !r.done()) throw DataError(std::string(what) + ": size mismatch");
    std::copy(values.begin(), values.end(), params.store.flat().begin());
}

std::vector<nn::ParamEntry> read_entries(const std::string& payload) {
    Reader r(payload);
    std::vector<nn::ParamEntry> out;
    const auto n = r.u64();
    std::size_t offset = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        nn::ParamEntry e;
        e.name = r.str();
        e.rows = r.u64();
        e.cols = r.u64();
        e.offset = offset;
        offset += e.rows * e.cols;
        out.push_back(std::move(e));
    }
    return out;
}

std::string write_adam(const Adam& a) {
    Writer w;
    w.i64(a.steps());
    w.doubles(a.m());
    w.doubles(a.v());
    return std::move(w.bytes());
}

void read_adam(const std::string& payload, Adam& a, std::size_t size) {
    Reader r(payload);
    const auto t = r.i64();
    auto m = r.doubles();
    auto v = r.doubles();
    if (m.size() != size || v.size() != size || !r.done()) throw DataError("optimizer state size mismatch");
    a.restore(t, std::move(m), std::move(v));
}

std::string write_notes(const notes::NoteDict& d) {
    Writer w;
    w.u64(d.size());
    w.u64(static_cast<std::uint64_t>(d.dim()));
    for (const auto& word : d.words()) w.str(word);
    w.doubles(d.values().values());
    for (auto c : d.counters()) w.i64(c);
    return std::move(w.bytes());
}

notes::NoteDict read_notes(const std::string& payload) {
    Reader r(payload);
    const auto n = r.u64();
    const auto dim = r.u64();
    std::vector<std::string> words;
    for (std::uint64_t i = 0; i < n; ++i) words.push_back(r.str());
    auto values = r.doubles();
    if (values.size() != n * dim) throw DataError("note dictionary: value count mismatch");
    nn::Matrix m(n, dim);
    std::copy(values.begin(), values.end(), m.data());
    std::vector<std::int64_t> counters(n);
    for (auto& c : counters) c = r.i64();
    if (!r.done()) throw DataError("note dictionary: trailing bytes");
    return notes::NoteDict(std::move(words), std::move(m), std::move(counters));
}

std::string write_meta(std::int64_t step, int vocab_size) {
    Writer w;
    w.i64(step);
    w.i64(vocab_size);
    return std::move(w.bytes());
}

std::pair<std::int64_t, int> read_meta(const std::string& payload) {
    Reader r(payload);
    const auto step = r.i64();
    const auto vocab = r.i64();
    if (!r.done() || vocab <= 0) throw DataError("checkpoint meta section is corrupt");
    return {step, static_cast<int>(vocab)};
}

TrainConfig read_config(const std::string& text) {
    try {
        return TrainConfig::from_text(text);
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint config: ") + e.what());
    }
}

}  // namespace

std::string mode_name(FinetuneMode m) {
    switch (m) {
        case FinetuneMode::discard: return "discard";
        case FinetuneMode::tnf_f: return "tnf_f";
        case FinetuneMode::tnf_u: return "tnf_u";
    }
    return "?";
}

FinetuneMode parse_mode(const std::string& name) {
    if (name == "discard") return FinetuneMode::discard;
    if (name == "tnf_f") return FinetuneMode::tnf_f;
    if (name == "tnf_u") return FinetuneMode::tnf_u;
    throw ConfigError("mode: expected discard, tnf_f or tnf_u, got '" + name + "'");
}

std::string serialize_pretrain(const PretrainState& st) {
    Sections s;
    s.emplace_back("config", st.config.to_text());
    s.emplace_back("meta", write_meta(st.step, st.vocab_size()));
    s.emplace_back("model", write_store(st.model.store));
    s.emplace_back("adam", write_adam(st.adam));
    if (st.generator) {
        s.emplace_back("generator", write_store(st.generator->store));
        s.emplace_back("gen_adam", write_adam(st.gen_adam));
    }
    if (st.notes) s.emplace_back("notes", write_notes(*st.notes));
    return pack(kPretrain, s);
}

PretrainState deserialize_pretrain(std::string_view bytes) {
    const Unpacked u = unpack(bytes);
    if (u.kind != kPretrain) throw DataError("not a pre-training checkpoint");
    PretrainState st;
    st.config = read_config(u.need("config"));
    const auto [step, vocab] = read_meta(u.need("meta"));
    st.step = step;
    try {
        st.model = nn::EncoderParams::layout(st.config.encoder_config(vocab));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint config: ") + e.what());
    }
    read_store(u.need("model"), st.model, "model");
    const AdamConfig ac{st.config.beta1, st.config.beta2, st.config.eps, st.config.weight_decay};
    st.adam = Adam(st.model.store.total(), ac);
    read_adam(u.need("adam"), st.adam, st.model.store.total());
    if (st.config.objective == Objective::rtd) {
        st.generator = nn::EncoderParams::layout(st.config.generator_config(vocab));
        read_store(u.need("generator"), *st.generator, "generator");
        st.gen_adam = Adam(st.generator->store.total(), ac);
        read_adam(u.need("gen_adam"), st.gen_adam, st.generator->store.total());
    }
    if (st.config.tnf) st.notes = read_notes(u.need("notes"));
    return st;
}

void save_checkpoint(const PretrainState& state, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_pretrain(state));
}

PretrainState load_checkpoint(const std::filesystem::path& path) { return deserialize_pretrain(read_file_bytes(path)); }

FinetuneCheckpoint export_finetune_checkpoint(const PretrainState& st, FinetuneMode mode) {
    FinetuneCheckpoint c;
    c.config = st.config;
    c.mode = mode;
    c.model = st.model;
    if (mode != FinetuneMode::discard) {
        if (!st.notes) throw ConfigError("mode " + mode_name(mode) + " needs a note dictionary; the checkpoint has none");
        c.notes = st.notes;
    }
    return c;
}

std::string serialize_finetune(const FinetuneCheckpoint& c) {
    Sections s;
    s.emplace_back("config", c.config.to_text());
    s.emplace_back("meta", write_meta(0, c.model.config.vocab_size));
    s.emplace_back("mode", mode_name(c.mode));
    s.emplace_back("model", write_store(c.model.store));
    if (c.notes) s.emplace_back("notes", write_notes(*c.notes));
    return pack(kFinetune, s);
}

FinetuneCheckpoint deserialize_finetune(std::string_view bytes) {
    const Unpacked u = unpack(bytes);
    if (u.kind != kFinetune) throw DataError("not a fine-tuning checkpoint");
    FinetuneCheckpoint c;
    c.config = read_config(u.need("config"));
    const auto [step, vocab] = read_meta(u.need("meta"));
    (void)step;
    try {
        c.mode = parse_mode(u.need("mode"));
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    c.model = nn::EncoderParams::layout(c.config.encoder_config(vocab));
    read_store(u.need("model"), c.model, "model");
    if (c.mode != FinetuneMode::discard) c.notes = read_notes(u.need("notes"));
    else if (u.find("notes")) throw DataError("discard checkpoint must not carry notes");
    return c;
}

void save_finetune_checkpoint(const FinetuneCheckpoint& ckpt, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_finetune(ckpt));
}

FinetuneCheckpoint load_finetune_checkpoint(const std::filesystem::path& path) {
    return deserialize_finetune(read_file_bytes(path));
}

CheckpointSummary inspect_checkpoint_bytes(std::string_view bytes) {
    const Unpacked u = unpack(bytes);
    CheckpointSummary s;
    s.version = u.version;
    s.kind = u.kind == kPretrain ? "pretrain" : u.kind == kFinetune ? "finetune" : "unknown";
    for (const auto& [name, payload] : u.sections) s.sections.push_back(name);
    s.step = read_meta(u.need("meta")).first;
    if (auto m = u.find("mode")) s.mode = *m;
    if (auto n = u.find("notes")) s.note_entries = read_notes(*n).size();
    s.params = read_entries(u.need("model"));
    return s;
}

CheckpointSummary inspect_checkpoint(const std::filesystem::path& path) { return inspect_checkpoint_bytes(read_file_bytes(path)); }

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace tnf::trainer
