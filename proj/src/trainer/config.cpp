#include "tnf/trainer/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace tnf::trainer {

std::string objective_name(Objective o) { return o == Objective::mlm ? "mlm" : "rtd"; }

namespace {

std::string fmt_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
    throw ConfigError(key + ": cannot parse '" + value + "' as " + what);
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) bad_value(key, v, "a number");
        return d;
    } catch (const std::logic_error&) {
        bad_value(key, v, "a number");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

struct Field {
    std::string key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Field int_field(std::string key, T TrainConfig::*m) {
    return {std::move(key), [m](const TrainConfig& c) { return std::to_string(c.*m); },
            [m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_int<T>(k, v); }};
}

Field double_field(std::string key, double TrainConfig::*m) {
    return {std::move(key), [m](const TrainConfig& c) { return fmt_double(c.*m); },
            [m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); }};
}

Field string_field(std::string key, std::string TrainConfig::*m) {
    return {std::move(key), [m](const TrainConfig& c) { return c.*m; },
            [m](TrainConfig& c, const std::string&, const std::string& v) { c.*m = v; }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"objective", [](const TrainConfig& c) { return objective_name(c.objective); },
                     [](TrainConfig& c, const std::string& k, const std::string& v) {
                         if (v == "mlm") c.objective = Objective::mlm;
                         else if (v == "rtd") c.objective = Objective::rtd;
                         else throw ConfigError(k + ": expected mlm or rtd, got '" + v + "'");
                     }});
        f.push_back(int_field("steps", &TrainConfig::steps));
        f.push_back(int_field("batch", &TrainConfig::batch));
        f.push_back(double_field("lr", &TrainConfig::lr));
        f.push_back(int_field("warmup", &TrainConfig::warmup));
        f.push_back(double_field("adam.beta1", &TrainConfig::beta1));
        f.push_back(double_field("adam.beta2", &TrainConfig::beta2));
        f.push_back(double_field("adam.eps", &TrainConfig::eps));
        f.push_back(double_field("weight_decay", &TrainConfig::weight_decay));
        f.push_back(double_field("dropout", &TrainConfig::dropout));
        f.push_back(double_field("mask.rate", &TrainConfig::mask_rate));
        f.push_back(double_field("mask.mask_prob", &TrainConfig::mask_prob));
        f.push_back(double_field("mask.random_prob", &TrainConfig::random_prob));
        f.push_back({"tnf.enabled", [](const TrainConfig& c) { return std::string(c.tnf ? "true" : "false"); },
                     [](TrainConfig& c, const std::string& k, const std::string& v) { c.tnf = parse_bool(k, v); }});
        f.push_back({"tnf.k", [](const TrainConfig& c) { return std::to_string(c.note.k); },
                     [](TrainConfig& c, const std::string& k, const std::string& v) { c.note.k = parse_int<int>(k, v); }});
        f.push_back({"tnf.lambda", [](const TrainConfig& c) { return fmt_double(c.note.lambda); },
                     [](TrainConfig& c, const std::string& k, const std::string& v) { c.note.lambda = parse_double(k, v); }});
        f.push_back({"tnf.gamma", [](const TrainConfig& c) { return fmt_double(c.note.gamma); },
                     [](TrainConfig& c, const std::string& k, const std::string& v) { c.note.gamma = parse_double(k, v); }});
        f.push_back(double_field("rtd.weight", &TrainConfig::rtd_weight));
        f.push_back(int_field("rtd.gen_width", &TrainConfig::gen_width));
        f.push_back(int_field("model.layers", &TrainConfig::layers));
        f.push_back(int_field("model.d", &TrainConfig::d_model));
        f.push_back(int_field("model.heads", &TrainConfig::heads));
        f.push_back(int_field("model.ffn", &TrainConfig::ffn_dim));
        f.push_back(int_field("model.max_len", &TrainConfig::max_len));
        f.push_back(double_field("model.init_std", &TrainConfig::init_std));
        f.push_back(int_field("seed", &TrainConfig::seed));
        f.push_back(int_field("data_seed", &TrainConfig::data_seed));
        f.push_back(int_field("eval_seed", &TrainConfig::eval_seed));
        f.push_back(int_field("eval.every", &TrainConfig::eval_every));
        f.push_back(int_field("eval.samples", &TrainConfig::eval_samples));
        f.push_back(int_field("checkpoint.every", &TrainConfig::checkpoint_every));
        f.push_back(string_field("data.train", &TrainConfig::train_path));
        f.push_back(string_field("data.valid", &TrainConfig::valid_path));
        f.push_back(string_field("data.vocab", &TrainConfig::vocab_path));
        f.push_back(string_field("data.rare", &TrainConfig::rare_path));
        return f;
    }();
    return table;
}

const Field& field(const std::string& key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    throw ConfigError(key + ": unknown configuration field");
}

void require(bool ok, const char* key, const std::string& why) {
    if (!ok) throw ConfigError(std::string(key) + ": " + why);
}

}  // namespace

TrainConfig TrainConfig::paper() {
    TrainConfig c;
    c.steps = 1'000'000;
    c.batch = 256;
    c.lr = 1e-4;
    c.warmup = 10'000;
    c.beta1 = 0.9;
    c.beta2 = 0.98;
    c.eps = 1e-6;
    c.weight_decay = 0.01;
    c.dropout = 0.1;
    c.note = {16, 0.5, 0.1};
    c.layers = 12;
    c.d_model = 768;
    c.heads = 12;
    c.ffn_dim = 3072;
    c.max_len = 512;
    c.eval_every = 10'000;
    return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

void TrainConfig::validate() const {
    require(steps > 0, "steps", "must be positive");
    require(batch > 0, "batch", "must be positive");
    require(lr > 0.0, "lr", "must be positive");
    require(warmup >= 0 && warmup <= steps, "warmup", "must be in [0, steps]");
    require(beta1 >= 0.0 && beta1 < 1.0, "adam.beta1", "must be in [0,1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "adam.beta2", "must be in [0,1)");
    require(eps > 0.0, "adam.eps", "must be positive");
    require(weight_decay >= 0.0, "weight_decay", "must be >= 0");
    require(dropout >= 0.0 && dropout < 1.0, "dropout", "must be in [0,1)");
    require(mask_rate > 0.0 && mask_rate < 1.0, "mask.rate", "must be in (0,1)");
    require(mask_prob >= 0.0 && mask_prob <= 1.0, "mask.mask_prob", "must be in [0,1]");
    require(random_prob >= 0.0 && mask_prob + random_prob <= 1.0, "mask.random_prob",
            "must be >= 0 with mask_prob + random_prob <= 1");
    note.validate();
    require(rtd_weight >= 0.0, "rtd.weight", "must be >= 0");
    require(gen_width >= 0, "rtd.gen_width", "must be >= 0");
    require(max_len >= 2, "model.max_len", "must be >= 2");
    require(eval_every >= 0, "eval.every", "must be >= 0");
    require(eval_samples >= 0, "eval.samples", "must be >= 0");
    require(checkpoint_every >= 0, "checkpoint.every", "must be >= 0");
    // Shapes only; the vocabulary size is known once the vocab is loaded.
    encoder_config(8).validate();
    if (objective == Objective::rtd) {
        require(gen_width % heads == 0, "rtd.gen_width", "must be a multiple of model.heads");
        generator_config(8).validate();
    }
}

void TrainConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, trim(value)); }

std::string TrainConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& TrainConfig::field_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& f : fields()) n.push_back(f.key);
        return n;
    }();
    return names;
}

std::string TrainConfig::to_text() const {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
    return out;
}

TrainConfig TrainConfig::from_text(const std::string& text, const TrainConfig& base) {
    TrainConfig c = base;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path, const TrainConfig& base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), base);
}

TrainConfig TrainConfig::from_text(const std::string& text) { return from_text(text, TrainConfig{}); }

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return load(path, TrainConfig{}); }

void TrainConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_text();
}

nn::EncoderConfig TrainConfig::encoder_config(int vocab_size) const {
    nn::EncoderConfig c;
    c.vocab_size = vocab_size;
    c.d_model = d_model;
    c.heads = heads;
    c.layers = layers;
    c.ffn_dim = ffn_dim;
    c.max_len = max_len;
    c.init_std = init_std;
    c.rtd_head = objective == Objective::rtd;
    return c;
}

nn::EncoderConfig TrainConfig::generator_config(int vocab_size) const {
    nn::EncoderConfig c = encoder_config(vocab_size);
    int width = gen_width;
    if (width == 0) {
        width = (d_model + 2) / 3;
        width = (width + heads - 1) / heads * heads;
    }
    c.d_model = width;
    c.ffn_dim = std::max(1, ffn_dim * width / std::max(1, d_model));
    c.head_out = d_model;
    c.rtd_head = false;
    return c;
}

masking::MaskingPolicy TrainConfig::masking_policy() const {
    masking::MaskingPolicy p;
    p.rate = mask_rate;
    p.mask_prob = mask_prob;
    p.random_prob = random_prob;
    return p;
}

std::vector<std::string> TrainConfig::diff(const TrainConfig& other) const {
    std::vector<std::string> out;
    for (const auto& f : fields()) {
        if (f.get(*this) != f.get(other)) out.push_back(f.key);
    }
    return out;
}

}  // namespace tnf::trainer
