#include "tnf/nn/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace tnf::nn {

void EncoderConfig::validate() const {
    auto need = [](bool ok, const char* field, const std::string& why) {
        if (!ok) throw ConfigError(std::string(field) + ": " + why);
    };
    need(vocab_size > 0, "model.vocab_size", "must be positive");
    need(d_model > 0, "model.d", "must be positive");
    need(heads > 0, "model.heads", "must be positive");
    need(d_model % heads == 0, "model.heads", "d=" + std::to_string(d_model) + " is not divisible by H=" + std::to_string(heads));
    need(layers >= 0, "model.layers", "must be >= 0");
    need(ffn_dim > 0, "model.ffn", "must be positive");
    need(max_len > 0, "model.max_len", "must be positive");
    need(head_out >= 0, "model.head_out", "must be >= 0");
    need(init_std > 0.0, "model.init_std", "must be positive");
}

EncoderParams EncoderParams::layout(const EncoderConfig& cfg) {
    cfg.validate();
    EncoderParams p;
    p.config = cfg;
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto f = static_cast<std::size_t>(cfg.ffn_dim);
    auto& s = p.store;
    p.tok_emb = s.add("tok_emb", static_cast<std::size_t>(cfg.vocab_size), d);
    p.pos_emb = s.add("pos_emb", static_cast<std::size_t>(cfg.max_len), d);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        Layer L{};
        L.wq = s.add(pre + "wq", d, d);
        L.wk = s.add(pre + "wk", d, d);
        L.wv = s.add(pre + "wv", d, d);
        L.wo = s.add(pre + "wo", d, d);
        L.ln1_g = s.add(pre + "ln1_g", 1, d);
        L.ln1_b = s.add(pre + "ln1_b", 1, d);
        L.w1 = s.add(pre + "w1", d, f);
        L.b1 = s.add(pre + "b1", 1, f);
        L.w2 = s.add(pre + "w2", f, d);
        L.b2 = s.add(pre + "b2", 1, d);
        L.ln2_g = s.add(pre + "ln2_g", 1, d);
        L.ln2_b = s.add(pre + "ln2_b", 1, d);
        p.layer.push_back(L);
    }
    const auto out = static_cast<std::size_t>(cfg.out_dim());
    if (cfg.head_out > 0) {
        p.head_w = s.add("head.w", d, out);
        p.head_b = s.add("head.b", 1, out);
        p.mlm_out = s.add("mlm.out", static_cast<std::size_t>(cfg.vocab_size), out);
    }
    p.mlm_bias = s.add("mlm.bias", 1, static_cast<std::size_t>(cfg.vocab_size));
    if (cfg.rtd_head) {
        p.rtd_w = s.add("rtd.w", 1, d);
        p.rtd_b = s.add("rtd.b", 1, 1);
    }
    return p;
}

EncoderParams EncoderParams::create(const EncoderConfig& cfg, Rng& rng) {
    EncoderParams p = layout(cfg);
    auto normal = [&](std::size_t idx) {
        for (double& v : p.store.values(idx)) v = rng.normal(0.0, cfg.init_std);
    };
    auto ones = [&](std::size_t idx) {
        for (double& v : p.store.values(idx)) v = 1.0;
    };
    normal(p.tok_emb);
    normal(p.pos_emb);
    for (const auto& L : p.layer) {
        normal(L.wq);
        normal(L.wk);
        normal(L.wv);
        normal(L.wo);
        normal(L.w1);
        normal(L.w2);
        ones(L.ln1_g);
        ones(L.ln2_g);
    }
    if (p.head_w != kNone) {
        normal(p.head_w);
        normal(p.mlm_out);
    }
    if (p.rtd_w != kNone) normal(p.rtd_w);
    return p;
}

namespace {

void add_row_vector(Matrix& m, std::span<const double> b) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
    }
}

void add_column_sums(const Matrix& m, std::span<double> out) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
    }
}

void dropout(Matrix& x, double p, Rng& rng, Matrix& mask) {
    if (p <= 0.0) {
        mask = Matrix{};
        return;
    }
    mask = Matrix(x.rows(), x.cols());
    const double keep_scale = 1.0 / (1.0 - p);
    auto xv = x.values();
    auto mv = mask.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        mv[i] = rng.uniform() < p ? 0.0 : keep_scale;
        xv[i] *= mv[i];
    }
}

void hadamard_if(Matrix& x, const Matrix& mask) {
    if (mask.empty()) return;
    auto xv = x.values();
    auto mv = mask.values();
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] *= mv[i];
}

Matrix added(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
    return out;
}

}  // namespace

Matrix embed(const EncoderParams& params, std::span<const int> ids) {
    const auto& cfg = params.config;
    if (static_cast<int>(ids.size()) > cfg.max_len) {
        throw DataError("sequence length " + std::to_string(ids.size()) + " exceeds positional table " +
                        std::to_string(cfg.max_len));
    }
    const auto d = static_cast<std::size_t>(cfg.d_model);
    Matrix x(ids.size(), d);
    const auto tok = params.store.view(params.tok_emb);
    const auto pos = params.store.view(params.pos_emb);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= cfg.vocab_size) throw DataError("token id out of range: " + std::to_string(ids[i]));
        auto t = tok.row(static_cast<std::size_t>(ids[i]));
        auto p = pos.row(i);
        auto out = x.row(i);
        for (std::size_t c = 0; c < d; ++c) out[c] = p[c] + t[c];
    }
    return x;
}

void embed_backward(const EncoderParams& params, std::span<const int> ids, const Matrix& d_input,
                    std::span<const double> row_scale, ParamStore& grads) {
    auto tok = grads.view(params.tok_emb);
    auto pos = grads.view(params.pos_emb);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double s = row_scale.empty() ? 1.0 : row_scale[i];
        auto g = d_input.row(i);
        auto t = tok.row(static_cast<std::size_t>(ids[i]));
        auto p = pos.row(i);
        for (std::size_t c = 0; c < g.size(); ++c) {
            t[c] += s * g[c];
            p[c] += s * g[c];
        }
    }
}

ForwardTape forward(const EncoderParams& params, const Matrix& input, const ForwardOptions& opts) {
    const auto& cfg = params.config;
    const auto& st = params.store;
    const std::size_t n = input.rows();
    const auto d = static_cast<std::size_t>(cfg.d_model);
    if (input.cols() != d) throw std::invalid_argument("forward: input width != d_model");
    if (static_cast<int>(n) > cfg.max_len) throw DataError("forward: sequence longer than positional table");
    const auto heads = static_cast<std::size_t>(cfg.heads);
    const std::size_t dk = d / heads;

    Rng rng(opts.seed);
    ForwardTape tape;
    tape.key_valid.assign(opts.key_valid.begin(), opts.key_valid.end());
    Matrix x = input;
    dropout(x, opts.dropout, rng, tape.input_mask);

    for (const auto& L : params.layer) {
        ForwardTape::Layer t;
        t.x = x;
        t.q = Matrix(n, d);
        t.k = Matrix(n, d);
        t.v = Matrix(n, d);
        matmul_into(view(x), st.view(L.wq), view(t.q), false);
        matmul_into(view(x), st.view(L.wk), view(t.k), false);
        matmul_into(view(x), st.view(L.wv), view(t.v), false);

        t.concat = Matrix(n, d);
        for (std::size_t h = 0; h < heads; ++h) {
            Matrix probs = attention_probs(column_block(t.q, h * dk, dk), column_block(t.k, h * dk, dk), tape.key_valid);
            Matrix dropped = probs;
            Matrix mask;
            dropout(dropped, opts.dropout, rng, mask);
            add_column_block(t.concat, matmul(dropped, column_block(t.v, h * dk, dk)), h * dk);
            t.probs.push_back(std::move(probs));
            t.prob_masks.push_back(std::move(mask));
        }
        Matrix a(n, d);
        matmul_into(view(t.concat), st.view(L.wo), view(a), false);
        dropout(a, opts.dropout, rng, t.attn_mask);
        t.x1 = layer_norm(added(x, a), st.values(L.ln1_g), st.values(L.ln1_b), &t.ln1);

        t.pre = Matrix(n, static_cast<std::size_t>(cfg.ffn_dim));
        matmul_into(view(t.x1), st.view(L.w1), view(t.pre), false);
        add_row_vector(t.pre, st.values(L.b1));
        t.act = t.pre;
        for (double& v : t.act.values()) v = v > 0.0 ? v : 0.0;
        Matrix f(n, d);
        matmul_into(view(t.act), st.view(L.w2), view(f), false);
        add_row_vector(f, st.values(L.b2));
        dropout(f, opts.dropout, rng, t.ffn_mask);
        x = layer_norm(added(t.x1, f), st.values(L.ln2_g), st.values(L.ln2_b), &t.ln2);
        tape.layers.push_back(std::move(t));
    }
    tape.contextual = std::move(x);
    if (params.head_w != EncoderParams::kNone) {
        tape.output = Matrix(n, static_cast<std::size_t>(cfg.head_out));
        matmul_into(view(tape.contextual), st.view(params.head_w), view(tape.output), false);
        add_row_vector(tape.output, st.values(params.head_b));
    } else {
        tape.output = tape.contextual;
    }
    return tape;
}

void backward(const EncoderParams& params, ForwardTape& tape, const Matrix& d_output, ParamStore& grads,
              Matrix* d_input) {
    if (tape.consumed) throw std::logic_error("backward: tape already consumed");
    if (!grads.same_layout(params.store)) throw std::logic_error("backward: gradient layout mismatch");
    if (d_output.rows() != tape.output.rows() || d_output.cols() != tape.output.cols()) {
        throw std::invalid_argument("backward: d_output shape mismatch");
    }
    tape.consumed = true;
    const auto& cfg = params.config;
    const auto& st = params.store;
    const std::size_t n = tape.length();
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto heads = static_cast<std::size_t>(cfg.heads);
    const std::size_t dk = d / heads;

    Matrix dc(n, d);
    if (params.head_w != EncoderParams::kNone) {
        matmul_tn_into(view(tape.contextual), view(d_output), grads.view(params.head_w), true);
        add_column_sums(d_output, grads.values(params.head_b));
        matmul_nt_into(view(d_output), st.view(params.head_w), view(dc), false);
    } else {
        dc = d_output;
    }

    for (std::size_t li = params.layer.size(); li-- > 0;) {
        const auto& L = params.layer[li];
        auto& t = tape.layers[li];

        Matrix dz2 = layer_norm_backward(dc, t.ln2, st.values(L.ln2_g), grads.values(L.ln2_g), grads.values(L.ln2_b));
        Matrix dx1 = dz2;
        Matrix df = std::move(dz2);
        hadamard_if(df, t.ffn_mask);
        add_column_sums(df, grads.values(L.b2));
        matmul_tn_into(view(t.act), view(df), grads.view(L.w2), true);
        Matrix dpre(n, static_cast<std::size_t>(cfg.ffn_dim));
        matmul_nt_into(view(df), st.view(L.w2), view(dpre), false);
        {
            auto dp = dpre.values();
            auto pre = t.pre.values();
            for (std::size_t i = 0; i < dp.size(); ++i) {
                if (!(pre[i] > 0.0)) dp[i] = 0.0;
            }
        }
        add_column_sums(dpre, grads.values(L.b1));
        matmul_tn_into(view(t.x1), view(dpre), grads.view(L.w1), true);
        matmul_nt_into(view(dpre), st.view(L.w1), view(dx1), true);

        Matrix dz1 = layer_norm_backward(dx1, t.ln1, st.values(L.ln1_g), grads.values(L.ln1_g), grads.values(L.ln1_b));
        Matrix dx = dz1;
        Matrix da = std::move(dz1);
        hadamard_if(da, t.attn_mask);
        matmul_tn_into(view(t.concat), view(da), grads.view(L.wo), true);
        Matrix dconcat(n, d);
        matmul_nt_into(view(da), st.view(L.wo), view(dconcat), false);

        Matrix dq(n, d), dk_full(n, d), dv(n, d);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
        for (std::size_t h = 0; h < heads; ++h) {
            const Matrix qh = column_block(t.q, h * dk, dk);
            const Matrix kh = column_block(t.k, h * dk, dk);
            const Matrix vh = column_block(t.v, h * dk, dk);
            const Matrix doh = column_block(dconcat, h * dk, dk);
            const Matrix& probs = t.probs[h];
            Matrix dropped = probs;
            hadamard_if(dropped, t.prob_masks[h]);

            add_column_block(dv, matmul_tn(dropped, doh), h * dk);
            Matrix dp = matmul_nt(doh, vh);
            hadamard_if(dp, t.prob_masks[h]);
            // Softmax Jacobian, row by row.
            for (std::size_t i = 0; i < n; ++i) {
                auto pr = probs.row(i);
                auto g = dp.row(i);
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += pr[j] * g[j];
                for (std::size_t j = 0; j < n; ++j) g[j] = pr[j] * (g[j] - dot) * scale;
            }
            add_column_block(dq, matmul(dp, kh), h * dk);
            add_column_block(dk_full, matmul_tn(dp, qh), h * dk);
        }
        matmul_tn_into(view(t.x), view(dq), grads.view(L.wq), true);
        matmul_tn_into(view(t.x), view(dk_full), grads.view(L.wk), true);
        matmul_tn_into(view(t.x), view(dv), grads.view(L.wv), true);
        matmul_nt_into(view(dq), st.view(L.wq), view(dx), true);
        matmul_nt_into(view(dk_full), st.view(L.wk), view(dx), true);
        matmul_nt_into(view(dv), st.view(L.wv), view(dx), true);
        dc = std::move(dx);
    }
    hadamard_if(dc, tape.input_mask);
    if (d_input) *d_input = std::move(dc);
    // Release activations; the tape cannot be replayed.
    tape.layers.clear();
}

Matrix mlm_logits(const EncoderParams& params, const Matrix& output, std::span<const int> positions) {
    const std::size_t out = output.cols();
    Matrix sel(positions.size(), out);
    for (std::size_t r = 0; r < positions.size(); ++r) {
        auto src = output.row(static_cast<std::size_t>(positions[r]));
        std::copy(src.begin(), src.end(), sel.row(r).begin());
    }
    const auto w = params.store.view(params.output_matrix());
    Matrix logits(positions.size(), w.rows);
    matmul_nt_into(view(sel), w, view(logits), false);
    add_row_vector(logits, params.store.values(params.mlm_bias));
    return logits;
}

void mlm_logits_backward(const EncoderParams& params, const Matrix& output, std::span<const int> positions,
                         const Matrix& d_logits, ParamStore& grads, Matrix& d_output) {
    const std::size_t out = output.cols();
    Matrix sel(positions.size(), out);
    for (std::size_t r = 0; r < positions.size(); ++r) {
        auto src = output.row(static_cast<std::size_t>(positions[r]));
        std::copy(src.begin(), src.end(), sel.row(r).begin());
    }
    add_column_sums(d_logits, grads.values(params.mlm_bias));
    const auto w = params.store.view(params.output_matrix());
    matmul_tn_into(view(d_logits), view(sel), grads.view(params.output_matrix()), true);
    Matrix dsel(positions.size(), out);
    matmul_into(view(d_logits), w, view(dsel), false);
    for (std::size_t r = 0; r < positions.size(); ++r) {
        auto dst = d_output.row(static_cast<std::size_t>(positions[r]));
        auto src = dsel.row(r);
        for (std::size_t c = 0; c < out; ++c) dst[c] += src[c];
    }
}

std::vector<double> rtd_logits(const EncoderParams& params, const Matrix& contextual) {
    if (params.rtd_w == EncoderParams::kNone) throw std::logic_error("encoder has no RTD head");
    auto w = params.store.values(params.rtd_w);
    const double b = params.store.values(params.rtd_b)[0];
    std::vector<double> z(contextual.rows());
    for (std::size_t i = 0; i < z.size(); ++i) {
        auto c = contextual.row(i);
        double s = b;
        for (std::size_t j = 0; j < c.size(); ++j) s += c[j] * w[j];
        z[i] = s;
    }
    return z;
}

void rtd_logits_backward(const EncoderParams& params, const Matrix& contextual, std::span<const double> d_logits,
                         ParamStore& grads, Matrix& d_contextual) {
    auto w = params.store.values(params.rtd_w);
    auto gw = grads.values(params.rtd_w);
    auto& gb = grads.values(params.rtd_b)[0];
    for (std::size_t i = 0; i < d_logits.size(); ++i) {
        auto c = contextual.row(i);
        auto dc = d_contextual.row(i);
        gb += d_logits[i];
        for (std::size_t j = 0; j < c.size(); ++j) {
            gw[j] += d_logits[i] * c[j];
            dc[j] += d_logits[i] * w[j];
        }
    }
}

}  // namespace tnf::nn
