#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tnf/common.hpp"
#include "tnf/nn/matrix.hpp"
#include "tnf/nn/ops.hpp"
#include "tnf/nn/params.hpp"

namespace tnf::nn {

struct EncoderConfig {
    int vocab_size = 0;
    int d_model = 64;
    int heads = 4;
    int layers = 2;
    int ffn_dim = 256;
    int max_len = 128;
    /// > 0: project the final layer to this width before the MLM output and
    /// use an untied output matrix (ELECTRA-style generator). 0: tied output.
    int head_out = 0;
    bool rtd_head = false;
    double init_std = 0.02;

    int out_dim() const { return head_out > 0 ? head_out : d_model; }
    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// All trainable tensors of one encoder in a single ParamStore.
///
/// Per layer l: layer{l}.wq / .wk / .wv (d x d, head h owns columns
/// [h*d/H, (h+1)*d/H)), .wo (d x d), .w1 (d x f), .b1, .w2 (f x d), .b2,
/// .ln1_g/.ln1_b/.ln2_g/.ln2_b. Shared: tok_emb (V x d), pos_emb (L x d),
/// mlm.bias, and optionally head.w/head.b, mlm.out, rtd.w/rtd.b.
struct EncoderParams {
    struct Layer {
        std::size_t wq, wk, wv, wo, w1, b1, w2, b2, ln1_g, ln1_b, ln2_g, ln2_b;
    };
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    EncoderConfig config;
    ParamStore store;
    std::size_t tok_emb = kNone, pos_emb = kNone;
    std::vector<Layer> layer;
    std::size_t head_w = kNone, head_b = kNone, mlm_out = kNone, mlm_bias = kNone, rtd_w = kNone, rtd_b = kNone;

    /// Build the layout; values are zero.
    static EncoderParams layout(const EncoderConfig& cfg);
    /// Build and initialize: N(0, init_std) weights and embeddings, zero
    /// biases, unit layer-norm scales.
    static EncoderParams create(const EncoderConfig& cfg, Rng& rng);

    std::size_t output_matrix() const { return mlm_out != kNone ? mlm_out : tok_emb; }
};

struct ForwardOptions {
    double dropout = 0.0;
    std::uint64_t seed = 0;
    std::span<const std::uint8_t> key_valid;  // empty: attend everywhere
};

/// Activations recorded by forward(), consumed by backward().
struct ForwardTape {
    struct Layer {
        Matrix x, q, k, v;
        std::vector<Matrix> probs, prob_masks;
        Matrix concat, attn_mask;
        LayerNormCache ln1;
        Matrix x1, pre, act, ffn_mask;
        LayerNormCache ln2;
    };

    Matrix input_mask;  // empty when dropout == 0
    std::vector<Layer> layers;
    Matrix contextual;  // c_j: final-layer output, one row per position
    Matrix output;      // head projection of c (== contextual when head_out == 0)
    std::vector<std::uint8_t> key_valid;
    bool consumed = false;

    std::size_t length() const { return contextual.rows(); }
};

/// tok_emb[ids[i]] + pos_emb[i]. Throws DataError when ids exceed max_len.
Matrix embed(const EncoderParams& params, std::span<const int> ids);

/// Adds row_scale[i] * d_input[i] into tok_emb[ids[i]] and pos_emb[i].
/// Empty row_scale means all ones.
void embed_backward(const EncoderParams& params, std::span<const int> ids, const Matrix& d_input,
                    std::span<const double> row_scale, ParamStore& grads);

/// Post-LN transformer stack: x <- LN(x + MHA(x)); x <- LN(x + FFN(x)).
ForwardTape forward(const EncoderParams& params, const Matrix& input, const ForwardOptions& opts = {});

/// Reverse pass. `d_output` is dL/d(tape.output). Gradients are accumulated
/// into `grads` (layout of params.store); dL/d(input) is written to d_input
/// when non-null. Throws std::logic_error on a consumed tape.
void backward(const EncoderParams& params, ForwardTape& tape, const Matrix& d_output, ParamStore& grads,
              Matrix* d_input);

/// MLM logits (positions.size() x V) from rows of the head output.
Matrix mlm_logits(const EncoderParams& params, const Matrix& output, std::span<const int> positions);
void mlm_logits_backward(const EncoderParams& params, const Matrix& output, std::span<const int> positions,
                         const Matrix& d_logits, ParamStore& grads, Matrix& d_output);

/// Replaced-token-detection logit per position.
std::vector<double> rtd_logits(const EncoderParams& params, const Matrix& contextual);
void rtd_logits_backward(const EncoderParams& params, const Matrix& contextual, std::span<const double> d_logits,
                         ParamStore& grads, Matrix& d_contextual);

}  // namespace tnf::nn
