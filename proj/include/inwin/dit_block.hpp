#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "inwin/attention.hpp"
#include "inwin/latent.hpp"

namespace inwin {

// Toy transformer dimensions. Small enough that every contract can be
// checked against brute-force references, but with real multi-head and
// multi-block plumbing.
struct ModelConfig {
    int model_dim = 32;
    int head_dim = 8;
    int heads = 4;
    int blocks = 2;
    int text_len = 8;
    int text_dim = 16;
    int ffn_dim = 128;
    std::uint64_t weight_seed = 0;

    void validate() const {
        if (model_dim <= 0 || head_dim <= 0 || heads <= 0 || blocks <= 0 || text_len <= 0 ||
            text_dim <= 0 || ffn_dim <= 0) {
            throw std::invalid_argument("ModelConfig: all dimensions must be positive");
        }
        if (model_dim != head_dim * heads) {
            throw std::invalid_argument("ModelConfig: model_dim " + std::to_string(model_dim) +
                                        " != head_dim * heads = " +
                                        std::to_string(head_dim * heads));
        }
    }
};

struct BlockWeights {
    Mat self_q, self_k, self_v, self_o;   // model_dim x model_dim
    Mat cross_q;                          // model_dim x model_dim
    Mat cross_k, cross_v;                 // text_dim x model_dim
    Mat cross_o;                          // model_dim x model_dim
    Mat ffn_w1;                           // model_dim x ffn_dim
    Vec ffn_b1;                           // ffn_dim
    Mat ffn_w2;                           // ffn_dim x model_dim
    Vec norm_self, norm_cross, norm_ffn;  // model_dim gains

    void zero_projections() {
        self_q.setZero();
        self_k.setZero();
        self_v.setZero();
        self_o.setZero();
        cross_q.setZero();
        cross_k.setZero();
        cross_v.setZero();
        cross_o.setZero();
        ffn_w1.setZero();
        ffn_b1.setZero();
        ffn_w2.setZero();
    }
};

struct ModelWeights {
    ModelConfig config;
    std::vector<BlockWeights> blocks;
    Mat velocity_head;  // model_dim x model_dim

    void zero_projections() {
        for (auto& b : blocks) b.zero_projections();
    }
};

namespace detail {
inline Vec gain_vector(Rng& rng, int dim) {
    // unit gains with a small seeded perturbation
    return Vec::Ones(dim) + random_uniform(rng, dim, 1, -0.1, 0.1).col(0);
}
}  // namespace detail

// All weights are drawn from one seeded stream in a fixed order, so the same
// seed always reproduces the same model bit for bit.
inline ModelWeights make_model_weights(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.weight_seed);
    const double a = 0.1;  // keeps logits in a well-conditioned softmax range
    auto u = [&](int rows, int cols) { return random_uniform(rng, rows, cols, -a, a); };

    ModelWeights mw;
    mw.config = cfg;
    mw.blocks.reserve(std::size_t(cfg.blocks));
    for (int b = 0; b < cfg.blocks; ++b) {
        BlockWeights bw;
        bw.self_q = u(cfg.model_dim, cfg.model_dim);
        bw.self_k = u(cfg.model_dim, cfg.model_dim);
        bw.self_v = u(cfg.model_dim, cfg.model_dim);
        bw.self_o = u(cfg.model_dim, cfg.model_dim);
        bw.cross_q = u(cfg.model_dim, cfg.model_dim);
        bw.cross_k = u(cfg.text_dim, cfg.model_dim);
        bw.cross_v = u(cfg.text_dim, cfg.model_dim);
        bw.cross_o = u(cfg.model_dim, cfg.model_dim);
        bw.ffn_w1 = u(cfg.model_dim, cfg.ffn_dim);
        bw.ffn_b1 = u(cfg.ffn_dim, 1).col(0);
        bw.ffn_w2 = u(cfg.ffn_dim, cfg.model_dim);
        bw.norm_self = detail::gain_vector(rng, cfg.model_dim);
        bw.norm_cross = detail::gain_vector(rng, cfg.model_dim);
        bw.norm_ffn = detail::gain_vector(rng, cfg.model_dim);
        mw.blocks.push_back(std::move(bw));
    }
    mw.velocity_head = u(cfg.model_dim, cfg.model_dim);
    return mw;
}

// Conditioning tokens. Generated seeded at toy scale; a zero matrix stands
// in for the unconditional (null) prompt.
struct TextContext {
    Mat tokens;
};

inline TextContext make_text_context(Rng& rng, const ModelConfig& cfg) {
    return TextContext{random_uniform(rng, cfg.text_len, cfg.text_dim, -1.0, 1.0)};
}

inline TextContext null_text_context(const ModelConfig& cfg) {
    return TextContext{Mat::Zero(cfg.text_len, cfg.text_dim)};
}

// Per-block cross-attention outputs (pre-residual, post output projection):
// the quantity the override blends and the cache stores.
struct CrossOutputs {
    std::vector<Mat> blocks;
};

inline Mat rms_norm(const Mat& x, const Vec& gain) {
    constexpr double eps = 1e-8;
    Mat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double ms = x.row(r).squaredNorm() / double(x.cols());
        out.row(r) = x.row(r).cwiseProduct(gain.transpose()) / std::sqrt(ms + eps);
    }
    return out;
}

// Fixed sinusoidal position table over flat token indices. Plumbing only.
inline Mat positional_encoding(std::int64_t tokens, int dim) {
    Mat pe(tokens, dim);
    for (std::int64_t p = 0; p < tokens; ++p) {
        for (int i = 0; i < dim; ++i) {
            const double freq = std::pow(10000.0, -double(i - i % 2) / double(dim));
            pe(p, i) = (i % 2 == 0) ? std::sin(double(p) * freq) : std::cos(double(p) * freq);
        }
    }
    return pe;
}

// Scalar noise-level conditioning, embedded with the same frequency family.
inline Vec sigma_embedding(double sigma, int dim) {
    Vec e(dim);
    for (int i = 0; i < dim; ++i) {
        const double freq = std::pow(10000.0, -double(i - i % 2) / double(dim));
        const double arg = sigma * 1000.0 * freq;
        e(i) = (i % 2 == 0) ? std::sin(arg) : std::cos(arg);
    }
    return e;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

namespace detail {

// Multi-head attention: queries from q_in, keys/values from kv_in, heads
// split by column blocks. window == nullopt selects the dense kernel.
inline Mat multi_head_attention(const Mat& q_in, const Mat& kv_in, const Mat& wq, const Mat& wk,
                                const Mat& wv, const Mat& wo, int heads, AttentionScale scale,
                                const std::optional<WindowSpec>& window, const TokenGrid& grid) {
    const Mat Q = q_in * wq;
    const Mat K = kv_in * wk;
    const Mat V = kv_in * wv;
    const int dim = int(Q.cols());
    const int hd = dim / heads;
    Mat concat(Q.rows(), dim);
    for (int h = 0; h < heads; ++h) {
        HeadTensors t{Q.middleCols(Eigen::Index(h) * hd, hd), K.middleCols(Eigen::Index(h) * hd, hd),
                      V.middleCols(Eigen::Index(h) * hd, hd)};
        concat.middleCols(Eigen::Index(h) * hd, hd) =
            window ? windowed_attention(t, *window, grid, scale) : dense_attention(t, scale);
    }
    return concat * wo;
}

inline void check_latent(const LatentField& latent, const ModelConfig& cfg, const char* where) {
    if (latent.channels() != cfg.model_dim) {
        throw std::invalid_argument(std::string(where) + ": latent channels " +
                                    std::to_string(latent.channels()) + " != model_dim " +
                                    std::to_string(cfg.model_dim));
    }
    if (latent.values.rows() != latent.grid.token_count()) {
        throw std::invalid_argument(std::string(where) + ": latent rows do not match grid " +
                                    latent.grid.to_string());
    }
}

}  // namespace detail

// Residual self-attention sublayer. Position and noise-level conditioning
// are added to the normed sublayer input (not the residual stream), so zero
// projections leave the latent untouched.
inline LatentField self_attention_sublayer(const LatentField& latent, const BlockWeights& bw,
                                           const ModelConfig& cfg,
                                           const std::optional<WindowSpec>& window,
                                           AttentionScale scale, double sigma = 0.0) {
    detail::check_latent(latent, cfg, "self_attention_sublayer");
    Mat x_in = rms_norm(latent.values, bw.norm_self);
    x_in += positional_encoding(latent.values.rows(), cfg.model_dim);
    x_in.rowwise() += sigma_embedding(sigma, cfg.model_dim).transpose();
    const Mat attn = detail::multi_head_attention(x_in, x_in, bw.self_q, bw.self_k, bw.self_v,
                                                  bw.self_o, cfg.heads, scale, window, latent.grid);
    return LatentField(latent.grid, latent.values + attn);
}

// Pre-residual cross-attention output: the O_cross the override operates on.
inline Mat cross_attention_raw(const LatentField& latent, const TextContext& text,
                               const BlockWeights& bw, const ModelConfig& cfg,
                               AttentionScale scale) {
    detail::check_latent(latent, cfg, "cross_attention_sublayer");
    if (text.tokens.rows() < 1 || text.tokens.cols() != cfg.text_dim) {
        throw std::invalid_argument("cross_attention_sublayer: text context shape mismatch");
    }
    const Mat q_in = rms_norm(latent.values, bw.norm_cross);
    const Mat Q = q_in * bw.cross_q;
    const Mat K = text.tokens * bw.cross_k;
    const Mat V = text.tokens * bw.cross_v;
    const int hd = cfg.head_dim;
    Mat concat(Q.rows(), cfg.model_dim);
    for (int h = 0; h < cfg.heads; ++h) {
        // cross keys are text tokens: K/V have text_len rows, Q has token rows
        const Mat Qh = Q.middleCols(Eigen::Index(h) * hd, hd);
        const Mat Kh = K.middleCols(Eigen::Index(h) * hd, hd);
        const Mat Vh = V.middleCols(Eigen::Index(h) * hd, hd);
        Mat oh(Qh.rows(), hd);
        std::vector<std::int64_t> keys(static_cast<std::size_t>(Kh.rows()));
        for (std::int64_t i = 0; i < Kh.rows(); ++i) keys[std::size_t(i)] = i;
        std::vector<double> scratch;
        HeadTensors t{Qh, Kh, Vh};
        if (!Qh.allFinite() || !Kh.allFinite() || !Vh.allFinite()) {
            throw std::invalid_argument("cross_attention_sublayer: non-finite projection");
        }
        for (std::int64_t q = 0; q < Qh.rows(); ++q) {
            detail::attend_row(t, scale.value, q, keys.data(), keys.size(), scratch, oh);
        }
        concat.middleCols(Eigen::Index(h) * hd, hd) = oh;
    }
    return concat * bw.cross_o;
}

// Returns the residual-added latent along with the raw (pre-residual) cross
// output used for override and caching.
inline std::pair<LatentField, Mat> cross_attention_sublayer(const LatentField& latent,
                                                            const TextContext& text,
                                                            const BlockWeights& bw,
                                                            const ModelConfig& cfg,
                                                            AttentionScale scale) {
    Mat raw = cross_attention_raw(latent, text, bw, cfg, scale);
    return {LatentField(latent.grid, latent.values + raw), std::move(raw)};
}

// Convex blend of the two branches' cross outputs. The endpoints short-cut
// so lambda=1 hands back the full branch (and lambda=0 the window branch)
// bit for bit.
inline Mat override_cross(const Mat& window_out, const Mat& full_out, double lambda) {
    if (window_out.rows() != full_out.rows() || window_out.cols() != full_out.cols()) {
        throw std::invalid_argument("override_cross: shape mismatch");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("override_cross: lambda must be in [0, 1], got " +
                                    std::to_string(lambda));
    }
    if (lambda == 1.0) return full_out;
    if (lambda == 0.0) return window_out;
    return lambda * full_out + (1.0 - lambda) * window_out;
}

inline Mat ffn_raw(const Mat& x, const BlockWeights& bw) {
    Mat hidden = rms_norm(x, bw.norm_ffn) * bw.ffn_w1;
    hidden.rowwise() += bw.ffn_b1.transpose();
    return hidden.unaryExpr([](double v) { return gelu(v); }) * bw.ffn_w2;
}

struct ForwardOptions {
    std::optional<WindowSpec> window;  // nullopt runs full attention
    AttentionScale self_scale{1.0};
    AttentionScale cross_scale{1.0};
    double sigma = 0.0;
    const CrossOutputs* override_source = nullptr;
    double lambda = 1.0;
};

inline ForwardOptions default_forward_options(const ModelConfig& cfg) {
    ForwardOptions opt;
    opt.self_scale = default_scale(cfg.head_dim);
    opt.cross_scale = default_scale(cfg.head_dim);
    return opt;
}

struct ForwardResult {
    LatentField latent;
    CrossOutputs cross;  // per-block cross outputs actually added to the stream
};

// Runs the block stack. When an override source is present, each block's own
// cross output is blended with the source's before the residual add.
inline ForwardResult model_forward(const LatentField& input, const TextContext& text,
                                   const ModelWeights& mw, const ForwardOptions& opt) {
    const ModelConfig& cfg = mw.config;
    detail::check_latent(input, cfg, "model_forward");
    if (opt.override_source != nullptr &&
        opt.override_source->blocks.size() != mw.blocks.size()) {
        throw std::invalid_argument("model_forward: override source has " +
                                    std::to_string(opt.override_source->blocks.size()) +
                                    " blocks, model has " + std::to_string(mw.blocks.size()));
    }

    ForwardResult result{input, {}};
    result.cross.blocks.reserve(mw.blocks.size());
    for (std::size_t b = 0; b < mw.blocks.size(); ++b) {
        const BlockWeights& bw = mw.blocks[b];
        LatentField x = self_attention_sublayer(result.latent, bw, cfg, opt.window, opt.self_scale,
                                                opt.sigma);
        Mat raw = cross_attention_raw(x, text, bw, cfg, opt.cross_scale);
        Mat used = opt.override_source != nullptr
                       ? override_cross(raw, opt.override_source->blocks[b], opt.lambda)
                       : std::move(raw);
        x.values += used;
        x.values += ffn_raw(x.values, bw);
        result.latent = std::move(x);
        result.cross.blocks.push_back(std::move(used));
    }
    return result;
}

// Velocity head: the forward output projected back to latent channels.
inline Mat predict_velocity(const ModelWeights& mw, const LatentField& forward_out) {
    return forward_out.values * mw.velocity_head;
}

}  // namespace inwin
