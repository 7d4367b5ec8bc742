#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "inwin/grid.hpp"
#include "inwin/linalg.hpp"
#include "inwin/window_mask.hpp"

namespace inwin {

// Multiplier applied to attention logits before the softmax.
struct AttentionScale {
    double value = 1.0;
};

inline AttentionScale default_scale(int head_dim) {
    if (head_dim <= 0) {
        throw std::invalid_argument("default_scale: head_dim must be positive");
    }
    return AttentionScale{1.0 / std::sqrt(double(head_dim))};
}

// Resolution-aware entropy scaling: sqrt(log_native(target) / head_dim).
// Reduces to 1/sqrt(head_dim) when target equals native.
inline AttentionScale entropy_scale(std::int64_t native_token_count,
                                    std::int64_t target_token_count, int head_dim) {
    if (native_token_count == 1) {
        throw std::domain_error("entropy_scale: native token count 1 gives a log base of 1");
    }
    if (native_token_count < 2 || target_token_count < 2) {
        throw std::domain_error("entropy_scale: token counts must be >= 2, got native=" +
                                std::to_string(native_token_count) +
                                " target=" + std::to_string(target_token_count));
    }
    if (head_dim <= 0) {
        throw std::invalid_argument("entropy_scale: head_dim must be positive");
    }
    const double ratio = std::log(double(target_token_count)) / std::log(double(native_token_count));
    return AttentionScale{std::sqrt(ratio / double(head_dim))};
}

// One attention head's inputs: rows are tokens. Q and K must agree on the
// feature dimension; V's may differ.
struct HeadTensors {
    Mat Q;
    Mat K;
    Mat V;
};

namespace detail {

inline void validate_head_tensors(const HeadTensors& t, const char* where) {
    if (t.Q.rows() == 0 || t.Q.cols() == 0) {
        throw std::invalid_argument(std::string(where) + ": empty Q");
    }
    if (t.K.rows() != t.Q.rows() || t.V.rows() != t.Q.rows()) {
        throw std::invalid_argument(std::string(where) + ": Q/K/V token counts differ");
    }
    if (t.K.cols() != t.Q.cols()) {
        throw std::invalid_argument(std::string(where) + ": Q and K feature dims differ");
    }
    if (t.V.cols() == 0) {
        throw std::invalid_argument(std::string(where) + ": empty V");
    }
    if (!t.Q.allFinite() || !t.K.allFinite() || !t.V.allFinite()) {
        throw std::invalid_argument(std::string(where) + ": non-finite input entry");
    }
}

inline void validate_scale(AttentionScale scale, const char* where) {
    if (!(scale.value > 0.0) || !std::isfinite(scale.value)) {
        throw std::invalid_argument(std::string(where) + ": scale must be positive and finite");
    }
}

// Numerically stable softmax-weighted sum over an explicit key list. Every
// kernel funnels through here with its keys in ascending flat order, which
// pins one reduction order for all of them: equal key lists give bit-equal
// rows no matter which kernel produced them.
inline void attend_row(const HeadTensors& t, double scale, Eigen::Index q,
                       const std::int64_t* keys, std::size_t n_keys,
                       std::vector<double>& weights, Mat& out) {
    weights.resize(n_keys);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_keys; ++i) {
        const double logit = scale * t.Q.row(q).dot(t.K.row(keys[i]));
        weights[i] = logit;
        max_logit = std::max(max_logit, logit);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n_keys; ++i) {
        weights[i] = std::exp(weights[i] - max_logit);
        sum += weights[i];
    }
    out.row(q).setZero();
    for (std::size_t i = 0; i < n_keys; ++i) {
        out.row(q) += weights[i] * t.V.row(keys[i]);
    }
    out.row(q) /= sum;
}

}  // namespace detail

// Full attention over all keys.
inline Mat dense_attention(const HeadTensors& t, AttentionScale scale) {
    detail::validate_head_tensors(t, "dense_attention");
    detail::validate_scale(scale, "dense_attention");
    const std::int64_t n = t.Q.rows();
    std::vector<std::int64_t> keys(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) keys[std::size_t(i)] = i;
    Mat out(n, t.V.cols());
    std::vector<double> scratch;
    for (std::int64_t q = 0; q < n; ++q) {
        detail::attend_row(t, scale.value, q, keys.data(), keys.size(), scratch, out);
    }
    return out;
}

// Reference masked attention: disallowed keys are excluded from the softmax
// entirely (-inf logits), so they receive exactly zero weight.
inline Mat masked_dense_attention(const HeadTensors& t, const DenseMask& mask,
                                  AttentionScale scale) {
    detail::validate_head_tensors(t, "masked_dense_attention");
    detail::validate_scale(scale, "masked_dense_attention");
    const std::int64_t n = t.Q.rows();
    if (mask.size != n) {
        throw std::invalid_argument("masked_dense_attention: mask size " +
                                    std::to_string(mask.size) + " != token count " +
                                    std::to_string(n));
    }
    Mat out(n, t.V.cols());
    std::vector<std::int64_t> keys;
    std::vector<double> scratch;
    for (std::int64_t q = 0; q < n; ++q) {
        keys.clear();
        for (std::int64_t k = 0; k < n; ++k) {
            if (mask.at(q, k)) keys.push_back(k);
        }
        if (keys.empty()) {
            throw std::invalid_argument("masked_dense_attention: empty receptive field for query " +
                                        std::to_string(q));
        }
        detail::attend_row(t, scale.value, q, keys.data(), keys.size(), scratch, out);
    }
    return out;
}

// Sparse windowed kernel: per query, keys are gathered through key_interval
// across all frames; no N x N structure is ever built. Queries sharing an
// interval (boundary bands, and every frame of a spatial position) reuse one
// gather list.
inline Mat windowed_attention(const HeadTensors& t, const WindowSpec& window,
                              const TokenGrid& grid, AttentionScale scale) {
    detail::validate_head_tensors(t, "windowed_attention");
    detail::validate_scale(scale, "windowed_attention");
    if (t.Q.rows() != grid.token_count()) {
        throw std::invalid_argument("windowed_attention: token count " +
                                    std::to_string(t.Q.rows()) + " != grid token count " +
                                    std::to_string(grid.token_count()));
    }
    const int F = grid.frames;
    const int H = grid.height;
    const int W = grid.width;
    const int x_len = std::min(window.w + 1, W);
    const int y_len = std::min(window.h + 1, H);

    Mat out(t.Q.rows(), t.V.cols());
    std::vector<std::int64_t> keys;
    keys.reserve(std::size_t(F) * y_len * x_len);
    std::vector<double> scratch;

    int prev_y_lo = -1;
    int prev_x_lo = -1;
    for (int yq = 0; yq < H; ++yq) {
        const int y_lo = detail::interval_lo(yq, window.h, H);
        for (int xq = 0; xq < W; ++xq) {
            const int x_lo = detail::interval_lo(xq, window.w, W);
            if (y_lo != prev_y_lo || x_lo != prev_x_lo) {
                keys.clear();
                for (int tf = 0; tf < F; ++tf) {
                    const std::int64_t frame_base = std::int64_t(tf) * H * W;
                    for (int yk = y_lo; yk < y_lo + y_len; ++yk) {
                        const std::int64_t row_base = frame_base + std::int64_t(yk) * W;
                        for (int xk = x_lo; xk < x_lo + x_len; ++xk) {
                            keys.push_back(row_base + xk);
                        }
                    }
                }
                prev_y_lo = y_lo;
                prev_x_lo = x_lo;
            }
            for (int tf = 0; tf < F; ++tf) {
                const std::int64_t q = (std::int64_t(tf) * H + yq) * W + xq;
                detail::attend_row(t, scale.value, q, keys.data(), keys.size(), scratch, out);
            }
        }
    }
    return out;
}

// Oracle variant of the literal mask product: logits are multiplied by the
// 0/1 mask and the softmax still runs over every key, so a masked entry
// keeps weight exp(0). Kept only so tests can demonstrate why the pipeline
// uses exclusion semantics instead. Never called from the pipeline.
inline Mat product_masked_attention(const HeadTensors& t, const DenseMask& mask,
                                    AttentionScale scale) {
    detail::validate_head_tensors(t, "product_masked_attention");
    detail::validate_scale(scale, "product_masked_attention");
    const std::int64_t n = t.Q.rows();
    if (mask.size != n) {
        throw std::invalid_argument("product_masked_attention: mask size mismatch");
    }
    Mat out(n, t.V.cols());
    std::vector<double> logits(static_cast<std::size_t>(n));
    for (std::int64_t q = 0; q < n; ++q) {
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::int64_t k = 0; k < n; ++k) {
            const double raw = scale.value * t.Q.row(q).dot(t.K.row(k));
            logits[std::size_t(k)] = mask.at(q, k) ? raw : 0.0;
            max_logit = std::max(max_logit, logits[std::size_t(k)]);
        }
        double sum = 0.0;
        for (std::int64_t k = 0; k < n; ++k) {
            logits[std::size_t(k)] = std::exp(logits[std::size_t(k)] - max_logit);
            sum += logits[std::size_t(k)];
        }
        out.row(q).setZero();
        for (std::int64_t k = 0; k < n; ++k) {
            out.row(q) += logits[std::size_t(k)] * t.V.row(k);
        }
        out.row(q) /= sum;
    }
    return out;
}

}  // namespace inwin
