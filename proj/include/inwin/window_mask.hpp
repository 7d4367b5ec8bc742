#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "inwin/fraction.hpp"
#include "inwin/grid.hpp"

namespace inwin {

// Native spatial extents of the sliding window, in tokens. Extents must be
// even: with an odd extent the boundary shift hands edge queries one more
// key column than interior queries get, which silently breaks the
// constant-cardinality guarantee the whole scheme is built on.
struct WindowSpec {
    int w = 2;
    int h = 2;

    WindowSpec() = default;
    WindowSpec(int w_, int h_) : w(w_), h(h_) {
        if (w <= 0 || h <= 0 || w % 2 != 0 || h % 2 != 0) {
            throw std::invalid_argument("WindowSpec: extents must be positive and even, got w=" +
                                        std::to_string(w) + " h=" + std::to_string(h));
        }
    }

    bool operator==(const WindowSpec&) const = default;
};

// Spatial (row, column) position of a token; frames carry no window term.
struct SpatialCoord {
    int y = 0;
    int x = 0;
};

// Inward shift of a query's window at the grid boundary. Stored in
// half-token units so the w/2 terms stay exact integers; delta_w()/delta_h()
// give the token-unit values.
struct InwardOffsets {
    std::int64_t twice_delta_w = 0;
    std::int64_t twice_delta_h = 0;

    double delta_w() const { return double(twice_delta_w) / 2.0; }
    double delta_h() const { return double(twice_delta_h) / 2.0; }
};

namespace detail {
inline std::int64_t twice_inward_shift(int q, int extent, int axis_size) {
    // 2 * max(extent/2 - q, extent/2 + q - size + 1, 0), all in integers
    const std::int64_t left = std::int64_t(extent) - 2 * q;
    const std::int64_t right = std::int64_t(extent) + 2 * q - 2 * axis_size + 2;
    return std::max<std::int64_t>({left, right, 0});
}
}  // namespace detail

inline InwardOffsets inward_offsets(SpatialCoord q, const WindowSpec& window,
                                    const TokenGrid& grid) {
    detail::check_axis(q.y, grid.height, "y", "inward_offsets");
    detail::check_axis(q.x, grid.width, "x", "inward_offsets");
    return InwardOffsets{detail::twice_inward_shift(q.x, window.w, grid.width),
                         detail::twice_inward_shift(q.y, window.h, grid.height)};
}

// Literal window-mask predicate: |x_q - x_k| <= w/2 + delta_w and likewise in
// y, evaluated as cross-multiplied integers so no rounding ever enters the
// comparison. Frames are ignored; the mask is purely spatial.
inline bool mask_entry(SpatialCoord q, SpatialCoord k, const WindowSpec& window,
                       const TokenGrid& grid) {
    detail::check_axis(q.y, grid.height, "y_q", "mask_entry");
    detail::check_axis(q.x, grid.width, "x_q", "mask_entry");
    detail::check_axis(k.y, grid.height, "y_k", "mask_entry");
    detail::check_axis(k.x, grid.width, "x_k", "mask_entry");
    const InwardOffsets d = inward_offsets(q, window, grid);
    const std::int64_t dx = 2 * std::abs(std::int64_t(q.x) - k.x);
    const std::int64_t dy = 2 * std::abs(std::int64_t(q.y) - k.y);
    return dx <= window.w + d.twice_delta_w && dy <= window.h + d.twice_delta_h;
}

// Inclusive key bounds for one query: per axis an interval of fixed length
// min(extent+1, axis), centered on the query where possible and clamped
// inward at the boundary.
struct KeyInterval {
    int x_lo = 0;
    int x_hi = 0;
    int y_lo = 0;
    int y_hi = 0;

    int x_len() const { return x_hi - x_lo + 1; }
    int y_len() const { return y_hi - y_lo + 1; }

    bool contains(SpatialCoord k) const {
        return k.x >= x_lo && k.x <= x_hi && k.y >= y_lo && k.y <= y_hi;
    }

    bool operator==(const KeyInterval&) const = default;
};

namespace detail {
inline int interval_lo(int q, int extent, int axis_size) {
    const int len = std::min(extent + 1, axis_size);
    return std::clamp(q - extent / 2, 0, axis_size - len);
}
}  // namespace detail

inline KeyInterval key_interval(SpatialCoord q, const WindowSpec& window, const TokenGrid& grid) {
    detail::check_axis(q.y, grid.height, "y", "key_interval");
    detail::check_axis(q.x, grid.width, "x", "key_interval");
    const int x_len = std::min(window.w + 1, grid.width);
    const int y_len = std::min(window.h + 1, grid.height);
    const int x_lo = detail::interval_lo(q.x, window.w, grid.width);
    const int y_lo = detail::interval_lo(q.y, window.h, grid.height);
    return KeyInterval{x_lo, x_lo + x_len - 1, y_lo, y_lo + y_len - 1};
}

// Square boolean mask, rows are queries. Also reused for arbitrary
// query/key masks fed to the masked dense attention reference.
struct DenseMask {
    std::int64_t size = 0;
    std::vector<std::uint8_t> bits;

    DenseMask() = default;
    explicit DenseMask(std::int64_t n, bool fill = false)
        : size(n), bits(std::size_t(n) * std::size_t(n), fill ? 1 : 0) {}

    bool at(std::int64_t q, std::int64_t k) const { return bits[std::size_t(q * size + k)] != 0; }
    void set(std::int64_t q, std::int64_t k, bool v) {
        bits[std::size_t(q * size + k)] = v ? 1 : 0;
    }
};

inline constexpr std::int64_t kDefaultMaskCap = 16384;

namespace detail {
inline void check_mask_cap(std::int64_t n, std::int64_t cap, const char* where) {
    if (n > cap) {
        throw std::length_error(std::string(where) + ": token count " + std::to_string(n) +
                                " exceeds dense cap " + std::to_string(cap) +
                                "; use the interval path instead");
    }
}
}  // namespace detail

// Dense spatial mask of shape (H*W) x (H*W). The full 3D mask is this matrix
// broadcast across every frame pair. Entries come from the literal formula,
// not the interval form, so the dense reference stays an independent route
// from the sparse kernel.
inline DenseMask materialize_mask(const WindowSpec& window, const TokenGrid& grid,
                                  std::int64_t cap = kDefaultMaskCap) {
    detail::check_mask_cap(grid.spatial_count(), cap, "materialize_mask");
    const int H = grid.height;
    const int W = grid.width;
    DenseMask m(grid.spatial_count());
    for (int yq = 0; yq < H; ++yq) {
        for (int xq = 0; xq < W; ++xq) {
            const InwardOffsets d = inward_offsets({yq, xq}, window, grid);
            const std::int64_t q = std::int64_t(yq) * W + xq;
            for (int yk = 0; yk < H; ++yk) {
                for (int xk = 0; xk < W; ++xk) {
                    const bool allowed =
                        2 * std::abs(std::int64_t(xq) - xk) <= window.w + d.twice_delta_w &&
                        2 * std::abs(std::int64_t(yq) - yk) <= window.h + d.twice_delta_h;
                    m.set(q, std::int64_t(yk) * W + xk, allowed);
                }
            }
        }
    }
    return m;
}

// Token-level mask of shape N x N with N = F*H*W: the spatial mask broadcast
// across all frame pairs.
inline DenseMask materialize_mask_tokens(const WindowSpec& window, const TokenGrid& grid,
                                         std::int64_t cap = kDefaultMaskCap) {
    detail::check_mask_cap(grid.token_count(), cap, "materialize_mask_tokens");
    const DenseMask spatial = materialize_mask(window, grid, cap);
    const std::int64_t hw = grid.spatial_count();
    DenseMask m(grid.token_count());
    for (std::int64_t q = 0; q < m.size; ++q) {
        for (std::int64_t k = 0; k < m.size; ++k) {
            m.set(q, k, spatial.at(q % hw, k % hw));
        }
    }
    return m;
}

// Fraction of allowed query-key spatial pairs; equals the theoretical
// windowed/full self-attention FLOPs ratio.
inline Fraction sparsity(const WindowSpec& window, const TokenGrid& grid) {
    const std::int64_t allowed = std::int64_t(std::min(window.w + 1, grid.width)) *
                                 std::min(window.h + 1, grid.height);
    return Fraction(allowed, grid.spatial_count());
}

// Debug dump: portable-bitmap-style text, one '1'/'0' row per query.
inline void write_mask_pbm(const DenseMask& mask, std::ostream& os) {
    os << "P1\n" << mask.size << " " << mask.size << "\n";
    for (std::int64_t q = 0; q < mask.size; ++q) {
        for (std::int64_t k = 0; k < mask.size; ++k) {
            os << (mask.at(q, k) ? '1' : '0');
        }
        os << "\n";
    }
}

}  // namespace inwin
