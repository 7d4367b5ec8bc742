#pragma once

#include <cstdint>

#include "inwin/fraction.hpp"
#include "inwin/grid.hpp"
#include "inwin/window_mask.hpp"

namespace inwin {

// Theoretical self-attention FLOPs for one forward pass over the block
// stack: QK^T plus the weighted-V product, 2*N^2*d multiply-adds each.
struct FlopsEstimate {
    double full = 0.0;
    double windowed = 0.0;
    Fraction ratio{1, 1};
};

inline FlopsEstimate flops_estimate(const TokenGrid& grid, const WindowSpec& window, int head_dim,
                                    int heads, int blocks) {
    const double n = double(grid.token_count());
    FlopsEstimate e;
    e.full = 2.0 * n * n * double(head_dim) * double(heads) * double(blocks) * 2.0;
    e.ratio = sparsity(window, grid);
    e.windowed = e.full * double(e.ratio.num) / double(e.ratio.den);
    return e;
}

}  // namespace inwin
