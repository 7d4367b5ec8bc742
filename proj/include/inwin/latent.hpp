#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "inwin/grid.hpp"
#include "inwin/linalg.hpp"

namespace inwin {

// Denoiser state: one row of channels per token, flattened row-major over
// (frame, y, x) as defined by the grid.
struct LatentField {
    TokenGrid grid;
    Mat values;

    LatentField() = default;
    LatentField(TokenGrid grid_, Mat values_) : grid(grid_), values(std::move(values_)) {
        if (values.rows() != grid.token_count()) {
            throw std::invalid_argument("LatentField: " + std::to_string(values.rows()) +
                                        " rows for grid " + grid.to_string() + " (" +
                                        std::to_string(grid.token_count()) + " tokens)");
        }
        if (values.cols() < 1) {
            throw std::invalid_argument("LatentField: channel dim must be >= 1");
        }
        if (!values.allFinite()) {
            throw std::invalid_argument("LatentField: non-finite entry");
        }
    }

    int channels() const { return int(values.cols()); }
};

inline LatentField random_latent(Rng& rng, const TokenGrid& grid, int channels) {
    return LatentField(grid, random_normal(rng, grid.token_count(), channels));
}

}  // namespace inwin
