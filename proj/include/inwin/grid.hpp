#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace inwin {

// Token coordinate in a video grid: frame t, row y, column x.
struct TokenCoord {
    int t = 0;
    int y = 0;
    int x = 0;

    bool operator==(const TokenCoord&) const = default;
};

// Dimensions of a flattened video token grid. Layout is row-major with t
// outermost and x innermost, so each frame's spatial block is contiguous.
struct TokenGrid {
    int frames = 1;
    int height = 1;
    int width = 1;

    TokenGrid() = default;
    TokenGrid(int frames_, int height_, int width_)
        : frames(frames_), height(height_), width(width_) {
        if (frames < 1 || height < 1 || width < 1) {
            throw std::invalid_argument("TokenGrid: dimensions must be >= 1, got " + to_string());
        }
    }

    std::int64_t spatial_count() const { return std::int64_t(height) * width; }
    std::int64_t token_count() const { return std::int64_t(frames) * height * width; }

    std::string to_string() const {
        return std::to_string(frames) + "x" + std::to_string(height) + "x" + std::to_string(width);
    }

    bool operator==(const TokenGrid&) const = default;
};

namespace detail {
inline void check_axis(int value, int extent, const char* axis, const char* where) {
    if (value < 0 || value >= extent) {
        throw std::out_of_range(std::string(where) + ": " + axis + " coordinate " +
                                std::to_string(value) + " outside [0, " + std::to_string(extent) +
                                ")");
    }
}
}  // namespace detail

inline std::int64_t flat_index(const TokenGrid& grid, const TokenCoord& c) {
    detail::check_axis(c.t, grid.frames, "t", "flat_index");
    detail::check_axis(c.y, grid.height, "y", "flat_index");
    detail::check_axis(c.x, grid.width, "x", "flat_index");
    return (std::int64_t(c.t) * grid.height + c.y) * grid.width + c.x;
}

inline TokenCoord coord_of(const TokenGrid& grid, std::int64_t index) {
    if (index < 0 || index >= grid.token_count()) {
        throw std::out_of_range("coord_of: index " + std::to_string(index) + " outside [0, " +
                                std::to_string(grid.token_count()) + ")");
    }
    const int x = int(index % grid.width);
    const std::int64_t rest = index / grid.width;
    const int y = int(rest % grid.height);
    const int t = int(rest / grid.height);
    return TokenCoord{t, y, x};
}

}  // namespace inwin
