#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace inwin {

// Exact non-negative rational, kept in lowest terms. Used wherever a ratio
// must survive serialization without floating-point loss (mask sparsity,
// FLOPs ratios).
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Fraction() = default;
    Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (den <= 0 || num < 0) {
            throw std::invalid_argument("Fraction: requires num >= 0 and den > 0, got " +
                                        std::to_string(n) + "/" + std::to_string(d));
        }
        const std::int64_t g = std::gcd(num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    double value() const { return double(num) / double(den); }

    std::string to_string() const { return std::to_string(num) + "/" + std::to_string(den); }

    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
};

}  // namespace inwin
