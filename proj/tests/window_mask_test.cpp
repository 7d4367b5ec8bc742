#include "inwin/window_mask.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace inwin;

TEST(WindowSpec, RejectsOddOrNonPositiveExtents) {
    EXPECT_THROW(WindowSpec(5, 4), std::invalid_argument);
    EXPECT_THROW(WindowSpec(4, 3), std::invalid_argument);
    EXPECT_THROW(WindowSpec(0, 2), std::invalid_argument);
    EXPECT_THROW(WindowSpec(2, -2), std::invalid_argument);
    EXPECT_NO_THROW(WindowSpec(2, 6));
}

TEST(InwardOffsets, KnownValues) {
    const TokenGrid g(1, 10, 10);
    const WindowSpec w(4, 4);
    EXPECT_EQ(inward_offsets({0, 5}, w, g).delta_w(), 0.0);  // interior
    EXPECT_EQ(inward_offsets({0, 0}, w, g).delta_w(), 2.0);  // left edge
    EXPECT_EQ(inward_offsets({0, 9}, w, g).delta_w(), 2.0);  // right edge
    EXPECT_EQ(inward_offsets({0, 0}, w, g).twice_delta_w, 4);
}

TEST(MaskEntry, SelfAlwaysAllowed) {
    const TokenGrid g(1, 7, 9);
    const WindowSpec w(2, 4);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            EXPECT_TRUE(mask_entry({y, x}, {y, x}, w, g));
        }
    }
}

TEST(MaskEntry, BoundaryShiftExtendsTheCorner) {
    // q at the corner gets delta_w = 2, so the threshold reaches column 4
    const TokenGrid g(1, 10, 10);
    const WindowSpec w(4, 4);
    EXPECT_TRUE(mask_entry({0, 0}, {0, 4}, w, g));
    EXPECT_FALSE(mask_entry({0, 0}, {0, 5}, w, g));
}

TEST(MaskEntry, WindowCoveringAxisIsAllTrue) {
    const TokenGrid g(1, 5, 5);
    const WindowSpec w(4, 4);
    for (int yq = 0; yq < 5; ++yq)
        for (int xq = 0; xq < 5; ++xq)
            for (int yk = 0; yk < 5; ++yk)
                for (int xk = 0; xk < 5; ++xk)
                    ASSERT_TRUE(mask_entry({yq, xq}, {yk, xk}, w, g));
}

TEST(KeyInterval, KnownRows) {
    const TokenGrid g(1, 10, 10);
    const WindowSpec w(4, 4);
    EXPECT_EQ(key_interval({0, 5}, w, g).x_lo, 3);
    EXPECT_EQ(key_interval({0, 5}, w, g).x_hi, 7);
    EXPECT_EQ(key_interval({0, 0}, w, g).x_lo, 0);
    EXPECT_EQ(key_interval({0, 0}, w, g).x_hi, 4);
    EXPECT_EQ(key_interval({0, 9}, w, g).x_lo, 5);
    EXPECT_EQ(key_interval({0, 9}, w, g).x_hi, 9);
}

// The interval form must agree with the literal mask formula everywhere.
TEST(KeyInterval, AgreesWithMaskEntryExhaustively) {
    for (int H = 1; H <= 9; ++H) {
        for (int W = 1; W <= 9; ++W) {
            const TokenGrid g(1, H, W);
            for (int we = 2; we <= 6; we += 2) {
                for (int he = 2; he <= 6; he += 2) {
                    const WindowSpec w(we, he);
                    for (int yq = 0; yq < H; ++yq) {
                        for (int xq = 0; xq < W; ++xq) {
                            const KeyInterval iv = key_interval({yq, xq}, w, g);
                            for (int yk = 0; yk < H; ++yk) {
                                for (int xk = 0; xk < W; ++xk) {
                                    ASSERT_EQ(iv.contains({yk, xk}),
                                              mask_entry({yq, xq}, {yk, xk}, w, g))
                                        << "grid " << g.to_string() << " w=" << we << " h=" << he
                                        << " q=(" << yq << "," << xq << ") k=(" << yk << "," << xk
                                        << ")";
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// Every query keeps exactly (w+1)*(h+1) keys per frame once the grid is at
// least window+1 per axis; smaller axes degenerate to the full axis.
TEST(KeyInterval, ConstantCardinality) {
    for (int H = 1; H <= 12; ++H) {
        for (int W = 1; W <= 12; ++W) {
            const TokenGrid g(1, H, W);
            for (int we = 2; we <= 6; we += 2) {
                for (int he = 2; he <= 6; he += 2) {
                    const WindowSpec w(we, he);
                    const int expected = std::min(we + 1, W) * std::min(he + 1, H);
                    for (int yq = 0; yq < H; ++yq) {
                        for (int xq = 0; xq < W; ++xq) {
                            const KeyInterval iv = key_interval({yq, xq}, w, g);
                            ASSERT_EQ(iv.x_len() * iv.y_len(), expected);
                        }
                    }
                }
            }
        }
    }
}

// The relation is symmetric between interior queries (both use delta = 0).
// The inward shift itself is one-sided: an edge query reaches keys that do
// not reach back. The exhaustive sweep pins both facts.
TEST(MaskEntry, SymmetryHoldsExactlyOnInteriorPairs) {
    const WindowSpec w(4, 4);
    const TokenGrid g(1, 10, 10);
    const auto interior = [&](SpatialCoord c) {
        const InwardOffsets d = inward_offsets(c, w, g);
        return d.twice_delta_w == 0 && d.twice_delta_h == 0;
    };
    bool found_asymmetric_boundary_pair = false;
    for (int yq = 0; yq < 10; ++yq)
        for (int xq = 0; xq < 10; ++xq)
            for (int yk = 0; yk < 10; ++yk)
                for (int xk = 0; xk < 10; ++xk) {
                    const bool fwd = mask_entry({yq, xq}, {yk, xk}, w, g);
                    const bool bwd = mask_entry({yk, xk}, {yq, xq}, w, g);
                    if (interior({yq, xq}) && interior({yk, xk})) {
                        ASSERT_EQ(fwd, bwd);
                    } else if (fwd != bwd) {
                        found_asymmetric_boundary_pair = true;
                    }
                }
    // e.g. q=(0,0) reaches k=(0,4) via its shift, but (0,4) is interior in x
    // and stops at column 2
    EXPECT_TRUE(found_asymmetric_boundary_pair);
    EXPECT_TRUE(mask_entry({0, 0}, {0, 4}, w, g));
    EXPECT_FALSE(mask_entry({0, 4}, {0, 0}, w, g));
}

TEST(MaterializeMask, SingleTokenGrid) {
    const DenseMask m = materialize_mask(WindowSpec(2, 2), TokenGrid(1, 1, 1));
    ASSERT_EQ(m.size, 1);
    EXPECT_TRUE(m.at(0, 0));
}

TEST(MaterializeMask, WindowPlusOneGridIsAllTrue) {
    const DenseMask m = materialize_mask(WindowSpec(2, 2), TokenGrid(1, 3, 3));
    for (std::int64_t q = 0; q < m.size; ++q)
        for (std::int64_t k = 0; k < m.size; ++k)
            ASSERT_TRUE(m.at(q, k));
}

TEST(MaterializeMask, RowSumsMatchWindowArea) {
    const DenseMask m = materialize_mask(WindowSpec(2, 2), TokenGrid(1, 6, 6));
    for (std::int64_t q = 0; q < m.size; ++q) {
        int sum = 0;
        for (std::int64_t k = 0; k < m.size; ++k) sum += m.at(q, k) ? 1 : 0;
        ASSERT_EQ(sum, 9);  // (w+1)*(h+1)
    }
}

TEST(MaterializeMask, CapExceededIsAnError) {
    try {
        materialize_mask(WindowSpec(2, 2), TokenGrid(1, 200, 200));
        FAIL() << "expected length_error";
    } catch (const std::length_error& e) {
        EXPECT_NE(std::string(e.what()).find("interval path"), std::string::npos);
    }
    EXPECT_NO_THROW(materialize_mask(WindowSpec(2, 2), TokenGrid(1, 200, 200), 40000));
}

TEST(MaterializeMaskTokens, BroadcastsAcrossFramePairs) {
    const TokenGrid g(3, 4, 5);
    const WindowSpec w(2, 2);
    const DenseMask spatial = materialize_mask(w, g);
    const DenseMask tokens = materialize_mask_tokens(w, g);
    ASSERT_EQ(tokens.size, g.token_count());
    const std::int64_t hw = g.spatial_count();
    for (std::int64_t q = 0; q < tokens.size; ++q)
        for (std::int64_t k = 0; k < tokens.size; ++k)
            ASSERT_EQ(tokens.at(q, k), spatial.at(q % hw, k % hw));
}

TEST(Sparsity, KnownValues) {
    EXPECT_EQ(sparsity(WindowSpec(4, 4), TokenGrid(1, 5, 5)), Fraction(1, 1));
    EXPECT_EQ(sparsity(WindowSpec(2, 2), TokenGrid(1, 6, 6)), Fraction(9, 36));
    EXPECT_DOUBLE_EQ(sparsity(WindowSpec(2, 2), TokenGrid(1, 6, 6)).value(), 0.25);
    // 1080P latent grid: 68x120 tokens, native 52x30 window
    const Fraction f = sparsity(WindowSpec(52, 30), TokenGrid(1, 68, 120));
    EXPECT_EQ(f, Fraction(1643, 8160));
    EXPECT_EQ(f.to_string(), "1643/8160");
    EXPECT_NEAR(f.value(), 0.2014, 1e-4);
}

TEST(Sparsity, MatchesBruteForcePairCount) {
    for (int H = 2; H <= 8; H += 2) {
        for (int W = 3; W <= 9; W += 3) {
            const TokenGrid g(1, H, W);
            for (int e = 2; e <= 4; e += 2) {
                const WindowSpec w(e, e);
                std::int64_t allowed = 0;
                for (int yq = 0; yq < H; ++yq)
                    for (int xq = 0; xq < W; ++xq)
                        for (int yk = 0; yk < H; ++yk)
                            for (int xk = 0; xk < W; ++xk)
                                allowed += mask_entry({yq, xq}, {yk, xk}, w, g) ? 1 : 0;
                // brute force counts ordered pairs over one frame; the
                // interval form is claimed exact
                const std::int64_t pairs = g.spatial_count() * g.spatial_count();
                ASSERT_EQ(sparsity(w, g), Fraction(allowed, pairs))
                    << g.to_string() << " e=" << e;
            }
        }
    }
}

TEST(WriteMaskPbm, TextGridFormat) {
    std::ostringstream os;
    write_mask_pbm(materialize_mask(WindowSpec(2, 2), TokenGrid(1, 1, 2)), os);
    EXPECT_EQ(os.str(), "P1\n2 2\n11\n11\n");
}
