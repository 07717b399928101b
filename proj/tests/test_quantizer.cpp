#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"
#include "vqi2i/quantizer.hpp"
#include "vqi2i/rng.hpp"
#include "vqi2i/tensor.hpp"

using namespace vqi2i;

namespace {

Codebook book_from(Shape shape, std::vector<double> values) {
    Codebook z;
    z.entries = Tensor::from(std::move(shape), std::move(values));
    return z;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.numel() == b.numel() &&
           std::memcmp(a.data(), b.data(),
                       sizeof(double) * static_cast<size_t>(a.numel())) == 0;
}

}  // namespace

TEST_CASE("nearest-code selection on a worked 2-entry example") {
    // Codes (0,0) and (1,1); the vector (0.9, 0.8) is closer to entry 1.
    Codebook z = book_from({2, 2}, {0.0, 0.0, 1.0, 1.0});
    Tensor c_hat = Tensor::from({2, 1, 1}, {0.9, 0.8});
    ContentGrid g = quantize(c_hat, z);
    CHECK(g.h == 1);
    CHECK(g.w == 1);
    REQUIRE(g.indices.size() == 1);
    CHECK(g.indices[0] == 1);
    CHECK(g.embedded.values() == std::vector<double>{1.0, 1.0});
}

TEST_CASE("an exact codebook match quantizes to itself at distance zero") {
    Codebook z = book_from({3, 2}, {0.5, -0.5, 0.0, 0.0, -1.0, 2.0});
    Tensor c_hat = Tensor::from({2, 1, 1}, {-1.0, 2.0});
    ContentGrid g = quantize(c_hat, z);
    CHECK(g.indices[0] == 2);
    CHECK(bitwise_equal(g.embedded, c_hat));
    CHECK(vq_loss(c_hat, g.codes).item() == 0.0);
}

TEST_CASE("exhaustive scan agrees with an independent argmin over 1000 entries") {
    Rng rng(31);
    const int k = 1000, n_c = 8, hw = 24;
    Codebook z;
    z.entries = Tensor::uniform({k, n_c}, -1.0, 1.0, rng);
    Tensor c_hat = Tensor::uniform({n_c, 4, 6}, -1.0, 1.0, rng);
    ContentGrid g = quantize(c_hat, z);
    REQUIRE(static_cast<int>(g.indices.size()) == hw);

    const auto& cv = c_hat.values();
    const auto& zv = z.entries.values();
    for (int p = 0; p < hw; ++p) {
        int best = -1;
        double best_d = 0.0;
        for (int row = 0; row < k; ++row) {
            double d = 0.0;
            for (int c = 0; c < n_c; ++c) {
                // c_hat is channel-major: element (c, p) lives at c*hw + p.
                double diff = cv[static_cast<size_t>(c * hw + p)] -
                              zv[static_cast<size_t>(row * n_c + c)];
                d += diff * diff;
            }
            if (best < 0 || d < best_d) {
                best = row;
                best_d = d;
            }
        }
        CHECK(g.indices[static_cast<size_t>(p)] == best);
    }
}

TEST_CASE("squared-distance ties resolve to the lowest index") {
    // Entries 1 and 3 are bit-for-bit duplicates; 0 and 2 are far away.
    Codebook z = book_from({4, 2}, {5.0, 5.0, 0.25, 0.25, -5.0, -5.0, 0.25, 0.25});
    Tensor c_hat = Tensor::from({2, 1, 2}, {0.3, 0.3, 0.2, 0.2});
    ContentGrid g = quantize(c_hat, z);
    CHECK(g.indices == std::vector<int>{1, 1});

    // Symmetric placement: (0,0) is equidistant from (-1,0) and (1,0).
    Codebook z2 = book_from({2, 1}, {1.0, -1.0});
    Tensor mid = Tensor::from({1, 1, 1}, {0.0});
    CHECK(quantize(mid, z2).indices[0] == 0);
}

TEST_CASE("embedded values are a bitwise copy of the selected codebook rows") {
    Rng rng(8);
    Codebook z;
    z.entries = Tensor::uniform({16, 4}, -1.0, 1.0, rng);
    Tensor c_hat = Tensor::uniform({4, 3, 3}, -1.0, 1.0, rng);
    ContentGrid g = quantize(c_hat, z);
    CHECK(g.embedded.shape() == Shape{4, 3, 3});

    const auto& ev = g.embedded.values();
    const auto& zv = z.entries.values();
    for (int p = 0; p < 9; ++p) {
        int row = g.indices[static_cast<size_t>(p)];
        for (int c = 0; c < 4; ++c) {
            double got = ev[static_cast<size_t>(c * 9 + p)];
            double want = zv[static_cast<size_t>(row * 4 + c)];
            CHECK(std::memcmp(&got, &want, sizeof(double)) == 0);
        }
    }
    // All three views carry identical values.
    CHECK(bitwise_equal(g.embedded, g.embedded_with_codebook_grad));
    CHECK(bitwise_equal(g.embedded, g.codes));
}

TEST_CASE("straight-through: decoder gradient lands on the encoder output") {
    Rng rng(17);
    Codebook z;
    z.entries = Tensor::uniform({8, 3}, -1.0, 1.0, rng);
    z.entries.set_requires_grad(true);
    Tensor c_hat = Tensor::uniform({3, 2, 2}, -1.0, 1.0, rng);
    c_hat.set_requires_grad(true);

    Tape tape;
    {
        TapeScope scope(tape);
        ContentGrid g = quantize(c_hat, z);
        backward(ops::sum(ops::square(g.embedded)), tape);

        // Straight-through: d loss/d c_hat equals 2*embedded, bitwise the same
        // as differentiating the embedded values directly; the codebook sees
        // nothing on this path.
        REQUIRE(c_hat.has_grad());
        for (int64_t i = 0; i < c_hat.numel(); ++i)
            CHECK(c_hat.grad()[static_cast<size_t>(i)] ==
                  2.0 * g.embedded.values()[static_cast<size_t>(i)]);
        CHECK_FALSE(z.entries.has_grad());
    }
}

TEST_CASE("embedded_with_codebook_grad routes gradients to both sides") {
    Rng rng(18);
    Codebook z;
    z.entries = Tensor::uniform({8, 3}, -1.0, 1.0, rng);
    z.entries.set_requires_grad(true);
    Tensor c_hat = Tensor::uniform({3, 2, 2}, -1.0, 1.0, rng);
    c_hat.set_requires_grad(true);

    Tape tape;
    TapeScope scope(tape);
    ContentGrid g = quantize(c_hat, z);
    CHECK(bitwise_equal(g.embedded_with_codebook_grad, g.embedded));
    backward(ops::sum(g.embedded_with_codebook_grad), tape);
    REQUIRE(c_hat.has_grad());
    REQUIRE(z.entries.has_grad());
    // Encoder side: straight-through passes the upstream ones verbatim.
    for (double gv : c_hat.grad()) CHECK(gv == 1.0);
    // Codebook side: each selected row accumulates one unit per use.
    double sum = 0.0;
    for (double gv : z.entries.grad()) sum += gv;
    CHECK(sum == doctest::Approx(12.0).epsilon(1e-12));  // 4 cells * 3 channels
}

TEST_CASE("vq_loss worked oracle: 0.32 with +/-0.8 gradients") {
    // One spatial entry, one channel: c_hat = 0.3, selected code c = 0.7.
    // ||sg(c_hat)-c||^2 + ||sg(c)-c_hat||^2 = 0.16 + 0.16 = 0.32.
    Tensor c_hat = Tensor::from({1}, {0.3});
    Tensor c = Tensor::from({1}, {0.7});
    c_hat.set_requires_grad(true);
    c.set_requires_grad(true);

    Tape tape;
    TapeScope scope(tape);
    Tensor loss = vq_loss(c_hat, c);
    CHECK(loss.item() == doctest::Approx(0.32).epsilon(1e-15));
    backward(loss, tape);
    // d/dc_hat of (c_hat - sg(c))^2 = 2*(0.3-0.7) = -0.8; symmetric for c.
    CHECK(c_hat.grad()[0] == doctest::Approx(-0.8).epsilon(1e-12));
    CHECK(c.grad()[0] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("vq_loss averages over spatial entries, not channels") {
    // [n_c=2, h=1, w=2]: two spatial entries, each contributing its full
    // squared channel distance twice (both stop-gradient terms).
    Tensor c_hat = Tensor::from({2, 1, 2}, {0.0, 1.0, 0.0, 1.0});
    Tensor c = Tensor::from({2, 1, 2}, {1.0, 1.0, 2.0, 1.0});
    // Entry 0 differs by (1,2): squared distance 5. Entry 1 matches: 0.
    // Loss = (2*5 + 2*0) / 2 = 5.
    CHECK(vq_loss(c_hat, c).item() == doctest::Approx(5.0).epsilon(1e-12));

    // Rank-2 [n, d] input averages over n rows.
    Tensor a2 = Tensor::from({2, 2}, {0.0, 0.0, 1.0, 1.0});
    Tensor b2 = Tensor::from({2, 2}, {1.0, 0.0, 1.0, 0.0});
    // Row distances: 1 and 1 -> (2*1 + 2*1)/2 = 2.
    CHECK(vq_loss(a2, b2).item() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("vq_loss is zero with zero gradients when both sides agree") {
    Rng rng(3);
    Tensor c = Tensor::uniform({4, 2, 2}, -1.0, 1.0, rng);
    Tensor c_hat = make_tensor(c.shape(), c.values());
    c.set_requires_grad(true);
    c_hat.set_requires_grad(true);
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = vq_loss(c_hat, c);
    CHECK(loss.item() == 0.0);
    backward(loss, tape);
    for (double g : c_hat.grad()) CHECK(g == 0.0);
    for (double g : c.grad()) CHECK(g == 0.0);
}

TEST_CASE("quantization is invariant to codebook row permutation up to relabeling") {
    Rng rng(23);
    Codebook z;
    z.entries = Tensor::uniform({6, 3}, -1.0, 1.0, rng);
    Tensor c_hat = Tensor::uniform({3, 4, 4}, -1.0, 1.0, rng);
    ContentGrid g = quantize(c_hat, z);

    // Reverse the rows; selected vectors must be identical, indices remapped.
    std::vector<double> rev(z.entries.values().size());
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 3; ++c)
            rev[static_cast<size_t>((5 - r) * 3 + c)] =
                z.entries.values()[static_cast<size_t>(r * 3 + c)];
    Codebook z2 = book_from({6, 3}, rev);
    ContentGrid g2 = quantize(c_hat, z2);
    CHECK(bitwise_equal(g.embedded, g2.embedded));
    for (size_t i = 0; i < g.indices.size(); ++i)
        CHECK(g2.indices[i] == 5 - g.indices[i]);
}

TEST_CASE("usage_fraction counts distinct codes across grids") {
    std::vector<std::vector<int>> grids = {{0, 1, 1, 0}, {2, 2, 2, 2}};
    CHECK(usage_fraction(grids, 12) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(usage_fraction(grids, 3) == doctest::Approx(1.0).epsilon(1e-15));
    std::vector<std::vector<int>> one = {{5, 5, 5}};
    CHECK(usage_fraction(one, 64) == doctest::Approx(1.0 / 64.0).epsilon(1e-15));
    CHECK_THROWS_AS(usage_fraction(std::vector<std::vector<int>>{}, 64), Error);
}

TEST_CASE("embed_indices reproduces quantize's embedded values") {
    Rng rng(9);
    Codebook z;
    z.entries = Tensor::uniform({10, 5}, -1.0, 1.0, rng);
    Tensor c_hat = Tensor::uniform({5, 3, 2}, -1.0, 1.0, rng);
    ContentGrid g = quantize(c_hat, z);
    Tensor e = embed_indices(g.indices, g.h, g.w, z);
    CHECK(e.shape() == Shape{5, 3, 2});
    CHECK(bitwise_equal(e, g.embedded));
}

TEST_CASE("quantize validates input rank and channel count") {
    Rng rng(4);
    Codebook z;
    z.entries = Tensor::uniform({4, 3}, -1.0, 1.0, rng);
    Tensor wrong_rank = Tensor::zeros({3, 4});
    CHECK_THROWS_AS(quantize(wrong_rank, z), Error);
    Tensor wrong_channels = Tensor::zeros({2, 2, 2});
    CHECK_THROWS_AS(quantize(wrong_channels, z), Error);
}
