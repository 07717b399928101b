#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "fd_check.hpp"
#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"
#include "vqi2i/rng.hpp"
#include "vqi2i/tensor.hpp"

using namespace vqi2i;

namespace {

constexpr double kFdTol = 1e-6;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    return Tensor::uniform(std::move(shape), lo, hi, rng);
}

// Pushes every value at least `margin` away from each kink point so central
// differences with h=1e-5 never straddle a non-smooth boundary.
void away_from(Tensor& t, const std::vector<double>& kinks, double margin = 5e-2) {
    for (double& v : t.values()) {
        for (double k : kinks) {
            if (std::abs(v - k) < margin) v = k + (v >= k ? margin : -margin);
        }
    }
}

// Reduces an arbitrary op output to a scalar through a fixed random weight
// tensor, so every output element feeds the loss with a distinct coefficient.
Tensor weighted_sum(const Tensor& out, const Tensor& w) {
    return ops::sum(ops::mul(out, w));
}

Tensor fixed_weights(const Shape& shape, uint64_t seed) {
    Rng rng(derive_seed(seed, "fd-weights", 0));
    return Tensor::uniform(shape, -1.0, 1.0, rng);
}

// Runs fd::check over `seeds` independent random instances.
void fd_over_seeds(int seeds, const std::function<fd::Report(uint64_t)>& one) {
    for (int s = 0; s < seeds; ++s) {
        fd::Report rep = one(static_cast<uint64_t>(s) + 1);
        CHECK(rep.checked > 0);
        CHECK(rep.max_rel < kFdTol);
    }
}

}  // namespace

TEST_CASE("elementwise add/sub/mul gradients, same shape") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor a = random_tensor({2, 3}, rng);
        Tensor b = random_tensor({2, 3}, rng);
        Tensor w = fixed_weights({2, 3}, seed);
        return fd::check(
            [&] {
                Tensor s = ops::add(a, b);
                Tensor d = ops::sub(a, b);
                Tensor m = ops::mul(a, b);
                return ops::add(weighted_sum(s, w),
                                ops::add(weighted_sum(d, w), weighted_sum(m, w)));
            },
            {a, b});
    });
}

TEST_CASE("broadcast add/mul gradients sum over the expanded axes") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor a = random_tensor({2, 3, 4}, rng);
        Tensor b = random_tensor({3, 1}, rng);  // broadcasts over dims 0 and 2
        Tensor w = fixed_weights({2, 3, 4}, seed);
        return fd::check(
            [&] {
                return ops::add(weighted_sum(ops::add(a, b), w),
                                weighted_sum(ops::mul(a, b), w));
            },
            {a, b});
    });

    // Oracle: d/db sum(mul(a, b)) with a=[2,3], b=[3] is the column sums of a.
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({3}, {1, 1, 1});
    b.set_requires_grad(true);
    Tape tape;
    {
        TapeScope scope(tape);
        backward(ops::sum(ops::mul(a, b)), tape);
    }
    CHECK(b.grad()[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(b.grad()[1] == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(b.grad()[2] == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("add_const and scale gradients") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor a = random_tensor({3, 2}, rng);
        Tensor w = fixed_weights({3, 2}, seed);
        return fd::check(
            [&] {
                return ops::add(weighted_sum(ops::add_const(a, 0.7), w),
                                weighted_sum(ops::scale(a, -1.3), w));
            },
            {a});
    });
}

TEST_CASE("matmul gradients for all four transpose layouts") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        const int m = 3, k = 4, n = 2;
        Tensor a = random_tensor({m, k}, rng);
        Tensor b = random_tensor({k, n}, rng);
        Tensor at = random_tensor({k, m}, rng);
        Tensor bt = random_tensor({n, k}, rng);
        Tensor w = fixed_weights({m, n}, seed);
        return fd::check(
            [&] {
                Tensor p1 = ops::matmul(a, b, false, false);
                Tensor p2 = ops::matmul(at, b, true, false);
                Tensor p3 = ops::matmul(a, bt, false, true);
                Tensor p4 = ops::matmul(at, bt, true, true);
                return ops::add(ops::add(weighted_sum(p1, w), weighted_sum(p2, w)),
                                ops::add(weighted_sum(p3, w), weighted_sum(p4, w)));
            },
            {a, b, at, bt});
    });
}

TEST_CASE("conv2d gradients across stride/pad combinations") {
    struct Case {
        int stride, pad;
    };
    for (Case c : {Case{1, 0}, Case{1, 1}, Case{2, 0}, Case{2, 1}}) {
        fd_over_seeds(10, [&](uint64_t seed) {
            Rng rng(seed * 131 + static_cast<uint64_t>(c.stride * 10 + c.pad));
            Tensor x = random_tensor({2, 5, 5}, rng);
            Tensor w = random_tensor({3, 2, 3, 3}, rng);
            const int out = (5 + 2 * c.pad - 3) / c.stride + 1;
            Tensor ww = fixed_weights({3, out, out}, seed);
            return fd::check(
                [&] { return weighted_sum(ops::conv2d(x, w, c.stride, c.pad), ww); },
                {x, w});
        });
    }
}

TEST_CASE("upsample_nearest gradients and value layout") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = random_tensor({2, 3, 3}, rng);
        Tensor w = fixed_weights({2, 6, 6}, seed);
        return fd::check([&] { return weighted_sum(ops::upsample_nearest(x, 2), w); },
                         {x});
    });

    Tensor x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    Tensor u = ops::upsample_nearest(x, 2);
    CHECK(u.shape() == Shape{1, 4, 4});
    CHECK(u.values() == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2,  //
                                            3, 3, 4, 4, 3, 3, 4, 4});
}

TEST_CASE("activation gradients away from kinks") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = random_tensor({4, 4}, rng);
        away_from(x, {0.0});
        Tensor w = fixed_weights({4, 4}, seed);
        return fd::check(
            [&] {
                Tensor t = ops::add(weighted_sum(ops::relu(x), w),
                                    weighted_sum(ops::leaky_relu(x, 0.2), w));
                t = ops::add(t, weighted_sum(ops::tanh(x), w));
                t = ops::add(t, weighted_sum(ops::sigmoid(x), w));
                return t;
            },
            {x});
    });
}

TEST_CASE("activation value oracles") {
    Tensor x = Tensor::from({3}, {0.0, 1.0, -1.0});
    CHECK(ops::tanh(x).values()[0] == 0.0);
    CHECK(ops::tanh(x).values()[1] == doctest::Approx(0.7615941559557649).epsilon(1e-15));
    CHECK(ops::sigmoid(x).values()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ops::sigmoid(x).values()[1] ==
          doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(ops::relu(x).values() == std::vector<double>{0.0, 1.0, 0.0});
    CHECK(ops::leaky_relu(x, 0.2).values()[2] == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("softmax and log_softmax gradients and oracle") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = random_tensor({3, 5}, rng);
        Tensor w = fixed_weights({3, 5}, seed);
        return fd::check(
            [&] {
                return ops::add(weighted_sum(ops::softmax(x), w),
                                weighted_sum(ops::log_softmax(x), w));
            },
            {x});
    });

    Tensor x = Tensor::from({3}, {2.0, 1.0, 0.0});
    Tensor p = ops::softmax(x);
    CHECK(p.values()[0] == doctest::Approx(0.6652409557748219).epsilon(1e-12));
    CHECK(p.values()[1] == doctest::Approx(0.2447284710547977).epsilon(1e-12));
    CHECK(p.values()[2] == doctest::Approx(0.0900305731703804).epsilon(1e-12));
    double total = p.values()[0] + p.values()[1] + p.values()[2];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    Tensor lp = ops::log_softmax(x);
    for (int i = 0; i < 3; ++i)
        CHECK(lp.values()[static_cast<size_t>(i)] ==
              doctest::Approx(std::log(p.values()[static_cast<size_t>(i)])).epsilon(1e-12));
}

TEST_CASE("log/exp/abs/square/clamp gradients") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor pos = random_tensor({3, 3}, rng, 0.2, 3.0);
        Tensor x = random_tensor({3, 3}, rng);
        away_from(x, {0.0, -0.8, 0.9});
        Tensor w = fixed_weights({3, 3}, seed);
        return fd::check(
            [&] {
                Tensor t = ops::add(weighted_sum(ops::log(pos), w),
                                    weighted_sum(ops::exp(x), w));
                t = ops::add(t, weighted_sum(ops::abs(x), w));
                t = ops::add(t, weighted_sum(ops::square(x), w));
                t = ops::add(t, weighted_sum(ops::clamp(x, -0.8, 0.9), w));
                return t;
            },
            {pos, x});
    });

    Tensor x = Tensor::from({4}, {-2.0, -0.5, 0.5, 2.0});
    CHECK(ops::clamp(x, -0.8, 0.9).values() == std::vector<double>{-0.8, -0.5, 0.5, 0.9});
}

TEST_CASE("mean and sum gradients") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = random_tensor({2, 3, 2}, rng);
        return fd::check(
            [&] { return ops::add(ops::mean(x), ops::scale(ops::sum(x), 0.25)); }, {x});
    });
}

TEST_CASE("instance_norm gradients and normalization stats") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = random_tensor({2, 4, 4}, rng);
        Tensor w = fixed_weights({2, 4, 4}, seed);
        return fd::check([&] { return weighted_sum(ops::instance_norm(x), w); }, {x});
    });

    Rng rng(77);
    Tensor x = random_tensor({3, 8, 8}, rng);
    Tensor y = ops::instance_norm(x);
    const int per = 64;
    for (int c = 0; c < 3; ++c) {
        double m = 0.0, v = 0.0;
        for (int i = 0; i < per; ++i) m += y.values()[static_cast<size_t>(c * per + i)];
        m /= per;
        for (int i = 0; i < per; ++i) {
            double d = y.values()[static_cast<size_t>(c * per + i)] - m;
            v += d * d;
        }
        v /= per;
        CHECK(std::abs(m) < 1e-9);
        CHECK(v == doctest::Approx(1.0).epsilon(1e-4));  // eps=1e-5 shrinks var slightly
    }
}

TEST_CASE("channel_mean gradients and values") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = random_tensor({3, 2, 2}, rng);
        Tensor w = fixed_weights({3}, seed);
        return fd::check([&] { return weighted_sum(ops::channel_mean(x), w); }, {x});
    });

    Tensor x = Tensor::from({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
    Tensor m = ops::channel_mean(x);
    CHECK(m.shape() == Shape{2});
    CHECK(m.values()[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(m.values()[1] == doctest::Approx(25.0).epsilon(1e-15));
}

TEST_CASE("concat/slice/reshape/transpose2d/hflip gradients") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor a = random_tensor({2, 3, 2}, rng);
        Tensor b = random_tensor({2, 2, 2}, rng);
        Tensor m = random_tensor({3, 4}, rng);
        Tensor wc = fixed_weights({2, 5, 2}, seed);
        Tensor ws = fixed_weights({2, 2, 2}, seed + 100);
        Tensor wt = fixed_weights({4, 3}, seed + 200);
        Tensor wf = fixed_weights({3, 4}, seed + 300);
        return fd::check(
            [&] {
                Tensor t = weighted_sum(ops::concat({a, b}, 1), wc);
                t = ops::add(t, weighted_sum(ops::slice(a, 1, 1, 2), ws));
                t = ops::add(t, weighted_sum(ops::reshape(m, {4, 3}), wt));
                t = ops::add(t, weighted_sum(ops::transpose2d(m), wt));
                t = ops::add(t, weighted_sum(ops::hflip(m), wf));
                return t;
            },
            {a, b, m});
    });
}

TEST_CASE("hflip is an involution and reverses the last axis") {
    Rng rng(5);
    Tensor x = random_tensor({2, 3, 4}, rng);
    Tensor back = ops::hflip(ops::hflip(x));
    CHECK(back.values() == x.values());

    Tensor row = Tensor::from({1, 4}, {1, 2, 3, 4});
    CHECK(ops::hflip(row).values() == std::vector<double>{4, 3, 2, 1});
}

TEST_CASE("stop_gradient blocks flow; straight_through reroutes it") {
    Rng rng(11);
    Tensor a = random_tensor({2, 2}, rng);
    Tensor b = random_tensor({2, 2}, rng);
    a.set_requires_grad(true);
    b.set_requires_grad(true);

    Tape tape;
    {
        TapeScope scope(tape);
        backward(ops::sum(ops::square(ops::stop_gradient(a))), tape);
    }
    CHECK_FALSE(a.has_grad());

    a.drop_grad();
    b.drop_grad();
    Tape tape2;
    Tensor st;
    {
        TapeScope scope(tape2);
        st = ops::straight_through(a, b);
        backward(ops::sum(ops::mul(st, st)), tape2);
    }
    // Values are a bitwise copy of the first argument.
    CHECK(std::memcmp(st.data(), a.data(), sizeof(double) * 4) == 0);
    // The gradient lands on the second argument only, as d/dx sum(x^2) = 2a.
    CHECK_FALSE(a.has_grad());
    REQUIRE(b.has_grad());
    for (int i = 0; i < 4; ++i)
        CHECK(b.grad()[static_cast<size_t>(i)] ==
              doctest::Approx(2.0 * a.values()[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("straight_through FD in its self-consistent form") {
    // straight_through(a, b) is a biased estimator: its values ignore b, so
    // finite differences w.r.t. b are identically zero while the analytic
    // gradient reroutes the upstream onto b. The two agree only when the
    // value path and gradient path are the same tensor.
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor b = random_tensor({2, 3}, rng);
        Tensor w = fixed_weights({2, 3}, seed);
        return fd::check([&] { return weighted_sum(ops::straight_through(b, b), w); },
                         {b});
    });
}

TEST_CASE("embedding gather values and scatter-add gradients") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor table = random_tensor({5, 3}, rng);
        std::vector<int> idx = {0, 2, 2, 4};  // repeats force scatter-add
        Tensor w = fixed_weights({4, 3}, seed);
        return fd::check([&] { return weighted_sum(ops::embedding(table, idx), w); },
                         {table});
    });

    Tensor table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor rows = ops::embedding(table, {2, 0});
    CHECK(rows.values() == std::vector<double>{5, 6, 1, 2});
}

TEST_CASE("select_lastaxis picks per-row entries and routes gradients") {
    fd_over_seeds(10, [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = random_tensor({4, 5}, rng);
        std::vector<int> idx = {1, 0, 4, 4};
        Tensor w = fixed_weights({4}, seed);
        return fd::check([&] { return weighted_sum(ops::select_lastaxis(x, idx), w); },
                         {x});
    });

    Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(ops::select_lastaxis(x, {2, 0}).values() == std::vector<double>{3, 4});
}

TEST_CASE("ops are bitwise deterministic across repeated evaluation") {
    Rng rng(99);
    Tensor x = random_tensor({3, 6, 6}, rng);
    Tensor w = random_tensor({4, 3, 3, 3}, rng);
    Tensor a = ops::conv2d(x, w, 1, 1);
    Tensor b = ops::conv2d(x, w, 1, 1);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.numel())) == 0);
    Tensor s1 = ops::softmax(ops::reshape(x, {9, 12}));
    Tensor s2 = ops::softmax(ops::reshape(x, {9, 12}));
    CHECK(std::memcmp(s1.data(), s2.data(),
                      sizeof(double) * static_cast<size_t>(s1.numel())) == 0);
}

TEST_CASE("non-finite outputs are hard errors naming the op") {
    Tensor x = Tensor::from({2}, {1.0, 0.0});
    CHECK_THROWS_WITH_AS(ops::log(x), doctest::Contains("log"), Error);
    Tensor big = Tensor::from({1}, {1e308});
    CHECK_THROWS_WITH_AS(ops::exp(big), doctest::Contains("exp"), Error);
}

TEST_CASE("backward requires a scalar loss") {
    Tensor x = Tensor::from({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    Tape tape;
    TapeScope scope(tape);
    Tensor y = ops::square(x);
    CHECK_THROWS_AS(backward(y, tape), Error);
}

TEST_CASE("shape validation errors") {
    Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from({4}, {1, 2, 3, 4});
    CHECK_THROWS_AS(ops::add(a, b), Error);
    CHECK_THROWS_AS(ops::matmul(a, a), Error);
    CHECK_THROWS_AS(ops::reshape(a, {5}), Error);
    CHECK_THROWS_AS(ops::slice(a, 1, 2, 5), Error);
    CHECK_THROWS_AS(ops::concat({a, b}, 0), Error);
}
