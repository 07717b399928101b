#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include "vqi2i/adam.hpp"
#include "vqi2i/error.hpp"
#include "vqi2i/kernels.hpp"
#include "vqi2i/ops.hpp"
#include "vqi2i/rng.hpp"
#include "vqi2i/tensor.hpp"

using namespace vqi2i;

TEST_CASE("rng: same seed gives the same stream, different seeds diverge") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool any_diff = false;
    Rng a2(42);
    for (int i = 0; i < 100; ++i)
        if (a2.next_u64() != c.next_u64()) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("rng: next_double stays in [0,1) and uniform respects bounds") {
    Rng r(7);
    for (int i = 0; i < 10000; ++i) {
        double d = r.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
        double u = r.uniform(-3.0, 5.0);
        CHECK(u >= -3.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("rng: next_below covers the range without obvious bias") {
    Rng r(123);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[static_cast<size_t>(r.next_below(7))];
    for (int k = 0; k < 7; ++k) {
        CHECK(counts[static_cast<size_t>(k)] > 9000);
        CHECK(counts[static_cast<size_t>(k)] < 11000);
    }
}

TEST_CASE("rng: normal() has roughly standard moments") {
    Rng r(321);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        s += x;
        s2 += x * x;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("derive_seed separates streams by tag and index") {
    std::set<uint64_t> seen;
    for (uint64_t i = 0; i < 50; ++i) {
        seen.insert(derive_seed(1, "alpha", i));
        seen.insert(derive_seed(1, "beta", i));
        seen.insert(derive_seed(2, "alpha", i));
    }
    CHECK(seen.size() == 150);
    CHECK(derive_seed(9, "tag", 3) == derive_seed(9, "tag", 3));
}

TEST_CASE("tensor: construction, aliasing, and item()") {
    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.numel() == 6);
    CHECK(z.values() == std::vector<double>(6, 0.0));

    Tensor f = Tensor::full({2}, 1.5);
    CHECK(f.values() == std::vector<double>{1.5, 1.5});

    Tensor s = Tensor::scalar(4.0);
    CHECK(s.item() == 4.0);
    CHECK_THROWS_AS(f.item(), Error);

    Tensor copy = f;  // handle copy aliases the same storage
    copy.values()[0] = 9.0;
    CHECK(f.values()[0] == 9.0);
    CHECK(copy.same_storage(f));

    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), Error);
}

TEST_CASE("tape: d/dx x^2 at x=3 is 6; grads accumulate across uses") {
    Tensor x = Tensor::scalar(3.0);
    x.set_requires_grad(true);
    Tape tape;
    {
        TapeScope scope(tape);
        backward(ops::square(x), tape);
    }
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));

    // y = x^2 + x^2 doubles the gradient through accumulation.
    x.drop_grad();
    Tape tape2;
    {
        TapeScope scope(tape2);
        Tensor y = ops::add(ops::square(x), ops::square(x));
        backward(y, tape2);
    }
    CHECK(x.grad()[0] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("tape: nothing records without an active tape or with grads off") {
    Tensor x = Tensor::scalar(2.0);
    x.set_requires_grad(true);
    Tensor y = ops::square(x);  // no tape in scope
    CHECK(y.item() == 4.0);

    Tape tape;
    TapeScope scope(tape);
    {
        NoGradGuard ng;
        ops::square(x);
    }
    CHECK(tape.size() == 0);
    ops::square(x);
    CHECK(tape.size() == 1);
}

TEST_CASE("backward: NaN gradients are hard errors naming the op") {
    // d/dx log(x) at a value so small that upstream/x overflows to inf.
    Tensor x = Tensor::scalar(1e-320);
    x.set_requires_grad(true);
    Tape tape;
    TapeScope scope(tape);
    Tensor y = ops::log(x);  // log(1e-320) is finite (~ -736)
    CHECK_THROWS_WITH_AS(backward(y, tape), doctest::Contains("log"), Error);
}

TEST_CASE("params: registration order, find, extend, scalar_count") {
    Params p;
    p.add("a", Tensor::zeros({2, 2}));
    p.add("b", Tensor::zeros({3}));
    CHECK(p.scalar_count() == 7);
    CHECK(p.items()[0].name == "a");
    CHECK(p.find("b").numel() == 3);
    CHECK_THROWS_AS(p.find("missing"), Error);
    CHECK_THROWS_AS(p.add("a", Tensor::zeros({1})), Error);

    Params q;
    q.add("c", Tensor::zeros({1}));
    q.extend(p);
    CHECK(q.scalar_count() == 8);
    CHECK(q.items()[1].name == "a");
}

TEST_CASE("adam: first step moves each weight by about -lr * sign(g)") {
    // With bias correction the first update is exactly lr * g / (|g| + eps').
    Tensor w = Tensor::from({3}, {1.0, -2.0, 0.5});
    w.set_requires_grad(true);
    Params p;
    p.add("w", w);
    Adam opt(p, 0.01);
    w.grad() = {0.3, -0.7, 2.0};
    std::vector<double> g = w.grad();
    opt.step();
    CHECK(opt.t() == 1);
    for (int i = 0; i < 3; ++i) {
        double expect = (i == 0 ? 1.0 : (i == 1 ? -2.0 : 0.5));
        double delta = w.values()[static_cast<size_t>(i)] - expect;
        // Step direction opposes the gradient and magnitude is ~lr.
        CHECK(delta * g[static_cast<size_t>(i)] < 0.0);
        CHECK(std::abs(delta) == doctest::Approx(0.01).epsilon(1e-4));
    }
}

TEST_CASE("adam: zero gradient leaves a weight unchanged, others move") {
    Tensor a = Tensor::scalar(1.0);
    Tensor b = Tensor::scalar(2.0);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    Params p;
    p.add("a", a);
    p.add("b", b);
    Adam opt(p, 0.1);
    a.grad() = {0.0};
    b.grad() = {1.0};
    opt.step();
    CHECK(a.item() == 1.0);
    CHECK(b.item() < 2.0);
}

TEST_CASE("adam: a missing gradient is a hard error") {
    Tensor a = Tensor::scalar(1.0);
    a.set_requires_grad(true);
    Params p;
    p.add("a", a);
    Adam opt(p, 0.1);
    CHECK_THROWS_AS(opt.step(), Error);
}

TEST_CASE("adam: restore() resumes the exact trajectory") {
    auto run = [](int steps_before_save, int steps_after) {
        Tensor w = Tensor::from({2}, {1.0, -1.0});
        w.set_requires_grad(true);
        Params p;
        p.add("w", w);
        Adam opt(p, 0.05);
        std::vector<std::vector<double>> m, v;
        int64_t t = 0;
        for (int s = 0; s < steps_before_save + steps_after; ++s) {
            if (s == steps_before_save) {
                m = opt.m();
                v = opt.v();
                t = opt.t();
            }
            w.zero_grad();
            // Gradient of 0.5*||w - target||^2 with target (3, 2).
            w.grad() = {w.values()[0] - 3.0, w.values()[1] - 2.0};
            opt.step();
        }
        return std::make_tuple(w.values(), m, v, t);
    };

    auto [full, m, v, t] = run(4, 6);

    // Second run: replay 4 steps, restore into a fresh optimizer, do 6 more.
    Tensor w = Tensor::from({2}, {1.0, -1.0});
    w.set_requires_grad(true);
    Params p;
    p.add("w", w);
    {
        Adam opt(p, 0.05);
        for (int s = 0; s < 4; ++s) {
            w.zero_grad();
            w.grad() = {w.values()[0] - 3.0, w.values()[1] - 2.0};
            opt.step();
        }
    }
    Adam resumed(p, 0.05);
    resumed.restore(m, v, t);
    for (int s = 0; s < 6; ++s) {
        w.zero_grad();
        w.grad() = {w.values()[0] - 3.0, w.values()[1] - 2.0};
        resumed.step();
    }
    CHECK(std::memcmp(w.data(), full.data(), sizeof(double) * 2) == 0);
}

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("kernels: serial and OpenMP paths are bitwise identical") {
    Rng rng(2024);

    SUBCASE("matmul, all transpose layouts") {
        const int m = 17, k = 23, n = 13;
        for (bool ta : {false, true}) {
            for (bool tb : {false, true}) {
                auto a = random_vec(static_cast<size_t>(m * k), rng);
                auto b = random_vec(static_cast<size_t>(k * n), rng);
                std::vector<double> cs(static_cast<size_t>(m * n), 0.0);
                std::vector<double> cp(static_cast<size_t>(m * n), 0.0);
                kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n, ta, tb);
                kernels::omp::matmul(a.data(), b.data(), cp.data(), m, k, n, ta, tb);
                CHECK(bitwise_equal(cs, cp));
            }
        }
    }

    SUBCASE("conv2d forward/backward") {
        kernels::Conv2dDims d;
        d.cin = 3, d.h = 11, d.w = 9;
        d.cout = 5, d.kh = 3, d.kw = 3;
        d.stride = 2, d.pad = 1;
        d.ho = (d.h + 2 * d.pad - d.kh) / d.stride + 1;
        d.wo = (d.w + 2 * d.pad - d.kw) / d.stride + 1;
        auto x = random_vec(static_cast<size_t>(d.cin * d.h * d.w), rng);
        auto w = random_vec(static_cast<size_t>(d.cout * d.cin * d.kh * d.kw), rng);
        auto dy = random_vec(static_cast<size_t>(d.cout * d.ho * d.wo), rng);

        std::vector<double> ys(static_cast<size_t>(d.cout * d.ho * d.wo), 0.0), yp = ys;
        kernels::serial::conv2d_forward(x.data(), w.data(), ys.data(), d);
        kernels::omp::conv2d_forward(x.data(), w.data(), yp.data(), d);
        CHECK(bitwise_equal(ys, yp));

        std::vector<double> dxs(x.size(), 0.0), dxp = dxs;
        kernels::serial::conv2d_backward_input(dy.data(), w.data(), dxs.data(), d);
        kernels::omp::conv2d_backward_input(dy.data(), w.data(), dxp.data(), d);
        CHECK(bitwise_equal(dxs, dxp));

        std::vector<double> dws(w.size(), 0.0), dwp = dws;
        kernels::serial::conv2d_backward_weight(dy.data(), x.data(), dws.data(), d);
        kernels::omp::conv2d_backward_weight(dy.data(), x.data(), dwp.data(), d);
        CHECK(bitwise_equal(dws, dwp));
    }

    SUBCASE("upsample forward/backward") {
        const int c = 4, h = 7, w = 5, f = 3;
        auto x = random_vec(static_cast<size_t>(c * h * w), rng);
        auto dy = random_vec(static_cast<size_t>(c * h * f * w * f), rng);
        std::vector<double> ys(dy.size(), 0.0), yp = ys;
        kernels::serial::upsample_forward(x.data(), ys.data(), c, h, w, f);
        kernels::omp::upsample_forward(x.data(), yp.data(), c, h, w, f);
        CHECK(bitwise_equal(ys, yp));
        std::vector<double> dxs(x.size(), 0.0), dxp = dxs;
        kernels::serial::upsample_backward(dy.data(), dxs.data(), c, h, w, f);
        kernels::omp::upsample_backward(dy.data(), dxp.data(), c, h, w, f);
        CHECK(bitwise_equal(dxs, dxp));
    }
}

TEST_CASE("kernels: global dispatch switch routes ops through either path") {
    Rng rng(5);
    Tensor x = Tensor::uniform({2, 8, 8}, -1.0, 1.0, rng);
    Tensor w = Tensor::uniform({3, 2, 3, 3}, -1.0, 1.0, rng);

    bool saved = kernels::use_parallel();
    kernels::set_use_parallel(false);
    Tensor serial_out = ops::conv2d(x, w, 1, 1);
    kernels::set_use_parallel(true);
    Tensor parallel_out = ops::conv2d(x, w, 1, 1);
    kernels::set_use_parallel(saved);

    CHECK(std::memcmp(serial_out.data(), parallel_out.data(),
                      sizeof(double) * static_cast<size_t>(serial_out.numel())) == 0);
}
