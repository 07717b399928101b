// Timing comparison of the serial reference kernels against the OpenMP
// versions, plus a bitwise agreement check on every measured case.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "vqi2i/kernels.hpp"
#include "vqi2i/rng.hpp"

using namespace vqi2i;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void fill(std::vector<double>& v, Rng& rng) {
    for (double& x : v) x = rng.normal();
}

struct Row {
    std::string name;
    double serial_ms = 0, omp_ms = 0;
    bool match = false;
};

void print_row(const Row& r) {
    std::printf("%-34s %10.3f %10.3f %8.2fx   %s\n", r.name.c_str(), r.serial_ms, r.omp_ms,
                r.serial_ms / r.omp_ms, r.match ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
    Rng rng(42);
    std::vector<Row> rows;

    {
        const int m = 256, k = 256, n = 256;
        std::vector<double> a(m * k), b(k * n), out_s(m * n), out_p(m * n);
        fill(a, rng);
        fill(b, rng);
        Row r{"matmul 256x256x256"};
        r.serial_ms = time_ms(
            [&] { kernels::serial::matmul(a.data(), b.data(), out_s.data(), m, n, k, false, false); },
            5);
        r.omp_ms = time_ms(
            [&] { kernels::omp::matmul(a.data(), b.data(), out_p.data(), m, n, k, false, false); },
            5);
        r.match = std::memcmp(out_s.data(), out_p.data(), out_s.size() * 8) == 0;
        rows.push_back(r);
    }

    {
        kernels::Conv2dDims d;
        d.cin = 32;
        d.h = 32;
        d.w = 32;
        d.cout = 64;
        d.kh = 3;
        d.kw = 3;
        d.stride = 1;
        d.pad = 1;
        d.ho = 32;
        d.wo = 32;
        std::vector<double> x(d.cin * d.h * d.w), w(d.cout * d.cin * d.kh * d.kw);
        std::vector<double> out_s(d.cout * d.ho * d.wo), out_p(out_s.size());
        fill(x, rng);
        fill(w, rng);
        Row r{"conv2d 32ch 32x32 -> 64ch 3x3"};
        r.serial_ms =
            time_ms([&] { kernels::serial::conv2d_forward(x.data(), w.data(), out_s.data(), d); }, 5);
        r.omp_ms =
            time_ms([&] { kernels::omp::conv2d_forward(x.data(), w.data(), out_p.data(), d); }, 5);
        r.match = std::memcmp(out_s.data(), out_p.data(), out_s.size() * 8) == 0;
        rows.push_back(r);

        std::vector<double> gy(d.cout * d.ho * d.wo), gx_s(x.size()), gx_p(x.size());
        std::vector<double> gw_s(w.size()), gw_p(w.size());
        fill(gy, rng);
        Row ri{"conv2d backward-input"};
        ri.serial_ms = time_ms(
            [&] {
                std::fill(gx_s.begin(), gx_s.end(), 0.0);
                kernels::serial::conv2d_backward_input(gy.data(), w.data(), gx_s.data(), d);
            },
            5);
        ri.omp_ms = time_ms(
            [&] {
                std::fill(gx_p.begin(), gx_p.end(), 0.0);
                kernels::omp::conv2d_backward_input(gy.data(), w.data(), gx_p.data(), d);
            },
            5);
        ri.match = std::memcmp(gx_s.data(), gx_p.data(), gx_s.size() * 8) == 0;
        rows.push_back(ri);

        Row rw{"conv2d backward-weight"};
        rw.serial_ms = time_ms(
            [&] {
                std::fill(gw_s.begin(), gw_s.end(), 0.0);
                kernels::serial::conv2d_backward_weight(gy.data(), x.data(), gw_s.data(), d);
            },
            5);
        rw.omp_ms = time_ms(
            [&] {
                std::fill(gw_p.begin(), gw_p.end(), 0.0);
                kernels::omp::conv2d_backward_weight(gy.data(), x.data(), gw_p.data(), d);
            },
            5);
        rw.match = std::memcmp(gw_s.data(), gw_p.data(), gw_s.size() * 8) == 0;
        rows.push_back(rw);
    }

    {
        const int c = 64, h = 32, w = 32, f = 2;
        std::vector<double> x(c * h * w), out_s(c * h * f * w * f), out_p(out_s.size());
        fill(x, rng);
        Row r{"upsample_nearest x2 64ch 32x32"};
        r.serial_ms =
            time_ms([&] { kernels::serial::upsample_forward(x.data(), out_s.data(), c, h, w, f); }, 20);
        r.omp_ms =
            time_ms([&] { kernels::omp::upsample_forward(x.data(), out_p.data(), c, h, w, f); }, 20);
        r.match = std::memcmp(out_s.data(), out_p.data(), out_s.size() * 8) == 0;
        rows.push_back(r);
    }

    std::printf("%-34s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");
    bool all_match = true;
    for (const Row& r : rows) {
        print_row(r);
        all_match = all_match && r.match;
    }
    return all_match ? 0 : 1;
}
