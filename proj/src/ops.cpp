#include "vqi2i/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vqi2i/error.hpp"
#include "vqi2i/kernels.hpp"

namespace vqi2i::ops {
namespace {

using StoragePtr = std::shared_ptr<detail::Storage>;

void check_values(const char* op, const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) failf("op '%s' produced a non-finite value", op);
}

void check_grad(const char* op, const std::vector<double>& g) {
    for (double x : g)
        if (!std::isfinite(x)) failf("backward of op '%s' produced a non-finite gradient", op);
}

std::vector<double>& ensure_grad(const StoragePtr& st) {
    if (st->grad.empty()) st->grad.assign(st->val.size(), 0.0);
    return st->grad;
}

bool want_grad(std::initializer_list<const Tensor*> inputs) {
    if (!recording()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// Broadcast layout: strides per output axis, 0 where an input repeats.
struct BcPlan {
    Shape out;
    std::vector<int64_t> sa, sb;
    int64_t n = 1;
    bool same = false;
};

BcPlan broadcast_plan(const char* op, const Shape& a, const Shape& b) {
    const int ra = static_cast<int>(a.size());
    const int rb = static_cast<int>(b.size());
    const int r = std::max(ra, rb);
    BcPlan p;
    p.out.resize(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        const int da = i < r - ra ? 1 : a[static_cast<size_t>(i - (r - ra))];
        const int db = i < r - rb ? 1 : b[static_cast<size_t>(i - (r - rb))];
        if (da != db && da != 1 && db != 1)
            failf("op '%s': shapes %s and %s do not broadcast", op, shape_str(a).c_str(),
                  shape_str(b).c_str());
        p.out[static_cast<size_t>(i)] = std::max(da, db);
    }
    p.sa.assign(static_cast<size_t>(r), 0);
    p.sb.assign(static_cast<size_t>(r), 0);
    int64_t stride = 1;
    for (int i = ra - 1; i >= 0; --i) {
        const size_t oi = static_cast<size_t>(i + (r - ra));
        if (!(a[static_cast<size_t>(i)] == 1 && p.out[oi] != 1)) p.sa[oi] = stride;
        stride *= a[static_cast<size_t>(i)];
    }
    stride = 1;
    for (int i = rb - 1; i >= 0; --i) {
        const size_t oi = static_cast<size_t>(i + (r - rb));
        if (!(b[static_cast<size_t>(i)] == 1 && p.out[oi] != 1)) p.sb[oi] = stride;
        stride *= b[static_cast<size_t>(i)];
    }
    p.n = shape_numel(p.out);
    p.same = (a == b);
    return p;
}

// Visits output elements in row-major order with matching input offsets.
template <typename F>
void for_each_bc(const BcPlan& p, F&& fn) {
    const int r = static_cast<int>(p.out.size());
    std::vector<int> idx(static_cast<size_t>(r), 0);
    int64_t ia = 0, ib = 0;
    for (int64_t io = 0; io < p.n; ++io) {
        fn(io, ia, ib);
        for (int ax = r - 1; ax >= 0; --ax) {
            const size_t u = static_cast<size_t>(ax);
            ++idx[u];
            ia += p.sa[u];
            ib += p.sb[u];
            if (idx[u] < p.out[u]) break;
            idx[u] = 0;
            ia -= p.sa[u] * p.out[u];
            ib -= p.sb[u] * p.out[u];
        }
    }
}

enum class Bin { Add, Sub, Mul };

Tensor binary_ew(const char* name, Bin kind, const Tensor& a, const Tensor& b) {
    require(a.defined() && b.defined(), std::string(name) + ": undefined input");
    const BcPlan p = broadcast_plan(name, a.shape(), b.shape());
    Tensor out = Tensor::zeros(p.out);
    {
        const double* av = a.data();
        const double* bv = b.data();
        double* ov = out.data();
        auto apply = [&](int64_t io, int64_t ia, int64_t ib) {
            const double x = av[ia], y = bv[ib];
            ov[io] = kind == Bin::Add ? x + y : kind == Bin::Sub ? x - y : x * y;
        };
        if (p.same)
            for (int64_t i = 0; i < p.n; ++i) apply(i, i, i);
        else
            for_each_bc(p, apply);
    }
    check_values(name, out.values());
    const bool ga = a.requires_grad(), gb = b.requires_grad();
    if (recording() && (ga || gb)) {
        out.set_requires_grad(true);
        StoragePtr sa = a.storage(), sb = b.storage(), so = out.storage();
        active_tape()->record(name, [name, kind, p, sa, sb, so, ga, gb]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            if (ga) {
                std::vector<double>& g = ensure_grad(sa);
                const std::vector<double>& bv = sb->val;
                auto acc = [&](int64_t io, int64_t ia, int64_t ib) {
                    g[ia] += kind == Bin::Mul ? gy[io] * bv[ib] : gy[io];
                };
                if (p.same)
                    for (int64_t i = 0; i < p.n; ++i) acc(i, i, i);
                else
                    for_each_bc(p, acc);
                check_grad(name, g);
            }
            if (gb) {
                std::vector<double>& g = ensure_grad(sb);
                const std::vector<double>& av = sa->val;
                auto acc = [&](int64_t io, int64_t ia, int64_t ib) {
                    g[ib] += kind == Bin::Mul ? gy[io] * av[ia]
                                              : (kind == Bin::Sub ? -gy[io] : gy[io]);
                };
                if (p.same)
                    for (int64_t i = 0; i < p.n; ++i) acc(i, i, i);
                else
                    for_each_bc(p, acc);
                check_grad(name, g);
            }
        });
    }
    return out;
}

// Elementwise unary op; dfdx receives (x_i, y_i) so rules can use whichever
// side is cheaper.
template <typename FwdFn, typename GradFn>
Tensor unary_ew(const char* name, const Tensor& x, FwdFn f, GradFn dfdx) {
    require(x.defined(), std::string(name) + ": undefined input");
    Tensor out = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* ov = out.data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) ov[i] = f(xv[i]);
    check_values(name, out.values());
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record(name, [name, sx, so, dfdx]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& gx = ensure_grad(sx);
            const std::vector<double>& xv = sx->val;
            const std::vector<double>& yv = so->val;
            for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * dfdx(xv[i], yv[i]);
            check_grad(name, gx);
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_ew("add", Bin::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_ew("sub", Bin::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_ew("mul", Bin::Mul, a, b); }

Tensor add_const(const Tensor& a, double c) {
    return unary_ew(
        "add_const", a, [c](double x) { return x + c; },
        [](double, double) { return 1.0; });
}

Tensor scale(const Tensor& a, double s) {
    return unary_ew(
        "scale", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& x) {
    return unary_ew(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary_ew(
        "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& x) {
    return unary_ew(
        "tanh", x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
    return add_const(scale(tanh(scale(x, 0.5)), 0.5), 0.5);
}

Tensor log(const Tensor& x) {
    return unary_ew(
        "log", x, [](double v) { return std::log(v); },
        [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
    return unary_ew(
        "exp", x, [](double v) { return std::exp(v); },
        [](double, double y) { return y; });
}

Tensor abs(const Tensor& x) {
    return unary_ew(
        "abs", x, [](double v) { return std::fabs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
    return unary_ew(
        "square", x, [](double v) { return v * v; },
        [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    require(lo <= hi, "clamp: lo must not exceed hi");
    return unary_ew(
        "clamp", x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    require(a.defined() && b.defined(), "matmul: undefined input");
    require(a.rank() == 2 && b.rank() == 2, "matmul: inputs must be rank 2");
    const int m = ta ? a.dim(1) : a.dim(0);
    const int k = ta ? a.dim(0) : a.dim(1);
    const int kb = tb ? b.dim(1) : b.dim(0);
    const int n = tb ? b.dim(0) : b.dim(1);
    require(k == kb, "matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    kernels::matmul(a.data(), b.data(), out.data(), m, k, n, ta, tb);
    check_values("matmul", out.values());
    const bool ga = a.requires_grad(), gb = b.requires_grad();
    if (recording() && (ga || gb)) {
        out.set_requires_grad(true);
        StoragePtr sa = a.storage(), sb = b.storage(), so = out.storage();
        active_tape()->record("matmul", [sa, sb, so, m, k, n, ta, tb, ga, gb]() {
            if (so->grad.empty()) return;
            const double* gy = so->grad.data();
            if (ga) {
                std::vector<double>& g = ensure_grad(sa);
                if (!ta)
                    kernels::matmul(gy, sb->val.data(), g.data(), m, n, k, false, !tb);
                else
                    kernels::matmul(sb->val.data(), gy, g.data(), k, n, m, tb, true);
                check_grad("matmul", g);
            }
            if (gb) {
                std::vector<double>& g = ensure_grad(sb);
                if (!tb)
                    kernels::matmul(sa->val.data(), gy, g.data(), k, m, n, !ta, false);
                else
                    kernels::matmul(gy, sa->val.data(), g.data(), n, m, k, true, ta);
                check_grad("matmul", g);
            }
        });
    }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
    require(x.defined() && w.defined(), "conv2d: undefined input");
    require(x.rank() == 3, "conv2d: input must be [cin,h,w], got " + shape_str(x.shape()));
    require(w.rank() == 4, "conv2d: weight must be [cout,cin,kh,kw], got " + shape_str(w.shape()));
    require(x.dim(0) == w.dim(1), "conv2d: channel mismatch, input " + shape_str(x.shape()) +
                                      " vs weight " + shape_str(w.shape()));
    require(stride >= 1 && pad >= 0, "conv2d: stride must be >= 1 and pad >= 0");
    kernels::Conv2dDims d;
    d.cin = x.dim(0);
    d.h = x.dim(1);
    d.w = x.dim(2);
    d.cout = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    require(d.h + 2 * pad >= d.kh && d.w + 2 * pad >= d.kw,
            "conv2d: kernel larger than padded input");
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    Tensor out = Tensor::zeros({d.cout, d.ho, d.wo});
    kernels::conv2d_forward(x.data(), w.data(), out.data(), d);
    check_values("conv2d", out.values());
    const bool gx = x.requires_grad(), gw = w.requires_grad();
    if (recording() && (gx || gw)) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), sw = w.storage(), so = out.storage();
        active_tape()->record("conv2d", [sx, sw, so, d, gx, gw]() {
            if (so->grad.empty()) return;
            const double* gy = so->grad.data();
            if (gx) {
                std::vector<double>& g = ensure_grad(sx);
                kernels::conv2d_backward_input(gy, sw->val.data(), g.data(), d);
                check_grad("conv2d", g);
            }
            if (gw) {
                std::vector<double>& g = ensure_grad(sw);
                kernels::conv2d_backward_weight(gy, sx->val.data(), g.data(), d);
                check_grad("conv2d", g);
            }
        });
    }
    return out;
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    require(x.defined() && x.rank() == 3, "upsample_nearest: input must be [c,h,w]");
    require(factor >= 1, "upsample_nearest: factor must be >= 1");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out = Tensor::zeros({c, h * factor, w * factor});
    kernels::upsample_forward(x.data(), out.data(), c, h, w, factor);
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("upsample_nearest", [sx, so, c, h, w, factor]() {
            if (so->grad.empty()) return;
            std::vector<double>& g = ensure_grad(sx);
            kernels::upsample_backward(so->grad.data(), g.data(), c, h, w, factor);
            check_grad("upsample_nearest", g);
        });
    }
    return out;
}

Tensor softmax(const Tensor& x) {
    require(x.defined() && x.rank() >= 1, "softmax: undefined input");
    const int k = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / k;
    Tensor out = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* ov = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xv + r * k;
        double* yr = ov + r * k;
        double m = xr[0];
        for (int j = 1; j < k; ++j) m = std::max(m, xr[j]);
        double s = 0.0;
        for (int j = 0; j < k; ++j) {
            yr[j] = std::exp(xr[j] - m);
            s += yr[j];
        }
        for (int j = 0; j < k; ++j) yr[j] /= s;
    }
    check_values("softmax", out.values());
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("softmax", [sx, so, k, rows]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            const std::vector<double>& yv = so->val;
            std::vector<double>& gx = ensure_grad(sx);
            for (int64_t r = 0; r < rows; ++r) {
                const double* gyr = gy.data() + r * k;
                const double* yr = yv.data() + r * k;
                double dot = 0.0;
                for (int j = 0; j < k; ++j) dot += gyr[j] * yr[j];
                double* gxr = gx.data() + r * k;
                for (int j = 0; j < k; ++j) gxr[j] += yr[j] * (gyr[j] - dot);
            }
            check_grad("softmax", gx);
        });
    }
    return out;
}

Tensor log_softmax(const Tensor& x) {
    require(x.defined() && x.rank() >= 1, "log_softmax: undefined input");
    const int k = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / k;
    Tensor out = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* ov = out.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = xv + r * k;
        double* yr = ov + r * k;
        double m = xr[0];
        for (int j = 1; j < k; ++j) m = std::max(m, xr[j]);
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += std::exp(xr[j] - m);
        const double lse = m + std::log(s);
        for (int j = 0; j < k; ++j) yr[j] = xr[j] - lse;
    }
    check_values("log_softmax", out.values());
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("log_softmax", [sx, so, k, rows]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            const std::vector<double>& yv = so->val;
            std::vector<double>& gx = ensure_grad(sx);
            for (int64_t r = 0; r < rows; ++r) {
                const double* gyr = gy.data() + r * k;
                const double* yr = yv.data() + r * k;
                double tot = 0.0;
                for (int j = 0; j < k; ++j) tot += gyr[j];
                double* gxr = gx.data() + r * k;
                for (int j = 0; j < k; ++j) gxr[j] += gyr[j] - std::exp(yr[j]) * tot;
            }
            check_grad("log_softmax", gx);
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    require(x.defined(), "mean: undefined input");
    const int64_t n = x.numel();
    double s = 0.0;
    const double* xv = x.data();
    for (int64_t i = 0; i < n; ++i) s += xv[i];
    Tensor out = Tensor::scalar(s / static_cast<double>(n));
    check_values("mean", out.values());
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("mean", [sx, so, n]() {
            if (so->grad.empty()) return;
            const double g = so->grad[0] / static_cast<double>(n);
            std::vector<double>& gx = ensure_grad(sx);
            for (int64_t i = 0; i < n; ++i) gx[i] += g;
            check_grad("mean", gx);
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    require(x.defined(), "sum: undefined input");
    const int64_t n = x.numel();
    double s = 0.0;
    const double* xv = x.data();
    for (int64_t i = 0; i < n; ++i) s += xv[i];
    Tensor out = Tensor::scalar(s);
    check_values("sum", out.values());
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("sum", [sx, so, n]() {
            if (so->grad.empty()) return;
            const double g = so->grad[0];
            std::vector<double>& gx = ensure_grad(sx);
            for (int64_t i = 0; i < n; ++i) gx[i] += g;
            check_grad("sum", gx);
        });
    }
    return out;
}

Tensor instance_norm(const Tensor& x, double eps) {
    require(x.defined() && x.rank() >= 2, "instance_norm: input must have rank >= 2");
    require(eps > 0.0, "instance_norm: eps must be positive");
    const int c = x.dim(0);
    const int64_t m = x.numel() / c;
    Tensor out = Tensor::zeros(x.shape());
    std::vector<double> inv_std(static_cast<size_t>(c));
    const double* xv = x.data();
    double* ov = out.data();
    for (int i = 0; i < c; ++i) {
        const double* xs = xv + i * m;
        double* ys = ov + i * m;
        double mu = 0.0;
        for (int64_t j = 0; j < m; ++j) mu += xs[j];
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t j = 0; j < m; ++j) {
            const double d = xs[j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(m);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(i)] = inv;
        for (int64_t j = 0; j < m; ++j) ys[j] = (xs[j] - mu) * inv;
    }
    check_values("instance_norm", out.values());
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("instance_norm", [sx, so, c, m, inv_std]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            const std::vector<double>& yv = so->val;
            std::vector<double>& gx = ensure_grad(sx);
            for (int i = 0; i < c; ++i) {
                const double* gys = gy.data() + i * m;
                const double* ys = yv.data() + i * m;
                double m1 = 0.0, m2 = 0.0;
                for (int64_t j = 0; j < m; ++j) {
                    m1 += gys[j];
                    m2 += gys[j] * ys[j];
                }
                m1 /= static_cast<double>(m);
                m2 /= static_cast<double>(m);
                const double inv = inv_std[static_cast<size_t>(i)];
                double* gxs = gx.data() + i * m;
                for (int64_t j = 0; j < m; ++j) gxs[j] += inv * (gys[j] - m1 - ys[j] * m2);
            }
            check_grad("instance_norm", gx);
        });
    }
    return out;
}

Tensor channel_mean(const Tensor& x) {
    require(x.defined() && x.rank() >= 2, "channel_mean: input must have rank >= 2");
    const int c = x.dim(0);
    const int64_t m = x.numel() / c;
    Tensor out = Tensor::zeros({c});
    const double* xv = x.data();
    double* ov = out.data();
    for (int i = 0; i < c; ++i) {
        double s = 0.0;
        const double* xs = xv + i * m;
        for (int64_t j = 0; j < m; ++j) s += xs[j];
        ov[i] = s / static_cast<double>(m);
    }
    check_values("channel_mean", out.values());
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("channel_mean", [sx, so, c, m]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& gx = ensure_grad(sx);
            for (int i = 0; i < c; ++i) {
                const double g = gy[static_cast<size_t>(i)] / static_cast<double>(m);
                double* gxs = gx.data() + i * m;
                for (int64_t j = 0; j < m; ++j) gxs[j] += g;
            }
            check_grad("channel_mean", gx);
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    require(!xs.empty(), "concat: needs at least one input");
    const Tensor& x0 = xs[0];
    require(x0.defined(), "concat: undefined input");
    const int rank = x0.rank();
    require(axis >= 0 && axis < rank, "concat: axis out of range");
    int axis_total = 0;
    for (const Tensor& t : xs) {
        require(t.defined() && t.rank() == rank, "concat: inputs must share rank");
        for (int i = 0; i < rank; ++i)
            require(i == axis || t.dim(i) == x0.dim(i),
                    "concat: non-axis extents differ, " + shape_str(x0.shape()) + " vs " +
                        shape_str(t.shape()));
        axis_total += t.dim(axis);
    }
    Shape out_shape = x0.shape();
    out_shape[static_cast<size_t>(axis)] = axis_total;
    int64_t outer = 1, tail = 1;
    for (int i = 0; i < axis; ++i) outer *= x0.dim(i);
    for (int i = axis + 1; i < rank; ++i) tail *= x0.dim(i);
    Tensor out = Tensor::zeros(out_shape);
    double* ov = out.data();
    const int64_t out_block = static_cast<int64_t>(axis_total) * tail;
    for (int64_t o = 0; o < outer; ++o) {
        int64_t pos = 0;
        for (const Tensor& t : xs) {
            const int64_t blk = static_cast<int64_t>(t.dim(axis)) * tail;
            std::memcpy(ov + o * out_block + pos, t.data() + o * blk,
                        static_cast<size_t>(blk) * sizeof(double));
            pos += blk;
        }
    }
    bool any = false;
    for (const Tensor& t : xs) any = any || t.requires_grad();
    if (recording() && any) {
        out.set_requires_grad(true);
        std::vector<StoragePtr> ins;
        ins.reserve(xs.size());
        for (const Tensor& t : xs) ins.push_back(t.storage());
        StoragePtr so = out.storage();
        active_tape()->record("concat", [ins, so, outer, tail, out_block, axis]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            int64_t pos = 0;
            for (const StoragePtr& st : ins) {
                const int64_t blk =
                    static_cast<int64_t>(st->shape[static_cast<size_t>(axis)]) * tail;
                if (st->requires_grad) {
                    std::vector<double>& g = ensure_grad(st);
                    for (int64_t o = 0; o < outer; ++o) {
                        const double* src = gy.data() + o * out_block + pos;
                        double* dst = g.data() + o * blk;
                        for (int64_t i = 0; i < blk; ++i) dst[i] += src[i];
                    }
                    check_grad("concat", g);
                }
                pos += blk;
            }
        });
    }
    return out;
}

Tensor slice(const Tensor& x, int axis, int start, int len) {
    require(x.defined(), "slice: undefined input");
    const int rank = x.rank();
    require(axis >= 0 && axis < rank, "slice: axis out of range");
    require(start >= 0 && len > 0 && start + len <= x.dim(axis),
            "slice: range out of bounds for " + shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape[static_cast<size_t>(axis)] = len;
    int64_t outer = 1, tail = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < rank; ++i) tail *= x.dim(i);
    const int64_t in_block = static_cast<int64_t>(x.dim(axis)) * tail;
    const int64_t out_block = static_cast<int64_t>(len) * tail;
    Tensor out = Tensor::zeros(out_shape);
    double* ov = out.data();
    const double* xv = x.data();
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(ov + o * out_block, xv + o * in_block + start * tail,
                    static_cast<size_t>(out_block) * sizeof(double));
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("slice", [sx, so, outer, tail, in_block, out_block, start]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& gx = ensure_grad(sx);
            for (int64_t o = 0; o < outer; ++o) {
                const double* src = gy.data() + o * out_block;
                double* dst = gx.data() + o * in_block + start * tail;
                for (int64_t i = 0; i < out_block; ++i) dst[i] += src[i];
            }
            check_grad("slice", gx);
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(x.defined(), "reshape: undefined input");
    require(shape_numel(shape) == x.numel(), "reshape: element count changes from " +
                                                 shape_str(x.shape()) + " to " + shape_str(shape));
    Tensor out = Tensor::from(std::move(shape), x.values());
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("reshape", [sx, so]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& gx = ensure_grad(sx);
            for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
            check_grad("reshape", gx);
        });
    }
    return out;
}

Tensor transpose2d(const Tensor& x) {
    require(x.defined() && x.rank() == 2, "transpose2d: input must be rank 2");
    const int r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({c, r});
    const double* xv = x.data();
    double* ov = out.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) ov[static_cast<int64_t>(j) * r + i] = xv[static_cast<int64_t>(i) * c + j];
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("transpose2d", [sx, so, r, c]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& gx = ensure_grad(sx);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    gx[static_cast<int64_t>(i) * c + j] += gy[static_cast<int64_t>(j) * r + i];
            check_grad("transpose2d", gx);
        });
    }
    return out;
}

Tensor hflip(const Tensor& x) {
    require(x.defined() && x.rank() >= 1, "hflip: undefined input");
    const int w = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / w;
    Tensor out = Tensor::zeros(x.shape());
    const double* xv = x.data();
    double* ov = out.data();
    for (int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < w; ++j) ov[r * w + (w - 1 - j)] = xv[r * w + j];
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("hflip", [sx, so, w, rows]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& gx = ensure_grad(sx);
            for (int64_t r = 0; r < rows; ++r)
                for (int j = 0; j < w; ++j) gx[r * w + j] += gy[r * w + (w - 1 - j)];
            check_grad("hflip", gx);
        });
    }
    return out;
}

Tensor stop_gradient(const Tensor& x) {
    require(x.defined(), "stop_gradient: undefined input");
    return Tensor::from(x.shape(), x.values());
}

Tensor straight_through(const Tensor& values_from, const Tensor& grads_to) {
    require(values_from.defined() && grads_to.defined(), "straight_through: undefined input");
    require(values_from.shape() == grads_to.shape(),
            "straight_through: shapes differ, " + shape_str(values_from.shape()) + " vs " +
                shape_str(grads_to.shape()));
    Tensor out = Tensor::from(values_from.shape(), values_from.values());
    if (want_grad({&grads_to})) {
        out.set_requires_grad(true);
        StoragePtr sg = grads_to.storage(), so = out.storage();
        active_tape()->record("straight_through", [sg, so]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& g = ensure_grad(sg);
            for (size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
            check_grad("straight_through", g);
        });
    }
    return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& indices) {
    require(table.defined() && table.rank() == 2, "embedding: table must be [k,d]");
    require(!indices.empty(), "embedding: empty index list");
    const int k = table.dim(0), d = table.dim(1);
    for (int idx : indices)
        require(idx >= 0 && idx < k, "embedding: index out of range");
    const int n = static_cast<int>(indices.size());
    Tensor out = Tensor::zeros({n, d});
    const double* tv = table.data();
    double* ov = out.data();
    for (int r = 0; r < n; ++r)
        std::memcpy(ov + static_cast<int64_t>(r) * d,
                    tv + static_cast<int64_t>(indices[static_cast<size_t>(r)]) * d,
                    static_cast<size_t>(d) * sizeof(double));
    if (want_grad({&table})) {
        out.set_requires_grad(true);
        StoragePtr st = table.storage(), so = out.storage();
        active_tape()->record("embedding", [st, so, indices, n, d]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& g = ensure_grad(st);
            for (int r = 0; r < n; ++r) {
                double* dst = g.data() + static_cast<int64_t>(indices[static_cast<size_t>(r)]) * d;
                const double* src = gy.data() + static_cast<int64_t>(r) * d;
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
            check_grad("embedding", g);
        });
    }
    return out;
}

Tensor select_lastaxis(const Tensor& x, const std::vector<int>& indices) {
    require(x.defined() && x.rank() >= 1, "select_lastaxis: undefined input");
    const int k = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / k;
    require(static_cast<int64_t>(indices.size()) == rows,
            "select_lastaxis: index count must match leading rows");
    for (int idx : indices)
        require(idx >= 0 && idx < k, "select_lastaxis: index out of range");
    Shape out_shape;
    if (x.rank() == 1)
        out_shape = {1};
    else
        out_shape.assign(x.shape().begin(), x.shape().end() - 1);
    Tensor out = Tensor::zeros(out_shape);
    const double* xv = x.data();
    double* ov = out.data();
    for (int64_t r = 0; r < rows; ++r) ov[r] = xv[r * k + indices[static_cast<size_t>(r)]];
    if (want_grad({&x})) {
        out.set_requires_grad(true);
        StoragePtr sx = x.storage(), so = out.storage();
        active_tape()->record("select_lastaxis", [sx, so, indices, k, rows]() {
            if (so->grad.empty()) return;
            const std::vector<double>& gy = so->grad;
            std::vector<double>& gx = ensure_grad(sx);
            for (int64_t r = 0; r < rows; ++r)
                gx[r * k + indices[static_cast<size_t>(r)]] += gy[r];
            check_grad("select_lastaxis", gx);
        });
    }
    return out;
}

}  // namespace vqi2i::ops
