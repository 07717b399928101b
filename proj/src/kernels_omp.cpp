#include <algorithm>

#include "vqi2i/kernels.hpp"

// OpenMP kernels. Parallelism is only ever over disjoint output slices and
// every element keeps the serial accumulation order, so results match the
// serial reference bitwise for any thread count.

namespace vqi2i::kernels {
namespace {

inline int floor_div(int a, int b) {
    int q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}
inline int ceil_div(int a, int b) { return -floor_div(-a, b); }

}  // namespace

namespace omp {

void matmul(const double* a, const double* b, double* c, int m, int k, int n,
            bool ta, bool tb) {
    if (!ta && !tb) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            double* ci = c + static_cast<int64_t>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
                double av = a[static_cast<int64_t>(i) * k + kk];
                const double* bk = b + static_cast<int64_t>(kk) * n;
                for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
            }
        }
    } else if (ta && !tb) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            double* ci = c + static_cast<int64_t>(i) * n;
            for (int kk = 0; kk < k; ++kk) {
                double av = a[static_cast<int64_t>(kk) * m + i];
                const double* bk = b + static_cast<int64_t>(kk) * n;
                for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
            }
        }
    } else if (!ta && tb) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            const double* ai = a + static_cast<int64_t>(i) * k;
            double* ci = c + static_cast<int64_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                const double* bj = b + static_cast<int64_t>(j) * k;
                double acc = 0.0;
                for (int kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
                ci[j] += acc;
            }
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            double* ci = c + static_cast<int64_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int kk = 0; kk < k; ++kk)
                    acc += a[static_cast<int64_t>(kk) * m + i] * b[static_cast<int64_t>(j) * k + kk];
                ci[j] += acc;
            }
        }
    }
}

void conv2d_forward(const double* x, const double* w, double* y, const Conv2dDims& d) {
    const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;
    const int64_t out_plane = static_cast<int64_t>(d.ho) * d.wo;
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < d.cout; ++oc) {
        double* yc = y + oc * out_plane;
        for (int64_t i = 0; i < out_plane; ++i) yc[i] = 0.0;
        for (int ic = 0; ic < d.cin; ++ic) {
            const double* xc = x + ic * in_plane;
            const double* wb = w + ((static_cast<int64_t>(oc) * d.cin + ic) * d.kh) * d.kw;
            for (int kh = 0; kh < d.kh; ++kh) {
                for (int kw = 0; kw < d.kw; ++kw) {
                    const double wv = wb[kh * d.kw + kw];
                    const int ox_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
                    const int ox_hi = std::min(d.wo - 1, floor_div(d.w - 1 + d.pad - kw, d.stride));
                    for (int oy = 0; oy < d.ho; ++oy) {
                        const int iy = oy * d.stride + kh - d.pad;
                        if (iy < 0 || iy >= d.h) continue;
                        const double* xrow = xc + static_cast<int64_t>(iy) * d.w + kw - d.pad;
                        double* yrow = yc + static_cast<int64_t>(oy) * d.wo;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox)
                            yrow[ox] += wv * xrow[ox * d.stride];
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const double* dy, const double* w, double* dx, const Conv2dDims& d) {
    const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;
    const int64_t out_plane = static_cast<int64_t>(d.ho) * d.wo;
#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < d.cin; ++ic) {
        double* dxc = dx + ic * in_plane;
        for (int oc = 0; oc < d.cout; ++oc) {
            const double* dyc = dy + oc * out_plane;
            const double* wb = w + ((static_cast<int64_t>(oc) * d.cin + ic) * d.kh) * d.kw;
            for (int kh = 0; kh < d.kh; ++kh) {
                for (int kw = 0; kw < d.kw; ++kw) {
                    const double wv = wb[kh * d.kw + kw];
                    const int ox_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
                    const int ox_hi = std::min(d.wo - 1, floor_div(d.w - 1 + d.pad - kw, d.stride));
                    for (int oy = 0; oy < d.ho; ++oy) {
                        const int iy = oy * d.stride + kh - d.pad;
                        if (iy < 0 || iy >= d.h) continue;
                        double* dxrow = dxc + static_cast<int64_t>(iy) * d.w + kw - d.pad;
                        const double* dyrow = dyc + static_cast<int64_t>(oy) * d.wo;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox)
                            dxrow[ox * d.stride] += wv * dyrow[ox];
                    }
                }
            }
        }
    }
}

void conv2d_backward_weight(const double* dy, const double* x, double* dw, const Conv2dDims& d) {
    const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;
    const int64_t out_plane = static_cast<int64_t>(d.ho) * d.wo;
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < d.cout; ++oc) {
        const double* dyc = dy + oc * out_plane;
        for (int ic = 0; ic < d.cin; ++ic) {
            const double* xc = x + ic * in_plane;
            double* wb = dw + ((static_cast<int64_t>(oc) * d.cin + ic) * d.kh) * d.kw;
            for (int kh = 0; kh < d.kh; ++kh) {
                for (int kw = 0; kw < d.kw; ++kw) {
                    const int ox_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
                    const int ox_hi = std::min(d.wo - 1, floor_div(d.w - 1 + d.pad - kw, d.stride));
                    double acc = 0.0;
                    for (int oy = 0; oy < d.ho; ++oy) {
                        const int iy = oy * d.stride + kh - d.pad;
                        if (iy < 0 || iy >= d.h) continue;
                        const double* xrow = xc + static_cast<int64_t>(iy) * d.w + kw - d.pad;
                        const double* dyrow = dyc + static_cast<int64_t>(oy) * d.wo;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox)
                            acc += dyrow[ox] * xrow[ox * d.stride];
                    }
                    wb[kh * d.kw + kw] += acc;
                }
            }
        }
    }
}

void upsample_forward(const double* x, double* y, int c, int h, int w, int f) {
    const int ho = h * f, wo = w * f;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double* xc = x + static_cast<int64_t>(ch) * h * w;
        double* yc = y + static_cast<int64_t>(ch) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
            const double* xrow = xc + static_cast<int64_t>(oy / f) * w;
            double* yrow = yc + static_cast<int64_t>(oy) * wo;
            for (int ox = 0; ox < wo; ++ox) yrow[ox] = xrow[ox / f];
        }
    }
}

void upsample_backward(const double* dy, double* dx, int c, int h, int w, int f) {
    const int wo = w * f;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double* dyc = dy + static_cast<int64_t>(ch) * h * f * wo;
        double* dxc = dx + static_cast<int64_t>(ch) * h * w;
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                double acc = 0.0;
                for (int fy = 0; fy < f; ++fy) {
                    const double* dyrow = dyc + static_cast<int64_t>(iy * f + fy) * wo + ix * f;
                    for (int fx = 0; fx < f; ++fx) acc += dyrow[fx];
                }
                dxc[static_cast<int64_t>(iy) * w + ix] += acc;
            }
        }
    }
}

}  // namespace omp

namespace {
bool g_parallel = true;
}

void set_use_parallel(bool enabled) { g_parallel = enabled; }
bool use_parallel() { return g_parallel; }

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool ta, bool tb) {
    g_parallel ? omp::matmul(a, b, c, m, k, n, ta, tb) : serial::matmul(a, b, c, m, k, n, ta, tb);
}
void conv2d_forward(const double* x, const double* w, double* y, const Conv2dDims& d) {
    g_parallel ? omp::conv2d_forward(x, w, y, d) : serial::conv2d_forward(x, w, y, d);
}
void conv2d_backward_input(const double* dy, const double* w, double* dx, const Conv2dDims& d) {
    g_parallel ? omp::conv2d_backward_input(dy, w, dx, d) : serial::conv2d_backward_input(dy, w, dx, d);
}
void conv2d_backward_weight(const double* dy, const double* x, double* dw, const Conv2dDims& d) {
    g_parallel ? omp::conv2d_backward_weight(dy, x, dw, d) : serial::conv2d_backward_weight(dy, x, dw, d);
}
void upsample_forward(const double* x, double* y, int c, int h, int w, int f) {
    g_parallel ? omp::upsample_forward(x, y, c, h, w, f) : serial::upsample_forward(x, y, c, h, w, f);
}
void upsample_backward(const double* dy, double* dx, int c, int h, int w, int f) {
    g_parallel ? omp::upsample_backward(dy, dx, c, h, w, f) : serial::upsample_backward(dy, dx, c, h, w, f);
}

}  // namespace vqi2i::kernels
