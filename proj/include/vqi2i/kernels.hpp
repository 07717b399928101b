#pragma once

#include <cstdint>

namespace vqi2i::kernels {

// Hot inner loops exist twice: a plain serial reference and an OpenMP
// version. Both compute every output element with the same fixed
// accumulation order, so results are bitwise identical for any thread
// count; tests assert that equality on random inputs.

struct Conv2dDims {
    int cin, h, w;        // input
    int cout, kh, kw;     // weights {cout, cin, kh, kw}
    int stride, pad;
    int ho, wo;           // output
};

// C = op(A) * op(B) where op transposes when the flag is set.
// A is {m,k} (or {k,m} if ta), B is {k,n} (or {n,k} if tb), C is {m,n}.
// C is accumulated into (caller zeroes it first).
void matmul(const double* a, const double* b, double* c, int m, int k, int n,
            bool ta, bool tb);

void conv2d_forward(const double* x, const double* w, double* y, const Conv2dDims& d);
void conv2d_backward_input(const double* dy, const double* w, double* dx, const Conv2dDims& d);
void conv2d_backward_weight(const double* dy, const double* x, double* dw, const Conv2dDims& d);

void upsample_forward(const double* x, double* y, int c, int h, int w, int f);
void upsample_backward(const double* dy, double* dx, int c, int h, int w, int f);

// Global switch between the OpenMP kernels (default) and the serial
// reference. Exposed for the equivalence tests and the benchmark.
void set_use_parallel(bool enabled);
bool use_parallel();

namespace serial {
void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool ta, bool tb);
void conv2d_forward(const double* x, const double* w, double* y, const Conv2dDims& d);
void conv2d_backward_input(const double* dy, const double* w, double* dx, const Conv2dDims& d);
void conv2d_backward_weight(const double* dy, const double* x, double* dw, const Conv2dDims& d);
void upsample_forward(const double* x, double* y, int c, int h, int w, int f);
void upsample_backward(const double* dy, double* dx, int c, int h, int w, int f);
}  // namespace serial

namespace omp {
void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool ta, bool tb);
void conv2d_forward(const double* x, const double* w, double* y, const Conv2dDims& d);
void conv2d_backward_input(const double* dy, const double* w, double* dx, const Conv2dDims& d);
void conv2d_backward_weight(const double* dy, const double* x, double* dw, const Conv2dDims& d);
void upsample_forward(const double* x, double* y, int c, int h, int w, int f);
void upsample_backward(const double* dy, double* dx, int c, int h, int w, int f);
}  // namespace omp

}  // namespace vqi2i::kernels
