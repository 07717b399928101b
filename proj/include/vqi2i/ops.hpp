#pragma once

#include <vector>

#include "vqi2i/tensor.hpp"

// Differentiable ops over Tensor. Every op validates shapes, checks its
// outputs for NaN/Inf (hard error naming the op), and records a backward
// node on the active tape when grad mode is on and an input requires grad.

namespace vqi2i::ops {

// Elementwise with numpy-style broadcasting (trailing axes aligned; each
// axis pair must match or one side must be 1).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_const(const Tensor& a, double c);
Tensor scale(const Tensor& a, double s);

// a is [m,k] (or [k,m] when ta), b is [k,n] (or [n,k] when tb); result [m,n].
Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);

// x is [cin,h,w], w is [cout,cin,kh,kw]; zero padding, no bias.
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);

// Nearest-neighbour upsample of [c,h,w] by an integer factor.
Tensor upsample_nearest(const Tensor& x, int factor);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor tanh(const Tensor& x);
// Composed as 0.5*(tanh(x/2)+1) so it reuses existing backward rules.
Tensor sigmoid(const Tensor& x);

// Both normalize along the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// Full reductions to a scalar.
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x);

// Normalizes each dim-0 slice over its trailing elements:
// (x - mu) / sqrt(var + eps), biased variance. Serves as instance norm on
// [c,h,w] feature maps and as layer norm on [t,e] token matrices.
Tensor instance_norm(const Tensor& x, double eps = 1e-5);

// Mean over the trailing axes of each dim-0 slice: [c, ...] -> [c].
Tensor channel_mean(const Tensor& x);

Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, int start, int len);
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose2d(const Tensor& x);

// Reverses the last axis (mirror image for [c,h,w]).
Tensor hflip(const Tensor& x);

// Values pass through; gradient flow stops here.
Tensor stop_gradient(const Tensor& x);

// Bitwise copy of values_from; the output's gradient is routed verbatim to
// grads_to, and values_from receives none.
Tensor straight_through(const Tensor& values_from, const Tensor& grads_to);

// Row gather: table is [k,d], result is [n,d]; backward scatter-adds.
Tensor embedding(const Tensor& table, const std::vector<int>& indices);

// x is [..., k]; picks x[r, indices[r]] for each leading row -> [n].
Tensor select_lastaxis(const Tensor& x, const std::vector<int>& indices);

}  // namespace vqi2i::ops
