#include "vqi2i/layers.hpp"

#include <cmath>

#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"

namespace vqi2i {

void Conv::init(Params& ps, const std::string& name, int cin, int cout, int ksize, int stride,
                int pad, Rng& rng) {
    const double lim = std::sqrt(1.0 / (static_cast<double>(cin) * ksize * ksize));
    w = Tensor::uniform({cout, cin, ksize, ksize}, -lim, lim, rng);
    b = Tensor::zeros({cout});
    this->stride = stride;
    this->pad = pad;
    ps.add(name + ".w", w);
    ps.add(name + ".b", b);
}

Tensor Conv::operator()(const Tensor& x) const {
    Tensor y = ops::conv2d(x, w, stride, pad);
    return ops::add(y, ops::reshape(b, {b.dim(0), 1, 1}));
}

void Linear::init(Params& ps, const std::string& name, int in, int out, Rng& rng) {
    const double lim = std::sqrt(1.0 / static_cast<double>(in));
    w = Tensor::uniform({out, in}, -lim, lim, rng);
    b = Tensor::zeros({out});
    ps.add(name + ".w", w);
    ps.add(name + ".b", b);
}

Tensor Linear::operator()(const Tensor& x) const {
    require(x.defined() && x.rank() == 1, "linear: expected a rank-1 input");
    Tensor y = ops::matmul(ops::reshape(x, {1, x.dim(0)}), w, false, true);
    y = ops::add(y, b);
    return ops::reshape(y, {w.dim(0)});
}

Tensor Linear::matrix(const Tensor& x) const {
    require(x.defined() && x.rank() == 2, "linear: expected a rank-2 input");
    return ops::add(ops::matmul(x, w, false, true), b);
}

}  // namespace vqi2i
