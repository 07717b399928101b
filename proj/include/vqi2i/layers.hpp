#pragma once

#include <string>

#include "vqi2i/adam.hpp"
#include "vqi2i/tensor.hpp"

namespace vqi2i {

// Weights initialize uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)],
// biases zero; both register with the given Params under name.w / name.b.

struct Conv {
    Tensor w, b;
    int stride = 1, pad = 0;
    void init(Params& ps, const std::string& name, int cin, int cout, int ksize, int stride,
              int pad, Rng& rng);
    Tensor operator()(const Tensor& x) const;
};

struct Linear {
    Tensor w, b;  // w is [out,in]
    void init(Params& ps, const std::string& name, int in, int out, Rng& rng);
    Tensor operator()(const Tensor& x) const;  // [in] -> [out]
    Tensor matrix(const Tensor& x) const;      // [t,in] -> [t,out]
};

}  // namespace vqi2i
