#pragma once

#include <vector>

#include "vqi2i/tensor.hpp"

namespace vqi2i {

// Learnable code table: entries is [k, n_c], each row one code vector.
struct Codebook {
    Tensor entries;
    int k() const { return entries.dim(0); }
    int code_dim() const { return entries.dim(1); }
    static Codebook init(int k, int n_c, Rng& rng);  // uniform in [-1/k, 1/k]
};

// Quantization result for one [n_c,h,w] pre-quantization map.
struct ContentGrid {
    int h = 0, w = 0;
    std::vector<int> indices;  // row-major, h*w entries

    // Values equal the selected codebook rows bitwise. Gradient routes
    // straight through to the encoder output and nowhere else.
    Tensor embedded;

    // Same values via the differentiable gather; gradients reach the
    // codebook. This is the `c` argument for vq_loss.
    Tensor codes;

    // Values equal `embedded` (plus exact zero); gradients reach both the
    // encoder output and the codebook. Used on the self-reconstruction
    // decode path, which is allowed to train the codebook.
    Tensor embedded_with_codebook_grad;

    int at(int y, int x) const { return indices[static_cast<size_t>(y) * w + x]; }
};

// Nearest code per spatial entry by exhaustive scan over all k rows;
// squared-distance ties go to the lowest index.
ContentGrid quantize(const Tensor& c_hat, const Codebook& z);

// Mean over spatial entries of ||sg(c_hat) - c||^2 + ||sg(c) - c_hat||^2.
// Entries: h*w for [n_c,h,w], n for [n,d], 1 for rank-1 input.
Tensor vq_loss(const Tensor& c_hat, const Tensor& c);

// Distinct codes used across all grids, divided by k.
double usage_fraction(const std::vector<const ContentGrid*>& grids, int k);
double usage_fraction(const std::vector<std::vector<int>>& index_grids, int k);

// Values-only embedding of an index grid (no gradients), for decoding
// sampled grids: result is [n_c,h,w].
Tensor embed_indices(const std::vector<int>& indices, int h, int w, const Codebook& z);

}  // namespace vqi2i
