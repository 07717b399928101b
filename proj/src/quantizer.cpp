#include "vqi2i/quantizer.hpp"

#include <set>

#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"

namespace vqi2i {

Codebook Codebook::init(int k, int n_c, Rng& rng) {
    require(k >= 2, "codebook needs at least 2 entries");
    require(n_c >= 1, "code dimension must be >= 1");
    const double lim = 1.0 / static_cast<double>(k);
    Codebook z;
    z.entries = Tensor::uniform({k, n_c}, -lim, lim, rng);
    return z;
}

ContentGrid quantize(const Tensor& c_hat, const Codebook& z) {
    require(c_hat.defined() && c_hat.rank() == 3,
            "quantize: input must be [n_c,h,w], got " + shape_str(c_hat.shape()));
    const int n_c = c_hat.dim(0), h = c_hat.dim(1), w = c_hat.dim(2);
    require(n_c == z.code_dim(), "quantize: code dimension mismatch, map has " +
                                     std::to_string(n_c) + " channels, codebook " +
                                     std::to_string(z.code_dim()));
    const int k = z.k();
    const int64_t cells = static_cast<int64_t>(h) * w;

    ContentGrid grid;
    grid.h = h;
    grid.w = w;
    grid.indices.resize(static_cast<size_t>(cells));
    const double* cv = c_hat.data();
    const double* zv = z.entries.data();
    for (int64_t cell = 0; cell < cells; ++cell) {
        double best = 0.0;
        int best_k = 0;
        for (int j = 0; j < k; ++j) {
            const double* row = zv + static_cast<int64_t>(j) * n_c;
            double d = 0.0;
            for (int c = 0; c < n_c; ++c) {
                const double diff = cv[c * cells + cell] - row[c];
                d += diff * diff;
            }
            if (j == 0 || d < best) {
                best = d;
                best_k = j;
            }
        }
        grid.indices[static_cast<size_t>(cell)] = best_k;
    }

    // [cells, n_c] gather -> [n_c, h, w]; this branch carries the codebook
    // gradient.
    Tensor gathered = ops::embedding(z.entries, grid.indices);
    grid.codes = ops::reshape(ops::transpose2d(gathered), {n_c, h, w});
    grid.embedded = ops::straight_through(grid.codes, c_hat);
    grid.embedded_with_codebook_grad =
        ops::add(grid.embedded, ops::sub(grid.codes, ops::stop_gradient(grid.codes)));
    return grid;
}

Tensor vq_loss(const Tensor& c_hat, const Tensor& c) {
    require(c_hat.defined() && c.defined(), "vq_loss: undefined input");
    require(c_hat.shape() == c.shape(), "vq_loss: shapes differ, " + shape_str(c_hat.shape()) +
                                            " vs " + shape_str(c.shape()));
    int64_t entries = 1;
    if (c_hat.rank() == 3)
        entries = static_cast<int64_t>(c_hat.dim(1)) * c_hat.dim(2);
    else if (c_hat.rank() == 2)
        entries = c_hat.dim(0);
    const double inv = 1.0 / static_cast<double>(entries);
    Tensor codebook_term = ops::sum(ops::square(ops::sub(ops::stop_gradient(c_hat), c)));
    Tensor commit_term = ops::sum(ops::square(ops::sub(c_hat, ops::stop_gradient(c))));
    return ops::add(ops::scale(codebook_term, inv), ops::scale(commit_term, inv));
}

double usage_fraction(const std::vector<const ContentGrid*>& grids, int k) {
    require(!grids.empty(), "usage_fraction: needs at least one grid");
    require(k >= 1, "usage_fraction: codebook size must be >= 1");
    std::set<int> seen;
    for (const ContentGrid* g : grids) seen.insert(g->indices.begin(), g->indices.end());
    return static_cast<double>(seen.size()) / static_cast<double>(k);
}

double usage_fraction(const std::vector<std::vector<int>>& index_grids, int k) {
    require(!index_grids.empty(), "usage_fraction: needs at least one grid");
    require(k >= 1, "usage_fraction: codebook size must be >= 1");
    std::set<int> seen;
    for (const std::vector<int>& g : index_grids) seen.insert(g.begin(), g.end());
    return static_cast<double>(seen.size()) / static_cast<double>(k);
}

Tensor embed_indices(const std::vector<int>& indices, int h, int w, const Codebook& z) {
    require(static_cast<int64_t>(indices.size()) == static_cast<int64_t>(h) * w,
            "embed_indices: index count does not match grid shape");
    const int n_c = z.code_dim();
    const int64_t cells = static_cast<int64_t>(h) * w;
    Tensor out = Tensor::zeros({n_c, h, w});
    double* ov = out.data();
    const double* zv = z.entries.data();
    for (int64_t cell = 0; cell < cells; ++cell) {
        const int idx = indices[static_cast<size_t>(cell)];
        require(idx >= 0 && idx < z.k(), "embed_indices: index out of range");
        for (int c = 0; c < n_c; ++c) ov[c * cells + cell] = zv[static_cast<int64_t>(idx) * n_c + c];
    }
    return out;
}

}  // namespace vqi2i
