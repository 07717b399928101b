#pragma once

#include <string>
#include <vector>

#include "vqi2i/adam.hpp"
#include "vqi2i/layers.hpp"

namespace vqi2i {

struct LmConfig {
    int vocab = 64;    // codebook size
    int context = 64;  // max input length, including the start token
    int layers = 2;
    int heads = 2;
    int width = 64;
    int window = 8;  // sliding window side, in grid cells
    void validate() const;
};

struct SamplerParams {
    double temperature = 10.0;
    int top_k = 2;
};

// Causal next-index model over flattened grids: token + learned positional
// embeddings, pre-norm attention/MLP blocks, logit head. Token id `vocab`
// is the learned start-of-sequence embedding.
class LatentLm {
public:
    void init(Params& ps, const std::string& prefix, const LmConfig& cfg, Rng& rng);
    const LmConfig& config() const { return cfg_; }

    // ids may include the start token id (== vocab); returns [t, vocab].
    Tensor forward(const std::vector<int>& ids) const;

    // Mean over positions of -log p(d_i | d_<i), start-token conditioned.
    Tensor nll(const std::vector<int>& tokens) const;

    // Raw logits for the token following `tokens` (possibly empty).
    std::vector<double> next_logits(const std::vector<int>& tokens) const;

private:
    struct Layer {
        Tensor ln1_g, ln1_b, ln2_g, ln2_b;
        Linear wq, wk, wv, wo, fc1, fc2;
    };
    LmConfig cfg_;
    Tensor tok_emb_;  // [vocab+1, width]
    Tensor pos_emb_;  // [context, width]
    std::vector<Layer> layers_;
    Tensor lnf_g_, lnf_b_;
    Linear head_;
};

// Keep the k largest logits (ties to the lower index), divide by the
// temperature, softmax, and draw by inverse CDF walked in index order.
int sample_next(const std::vector<double>& logits, double temperature, int top_k, Rng& rng);

// The exact distribution sample_next draws from (zeros outside the top k).
std::vector<double> topk_distribution(const std::vector<double>& logits, double temperature,
                                      int top_k);

// Plain softmax of a logit vector (no truncation), for evaluation.
std::vector<double> softmax_vec(const std::vector<double>& logits);

std::vector<int> flatten_rowmajor(const std::vector<std::vector<int>>& rows);
std::vector<std::vector<int>> unflatten_rowmajor(const std::vector<int>& seq, int h, int w);
std::vector<int> hflip_grid(const std::vector<int>& grid, int h, int w);

// Samples every cell whose `known` flag is false, in row-major order, each
// conditioned on the row-major serialization of the clipped window
// rectangle ending at that cell. Known cells are never modified.
void fill_grid(const LatentLm& lm, std::vector<int>& grid, const std::vector<char>& known, int h,
               int w, const SamplerParams& sp, Rng& rng);

std::vector<int> generate_grid(const LatentLm& lm, int h, int w, const SamplerParams& sp,
                               Rng& rng);

// Extension keeps columns [0,w) bitwise; leftward extension is defined as
// hflip -> extend right -> hflip.
std::vector<int> extend_grid_right(const LatentLm& lm, const std::vector<int>& grid, int h, int w,
                                   int extra, const SamplerParams& sp, Rng& rng);
std::vector<int> extend_grid_left(const LatentLm& lm, const std::vector<int>& grid, int h, int w,
                                  int extra, const SamplerParams& sp, Rng& rng);

// Single-sequence Adam training wrapper.
class LmTrainer {
public:
    LmTrainer(LatentLm& lm, Params lm_params, double lr, double beta1 = 0.5,
              double beta2 = 0.999, double eps = 1e-8);
    double step(const std::vector<std::vector<int>>& batch);  // returns mean NLL
    Adam& opt() { return opt_; }

private:
    LatentLm& lm_;
    Adam opt_;
};

}  // namespace vqi2i
