#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vqi2i/layers.hpp"
#include "vqi2i/quantizer.hpp"

namespace vqi2i {

enum class Domain { X, Y };
Domain other_domain(Domain d);
const char* domain_name(Domain d);
Domain parse_domain(const std::string& s);  // "x" or "y"

struct NetConfig {
    int image_size = 32;
    int base_channels = 32;
    int downsample_factor = 4;  // content grid is (image_size/f)^2
    int style_dim = 8;
    int num_adain_blocks = 4;
    int disc_depth = 3;
    int codebook_size = 64;
    int code_dim = 64;
    void validate() const;
    int grid_size() const { return image_size / downsample_factor; }
    int num_downs() const;  // log2(downsample_factor)
};

// Per-channel affine on top of instance normalization; gamma and beta are
// rank-1 [channels] vectors.
Tensor adain(const Tensor& x, const Tensor& gamma, const Tensor& beta);

// Shared content encoder: [3,s,s] -> [n_c, s/f, s/f], pre-quantization.
class ContentEncoder {
public:
    void init(Params& ps, const std::string& prefix, const NetConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& image) const;

private:
    NetConfig cfg_;
    Conv stem_;
    std::vector<Conv> downs_;
    Conv head_;
};

// Per-domain style encoder: [3,s,s] -> [style_dim]. No normalization
// layers; normalizing would erase exactly the statistics style captures.
class StyleEncoder {
public:
    void init(Params& ps, const std::string& prefix, const NetConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& image) const;

private:
    NetConfig cfg_;
    std::vector<Conv> downs_;
    Linear fc_;
};

// Per-domain generator: AdaIN residual blocks over the content grid, then
// nearest-upsample + conv stages, tanh output. In uni mode the AdaIN
// affines are learned constants and no style mapper exists.
class Generator {
public:
    void init(Params& ps, const std::string& prefix, const NetConfig& cfg, bool uni, Rng& rng);
    Tensor forward(const Tensor& grid, const Tensor& style) const;
    Tensor forward_uni(const Tensor& grid) const;

    // Vertical bands of near-equal width, one style per band. Normalization
    // statistics stay global, so equal styles reproduce forward() bitwise;
    // band boundaries blur only through the shared upsampling convolutions.
    Tensor forward_bands(const Tensor& grid, const std::vector<Tensor>& styles) const;

    int num_adain_layers() const { return 2 * cfg_.num_adain_blocks; }

private:
    struct Block {
        Conv c1, c2;
    };
    using LayerAffines = std::vector<std::pair<Tensor, Tensor>>;  // per layer (gamma, beta)
    LayerAffines style_params(const Tensor& style) const;
    Tensor run(const Tensor& grid, const std::vector<LayerAffines>& band_params) const;

    NetConfig cfg_;
    bool uni_ = false;
    int channels_ = 0;
    Conv entry_;
    std::vector<Block> blocks_;
    Linear map_trunk_;
    std::vector<Linear> map_heads_;
    std::vector<std::pair<Tensor, Tensor>> static_affine_;  // uni: per-layer raw (gamma-1, beta)
    std::vector<Conv> ups_;
    Conv out_;
};

// Per-domain patch discriminator: stride-2 convs (instance norm from the
// second layer on), 1-channel score map head. Sigmoid lives in the loss.
class Discriminator {
public:
    void init(Params& ps, const std::string& prefix, const NetConfig& cfg, Rng& rng);
    Tensor forward(const Tensor& image) const;

private:
    NetConfig cfg_;
    std::vector<Conv> downs_;
    Conv head_;
};

// The full parameter set of the translation system. gen_params covers the
// content encoder, style encoders, generators, and codebook; disc_params
// covers both discriminators.
struct TranslationModel {
    NetConfig cfg;
    bool uni = false;
    ContentEncoder enc;
    StyleEncoder style_x, style_y;
    Generator gen_x, gen_y;
    Discriminator disc_x, disc_y;
    Codebook codebook;
    Params gen_params;
    Params disc_params;

    void init(const NetConfig& cfg, bool uni, uint64_t seed);
    const StyleEncoder& style_enc(Domain d) const;
    const Generator& gen(Domain d) const;
    const Discriminator& disc(Domain d) const;
};

}  // namespace vqi2i
