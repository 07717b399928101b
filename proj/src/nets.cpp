#include "vqi2i/nets.hpp"

#include <algorithm>

#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"

namespace vqi2i {

Domain other_domain(Domain d) { return d == Domain::X ? Domain::Y : Domain::X; }

const char* domain_name(Domain d) { return d == Domain::X ? "x" : "y"; }

Domain parse_domain(const std::string& s) {
    if (s == "x" || s == "X") return Domain::X;
    if (s == "y" || s == "Y") return Domain::Y;
    fail("unknown domain '" + s + "' (expected x or y)");
}

int NetConfig::num_downs() const {
    int f = downsample_factor, n = 0;
    while (f > 1) {
        require(f % 2 == 0, "downsample factor must be a power of two");
        f /= 2;
        ++n;
    }
    return n;
}

void NetConfig::validate() const {
    require(image_size >= 8, "image size must be >= 8");
    require(downsample_factor >= 2, "downsample factor must be >= 2");
    require(image_size % downsample_factor == 0, "image size must be divisible by the factor");
    (void)num_downs();
    require(image_size % 8 == 0, "image size must be divisible by 8 for the style encoder");
    require(image_size % (1 << disc_depth) == 0,
            "image size must be divisible by 2^disc_depth");
    require(base_channels >= 1, "base channels must be >= 1");
    require(style_dim >= 1, "style dimension must be >= 1");
    require(num_adain_blocks >= 1, "need at least one AdaIN block");
    require(disc_depth >= 1, "discriminator depth must be >= 1");
    require(codebook_size >= 2, "codebook size must be >= 2");
    require(code_dim >= 1, "code dimension must be >= 1");
}

namespace {

void check_image(const Tensor& image, int size, const char* who) {
    require(image.defined() && image.rank() == 3 && image.dim(0) == 3 && image.dim(1) == size &&
                image.dim(2) == size,
            std::string(who) + ": expected a [3," + std::to_string(size) + "," +
                std::to_string(size) + "] image, got " +
                (image.defined() ? shape_str(image.shape()) : std::string("undefined")));
}

Tensor channel_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    const int c = x.dim(0);
    return ops::add(ops::mul(x, ops::reshape(gamma, {c, 1, 1})),
                    ops::reshape(beta, {c, 1, 1}));
}

}  // namespace

Tensor adain(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    require(x.defined() && x.rank() == 3, "adain: input must be [c,h,w]");
    require(gamma.defined() && beta.defined() && gamma.rank() == 1 && beta.rank() == 1 &&
                gamma.dim(0) == x.dim(0) && beta.dim(0) == x.dim(0),
            "adain: gamma/beta must be rank-1 of the channel count");
    return channel_affine(ops::instance_norm(x), gamma, beta);
}

void ContentEncoder::init(Params& ps, const std::string& prefix, const NetConfig& cfg, Rng& rng) {
    cfg_ = cfg;
    const int b = cfg.base_channels;
    stem_.init(ps, prefix + ".stem", 3, b, 3, 1, 1, rng);
    int cin = b;
    downs_.resize(static_cast<size_t>(cfg.num_downs()));
    for (size_t i = 0; i < downs_.size(); ++i) {
        const int cout = 2 * b;
        downs_[i].init(ps, prefix + ".down" + std::to_string(i), cin, cout, 4, 2, 1, rng);
        cin = cout;
    }
    head_.init(ps, prefix + ".head", cin, cfg.code_dim, 3, 1, 1, rng);
}

Tensor ContentEncoder::forward(const Tensor& image) const {
    // Fully convolutional: any factor-aligned size works (image completion
    // encodes a smaller top-left patch through the same weights).
    require(image.defined() && image.rank() == 3 && image.dim(0) == 3,
            "encode_content: expected a [3,h,w] image");
    const int f = cfg_.downsample_factor;
    require(image.dim(1) % f == 0 && image.dim(2) % f == 0 && image.dim(1) >= f &&
                image.dim(2) >= f,
            "encode_content: image extents must be positive multiples of the downsample factor");
    Tensor x = ops::leaky_relu(ops::instance_norm(stem_(image)));
    for (const Conv& d : downs_) x = ops::leaky_relu(ops::instance_norm(d(x)));
    return head_(x);
}

void StyleEncoder::init(Params& ps, const std::string& prefix, const NetConfig& cfg, Rng& rng) {
    cfg_ = cfg;
    const int b = cfg.base_channels;
    int cin = 3, cout = b;
    downs_.resize(3);
    for (size_t i = 0; i < downs_.size(); ++i) {
        downs_[i].init(ps, prefix + ".down" + std::to_string(i), cin, cout, 4, 2, 1, rng);
        cin = cout;
        cout = std::min(2 * b, 2 * cout);
    }
    fc_.init(ps, prefix + ".fc", cin, cfg.style_dim, rng);
}

Tensor StyleEncoder::forward(const Tensor& image) const {
    check_image(image, cfg_.image_size, "encode_style");
    Tensor x = image;
    for (const Conv& d : downs_) x = ops::leaky_relu(d(x));
    return fc_(ops::channel_mean(x));
}

void Generator::init(Params& ps, const std::string& prefix, const NetConfig& cfg, bool uni,
                     Rng& rng) {
    cfg_ = cfg;
    uni_ = uni;
    const int b = cfg.base_channels;
    channels_ = 2 * b;
    entry_.init(ps, prefix + ".entry", cfg.code_dim, channels_, 3, 1, 1, rng);
    blocks_.resize(static_cast<size_t>(cfg.num_adain_blocks));
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const std::string bp = prefix + ".block" + std::to_string(i);
        blocks_[i].c1.init(ps, bp + ".c1", channels_, channels_, 3, 1, 1, rng);
        blocks_[i].c2.init(ps, bp + ".c2", channels_, channels_, 3, 1, 1, rng);
    }
    const int layers = num_adain_layers();
    if (!uni) {
        map_trunk_.init(ps, prefix + ".map.trunk", cfg.style_dim, 2 * b, rng);
        map_heads_.resize(static_cast<size_t>(layers));
        for (int l = 0; l < layers; ++l)
            map_heads_[static_cast<size_t>(l)].init(ps, prefix + ".map.head" + std::to_string(l),
                                                    2 * b, 2 * channels_, rng);
    } else {
        static_affine_.resize(static_cast<size_t>(layers));
        for (int l = 0; l < layers; ++l) {
            Tensor g = Tensor::zeros({channels_});
            Tensor be = Tensor::zeros({channels_});
            ps.add(prefix + ".adain" + std::to_string(l) + ".gamma", g);
            ps.add(prefix + ".adain" + std::to_string(l) + ".beta", be);
            static_affine_[static_cast<size_t>(l)] = {g, be};
        }
    }
    int cin = channels_;
    ups_.resize(static_cast<size_t>(cfg.num_downs()));
    for (size_t i = 0; i < ups_.size(); ++i) {
        const int cout = std::max(b, cin / 2);
        ups_[i].init(ps, prefix + ".up" + std::to_string(i), cin, cout, 3, 1, 1, rng);
        cin = cout;
    }
    out_.init(ps, prefix + ".out", cin, 3, 3, 1, 1, rng);
}

Generator::LayerAffines Generator::style_params(const Tensor& style) const {
    require(!uni_, "this generator takes no style input");
    require(style.defined() && style.rank() == 1 && style.dim(0) == cfg_.style_dim,
            "decode: style vector must have length " + std::to_string(cfg_.style_dim));
    Tensor trunk = ops::relu(map_trunk_(style));
    LayerAffines out;
    out.reserve(map_heads_.size());
    for (const Linear& head : map_heads_) {
        Tensor gb = head(trunk);
        Tensor gamma_raw = ops::slice(gb, 0, 0, channels_);
        Tensor beta = ops::slice(gb, 0, channels_, channels_);
        out.emplace_back(ops::add_const(gamma_raw, 1.0), beta);
    }
    return out;
}

Tensor Generator::run(const Tensor& grid, const std::vector<LayerAffines>& band_params) const {
    require(grid.defined() && grid.rank() == 3 && grid.dim(0) == cfg_.code_dim,
            "decode: grid must be [n_c,h,w] with n_c = " + std::to_string(cfg_.code_dim));
    const int w = grid.dim(2);
    const int nbands = static_cast<int>(band_params.size());
    require(nbands >= 1, "decode: needs at least one style band");
    require(nbands <= w, "decode: more bands than grid columns");
    std::vector<int> edges(static_cast<size_t>(nbands) + 1);
    for (int i = 0; i <= nbands; ++i)
        edges[static_cast<size_t>(i)] = static_cast<int>(static_cast<int64_t>(i) * w / nbands);

    // Instance-norm statistics are always global; only the affine varies by
    // band, which keeps equal-style banding bitwise equal to one band.
    auto modulate = [&](const Tensor& t, int layer) {
        Tensor norm = ops::instance_norm(t);
        if (nbands == 1) {
            const auto& gb = band_params[0][static_cast<size_t>(layer)];
            return channel_affine(norm, gb.first, gb.second);
        }
        std::vector<Tensor> parts;
        parts.reserve(static_cast<size_t>(nbands));
        for (int i = 0; i < nbands; ++i) {
            const int lo = edges[static_cast<size_t>(i)];
            const int len = edges[static_cast<size_t>(i) + 1] - lo;
            const auto& gb = band_params[static_cast<size_t>(i)][static_cast<size_t>(layer)];
            parts.push_back(channel_affine(ops::slice(norm, 2, lo, len), gb.first, gb.second));
        }
        return ops::concat(parts, 2);
    };

    Tensor x = entry_(grid);
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const int l1 = static_cast<int>(2 * i), l2 = l1 + 1;
        Tensor t = blocks_[i].c1(x);
        t = ops::relu(modulate(t, l1));
        t = blocks_[i].c2(t);
        t = modulate(t, l2);
        x = ops::add(x, t);
    }
    for (const Conv& up : ups_) x = ops::relu(up(ops::upsample_nearest(x, 2)));
    return ops::tanh(out_(x));
}

Tensor Generator::forward(const Tensor& grid, const Tensor& style) const {
    return run(grid, {style_params(style)});
}

Tensor Generator::forward_bands(const Tensor& grid, const std::vector<Tensor>& styles) const {
    require(!styles.empty(), "decode: needs at least one style");
    std::vector<LayerAffines> bands;
    bands.reserve(styles.size());
    for (const Tensor& s : styles) bands.push_back(style_params(s));
    return run(grid, bands);
}

Tensor Generator::forward_uni(const Tensor& grid) const {
    require(uni_, "this generator requires a style input");
    LayerAffines affines;
    affines.reserve(static_affine_.size());
    for (const auto& gb : static_affine_)
        affines.emplace_back(ops::add_const(gb.first, 1.0), gb.second);
    return run(grid, {affines});
}

void Discriminator::init(Params& ps, const std::string& prefix, const NetConfig& cfg, Rng& rng) {
    cfg_ = cfg;
    const int b = cfg.base_channels;
    int cin = 3, cout = b;
    downs_.resize(static_cast<size_t>(cfg.disc_depth));
    for (size_t i = 0; i < downs_.size(); ++i) {
        downs_[i].init(ps, prefix + ".down" + std::to_string(i), cin, cout, 4, 2, 1, rng);
        cin = cout;
        cout = std::min(4 * b, 2 * cout);
    }
    head_.init(ps, prefix + ".head", cin, 1, 3, 1, 1, rng);
}

Tensor Discriminator::forward(const Tensor& image) const {
    require(image.defined() && image.rank() == 3 && image.dim(0) == 3,
            "discriminate: input must be a [3,h,w] image");
    Tensor x = ops::leaky_relu(downs_[0](image));
    for (size_t i = 1; i < downs_.size(); ++i)
        x = ops::leaky_relu(ops::instance_norm(downs_[i](x)));
    return head_(x);
}

void TranslationModel::init(const NetConfig& c, bool uni_mode, uint64_t seed) {
    cfg = c;
    cfg.validate();
    uni = uni_mode;
    gen_params = Params();
    disc_params = Params();
    Rng rng(derive_seed(seed, "init", 0));
    enc.init(gen_params, "enc", cfg, rng);
    if (!uni) {
        style_x.init(gen_params, "style_x", cfg, rng);
        style_y.init(gen_params, "style_y", cfg, rng);
    }
    gen_x.init(gen_params, "gen_x", cfg, uni, rng);
    gen_y.init(gen_params, "gen_y", cfg, uni, rng);
    codebook = Codebook::init(cfg.codebook_size, cfg.code_dim, rng);
    gen_params.add("codebook", codebook.entries);
    disc_x.init(disc_params, "disc_x", cfg, rng);
    disc_y.init(disc_params, "disc_y", cfg, rng);
}

const StyleEncoder& TranslationModel::style_enc(Domain d) const {
    require(!uni, "style encoders do not exist in uni mode");
    return d == Domain::X ? style_x : style_y;
}

const Generator& TranslationModel::gen(Domain d) const {
    return d == Domain::X ? gen_x : gen_y;
}

const Discriminator& TranslationModel::disc(Domain d) const {
    return d == Domain::X ? disc_x : disc_y;
}

}  // namespace vqi2i
