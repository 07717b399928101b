#pragma once

#include <vector>

#include "vqi2i/latent_lm.hpp"
#include "vqi2i/nets.hpp"
#include "vqi2i/quantizer.hpp"

namespace vqi2i {

// Translation direction, e.g. {X, Y} for X->Y; same-domain pairs give the
// intra-domain (multimodal) paths. Parsed from "x2y" / "y2x" / "x2x" /
// "y2y".
struct Direction {
    Domain src = Domain::X;
    Domain dst = Domain::Y;
};
Direction parse_direction(const std::string& s);

// All pipeline entry points run without gradients and are pure functions
// of (model, inputs, rng): bitwise reproducible for a fixed seed.

// Encoder + quantizer on one image.
ContentGrid encode_grid(const TranslationModel& m, const Tensor& image);

// Target-domain style vector of a reference image.
Tensor encode_style(const TranslationModel& m, const Tensor& image, Domain d);

// Standard-normal style draw (the prior used for style-free sampling).
Tensor prior_style(const TranslationModel& m, Rng& rng);

// Decodes a bare index grid with the domain's generator. `style` is
// ignored in uni mode.
Tensor decode_indices(const TranslationModel& m, const std::vector<int>& indices, int h, int w,
                      const Tensor& style, Domain d);

// Content from `image`, style from `style_image` via the target domain's
// style encoder, decoded by the target-domain generator.
Tensor translate(const TranslationModel& m, const Tensor& image, const Tensor& style_image,
                 Direction dir);

// One output per style vector; every decode reuses the single source grid.
std::vector<Tensor> diverse_translate(const TranslationModel& m, const Tensor& image,
                                      const std::vector<Tensor>& styles, Direction dir);

// Latent-LM grid sample decoded with the requested domain and style.
Tensor generate_unconditional(const TranslationModel& m, const LatentLm& lm, Domain d,
                              const Tensor& style, int h, int w, const SamplerParams& sp,
                              Rng& rng);

// Widens the image by whole grid columns: right first, then left (each via
// the LM), then one decode of the widened grid. Pixel extents must be
// divisible by the downsample factor. The source columns keep their indices
// exactly; pixels may shift slightly since the whole grid is re-decoded.
Tensor extend_image(const TranslationModel& m, const LatentLm& lm, const Tensor& image,
                    int px_left, int px_right, const Tensor& style, Domain d,
                    const SamplerParams& sp, Rng& rng);
// The extended index grid behind extend_image, for index-level checks.
std::vector<int> extend_indices(const TranslationModel& m, const LatentLm& lm,
                                const Tensor& image, int cols_left, int cols_right,
                                const SamplerParams& sp, Rng& rng);

// Fills everything outside a known top-left patch by sliding-window
// sampling, then decodes. The patch's extents must be divisible by the
// downsample factor and no larger than the model's image size.
Tensor complete_image(const TranslationModel& m, const LatentLm& lm, const Tensor& quarter,
                      const Tensor& style, Domain d, const SamplerParams& sp, Rng& rng);
std::vector<int> complete_indices(const TranslationModel& m, const LatentLm& lm,
                                  const Tensor& quarter, const SamplerParams& sp, Rng& rng);

// Vertical-band style blending plan: band i uses s_a + alpha_i*(s_b - s_a).
struct StylizationPlan {
    Tensor style_a, style_b;
    std::vector<double> alphas;

    // alpha_i = i/(N-1) for N >= 2; N == 1 uses the single weight 0 so the
    // output equals the pure style_a decode.
    static StylizationPlan make(Tensor style_a, Tensor style_b, int num_splits);
    void validate() const;  // monotone, in [0,1], endpoints 0 and 1 for N >= 2
};

// Decodes the grid with per-band styles; band count must not exceed the
// grid width. Equal endpoint styles reduce to a single-style decode
// bitwise.
Tensor transitional_stylize(const TranslationModel& m, const std::vector<int>& indices, int h,
                            int w, const StylizationPlan& plan, Domain d);

}  // namespace vqi2i
