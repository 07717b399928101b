#include "vqi2i/pipelines.hpp"

#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"

namespace vqi2i {

Direction parse_direction(const std::string& s) {
    if (s == "x2y") return {Domain::X, Domain::Y};
    if (s == "y2x") return {Domain::Y, Domain::X};
    if (s == "x2x") return {Domain::X, Domain::X};
    if (s == "y2y") return {Domain::Y, Domain::Y};
    failf("unknown direction '%s' (expected x2y, y2x, x2x, or y2y)", s.c_str());
}

ContentGrid encode_grid(const TranslationModel& m, const Tensor& image) {
    NoGradGuard ng;
    return quantize(m.enc.forward(image), m.codebook);
}

Tensor encode_style(const TranslationModel& m, const Tensor& image, Domain d) {
    NoGradGuard ng;
    return m.style_enc(d).forward(image);
}

Tensor prior_style(const TranslationModel& m, Rng& rng) {
    Tensor s = Tensor::zeros({m.cfg.style_dim});
    for (double& v : s.values()) v = rng.normal();
    return s;
}

Tensor decode_indices(const TranslationModel& m, const std::vector<int>& indices, int h, int w,
                      const Tensor& style, Domain d) {
    NoGradGuard ng;
    Tensor embedded = embed_indices(indices, h, w, m.codebook);
    return m.uni ? m.gen(d).forward_uni(embedded) : m.gen(d).forward(embedded, style);
}

Tensor translate(const TranslationModel& m, const Tensor& image, const Tensor& style_image,
                 Direction dir) {
    NoGradGuard ng;
    ContentGrid grid = quantize(m.enc.forward(image), m.codebook);
    if (m.uni) return m.gen(dir.dst).forward_uni(grid.embedded);
    Tensor s = m.style_enc(dir.dst).forward(style_image);
    return m.gen(dir.dst).forward(grid.embedded, s);
}

std::vector<Tensor> diverse_translate(const TranslationModel& m, const Tensor& image,
                                      const std::vector<Tensor>& styles, Direction dir) {
    require(!styles.empty(), "diverse_translate needs at least one style");
    NoGradGuard ng;
    ContentGrid grid = quantize(m.enc.forward(image), m.codebook);
    std::vector<Tensor> out;
    out.reserve(styles.size());
    for (const Tensor& s : styles)
        out.push_back(m.uni ? m.gen(dir.dst).forward_uni(grid.embedded)
                            : m.gen(dir.dst).forward(grid.embedded, s));
    return out;
}

Tensor generate_unconditional(const TranslationModel& m, const LatentLm& lm, Domain d,
                              const Tensor& style, int h, int w, const SamplerParams& sp,
                              Rng& rng) {
    std::vector<int> grid = generate_grid(lm, h, w, sp, rng);
    return decode_indices(m, grid, h, w, style, d);
}

std::vector<int> extend_indices(const TranslationModel& m, const LatentLm& lm,
                                const Tensor& image, int cols_left, int cols_right,
                                const SamplerParams& sp, Rng& rng) {
    require(cols_left >= 0 && cols_right >= 0, "extension extents must be nonnegative");
    ContentGrid grid = encode_grid(m, image);
    // Rightward first, then leftward over the already-widened grid.
    std::vector<int> g = extend_grid_right(lm, grid.indices, grid.h, grid.w, cols_right, sp, rng);
    return extend_grid_left(lm, g, grid.h, grid.w + cols_right, cols_left, sp, rng);
}

Tensor extend_image(const TranslationModel& m, const LatentLm& lm, const Tensor& image,
                    int px_left, int px_right, const Tensor& style, Domain d,
                    const SamplerParams& sp, Rng& rng) {
    const int f = m.cfg.downsample_factor;
    require(px_left >= 0 && px_right >= 0, "extension extents must be nonnegative");
    require(px_left % f == 0 && px_right % f == 0,
            "extension extents must be divisible by the downsample factor");
    std::vector<int> g = extend_indices(m, lm, image, px_left / f, px_right / f, sp, rng);
    const int h = image.dim(1) / f;
    const int w = image.dim(2) / f + px_left / f + px_right / f;
    return decode_indices(m, g, h, w, style, d);
}

std::vector<int> complete_indices(const TranslationModel& m, const LatentLm& lm,
                                  const Tensor& quarter, const SamplerParams& sp, Rng& rng) {
    const int f = m.cfg.downsample_factor;
    const int gs = m.cfg.grid_size();
    require(quarter.defined() && quarter.rank() == 3 && quarter.dim(0) == 3,
            "complete: the known patch must be a [3,h,w] image");
    require(quarter.dim(1) % f == 0 && quarter.dim(2) % f == 0,
            "complete: patch extents must be divisible by the downsample factor");
    const int kh = quarter.dim(1) / f, kw = quarter.dim(2) / f;
    require(kh >= 1 && kw >= 1, "complete: the known patch is too small to encode");
    require(kh <= gs && kw <= gs, "complete: the known patch is larger than the target image");

    ContentGrid known = encode_grid(m, quarter);
    std::vector<int> grid(static_cast<size_t>(gs) * gs, 0);
    std::vector<char> mask(static_cast<size_t>(gs) * gs, 0);
    for (int i = 0; i < kh; ++i)
        for (int j = 0; j < kw; ++j) {
            grid[static_cast<size_t>(i) * gs + j] = known.indices[static_cast<size_t>(i) * kw + j];
            mask[static_cast<size_t>(i) * gs + j] = 1;
        }
    fill_grid(lm, grid, mask, gs, gs, sp, rng);
    return grid;
}

Tensor complete_image(const TranslationModel& m, const LatentLm& lm, const Tensor& quarter,
                      const Tensor& style, Domain d, const SamplerParams& sp, Rng& rng) {
    std::vector<int> grid = complete_indices(m, lm, quarter, sp, rng);
    const int gs = m.cfg.grid_size();
    return decode_indices(m, grid, gs, gs, style, d);
}

StylizationPlan StylizationPlan::make(Tensor style_a, Tensor style_b, int num_splits) {
    require(num_splits >= 1, "stylize: need at least one split");
    StylizationPlan plan;
    plan.style_a = std::move(style_a);
    plan.style_b = std::move(style_b);
    if (num_splits == 1) {
        plan.alphas = {0.0};
    } else {
        plan.alphas.resize(static_cast<size_t>(num_splits));
        for (int i = 0; i < num_splits; ++i)
            plan.alphas[static_cast<size_t>(i)] =
                static_cast<double>(i) / static_cast<double>(num_splits - 1);
    }
    return plan;
}

void StylizationPlan::validate() const {
    require(style_a.defined() && style_b.defined() && style_a.rank() == 1 &&
                style_b.shape() == style_a.shape(),
            "stylize: styles must be same-shape vectors");
    require(!alphas.empty(), "stylize: blend weights must be non-empty");
    for (size_t i = 0; i < alphas.size(); ++i) {
        require(alphas[i] >= 0.0 && alphas[i] <= 1.0, "stylize: blend weights must be in [0,1]");
        require(i == 0 || alphas[i] >= alphas[i - 1],
                "stylize: blend weights must be nondecreasing");
    }
    if (alphas.size() >= 2)
        require(alphas.front() == 0.0 && alphas.back() == 1.0,
                "stylize: blend weights must run from 0 to 1");
}

Tensor transitional_stylize(const TranslationModel& m, const std::vector<int>& indices, int h,
                            int w, const StylizationPlan& plan, Domain d) {
    require(!m.uni, "stylize needs style inputs, which the uni model does not have");
    plan.validate();
    require(static_cast<int>(plan.alphas.size()) <= w,
            "stylize: more bands than content grid columns");
    NoGradGuard ng;
    Tensor embedded = embed_indices(indices, h, w, m.codebook);
    std::vector<Tensor> styles;
    styles.reserve(plan.alphas.size());
    for (double a : plan.alphas) {
        if (a == 0.0) {
            styles.push_back(plan.style_a);
        } else if (a == 1.0) {
            styles.push_back(plan.style_b);
        } else {
            // s_a + a*(s_b - s_a): linear in a, and exactly s_a when the
            // endpoints coincide (the difference is exactly zero).
            styles.push_back(ops::add(
                plan.style_a, ops::scale(ops::sub(plan.style_b, plan.style_a), a)));
        }
    }
    return m.gen(d).forward_bands(embedded, styles);
}

}  // namespace vqi2i
