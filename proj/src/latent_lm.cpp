#include "vqi2i/latent_lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"

namespace vqi2i {

void LmConfig::validate() const {
    require(vocab >= 2, "lm: vocab must be >= 2");
    require(layers >= 1 && heads >= 1 && width >= 1, "lm: layers/heads/width must be >= 1");
    require(width % heads == 0, "lm: heads must divide width");
    require(window >= 1, "lm: window must be >= 1");
    require(context >= window * window, "lm: context must cover the window area");
}

namespace {

Tensor layer_norm(const Tensor& x, const Tensor& g, const Tensor& b) {
    return ops::add(ops::mul(ops::instance_norm(x), g), b);
}

}  // namespace

void LatentLm::init(Params& ps, const std::string& prefix, const LmConfig& cfg, Rng& rng) {
    cfg.validate();
    cfg_ = cfg;
    const int w = cfg.width;
    const double lim = std::sqrt(1.0 / w);
    tok_emb_ = Tensor::uniform({cfg.vocab + 1, w}, -lim, lim, rng);
    pos_emb_ = Tensor::uniform({cfg.context, w}, -lim, lim, rng);
    ps.add(prefix + ".tok_emb", tok_emb_);
    ps.add(prefix + ".pos_emb", pos_emb_);
    layers_.resize(static_cast<size_t>(cfg.layers));
    for (size_t l = 0; l < layers_.size(); ++l) {
        Layer& ly = layers_[l];
        const std::string lp = prefix + ".layer" + std::to_string(l);
        ly.ln1_g = Tensor::full({w}, 1.0);
        ly.ln1_b = Tensor::zeros({w});
        ps.add(lp + ".ln1.g", ly.ln1_g);
        ps.add(lp + ".ln1.b", ly.ln1_b);
        ly.wq.init(ps, lp + ".wq", w, w, rng);
        ly.wk.init(ps, lp + ".wk", w, w, rng);
        ly.wv.init(ps, lp + ".wv", w, w, rng);
        ly.wo.init(ps, lp + ".wo", w, w, rng);
        ly.ln2_g = Tensor::full({w}, 1.0);
        ly.ln2_b = Tensor::zeros({w});
        ps.add(lp + ".ln2.g", ly.ln2_g);
        ps.add(lp + ".ln2.b", ly.ln2_b);
        ly.fc1.init(ps, lp + ".fc1", w, 4 * w, rng);
        ly.fc2.init(ps, lp + ".fc2", 4 * w, w, rng);
    }
    lnf_g_ = Tensor::full({w}, 1.0);
    lnf_b_ = Tensor::zeros({w});
    ps.add(prefix + ".lnf.g", lnf_g_);
    ps.add(prefix + ".lnf.b", lnf_b_);
    head_.init(ps, prefix + ".head", w, cfg.vocab, rng);
}

Tensor LatentLm::forward(const std::vector<int>& ids) const {
    const int t = static_cast<int>(ids.size());
    require(t >= 1, "lm: empty input");
    require(t <= cfg_.context, "lm: sequence of length " + std::to_string(t) +
                                   " exceeds context " + std::to_string(cfg_.context));
    for (int id : ids)
        require(id >= 0 && id <= cfg_.vocab, "lm: token id out of range");

    Tensor x = ops::add(ops::embedding(tok_emb_, ids), ops::slice(pos_emb_, 0, 0, t));

    std::vector<double> mask_vals(static_cast<size_t>(t) * t, 0.0);
    for (int i = 0; i < t; ++i)
        for (int j = i + 1; j < t; ++j) mask_vals[static_cast<size_t>(i) * t + j] = -1e9;
    Tensor mask = Tensor::from({t, t}, std::move(mask_vals));

    const int hs = cfg_.width / cfg_.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hs));
    for (const Layer& ly : layers_) {
        Tensor h = layer_norm(x, ly.ln1_g, ly.ln1_b);
        Tensor q = ly.wq.matrix(h);
        Tensor k = ly.wk.matrix(h);
        Tensor v = ly.wv.matrix(h);
        std::vector<Tensor> heads;
        heads.reserve(static_cast<size_t>(cfg_.heads));
        for (int hd = 0; hd < cfg_.heads; ++hd) {
            Tensor qh = ops::slice(q, 1, hd * hs, hs);
            Tensor kh = ops::slice(k, 1, hd * hs, hs);
            Tensor vh = ops::slice(v, 1, hd * hs, hs);
            Tensor att = ops::scale(ops::matmul(qh, kh, false, true), att_scale);
            att = ops::softmax(ops::add(att, mask));
            heads.push_back(ops::matmul(att, vh));
        }
        x = ops::add(x, ly.wo.matrix(ops::concat(heads, 1)));
        Tensor h2 = layer_norm(x, ly.ln2_g, ly.ln2_b);
        x = ops::add(x, ly.fc2.matrix(ops::relu(ly.fc1.matrix(h2))));
    }
    return head_.matrix(layer_norm(x, lnf_g_, lnf_b_));
}

Tensor LatentLm::nll(const std::vector<int>& tokens) const {
    const int n = static_cast<int>(tokens.size());
    require(n >= 2, "lm_nll: sequence must have at least 2 tokens");
    for (int tok : tokens)
        require(tok >= 0 && tok < cfg_.vocab, "lm_nll: token out of vocabulary");
    std::vector<int> ids;
    ids.reserve(static_cast<size_t>(n));
    ids.push_back(cfg_.vocab);  // start
    ids.insert(ids.end(), tokens.begin(), tokens.end() - 1);
    Tensor logp = ops::log_softmax(forward(ids));
    Tensor picked = ops::select_lastaxis(logp, tokens);
    return ops::scale(ops::mean(picked), -1.0);
}

std::vector<double> LatentLm::next_logits(const std::vector<int>& tokens) const {
    NoGradGuard ng;
    std::vector<int> ids;
    ids.reserve(tokens.size() + 1);
    ids.push_back(cfg_.vocab);
    ids.insert(ids.end(), tokens.begin(), tokens.end());
    Tensor logits = forward(ids);
    const int t = logits.dim(0), k = logits.dim(1);
    const double* row = logits.data() + static_cast<int64_t>(t - 1) * k;
    return std::vector<double>(row, row + k);
}

std::vector<double> softmax_vec(const std::vector<double>& logits) {
    require(!logits.empty(), "softmax_vec: empty input");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

namespace {

// Indices of the k largest logits; ties prefer the lower index.
std::vector<int> topk_indices(const std::vector<double>& logits, int k) {
    std::vector<int> order(logits.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return logits[static_cast<size_t>(a)] > logits[static_cast<size_t>(b)];
    });
    order.resize(static_cast<size_t>(k));
    std::sort(order.begin(), order.end());
    return order;
}

void check_sampler(const std::vector<double>& logits, double temperature, int top_k) {
    require(!logits.empty(), "sample_next: empty logits");
    for (double v : logits)
        require(std::isfinite(v), "sample_next: non-finite logit");
    require(temperature > 0.0, "sample_next: temperature must be positive");
    require(top_k >= 1 && top_k <= static_cast<int>(logits.size()),
            "sample_next: top_k out of range");
}

}  // namespace

std::vector<double> topk_distribution(const std::vector<double>& logits, double temperature,
                                      int top_k) {
    check_sampler(logits, temperature, top_k);
    const std::vector<int> kept = topk_indices(logits, top_k);
    double m = logits[static_cast<size_t>(kept[0])];
    for (int i : kept) m = std::max(m, logits[static_cast<size_t>(i)]);
    std::vector<double> p(logits.size(), 0.0);
    double z = 0.0;
    for (int i : kept) {
        p[static_cast<size_t>(i)] = std::exp((logits[static_cast<size_t>(i)] - m) / temperature);
        z += p[static_cast<size_t>(i)];
    }
    for (int i : kept) p[static_cast<size_t>(i)] /= z;
    return p;
}

int sample_next(const std::vector<double>& logits, double temperature, int top_k, Rng& rng) {
    check_sampler(logits, temperature, top_k);
    const std::vector<int> kept = topk_indices(logits, top_k);
    double m = logits[static_cast<size_t>(kept[0])];
    for (int i : kept) m = std::max(m, logits[static_cast<size_t>(i)]);
    std::vector<double> w(kept.size());
    double z = 0.0;
    for (size_t i = 0; i < kept.size(); ++i) {
        w[i] = std::exp((logits[static_cast<size_t>(kept[i])] - m) / temperature);
        z += w[i];
    }
    const double u = rng.next_double() * z;
    double acc = 0.0;
    for (size_t i = 0; i < kept.size(); ++i) {
        acc += w[i];
        if (u < acc) return kept[i];
    }
    return kept.back();
}

std::vector<int> flatten_rowmajor(const std::vector<std::vector<int>>& rows) {
    std::vector<int> seq;
    for (const std::vector<int>& r : rows) {
        require(r.size() == rows[0].size(), "flatten: ragged grid");
        seq.insert(seq.end(), r.begin(), r.end());
    }
    return seq;
}

std::vector<std::vector<int>> unflatten_rowmajor(const std::vector<int>& seq, int h, int w) {
    require(static_cast<int64_t>(seq.size()) == static_cast<int64_t>(h) * w,
            "unflatten: length does not match shape");
    std::vector<std::vector<int>> rows(static_cast<size_t>(h));
    for (int i = 0; i < h; ++i)
        rows[static_cast<size_t>(i)].assign(seq.begin() + static_cast<int64_t>(i) * w,
                                            seq.begin() + static_cast<int64_t>(i + 1) * w);
    return rows;
}

std::vector<int> hflip_grid(const std::vector<int>& grid, int h, int w) {
    require(static_cast<int64_t>(grid.size()) == static_cast<int64_t>(h) * w,
            "hflip_grid: length does not match shape");
    std::vector<int> out(grid.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            out[static_cast<size_t>(i) * w + (w - 1 - j)] = grid[static_cast<size_t>(i) * w + j];
    return out;
}

void fill_grid(const LatentLm& lm, std::vector<int>& grid, const std::vector<char>& known, int h,
               int w, const SamplerParams& sp, Rng& rng) {
    require(static_cast<int64_t>(grid.size()) == static_cast<int64_t>(h) * w &&
                known.size() == grid.size(),
            "fill_grid: shape mismatch");
    const int win = lm.config().window;
    std::vector<char> done = known;
    std::vector<int> ctx;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            if (done[static_cast<size_t>(i) * w + j]) continue;
            const int r0 = std::max(0, i - win + 1);
            const int c0 = std::max(0, j - win + 1);
            ctx.clear();
            for (int r = r0; r <= i; ++r) {
                const int c_end = (r == i) ? j - 1 : j;
                for (int c = c0; c <= c_end; ++c) {
                    require(done[static_cast<size_t>(r) * w + c] != 0,
                            "fill_grid: window references an unfilled cell");
                    ctx.push_back(grid[static_cast<size_t>(r) * w + c]);
                }
            }
            grid[static_cast<size_t>(i) * w + j] =
                sample_next(lm.next_logits(ctx), sp.temperature, sp.top_k, rng);
            done[static_cast<size_t>(i) * w + j] = 1;
        }
    }
}

std::vector<int> generate_grid(const LatentLm& lm, int h, int w, const SamplerParams& sp,
                               Rng& rng) {
    require(h >= 1 && w >= 1, "generate_grid: empty target shape");
    std::vector<int> grid(static_cast<size_t>(h) * w, 0);
    std::vector<char> known(grid.size(), 0);
    fill_grid(lm, grid, known, h, w, sp, rng);
    return grid;
}

std::vector<int> extend_grid_right(const LatentLm& lm, const std::vector<int>& grid, int h, int w,
                                   int extra, const SamplerParams& sp, Rng& rng) {
    require(static_cast<int64_t>(grid.size()) == static_cast<int64_t>(h) * w,
            "extend_grid: length does not match shape");
    require(extra >= 0, "extend_grid: negative extension");
    if (extra == 0) return grid;
    const int w2 = w + extra;
    std::vector<int> out(static_cast<size_t>(h) * w2, 0);
    std::vector<char> known(out.size(), 0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            out[static_cast<size_t>(i) * w2 + j] = grid[static_cast<size_t>(i) * w + j];
            known[static_cast<size_t>(i) * w2 + j] = 1;
        }
    fill_grid(lm, out, known, h, w2, sp, rng);
    return out;
}

std::vector<int> extend_grid_left(const LatentLm& lm, const std::vector<int>& grid, int h, int w,
                                  int extra, const SamplerParams& sp, Rng& rng) {
    return hflip_grid(extend_grid_right(lm, hflip_grid(grid, h, w), h, w, extra, sp, rng), h,
                      w + extra);
}

LmTrainer::LmTrainer(LatentLm& lm, Params lm_params, double lr, double beta1, double beta2,
                     double eps)
    : lm_(lm), opt_(std::move(lm_params), lr, beta1, beta2, eps) {}

double LmTrainer::step(const std::vector<std::vector<int>>& batch) {
    require(!batch.empty(), "lm train step: empty batch");
    Tape tape;
    TapeScope scope(tape);
    Tensor loss;
    for (const std::vector<int>& seq : batch) {
        Tensor nll = lm_.nll(seq);
        loss = loss.defined() ? ops::add(loss, nll) : nll;
    }
    loss = ops::scale(loss, 1.0 / static_cast<double>(batch.size()));
    const double value = loss.item();
    backward(loss, tape);
    opt_.step();
    opt_.params().zero_grad();
    return value;
}

}  // namespace vqi2i
