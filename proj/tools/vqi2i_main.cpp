#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vqi2i/checkpoint.hpp"
#include "vqi2i/config.hpp"
#include "vqi2i/dataset.hpp"
#include "vqi2i/error.hpp"
#include "vqi2i/metrics.hpp"
#include "vqi2i/objectives.hpp"
#include "vqi2i/pipelines.hpp"
#include "vqi2i/png_io.hpp"

namespace fs = std::filesystem;
using namespace vqi2i;

namespace {

Tensor read_image_resized(const std::string& path, int size) {
    Tensor img = read_png(path);
    if (img.shape()[1] != size || img.shape()[2] != size)
        img = resize_nearest(img, size, size);
    return img;
}

// "prior" draws a standard-normal style from `rng`; anything else is a
// reference-image path encoded with the domain's style encoder.
Tensor style_from_arg(const TranslationModel& m, const std::string& arg, Domain d, Rng& rng) {
    if (m.uni) return Tensor();
    if (arg == "prior") return prior_style(m, rng);
    return encode_style(m, read_image_resized(arg, m.cfg.image_size), d);
}

// Plain-text index grid: one row per line, whitespace-separated integers.
std::vector<int> read_text_grid(const std::string& path, int vocab, int& h, int& w) {
    std::ifstream in(path);
    if (!in) failf("cannot open grid file '%s'", path.c_str());
    std::vector<int> cells;
    std::string line;
    h = 0;
    w = -1;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        int v = 0, count = 0;
        while (row >> v) {
            require(v >= 0 && v < vocab, "grid file '" + path + "' has an out-of-range index");
            cells.push_back(v);
            ++count;
        }
        if (count == 0) continue;  // blank line
        if (w < 0) w = count;
        require(count == w, "grid file '" + path + "' has ragged rows");
        ++h;
    }
    require(h >= 1 && w >= 1, "grid file '" + path + "' contains no indices");
    return cells;
}

void ensure_toy_corpus(const Config& cfg) {
    if (cfg.data.toy_count <= 0) return;
    bool have_x = fs::is_directory(cfg.data.dir_x);
    bool have_y = fs::is_directory(cfg.data.dir_y);
    if (have_x && have_y) return;
    require(!cfg.data.dir_x.empty() && !cfg.data.dir_y.empty(),
            "toy corpus synthesis needs data.dir_x and data.dir_y");
    make_toy_corpus(cfg.data.dir_x, cfg.data.dir_y, cfg.data.toy_count, cfg.net.image_size,
                    cfg.train.seed);
}

// Deterministic epoch-shuffled batch: sample k of the stream is
// order(epoch)[k % n], a pure function of k, so resumed runs see the exact
// batches a straight run would.
std::vector<Tensor> take_batch(const std::vector<Tensor>& pool, uint64_t seed,
                               const std::string& tag, int64_t step, int batch) {
    const size_t n = pool.size();
    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(batch));
    for (int i = 0; i < batch; ++i) {
        const int64_t k = step * batch + i;
        const int64_t epoch = k / static_cast<int64_t>(n);
        std::vector<size_t> order = epoch_order(n, seed, tag, epoch);
        out.push_back(pool[order[static_cast<size_t>(k % static_cast<int64_t>(n))]]);
    }
    return out;
}

int cmd_train(const std::string& config_path, bool uni_flag, const std::string& resume_path,
              int steps_override, const std::string& out_path) {
    Config cfg;
    TranslationModel model;
    LoadedBundle bundle;
    bool resume = !resume_path.empty();
    if (resume) {
        bundle = load_bundle(resume_path);
        cfg = bundle.config;
        if (steps_override > 0) cfg.train.steps = steps_override;
    } else {
        require(!config_path.empty(), "train needs --config (or --resume)");
        cfg = load_config(config_path);
        if (uni_flag) cfg.train.uni = true;
        if (steps_override > 0) cfg.train.steps = steps_override;
        model.init(cfg.net, cfg.train.uni, cfg.train.seed);
    }
    TranslationModel& mdl = resume ? bundle.model : model;

    ensure_toy_corpus(cfg);
    std::vector<Tensor> pool_x = load_image_dir(cfg.data.dir_x, cfg.net.image_size);
    std::vector<Tensor> pool_y = load_image_dir(cfg.data.dir_y, cfg.net.image_size);

    TrainSettings settings;
    settings.lr = cfg.optim.lr;
    settings.beta1 = cfg.optim.beta1;
    settings.beta2 = cfg.optim.beta2;
    settings.eps = cfg.optim.eps;
    settings.weights = cfg.weights;
    Trainer trainer(mdl, settings);
    if (resume) {
        if (bundle.has_opt("opt_g")) bundle.raw.load_adam(trainer.opt_g(), "opt_g");
        if (bundle.has_opt("opt_d")) bundle.raw.load_adam(trainer.opt_d(), "opt_d");
        trainer.set_steps_done(bundle.step);
    }

    MetricsLog log;
    if (!cfg.train.metrics.empty()) log.open(cfg.train.metrics, cfg.train.uni, resume);

    const int64_t total = cfg.train.steps;
    const int64_t print_every = std::max<int64_t>(1, total / 20);
    double last_usage = -1.0;
    StepReport report;
    while (trainer.steps_done() < total) {
        const int64_t s = trainer.steps_done();
        std::vector<Tensor> bx = take_batch(pool_x, cfg.train.seed, "data-x", s, cfg.train.batch);
        std::vector<Tensor> by = take_batch(pool_y, cfg.train.seed, "data-y", s, cfg.train.batch);
        report = trainer.step(bx, by);
        last_usage = report.usage;
        if ((report.step - 1) % cfg.train.log_every == 0 && log.is_open()) log.append(report);
        if (report.step == 1 || report.step % print_every == 0 || report.step == total)
            std::cout << "step " << report.step << "/" << total << "  loss_d "
                      << report.loss_d << "  recon " << report.recon << "  vq " << report.vq
                      << "  usage " << report.usage << "\n";
    }

    SaveBundle out;
    out.config = &cfg;
    out.model = &mdl;
    out.step = trainer.steps_done();
    out.opt_g = &trainer.opt_g();
    out.opt_d = &trainer.opt_d();
    out.usage = last_usage;
    // Keep a previously trained latent model when fine-tuning from one.
    if (resume && bundle.has_lm) {
        out.lm = &bundle.lm;
        out.lm_params = &bundle.lm_params;
        out.lm_step = bundle.lm_step;
    }
    save_bundle(out_path, out);
    std::cout << "saved " << out_path << "\n";
    return 0;
}

int cmd_train_lm(const std::string& ckpt_path, const std::string& out_path) {
    LoadedBundle bundle = load_bundle(ckpt_path);
    Config& cfg = bundle.config;

    // Freeze everything on the translation side; only the LM trains.
    bundle.model.gen_params.set_requires_grad(false);
    bundle.model.disc_params.set_requires_grad(false);

    ensure_toy_corpus(cfg);
    std::vector<Tensor> pool_x = load_image_dir(cfg.data.dir_x, cfg.net.image_size);
    std::vector<Tensor> pool_y = load_image_dir(cfg.data.dir_y, cfg.net.image_size);

    // The LM is trained jointly on both domains' content grids: the content
    // space is shared, so one sequence pool covers both.
    std::vector<std::vector<int>> pool;
    pool.reserve(pool_x.size() + pool_y.size());
    for (const Tensor& img : pool_x) pool.push_back(encode_grid(bundle.model, img).indices);
    for (const Tensor& img : pool_y) pool.push_back(encode_grid(bundle.model, img).indices);

    if (!bundle.has_lm) {
        Rng rng(derive_seed(cfg.train.seed, "lm-init", 0));
        bundle.lm.init(bundle.lm_params, "lm", cfg.lm, rng);
        bundle.has_lm = true;
        bundle.lm_step = 0;
    }
    LmTrainer trainer(bundle.lm, bundle.lm_params, cfg.train.lm_lr, cfg.optim.beta1,
                      cfg.optim.beta2, cfg.optim.eps);
    if (bundle.has_opt("opt_lm")) bundle.raw.load_adam(trainer.opt(), "opt_lm");

    const int64_t total = cfg.train.lm_steps;
    const int64_t print_every = std::max<int64_t>(1, total / 10);
    for (int64_t s = bundle.lm_step; s < total; ++s) {
        std::vector<std::vector<int>> batch;
        batch.reserve(static_cast<size_t>(cfg.train.lm_batch));
        const size_t n = pool.size();
        for (int i = 0; i < cfg.train.lm_batch; ++i) {
            const int64_t k = s * cfg.train.lm_batch + i;
            std::vector<size_t> order = epoch_order(n, cfg.train.seed, "lm-data",
                                                    k / static_cast<int64_t>(n));
            batch.push_back(pool[order[static_cast<size_t>(k % static_cast<int64_t>(n))]]);
        }
        double nll = trainer.step(batch);
        bundle.lm_step = s + 1;
        if (s == 0 || (s + 1) % print_every == 0 || s + 1 == total)
            std::cout << "lm step " << (s + 1) << "/" << total << "  nll " << nll << "\n";
    }

    SaveBundle out;
    out.config = &cfg;
    out.model = &bundle.model;
    out.step = bundle.step;
    out.usage = bundle.usage;
    out.lm = &bundle.lm;
    out.lm_params = &bundle.lm_params;
    out.lm_step = bundle.lm_step;
    out.opt_lm = &trainer.opt();
    // Carry the translation optimizer state through so a later resumed
    // translation run is unaffected by the LM pass.
    Adam opt_g(bundle.model.gen_params, cfg.optim.lr, cfg.optim.beta1, cfg.optim.beta2,
               cfg.optim.eps);
    Adam opt_d(bundle.model.disc_params, cfg.optim.lr, cfg.optim.beta1, cfg.optim.beta2,
               cfg.optim.eps);
    if (bundle.has_opt("opt_g")) {
        bundle.raw.load_adam(opt_g, "opt_g");
        out.opt_g = &opt_g;
    }
    if (bundle.has_opt("opt_d")) {
        bundle.raw.load_adam(opt_d, "opt_d");
        out.opt_d = &opt_d;
    }
    save_bundle(out_path, out);
    std::cout << "saved " << out_path << "\n";
    return 0;
}

int cmd_inspect(const std::string& ckpt_path) {
    LoadedBundle b = load_bundle(ckpt_path);
    std::cout << "checkpoint: " << ckpt_path << "\n";
    std::cout << "training steps: " << b.step << "\n";
    if (b.usage >= 0.0) std::cout << "codebook usage: " << b.usage << "\n";
    std::cout << "generator-side parameters: " << b.model.gen_params.scalar_count() << "\n";
    std::cout << "discriminator parameters: " << b.model.disc_params.scalar_count() << "\n";
    if (b.has_lm) {
        std::cout << "latent model parameters: " << b.lm_params.scalar_count() << "\n";
        std::cout << "latent model steps: " << b.lm_step << "\n";
    } else {
        std::cout << "latent model: none\n";
    }
    std::cout << "config:\n" << serialize_config(b.config);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Disentangled VQ image-to-image translation"};
    app.require_subcommand(1);

    std::string config_path, ckpt, out, resume, input, style_arg = "prior";
    std::string style_a, style_b, direction, domain_arg = "x", content;
    bool uni = false;
    int left = 0, right = 0, splits = 10, steps_override = 0;
    uint64_t seed = 0;

    CLI::App* train = app.add_subcommand("train", "Train the translation model");
    train->add_option("--config", config_path, "Config file");
    train->add_flag("--uni", uni, "Single-domain objective (no style/content terms)");
    train->add_option("--resume", resume, "Continue from an existing checkpoint");
    train->add_option("--steps", steps_override, "Total step count (overrides the config)");
    train->add_option("--out", out, "Output checkpoint")->required();

    CLI::App* train_lm = app.add_subcommand("train-lm", "Train the latent model");
    train_lm->add_option("--ckpt", ckpt, "Translation checkpoint")->required();
    train_lm->add_option("--out", out, "Output checkpoint")->required();

    CLI::App* translate_cmd = app.add_subcommand("translate", "Translate one image");
    translate_cmd->add_option("--ckpt", ckpt)->required();
    translate_cmd->add_option("--input", input, "Content image")->required();
    translate_cmd->add_option("--style", style_arg, "Style image path or 'prior'");
    translate_cmd->add_option("--direction", direction, "x2y, y2x, x2x, or y2y")->required();
    translate_cmd->add_option("--seed", seed, "Seed for prior style draws");
    translate_cmd->add_option("--out", out, "Output PNG")->required();

    CLI::App* sample = app.add_subcommand("sample", "Generate an image from the latent model");
    sample->add_option("--ckpt", ckpt)->required();
    sample->add_option("--domain", domain_arg, "x or y")->required();
    sample->add_option("--seed", seed, "Sampling seed")->required();
    sample->add_option("--style", style_arg, "Style image path or 'prior'");
    sample->add_option("--out", out, "Output PNG")->required();

    CLI::App* extend = app.add_subcommand("extend", "Extend an image horizontally");
    extend->add_option("--ckpt", ckpt)->required();
    extend->add_option("--input", input, "Source image")->required();
    extend->add_option("--left", left, "Pixels to add on the left");
    extend->add_option("--right", right, "Pixels to add on the right");
    extend->add_option("--style", style_arg, "Style image path or 'prior'");
    extend->add_option("--domain", domain_arg, "x or y");
    extend->add_option("--seed", seed, "Sampling seed");
    extend->add_option("--out", out, "Output PNG")->required();

    CLI::App* complete = app.add_subcommand("complete", "Complete an image from its top-left");
    complete->add_option("--ckpt", ckpt)->required();
    complete->add_option("--quarter", input, "Known top-left patch")->required();
    complete->add_option("--style", style_arg, "Style image path or 'prior'");
    complete->add_option("--domain", domain_arg, "x or y")->required();
    complete->add_option("--seed", seed, "Sampling seed")->required();
    complete->add_option("--out", out, "Output PNG")->required();

    CLI::App* stylize = app.add_subcommand("stylize", "Blend two styles across the image");
    stylize->add_option("--ckpt", ckpt)->required();
    stylize->add_option("--content", content, "Content image, or an index grid (*.txt)")
        ->required();
    stylize->add_option("--style-a", style_a, "Left-side style image")->required();
    stylize->add_option("--style-b", style_b, "Right-side style image")->required();
    stylize->add_option("--splits", splits, "Number of vertical bands");
    stylize->add_option("--domain", domain_arg, "x or y");
    stylize->add_option("--out", out, "Output PNG")->required();

    CLI::App* inspect = app.add_subcommand("inspect", "Describe a checkpoint");
    inspect->add_option("--ckpt", ckpt)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "vqi2i: error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, uni, resume, steps_override, out);
        if (train_lm->parsed()) return cmd_train_lm(ckpt, out);
        if (inspect->parsed()) return cmd_inspect(ckpt);

        LoadedBundle b = load_bundle(ckpt);
        const TranslationModel& m = b.model;
        const int size = b.config.net.image_size;
        const int gs = b.config.net.grid_size();
        Domain dom = parse_domain(domain_arg);

        if (translate_cmd->parsed()) {
            Direction dir = parse_direction(direction);
            Tensor img = read_image_resized(input, size);
            Rng rng(derive_seed(seed, "translate-style", 0));
            Tensor result;
            if (m.uni || style_arg != "prior") {
                Tensor style_img = m.uni ? img : read_image_resized(style_arg, size);
                result = translate(m, img, style_img, dir);
            } else {
                Tensor s = prior_style(m, rng);
                ContentGrid grid = encode_grid(m, img);
                result = decode_indices(m, grid.indices, grid.h, grid.w, s, dir.dst);
            }
            write_png(out, result);
        } else if (sample->parsed()) {
            require(b.has_lm, "checkpoint has no trained latent model; run train-lm first");
            Rng rng(derive_seed(seed, "sample", 0));
            Tensor s = style_from_arg(m, style_arg, dom, rng);
            write_png(out, generate_unconditional(m, b.lm, dom, s, gs, gs,
                                                  b.config.sampler, rng));
        } else if (extend->parsed()) {
            require(b.has_lm, "checkpoint has no trained latent model; run train-lm first");
            Tensor img = read_image_resized(input, size);
            Rng rng(derive_seed(seed, "extend", 0));
            Tensor s = style_from_arg(m, style_arg, dom, rng);
            write_png(out, extend_image(m, b.lm, img, left, right, s, dom, b.config.sampler,
                                        rng));
        } else if (complete->parsed()) {
            require(b.has_lm, "checkpoint has no trained latent model; run train-lm first");
            Tensor quarter = read_png(input);
            Rng rng(derive_seed(seed, "complete", 0));
            Tensor s = style_from_arg(m, style_arg, dom, rng);
            write_png(out, complete_image(m, b.lm, quarter, s, dom, b.config.sampler, rng));
        } else if (stylize->parsed()) {
            std::vector<int> indices;
            int h = 0, w = 0;
            if (content.size() > 4 && content.substr(content.size() - 4) == ".txt") {
                indices = read_text_grid(content, b.config.net.codebook_size, h, w);
            } else {
                ContentGrid grid = encode_grid(m, read_image_resized(content, size));
                indices = grid.indices;
                h = grid.h;
                w = grid.w;
            }
            Tensor sa = encode_style(m, read_image_resized(style_a, size), dom);
            Tensor sb = encode_style(m, read_image_resized(style_b, size), dom);
            StylizationPlan plan = StylizationPlan::make(sa, sb, splits);
            write_png(out, transitional_stylize(m, indices, h, w, plan, dom));
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "vqi2i: error: " << e.what() << "\n";
        return 1;
    }
}
