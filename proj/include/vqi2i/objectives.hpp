#pragma once

#include <optional>
#include <vector>

#include "vqi2i/adam.hpp"
#include "vqi2i/nets.hpp"

namespace vqi2i {

struct LossWeights {
    double adv = 0.1;
    double recon = 5.0;
    double vq = 1.0;
    double content = 0.2;
    double style = 1.0;
    // Generator adversarial term: false = saturating -adv (the default
    // objective), true = the -log D(fake) alternative.
    bool nonsaturating = false;
    void validate() const;  // all finite and >= 0
};

// One training step's raw term values; content/style are absent in uni
// mode. total_gen recombines the raw terms with the configured weights.
struct StepReport {
    int64_t step = 0;
    double loss_d = 0.0;
    double adv = 0.0;
    double recon = 0.0;
    double vq = 0.0;
    std::optional<double> content;
    std::optional<double> style;
    double total_gen = 0.0;
    double usage = 0.0;
};

// -[mean log sigmoid(real) + mean log(1 - sigmoid(fake))] over patches,
// sigmoid clamped to [1e-7, 1-1e-7] before the logs.
Tensor discriminator_domain_loss(const Tensor& real_scores, const Tensor& fake_scores);

// Mean absolute error between same-shape tensors.
Tensor l1_mean(const Tensor& a, const Tensor& b);

// -mean log sigmoid(fake), the non-saturating generator objective.
Tensor generator_nonsat_loss(const Tensor& fake_scores);

// -w.adv*adv + w.recon*recon + w.vq*vq + w.content*content + w.style*style;
// with w.nonsaturating the adv term enters as +w.adv*adv instead (the
// caller then passes generator_nonsat_loss values). The two optional terms
// are skipped when null (uni objective).
Tensor generator_total(const Tensor& adv, const Tensor& recon, const Tensor& vq,
                       const Tensor* content, const Tensor* style, const LossWeights& w);

struct TrainSettings {
    double lr = 1e-3;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    LossWeights weights;
};

// Runs the two-phase step: discriminator update on L_D with translations
// detached, then the generator-side update. The codebook receives gradient
// only through the VQ loss and the self-reconstruction decode path.
class Trainer {
public:
    Trainer(TranslationModel& model, const TrainSettings& settings);
    StepReport step(const std::vector<Tensor>& batch_x, const std::vector<Tensor>& batch_y);

    Adam& opt_g() { return opt_g_; }
    Adam& opt_d() { return opt_d_; }
    int64_t steps_done() const { return step_; }
    void set_steps_done(int64_t s) { step_ = s; }

private:
    TranslationModel& model_;
    TrainSettings settings_;
    Adam opt_d_, opt_g_;
    int64_t step_ = 0;
};

}  // namespace vqi2i
