#include "vqi2i/objectives.hpp"

#include <cmath>

#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"

namespace vqi2i {

namespace {
constexpr double kSigmoidFloor = 1e-7;
}

void LossWeights::validate() const {
    for (double w : {adv, recon, vq, content, style}) {
        require(std::isfinite(w), "loss weights must be finite");
        require(w >= 0.0, "loss weights must be nonnegative");
    }
}

Tensor discriminator_domain_loss(const Tensor& real_scores, const Tensor& fake_scores) {
    Tensor p_real = ops::clamp(ops::sigmoid(real_scores), kSigmoidFloor, 1.0 - kSigmoidFloor);
    Tensor p_fake = ops::clamp(ops::sigmoid(fake_scores), kSigmoidFloor, 1.0 - kSigmoidFloor);
    Tensor one_minus = ops::add_const(ops::scale(p_fake, -1.0), 1.0);
    Tensor score = ops::add(ops::mean(ops::log(p_real)), ops::mean(ops::log(one_minus)));
    return ops::scale(score, -1.0);
}

Tensor l1_mean(const Tensor& a, const Tensor& b) { return ops::mean(ops::abs(ops::sub(a, b))); }

Tensor generator_nonsat_loss(const Tensor& fake_scores) {
    Tensor p_fake = ops::clamp(ops::sigmoid(fake_scores), kSigmoidFloor, 1.0 - kSigmoidFloor);
    return ops::scale(ops::mean(ops::log(p_fake)), -1.0);
}

Tensor generator_total(const Tensor& adv, const Tensor& recon, const Tensor& vq,
                       const Tensor* content, const Tensor* style, const LossWeights& w) {
    w.validate();
    Tensor total = ops::scale(adv, w.nonsaturating ? w.adv : -w.adv);
    total = ops::add(total, ops::scale(recon, w.recon));
    total = ops::add(total, ops::scale(vq, w.vq));
    if (content) total = ops::add(total, ops::scale(*content, w.content));
    if (style) total = ops::add(total, ops::scale(*style, w.style));
    return total;
}

Trainer::Trainer(TranslationModel& model, const TrainSettings& settings)
    : model_(model),
      settings_(settings),
      opt_d_(model.disc_params, settings.lr, settings.beta1, settings.beta2, settings.eps),
      opt_g_(model.gen_params, settings.lr, settings.beta1, settings.beta2, settings.eps) {
    settings_.weights.validate();
}

StepReport Trainer::step(const std::vector<Tensor>& batch_x, const std::vector<Tensor>& batch_y) {
    require(!batch_x.empty() && batch_x.size() == batch_y.size(),
            "train_step: batches must be non-empty and equal-sized");
    const double inv_b = 1.0 / static_cast<double>(batch_x.size());
    const bool uni = model_.uni;
    StepReport report;
    report.step = ++step_;

    // Phase 1: discriminators, with the translated images detached (they
    // are computed outside grad mode).
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss_d;
        for (size_t i = 0; i < batch_x.size(); ++i) {
            const Tensor& x = batch_x[i];
            const Tensor& y = batch_y[i];
            Tensor u, v;
            {
                NoGradGuard ng;
                ContentGrid gx = quantize(model_.enc.forward(x), model_.codebook);
                ContentGrid gy = quantize(model_.enc.forward(y), model_.codebook);
                if (uni) {
                    u = model_.gen_x.forward_uni(gy.embedded);
                    v = model_.gen_y.forward_uni(gx.embedded);
                } else {
                    u = model_.gen_x.forward(gy.embedded, model_.style_x.forward(x));
                    v = model_.gen_y.forward(gx.embedded, model_.style_y.forward(y));
                }
            }
            Tensor ld = ops::add(
                discriminator_domain_loss(model_.disc_x.forward(x), model_.disc_x.forward(u)),
                discriminator_domain_loss(model_.disc_y.forward(y), model_.disc_y.forward(v)));
            loss_d = loss_d.defined() ? ops::add(loss_d, ld) : ld;
        }
        loss_d = ops::scale(loss_d, inv_b);
        report.loss_d = loss_d.item();
        backward(loss_d, tape);
        opt_d_.step();
        model_.disc_params.zero_grad();
    }

    // Phase 2: generator side (encoder, style encoders, generators,
    // codebook) against the freshly updated discriminators.
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor adv, recon, vq, content, style;
        std::vector<std::vector<int>> step_grids;
        for (size_t i = 0; i < batch_x.size(); ++i) {
            const Tensor& x = batch_x[i];
            const Tensor& y = batch_y[i];
            Tensor chat_x = model_.enc.forward(x);
            Tensor chat_y = model_.enc.forward(y);
            ContentGrid gx = quantize(chat_x, model_.codebook);
            ContentGrid gy = quantize(chat_y, model_.codebook);
            step_grids.push_back(gx.indices);
            step_grids.push_back(gy.indices);

            Tensor xhat, yhat, u, v;
            Tensor s_x, s_y;
            if (uni) {
                xhat = model_.gen_x.forward_uni(gx.embedded_with_codebook_grad);
                yhat = model_.gen_y.forward_uni(gy.embedded_with_codebook_grad);
                u = model_.gen_x.forward_uni(gy.embedded);
                v = model_.gen_y.forward_uni(gx.embedded);
            } else {
                s_x = model_.style_x.forward(x);
                s_y = model_.style_y.forward(y);
                xhat = model_.gen_x.forward(gx.embedded_with_codebook_grad, s_x);
                yhat = model_.gen_y.forward(gy.embedded_with_codebook_grad, s_y);
                u = model_.gen_x.forward(gy.embedded, s_x);
                v = model_.gen_y.forward(gx.embedded, s_y);
            }

            Tensor adv_i =
                settings_.weights.nonsaturating
                    ? ops::add(generator_nonsat_loss(model_.disc_x.forward(u)),
                               generator_nonsat_loss(model_.disc_y.forward(v)))
                    : ops::add(
                          discriminator_domain_loss(model_.disc_x.forward(x),
                                                    model_.disc_x.forward(u)),
                          discriminator_domain_loss(model_.disc_y.forward(y),
                                                    model_.disc_y.forward(v)));
            Tensor recon_i = ops::add(l1_mean(xhat, x), l1_mean(yhat, y));
            Tensor vq_i = ops::add(vq_loss(chat_x, gx.codes), vq_loss(chat_y, gy.codes));
            adv = adv.defined() ? ops::add(adv, adv_i) : adv_i;
            recon = recon.defined() ? ops::add(recon, recon_i) : recon_i;
            vq = vq.defined() ? ops::add(vq, vq_i) : vq_i;

            if (!uni) {
                // Regression targets are the quantized grids, detached.
                Tensor content_i =
                    ops::add(l1_mean(model_.enc.forward(u), ops::stop_gradient(gy.codes)),
                             l1_mean(model_.enc.forward(v), ops::stop_gradient(gx.codes)));
                Tensor style_i = ops::add(l1_mean(model_.style_x.forward(u), s_x),
                                          l1_mean(model_.style_y.forward(v), s_y));
                content = content.defined() ? ops::add(content, content_i) : content_i;
                style = style.defined() ? ops::add(style, style_i) : style_i;
            }
        }
        adv = ops::scale(adv, inv_b);
        recon = ops::scale(recon, inv_b);
        vq = ops::scale(vq, inv_b);
        if (!uni) {
            content = ops::scale(content, inv_b);
            style = ops::scale(style, inv_b);
        }
        Tensor total = generator_total(adv, recon, vq, uni ? nullptr : &content,
                                       uni ? nullptr : &style, settings_.weights);
        report.adv = adv.item();
        report.recon = recon.item();
        report.vq = vq.item();
        if (!uni) {
            report.content = content.item();
            report.style = style.item();
        }
        report.total_gen = total.item();
        report.usage = usage_fraction(step_grids, model_.cfg.codebook_size);
        backward(total, tape);
        opt_g_.step();
        model_.gen_params.zero_grad();
        model_.disc_params.zero_grad();
    }
    return report;
}

}  // namespace vqi2i
