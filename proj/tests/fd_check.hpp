#pragma once

// Central finite-difference gradient oracle shared by the unit tests and
// the acceptance suite: analytic gradients from one taped backward pass are
// compared elementwise against (f(x+h) - f(x-h)) / 2h.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vqi2i/error.hpp"
#include "vqi2i/ops.hpp"
#include "vqi2i/tensor.hpp"

namespace fd {

struct Report {
    double max_rel = 0.0;
    int checked = 0;
};

// `loss_fn` must rebuild the scalar loss from the current values of
// `inputs` on every call. Relative error uses max(1, |a|, |f|) so tiny
// gradients are compared absolutely.
inline Report check(const std::function<vqi2i::Tensor()>& loss_fn,
                    const std::vector<vqi2i::Tensor>& inputs, double h = 1e-5) {
    using namespace vqi2i;
    Report rep;

    for (const Tensor& t : inputs) {
        Tensor mut = t;  // handle copy; shares storage
        mut.set_requires_grad(true);
        mut.drop_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = loss_fn();
        backward(loss, tape);
    }
    for (const Tensor& t : inputs) {
        require(t.has_grad(), "fd::check: input did not receive a gradient");
        analytic.push_back(t.grad());
    }

    NoGradGuard ng;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        Tensor t = inputs[ti];
        std::vector<double>& v = t.values();
        for (size_t i = 0; i < v.size(); ++i) {
            const double saved = v[i];
            v[i] = saved + h;
            const double up = loss_fn().item();
            v[i] = saved - h;
            const double down = loss_fn().item();
            v[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[ti][i];
            const double rel =
                std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel > rep.max_rel) rep.max_rel = rel;
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace fd
