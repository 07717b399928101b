#include "vqi2i/adam.hpp"

#include <cmath>

#include "vqi2i/error.hpp"

namespace vqi2i {

void Params::add(std::string name, Tensor t) {
    require(!name.empty(), "parameter name must not be empty");
    require(t.defined(), "parameter '" + name + "' is undefined");
    for (const NamedParam& p : items_)
        require(p.name != name, "duplicate parameter name '" + name + "'");
    t.set_requires_grad(true);
    items_.push_back(NamedParam{std::move(name), std::move(t)});
}

void Params::extend(const Params& other) {
    for (const NamedParam& p : other.items_) add(p.name, p.tensor);
}

Tensor Params::find(const std::string& name) const {
    for (const NamedParam& p : items_)
        if (p.name == name) return p.tensor;
    fail("unknown parameter '" + name + "'");
}

int64_t Params::scalar_count() const {
    int64_t n = 0;
    for (const NamedParam& p : items_) n += p.tensor.numel();
    return n;
}

void Params::zero_grad() const {
    for (const NamedParam& p : items_) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
}

void Params::set_requires_grad(bool v) const {
    for (const NamedParam& p : items_) {
        Tensor t = p.tensor;
        t.set_requires_grad(v);
    }
}

Adam::Adam(Params params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    require(lr > 0.0, "adam: learning rate must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
            "adam: betas must lie in [0,1)");
    require(eps > 0.0, "adam: eps must be positive");
    m_.reserve(params_.items().size());
    v_.reserve(params_.items().size());
    for (const NamedParam& p : params_.items()) {
        m_.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0);
        v_.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.items().size(); ++i) {
        const NamedParam& p = params_.items()[i];
        require(p.tensor.has_grad(), "adam: parameter '" + p.name + "' has no gradient");
        Tensor t = p.tensor;
        const std::vector<double>& g = t.grad();
        std::vector<double>& val = t.values();
        std::vector<double>& m = m_[i];
        std::vector<double>& v = v_[i];
        for (size_t j = 0; j < val.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            val[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
            if (!std::isfinite(val[j]))
                fail("adam: parameter '" + p.name + "' became non-finite");
        }
    }
}

void Adam::restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v,
                   int64_t t) {
    require(m.size() == params_.items().size() && v.size() == params_.items().size(),
            "adam: moment buffer count mismatch on restore");
    for (size_t i = 0; i < m.size(); ++i)
        require(m[i].size() == params_.items()[i].tensor.values().size() &&
                    v[i].size() == m[i].size(),
                "adam: moment buffer size mismatch on restore");
    require(t >= 0, "adam: negative step counter on restore");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
}

}  // namespace vqi2i
