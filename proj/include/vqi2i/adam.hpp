#pragma once

#include <string>
#include <vector>

#include "vqi2i/tensor.hpp"

namespace vqi2i {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Ordered registry of trainable tensors; registration order doubles as
// serialization order, so it must be deterministic.
class Params {
public:
    void add(std::string name, Tensor t);
    void extend(const Params& other);
    const std::vector<NamedParam>& items() const { return items_; }
    bool empty() const { return items_.empty(); }
    Tensor find(const std::string& name) const;
    int64_t scalar_count() const;
    void zero_grad() const;
    void set_requires_grad(bool v) const;

private:
    std::vector<NamedParam> items_;
};

// Adam with bias correction; eps is added after the square root.
class Adam {
public:
    explicit Adam(Params params, double lr, double beta1 = 0.5, double beta2 = 0.999,
                  double eps = 1e-8);

    // Applies one update; every registered parameter must carry a gradient.
    void step();

    const Params& params() const { return params_; }
    int64_t t() const { return t_; }
    double lr() const { return lr_; }

    // Moment buffers indexed like params().items(), exposed for checkpoints.
    const std::vector<std::vector<double>>& m() const { return m_; }
    const std::vector<std::vector<double>>& v() const { return v_; }
    void restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v,
                 int64_t t);

private:
    Params params_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace vqi2i
