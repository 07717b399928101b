#include "vqi2i/tensor.hpp"

#include <cmath>
#include <sstream>

#include "vqi2i/error.hpp"

namespace vqi2i {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        require(d > 0, "tensor shapes must have positive extents, got " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

namespace {

std::shared_ptr<detail::Storage> alloc_storage(Shape shape) {
    auto st = std::make_shared<detail::Storage>();
    int64_t n = shape_numel(shape);
    st->shape = std::move(shape);
    st->val.resize(static_cast<size_t>(n), 0.0);
    return st;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Tensor t(alloc_storage(std::move(shape)));
    t.st_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(alloc_storage(std::move(shape)));
    for (double& v : t.st_->val) v = value;
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    int64_t n = shape_numel(shape);
    require(n == static_cast<int64_t>(values.size()),
            "value count does not match shape " + shape_str(shape));
    auto st = std::make_shared<detail::Storage>();
    st->shape = std::move(shape);
    st->val = std::move(values);
    return Tensor(std::move(st));
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(alloc_storage(std::move(shape)));
    for (double& v : t.st_->val) v = rng.uniform(lo, hi);
    return t;
}

double Tensor::item() const {
    require(defined() && numel() == 1, "item() requires a single-element tensor");
    return st_->val[0];
}

std::vector<double>& Tensor::grad() {
    require(defined(), "grad() on undefined tensor");
    if (st_->grad.empty()) st_->grad.assign(st_->val.size(), 0.0);
    return st_->grad;
}

const std::vector<double>& Tensor::grad() const {
    require(defined() && !st_->grad.empty(), "gradient has not been computed");
    return st_->grad;
}

void Tensor::zero_grad() {
    if (st_ && !st_->grad.empty()) st_->grad.assign(st_->val.size(), 0.0);
}

void Tensor::drop_grad() {
    if (st_) {
        st_->grad.clear();
        st_->grad.shrink_to_fit();
    }
}

Tensor make_tensor(Shape shape, std::vector<double> values) {
    return Tensor::from(std::move(shape), std::move(values));
}

namespace {

thread_local Tape* g_active_tape = nullptr;
thread_local bool g_grad_enabled = true;

}  // namespace

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tape* active_tape() { return g_active_tape; }
bool grad_enabled() { return g_grad_enabled; }
bool recording() { return g_active_tape != nullptr && g_grad_enabled; }

void backward(const Tensor& loss, Tape& tape) {
    require(loss.defined() && loss.numel() == 1, "backward() requires a scalar loss");
    require(std::isfinite(loss.item()), "backward() called on a non-finite loss");
    auto st = loss.storage();
    if (st->grad.empty()) st->grad.assign(1, 0.0);
    st->grad[0] = 1.0;
    const auto& nodes = tape.nodes();
    for (size_t i = nodes.size(); i-- > 0;) nodes[i].backward();
}

}  // namespace vqi2i
