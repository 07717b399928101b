#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vqi2i/rng.hpp"

namespace vqi2i {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Storage {
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;  // empty until backward touches it
    bool requires_grad = false;
};

}  // namespace detail

// Value-semantics handle to a shared buffer. Copies alias the same storage;
// training mutates values only through the optimizer.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value);
    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor scalar(double value);
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const { return st_->shape; }
    int dim(int i) const { return st_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(st_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(st_->val.size()); }

    double* data() { return st_->val.data(); }
    const double* data() const { return st_->val.data(); }
    std::vector<double>& values() { return st_->val; }
    const std::vector<double>& values() const { return st_->val; }

    // Scalar access; errors unless numel() == 1.
    double item() const;

    bool requires_grad() const { return st_->requires_grad; }
    void set_requires_grad(bool v) { st_->requires_grad = v; }

    bool has_grad() const { return st_ && !st_->grad.empty(); }
    std::vector<double>& grad();              // allocates zeros on first use
    const std::vector<double>& grad() const;  // errors if absent
    void zero_grad();                         // zeroes (keeps allocation)
    void drop_grad();                         // deallocates

    bool same_storage(const Tensor& other) const { return st_ == other.st_; }

    std::shared_ptr<detail::Storage> storage() const { return st_; }

private:
    explicit Tensor(std::shared_ptr<detail::Storage> st) : st_(std::move(st)) {}
    std::shared_ptr<detail::Storage> st_;
    friend Tensor make_tensor(Shape, std::vector<double>);
};

Tensor make_tensor(Shape shape, std::vector<double> values);

// Define-by-run tape. Ops append nodes in execution order, which is already
// a topological order; backward() walks it once in reverse.
class Tape {
public:
    struct Node {
        const char* op;
        std::function<void()> backward;
    };

    void record(const char* op, std::function<void()> backward) {
        nodes_.push_back(Node{op, std::move(backward)});
    }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }
    const std::vector<Node>& nodes() const { return nodes_; }

private:
    std::vector<Node> nodes_;
};

// Scoped activation of a tape. Ops record only while a tape is active and
// grad mode is on.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

Tape* active_tape();
bool grad_enabled();
bool recording();  // active tape && grad enabled

// Seeds d(loss)/d(loss) = 1 and runs the tape backwards. loss must be scalar.
// Every node checks the gradients it produced for NaN/Inf and errors naming
// the op that introduced them.
void backward(const Tensor& loss, Tape& tape);

}  // namespace vqi2i
