#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "paewc/errors.hpp"

namespace paewc {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One recorded tape node. Eager op recording assigns strictly increasing
// sequence numbers, so ordering by `seq` is a topological order of the graph:
// every input of a node was created, and therefore numbered, before it.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily, on first accumulation
    bool requires_grad = false;
    bool backward_done = false;  // set on the root; guards re-entry
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node>> inputs;
    // Pulls from this node's grad and accumulates into the inputs' grads.
    std::function<void(Node&)> backprop;

    std::size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

std::uint64_t next_seq();

}  // namespace detail

// Disables tape recording in the current thread for its lifetime. Forward
// values are unchanged; only the backward graph is suppressed. Used for
// evaluation loops and the numeric side of gradient checks.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Dense row-major tensor of 64-bit reals. A Tensor is a cheap handle onto a
// graph node; copies share the node. Values are immutable once an op has
// recorded them, except for leaf parameters which the optimizer updates
// in between forward passes via mutable_values().
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int dim(int i) const;
    std::size_t numel() const;
    const std::vector<double>& values() const;
    double item() const;  // throws ShapeError unless numel() == 1

    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;  // throws StateError if absent
    void zero_grad();

    // Leaf-parameter update hook. Throws StateError on non-leaf tensors.
    double* mutable_values();
    void set_values(std::span<const double> v);

    // Stable identity of the underlying node.
    const void* node_id() const { return node_.get(); }

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// ---- forward ops ------------------------------------------------------
// Each op computes the textbook value and, when recording is enabled and any
// input requires grad, records a node with the local-gradient closure.

Tensor add(const Tensor& a, const Tensor& b);  // same shape, or b a row vector added to each row of 2-D a
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor div(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

Tensor relu(const Tensor& a);
Tensor silu(const Tensor& a);  // x * sigmoid(x), smooth everywhere
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);  // log(1 + e^x), numerically stable
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor softmax(const Tensor& a, int axis);  // 1-D or 2-D

Tensor sum(const Tensor& a);   // -> scalar, shape {1}
Tensor mean(const Tensor& a);  // -> scalar, shape {1}
Tensor mean_axis0(const Tensor& a);  // [R,C] -> [1,C]

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);  // 2-D, axis 0 or 1
Tensor slice_cols(const Tensor& a, int c0, int c1);         // 2-D column range
Tensor take_rows(const Tensor& a, const std::vector<int>& rows);  // 2-D row gather
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor upsample_nearest(const Tensor& grid, int factor);  // [h,w] -> [h*f, w*f]

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Reverse pass from a scalar loss. Accumulates d(loss)/d(x) into the grad of
// every reachable tensor with requires_grad. The loss's tape is consumed: a
// second backward through the same root throws StateError.
void backward(const Tensor& loss);

}  // namespace paewc
