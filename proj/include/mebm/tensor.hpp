#pragma once

// Dense double-precision tensor with reverse-mode differentiation.
//
// A Tensor is a shared handle onto a graph node. Operations in ops.hpp record
// their inputs and a local gradient rule on the output node whenever any input
// requires a gradient; the parent links form the compute graph. backward() on
// a scalar root orders the reachable nodes topologically and runs each rule
// exactly once, in reverse. Leaf gradients accumulate across calls until
// zero_grad(); interior gradients are recomputed per call.
//
// A graph and its tensors belong to one thread while a forward/backward pass
// is in flight. detach() produces a fresh leaf that can cross threads.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mebm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until a backward pass reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    void ensure_grad();
};

}  // namespace detail

class Tensor {
public:
    // A rank-0 zero constant.
    Tensor();

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor filled(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Convenience for tests: a B×D matrix from nested rows.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad = false);

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t numel() const { return node_->value.size(); }

    std::span<const double> values() const { return node_->value; }
    // Writing through this span bypasses the graph; only use it on leaves.
    std::span<double> mutable_values() { return node_->value; }
    double operator[](std::size_t i) const { return node_->value[i]; }
    double at(std::size_t row, std::size_t col) const;
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad();
    void zero_grad() { node_->grad.clear(); }
    bool is_leaf() const { return node_->is_leaf(); }

    // A new leaf holding a copy of the values and no history.
    Tensor detach() const;

    // Propagates d(this)/d(ancestor) into every reachable requires_grad ancestor.
    void backward() const;

    // Graph plumbing for ops.
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

}  // namespace mebm
