#include "mebm/tensor.hpp"

#include "mebm/error.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

namespace mebm {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace detail {

void Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

}  // namespace detail

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) { node_->value.assign(1, 0.0); }

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    for (std::size_t e : shape) {
        if (e == 0 && !values.empty())
            throw ConfigError("tensor extent 0 with nonempty payload " + shape_str(shape));
    }
    if (shape_numel(shape) != values.size()) {
        throw ConfigError("tensor shape " + shape_str(shape) + " does not match " +
                          std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ConfigError("ragged matrix literal");
        v.insert(v.end(), row.begin(), row.end());
    }
    return from({r, c}, std::move(v), requires_grad);
}

double Tensor::at(std::size_t row, std::size_t col) const {
    if (rank() != 2) throw ConfigError("at(row, col) on tensor of shape " + shape_str(shape()));
    return node_->value.at(row * dim(1) + col);
}

double Tensor::item() const {
    if (numel() != 1) throw ConfigError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

std::span<double> Tensor::mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
}

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

void Tensor::backward() const {
    if (numel() != 1) {
        throw ConfigError("backward() needs a scalar root, got shape " + shape_str(shape()));
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (parents before children).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (detail::Node* n : order) {
        if (n->is_leaf()) {
            n->ensure_grad();
        } else {
            n->grad.assign(n->value.size(), 0.0);
        }
    }
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (!n->is_leaf()) n->backward_fn(*n);
    }
}

}  // namespace mebm
