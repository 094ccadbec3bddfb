#include "theta/diff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "theta/errors.hpp"

namespace theta::diff {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) {
        n *= s;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "," : "") << shape[i];
    }
    out << ']';
    return out.str();
}

std::vector<double>& Node::grad_buffer() {
    if (grad.empty()) {
        grad.assign(value.size(), 0.0);
    }
    return grad;
}

void Node::accumulate(std::span<const double> g) {
    if (!requires_grad) {
        return;
    }
    auto& buf = grad_buffer();
    for (std::size_t i = 0; i < buf.size(); ++i) {
        buf[i] += g[i];
    }
}

namespace {

// Exponent-bit scan; branch-free so the loop vectorizes.
bool all_finite(const std::vector<double>& v) {
    std::uint64_t bad = 0;
    const double* p = v.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, p + i, sizeof bits);
        bad |= static_cast<std::uint64_t>((bits & 0x7ff0000000000000ULL) == 0x7ff0000000000000ULL);
    }
    return bad == 0;
}

void validate_shape(const Shape& shape, std::size_t count) {
    if (shape.empty()) {
        throw ConfigError("tensor shape must have at least one axis");
    }
    for (std::size_t s : shape) {
        if (s == 0) {
            throw ConfigError("tensor shape entries must be positive: " + shape_str(shape));
        }
    }
    if (shape_numel(shape) != count) {
        throw ConfigError("tensor shape " + shape_str(shape) + " does not match " + std::to_string(count) +
                          " values");
    }
}

}  // namespace

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    validate_shape(shape, values.size());
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::make(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                    std::function<void(Node&)> backward, const char* op_name) {
    if (!all_finite(values)) {
        throw NumericError(std::string("non-finite value produced by ") + op_name);
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    for (auto& p : parents) {
        node->requires_grad = node->requires_grad || p.requires_grad();
    }
    if (node->requires_grad) {
        node->parents.reserve(parents.size());
        for (auto& p : parents) {
            node->parents.push_back(p.node_);
        }
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

double Tensor::item() const {
    if (numel() != 1) {
        throw UsageError("item() on tensor of shape " + shape_str(shape()));
    }
    return node_->value[0];
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

void Tensor::backward() const {
    if (numel() != 1) {
        throw UsageError("backward() requires a scalar loss, got shape " + shape_str(shape()));
    }
    if (!requires_grad()) {
        return;
    }

    // Iterative post-order DFS; parents precede children in `order`.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (n->backward) {
            n->grad.clear();
        }
    }
    node_->grad_buffer()[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) {
            n->backward(*n);
        }
    }
    for (Node* n : order) {
        if (!all_finite(n->grad)) {
            throw NumericError("non-finite gradient during backward");
        }
    }
}

}  // namespace theta::diff
