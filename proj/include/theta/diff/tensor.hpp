#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace theta::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until something flows into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Propagates this node's grad into its parents' grads.
    std::function<void(Node&)> backward;

    void accumulate(std::span<const double> g);
    std::vector<double>& grad_buffer();
};

// Handle to a node in a define-by-run computation graph. Copies share the
// underlying node, so a parameter tensor held by a network and the same
// tensor referenced from a loss graph see the same gradient buffer.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor filled(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value);

    // Result of an operation; checks finiteness and wires the backward closure.
    static Tensor make(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                       std::function<void(Node&)> backward, const char* op_name);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t last_dim() const { return node_->shape.back(); }
    std::size_t outer() const { return numel() / last_dim(); }

    std::span<const double> values() const { return node_->value; }
    // Direct write access; intended for parameter initialization and
    // optimizer updates, never for tensors inside a live graph.
    std::span<double> mutable_values() { return node_->value; }
    double item() const;
    double at(std::size_t i) const { return node_->value[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); }

    // Copy of the values with no history.
    Tensor detach() const;

    // Reverse-mode sweep from this scalar. Leaf gradients accumulate.
    void backward() const;

    Node& node() const { return *node_; }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

}  // namespace theta::diff
