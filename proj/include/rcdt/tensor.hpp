#pragma once

// Dense row-major double tensor with reverse-mode differentiation.
//
// A Tensor is a shared handle onto a graph node: copying a Tensor aliases the
// same storage and gradient. Ops record their inputs and a backward closure
// whenever gradient recording is enabled and at least one input requires a
// gradient; `backward` then sweeps the recorded graph in reverse topological
// order and accumulates into every reachable `grad` buffer.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rcdt {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a gradient reaches the node
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::string op;  // "leaf" for tensors not produced by an op
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(const Node&)> backward;

    std::span<double> grad_buffer();
};

class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int axis) const;
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<double> data() { return node_->data; }
    std::span<const double> data() const { return node_->data; }
    double operator[](std::size_t i) const { return node_->data[i]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return !node_->grad.empty(); }
    // Gradient buffer; allocated as zeros on first access.
    std::span<double> grad() { return node_->grad_buffer(); }
    std::span<const double> grad() const { return node_->grad_buffer(); }
    void zero_grad();

    std::uint64_t id() const { return node_->id; }
    const std::string& op() const { return node_->op; }
    const std::shared_ptr<Node>& node() const { return node_; }
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    // Fresh leaf holding a copy of the values, cut from the graph.
    Tensor detach() const;
    Tensor clone() const { return detach(); }

   private:
    std::shared_ptr<Node> node_;
};

// Backward sweep seeded with d(root)/d(root) = 1; root must hold one element.
void backward(const Tensor& root);
// Backward sweep with an explicit upstream gradient of root's shape.
void backward(const Tensor& root, std::span<const double> seed);

// Nodes reachable from root that take part in differentiation, ordered so
// every node precedes the nodes computed from it.
std::vector<const Node*> topological_order(const Tensor& root);

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool previous_;
};

namespace detail {

// Builds an op result. Records `parents` and `backward` only when recording
// is enabled and some parent requires a gradient.
Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                   std::initializer_list<Tensor> parents, std::function<void(const Node&)> backward);

// Accumulation target for a parent, or an empty span if it needs no gradient.
std::span<double> grad_target(const Node& self, std::size_t parent);

}  // namespace detail

}  // namespace rcdt
