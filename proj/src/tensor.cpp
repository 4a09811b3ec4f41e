#include "rcdt/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_set>

#include "rcdt/errors.hpp"

namespace rcdt {

namespace {

std::atomic<std::uint64_t> next_node_id{1};
thread_local bool recording = true;

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel(shape) != values.size())
        throw DimensionError("tensor shape " + shape_str(shape) + " holds " + std::to_string(numel(shape)) +
                             " values, got " + std::to_string(values.size()));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    node->op = "leaf";
    return node;
}

}  // namespace

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

std::span<double> Node::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
    const std::size_t n = rcdt::numel(shape);
    node_ = new_node(std::move(shape), std::vector<double>(n, fill), requires_grad);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(new_node(std::move(shape), std::move(values), requires_grad)) {}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor(Shape{1}, {value}, requires_grad); }

int Tensor::dim(int axis) const {
    const int r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw DimensionError("axis out of range for shape " + shape_str(shape()));
    return node_->shape[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data, false); }

std::vector<const Node*> topological_order(const Tensor& root) {
    std::vector<const Node*> order;
    if (!root.defined() || !root.requires_grad()) return order;
    std::unordered_set<const Node*> seen;
    // Iterative post-order DFS; (node, next parent index) frames.
    std::vector<std::pair<const Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            const Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

void backward(const Tensor& root) {
    if (root.numel() != 1)
        throw DimensionError("backward() without a seed needs a single-element root, got " + shape_str(root.shape()));
    const double one = 1.0;
    backward(root, std::span<const double>(&one, 1));
}

void backward(const Tensor& root, std::span<const double> seed) {
    if (seed.size() != root.numel())
        throw DimensionError("backward seed has " + std::to_string(seed.size()) + " values for root " +
                             shape_str(root.shape()));
    if (!root.requires_grad()) return;
    auto order = topological_order(root);
    auto root_grad = root.node()->grad_buffer();
    for (std::size_t i = 0; i < seed.size(); ++i) root_grad[i] += seed[i];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
    // Release the recorded graph; leaves keep their accumulated gradients.
    for (const Node* node : order) {
        auto* mut = const_cast<Node*>(node);
        if (mut->backward) {
            mut->backward = nullptr;
            mut->parents.clear();
        }
    }
}

bool grad_enabled() { return recording; }

NoGradGuard::NoGradGuard() : previous_(recording) { recording = false; }
NoGradGuard::~NoGradGuard() { recording = previous_; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                   std::initializer_list<Tensor> parents, std::function<void(const Node&)> backward) {
    bool needs = false;
    if (recording)
        for (const auto& p : parents) needs = needs || p.requires_grad();
    auto node = new_node(std::move(shape), std::move(values), needs);
    node->op = op;
    if (needs) {
        node->parents.reserve(parents.size());
        for (const auto& p : parents) node->parents.push_back(p.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

std::span<double> grad_target(const Node& self, std::size_t parent) {
    Node& p = *self.parents[parent];
    if (!p.requires_grad) return {};
    return p.grad_buffer();
}

}  // namespace detail

}  // namespace rcdt
