#include "msnet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "msnet/error.hpp"

namespace msnet {

const char* to_string(ErrorCategory cat) {
    switch (cat) {
        case ErrorCategory::usage: return "usage";
        case ErrorCategory::io: return "io";
        case ErrorCategory::parse: return "parse";
        case ErrorCategory::shape: return "shape";
        case ErrorCategory::config: return "config";
        case ErrorCategory::numeric: return "numeric";
        case ErrorCategory::state: return "state";
    }
    return "unknown";
}

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return shape.empty() ? 0 : n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

void Node::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

}  // namespace detail

static std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values,
                                               bool requires_grad) {
    for (int e : shape) {
        if (e <= 0) fail(ErrorCategory::shape, "tensor extents must be positive, got " + shape_str(shape));
    }
    if (shape.empty()) fail(ErrorCategory::shape, "tensor shape must have at least one extent");
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
        fail(ErrorCategory::shape, "value count " + std::to_string(values.size()) +
                                       " does not match shape " + shape_str(shape));
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    n->leaf = true;
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)), value);
    return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev, bool requires_grad) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (double& x : v) x = dist(rng);
    return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::int64_t Tensor::numel() const { return node_->numel(); }

int Tensor::dim(int axis) const {
    if (axis < 0 || axis >= static_cast<int>(node_->shape.size()))
        fail(ErrorCategory::shape, "axis out of range");
    return node_->shape[static_cast<std::size_t>(axis)];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
    if (!node_->leaf) fail(ErrorCategory::state, "requires_grad can only be toggled on leaf tensors");
    node_->requires_grad = value;
    if (!value) node_->grad.clear();
}

std::vector<double>& Tensor::values() { return node_->values; }
const std::vector<double>& Tensor::values() const { return node_->values; }

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->values.size(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) fail(ErrorCategory::state, "tensor has no gradient allocated");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->requires_grad) return;
    node_->ensure_grad();
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1) fail(ErrorCategory::shape, "item() requires a scalar tensor, got " + shape_str(shape()));
    return node_->values[0];
}

double& Tensor::at4(int n, int c, int y, int x) {
    const Shape& s = node_->shape;
    if (s.size() != 4) fail(ErrorCategory::shape, "at4 requires a 4-D tensor");
    return node_->values[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * s[1] + c) * s[2] + y) * s[3] + x)];
}

double Tensor::at4(int n, int c, int y, int x) const {
    return const_cast<Tensor*>(this)->at4(n, c, y, x);
}

Tensor Tensor::detached_copy(bool requires_grad) const {
    return from_values(node_->shape, node_->values, requires_grad);
}

int Tensor::backward_visits() const { return node_->backward_visits; }
const char* Tensor::op_name() const { return node_->op; }

namespace detail {

Tensor make_op_node(const char* op, Shape shape, std::vector<double> values,
                    std::vector<std::shared_ptr<Node>> parents,
                    std::function<void(Node&)> backward_fn) {
    bool track = false;
    for (const auto& p : parents)
        if (p->requires_grad) track = true;
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->op = op;
    n->leaf = false;
    n->requires_grad = track;
    if (track) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(n));
}

}  // namespace detail

BackwardStats backward(const Tensor& loss) {
    if (!loss.defined()) fail(ErrorCategory::state, "backward: undefined tensor");
    if (loss.numel() != 1)
        fail(ErrorCategory::shape, "backward requires a scalar loss, got " + shape_str(loss.shape()));

    using detail::Node;
    Node* root = loss.node().get();

    // Iterative post-order DFS; "order" ends topologically sorted
    // (parents before children never guaranteed, children appended after
    // their parents have been fully expanded), so we walk it in reverse.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    if (root->requires_grad || !root->leaf) {
        stack.emplace_back(root, 0);
        seen.insert(root);
    }
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Transient gradients for interior nodes; leaves accumulate.
    for (Node* n : order) {
        if (n->leaf) {
            n->ensure_grad();
        } else {
            n->grad.assign(n->values.size(), 0.0);
        }
    }
    root->ensure_grad();
    root->grad[0] += 1.0;

    BackwardStats stats;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        ++n->backward_visits;
        ++stats.nodes_visited;
        if (n->backward_fn) n->backward_fn(*n);
    }
    return stats;
}

}  // namespace msnet
