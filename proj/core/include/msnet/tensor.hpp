#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace msnet {

// Extents of a dense tensor. 4-D tensors are laid out N x C x H x W,
// row-major; a scalar is represented as shape {1}.
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated lazily; leaves accumulate across backward calls
    bool requires_grad = false;
    bool leaf = true;
    int backward_visits = 0;  // instrumentation: backward() bumps this once per pass
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad and scatters vector-Jacobian products into parents' grad.
    std::function<void(Node&)> backward_fn;

    std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
    void ensure_grad();
};

}  // namespace detail

// Dense double-precision tensor participating in a define-by-run autodiff
// graph. Copying a Tensor copies a handle to the same storage/node.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    // N(0, stddev^2) entries drawn sequentially from rng.
    static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0,
                        bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t numel() const;
    int dim(int axis) const;
    bool requires_grad() const;
    void set_requires_grad(bool value);  // leaves only

    std::vector<double>& values();
    const std::vector<double>& values() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    // Value of a scalar tensor (numel() == 1).
    double item() const;
    double& at4(int n, int c, int y, int x);
    double at4(int n, int c, int y, int x) const;

    // Deep value copy that is detached from the graph.
    Tensor detached_copy(bool requires_grad = false) const;

    int backward_visits() const;
    const char* op_name() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<detail::Node> node_;
};

struct BackwardStats {
    std::size_t nodes_visited = 0;
};

// Reverse accumulation from a scalar loss. Gradients of requires-grad leaves
// accumulate additively across calls; intermediate gradients are transient.
// Each reachable graph node is visited exactly once, in reverse topological
// order.
BackwardStats backward(const Tensor& loss);

namespace detail {
// Op-construction helper shared by ops.cpp.
Tensor make_op_node(const char* op, Shape shape, std::vector<double> values,
                    std::vector<std::shared_ptr<Node>> parents,
                    std::function<void(Node&)> backward_fn);
}  // namespace detail

}  // namespace msnet
