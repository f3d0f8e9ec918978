#pragma once

// Reverse-mode autodiff over dense row-major arrays. A forward pass builds a
// fresh graph of shared nodes (define-by-run); backward() walks it once in
// reverse topological order. Parameters are long-lived leaf tensors whose
// gradients accumulate until zero_grad().

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace masc::diff {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

[[noreturn]] inline void op_error(const std::string& op, const std::string& what) {
    throw std::invalid_argument(op + ": " + what);
}

template <typename S>
struct Node {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;  // empty until backward reaches this node
    std::vector<std::shared_ptr<Node<S>>> parents;
    // Accumulates this node's grad into its parents' grads.
    std::function<void(Node<S>&)> pull;
    std::int64_t id = 0;

    std::int64_t numel() const { return shape_numel(shape); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), S(0));
    }
};

inline std::int64_t next_node_id() {
    static std::int64_t counter = 0;
    return ++counter;
}

template <typename S>
class TensorT {
public:
    using Scalar = S;

    TensorT() = default;
    explicit TensorT(std::shared_ptr<Node<S>> n) : node_(std::move(n)) {}

    static TensorT zeros(Shape shape) {
        return filled(std::move(shape), S(0));
    }
    static TensorT filled(Shape shape, S v) {
        auto n = std::make_shared<Node<S>>();
        n->value.assign(static_cast<size_t>(shape_numel(shape)), v);
        n->shape = std::move(shape);
        n->id = next_node_id();
        return TensorT(std::move(n));
    }
    static TensorT from(Shape shape, std::vector<S> data) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            op_error("Tensor::from", "shape " + shape_str(shape) + " does not hold " +
                                         std::to_string(data.size()) + " values");
        auto n = std::make_shared<Node<S>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->id = next_node_id();
        return TensorT(std::move(n));
    }
    static TensorT scalar_of(S v) { return filled({1}, v); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->numel(); }

    S* data() { return node_->value.data(); }
    const S* data() const { return node_->value.data(); }
    std::vector<S>& values() { return node_->value; }
    const std::vector<S>& values() const { return node_->value; }

    bool has_grad() const { return defined() && !node_->grad.empty(); }
    std::vector<S>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<S>& grad() const { return node_->grad; }
    void zero_grad() {
        if (defined()) node_->grad.assign(node_->value.size(), S(0));
    }

    S item() const {
        if (numel() != 1) op_error("Tensor::item", "tensor " + shape_str(shape()) + " is not scalar");
        return node_->value[0];
    }

    std::shared_ptr<Node<S>>& node() { return node_; }
    const std::shared_ptr<Node<S>>& node() const { return node_; }

private:
    std::shared_ptr<Node<S>> node_;
};

namespace detail {

// Iterative post-order DFS; returns nodes with every parent before its users.
template <typename S>
std::vector<Node<S>*> topo_order(Node<S>* root) {
    std::vector<Node<S>*> order;
    std::unordered_set<Node<S>*> done;
    std::vector<std::pair<Node<S>*, size_t>> stack;
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (done.count(n)) {
            stack.pop_back();
            continue;
        }
        if (next < n->parents.size()) {
            Node<S>* p = n->parents[next++].get();
            if (!done.count(p)) stack.emplace_back(p, 0);
        } else {
            done.insert(n);
            order.push_back(n);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace detail

// Seeds d(loss)/d(loss) = 1 and propagates. Leaf gradients accumulate across
// calls; interior (op) gradients are per-pass scratch and reset here.
template <typename S>
void backward(const TensorT<S>& loss) {
    if (!loss.defined() || loss.numel() != 1)
        op_error("backward", "loss must be a defined scalar tensor");
    auto order = detail::topo_order<S>(loss.node().get());
    for (Node<S>* n : order) {
        if (n->parents.empty())
            n->ensure_grad();
        else
            n->grad.assign(n->value.size(), S(0));
    }
    loss.node()->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<S>* n = *it;
        if (n->pull) n->pull(*n);
    }
}

template <typename S>
void zero_grads(std::vector<TensorT<S>>& params) {
    for (auto& p : params) p.zero_grad();
}

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace masc::diff
