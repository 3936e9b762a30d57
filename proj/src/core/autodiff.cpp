#include "hafno/core/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

namespace hafno {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor& Node::grad_buffer() {
    if (grad.shape() != value.shape() || grad.size() != value.size()) grad = Tensor(value.shape());
    return grad;
}

Var leaf(Tensor value, bool requires_grad, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->op = std::move(name);
    return n;
}

Var constant(Tensor value) { return leaf(std::move(value), false, "constant"); }

Var make_result(Tensor value, std::vector<Var> parents, std::string op, std::function<void(Node&)> backward_fn) {
    if (!value.all_finite()) {
        throw std::domain_error("non-finite value produced by " + op);
    }
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->op = std::move(op);
    bool any = false;
    for (const auto& p : parents) any = any || p->requires_grad;
    if (any && g_grad_enabled) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

namespace {

std::vector<Node*> topological_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    // (node, next parent index) stack
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

}  // namespace

void backward(const Var& loss) {
    if (loss->value.size() != 1) {
        throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(loss->shape()));
    }
    if (!loss->requires_grad) return;
    auto order = topological_order(loss.get());
    for (Node* n : order) {
        if (!n->is_leaf()) n->grad = Tensor(n->value.shape());
    }
    loss->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->is_leaf()) n->backward_fn(*n);
    }
}

void zero_grad(std::span<const Var> vars) {
    for (const auto& v : vars) v->grad = Tensor(v->value.shape());
}

}  // namespace hafno
