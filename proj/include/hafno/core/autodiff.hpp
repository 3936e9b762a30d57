#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hafno/core/tensor.hpp"

namespace hafno {

struct Node;
using Var = std::shared_ptr<Node>;

/// A value in a reverse-mode computation graph.
///
/// Leaves hold parameters or inputs; interior nodes keep their parents and a
/// backward rule that scatters `grad` into the parents' gradients. Nodes whose
/// parents all have requires_grad == false drop their parents, so inference
/// graphs release intermediates as soon as they go out of scope.
struct Node {
    Tensor value;
    Tensor grad;  // empty until first touched
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;
    std::string op = "leaf";

    const Shape& shape() const noexcept { return value.shape(); }
    bool is_leaf() const noexcept { return !backward_fn; }

    /// Gradient buffer, zero-initialised on first access.
    Tensor& grad_buffer();
};

Var leaf(Tensor value, bool requires_grad = true, std::string name = "leaf");
Var constant(Tensor value);

/// Builds an interior node. `value` must be finite; the backward rule is kept
/// only if at least one parent requires a gradient.
Var make_result(Tensor value, std::vector<Var> parents, std::string op, std::function<void(Node&)> backward_fn);

/// Populates gradients of every requires_grad leaf reachable from `loss`.
/// Leaf gradients accumulate across calls; call zero_grad to reset.
void backward(const Var& loss);

void zero_grad(std::span<const Var> vars);

/// While alive, make_result records no parents on this thread (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

}  // namespace hafno
