#include "avtca/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace avtca {

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

template <typename S>
void backward(const Tensor<S>& root) {
    if (!root.defined()) throw Error("backward on null tensor");
    if (root.size() != 1)
        throw ShapeError("backward requires a scalar root, got " + shape_str(root.shape()));
    if (!root.requires_grad()) return;

    using NodeT = detail::Node<S>;

    // Iterative post-order DFS: parents are pushed before the node itself,
    // so the reversed list runs every child before its parents.
    std::vector<NodeT*> order;
    std::unordered_set<NodeT*> visited;
    std::vector<std::pair<NodeT*, size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodeT* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad();
    root.node()->grad[0] += S(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT* node = *it;
        if (node->backward) node->backward(*node);
    }
}

template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace avtca
