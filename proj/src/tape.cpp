#include "cornet/tape.hpp"

namespace cornet {

std::size_t shape_size(const Tape::Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

Tape::Var Tape::leaf(std::vector<double> value, Shape shape, bool requires_grad) {
    if (shape_size(shape) != value.size()) throw Error(ErrorCode::ShapeMismatch, "leaf value does not match its shape");
    Node n;
    n.value = std::move(value);
    n.shape = std::move(shape);
    n.needs_grad = requires_grad;
    if (requires_grad) n.grad.assign(n.value.size(), 0.0);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

Tape::Var Tape::leaf(const DenseMatrix& m, bool requires_grad) {
    return leaf(m.storage(), {m.rows(), m.cols()}, requires_grad);
}

Tape::Var Tape::record(std::vector<double> value, Shape shape, std::vector<Var> inputs, Backward backward) {
    if (shape_size(shape) != value.size()) throw Error(ErrorCode::ShapeMismatch, "node value does not match its shape");
    Node n;
    n.value = std::move(value);
    n.shape = std::move(shape);
    for (Var v : inputs) {
        if (v >= nodes_.size()) throw Error(ErrorCode::InvalidArgument, "tape input recorded after its consumer");
        n.needs_grad = n.needs_grad || nodes_[v].needs_grad;
    }
    if (n.needs_grad) {
        n.grad.assign(n.value.size(), 0.0);
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

void Tape::accumulate(Var v, std::span<const double> g) { accumulate_at(v, 0, g); }

void Tape::accumulate_at(Var v, std::size_t offset, std::span<const double> g) {
    Node& n = nodes_[v];
    if (!n.needs_grad) return;
    if (offset + g.size() > n.grad.size()) throw Error(ErrorCode::ShapeMismatch, "adjoint larger than the node value");
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[offset + i] += g[i];
}

void Tape::backward(Var root, double seed) {
    if (nodes_[root].value.size() != 1) throw Error(ErrorCode::ShapeMismatch, "backward root must be a scalar");
    if (!nodes_[root].needs_grad) return;
    nodes_[root].grad[0] += seed;
    for (std::size_t i = root + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || !n.backward) continue;
        bool zero = true;
        for (double g : n.grad)
            if (g != 0.0) {
                zero = false;
                break;
            }
        if (zero) continue;
        // the closure may grow other nodes' adjoints but never this node's
        const std::vector<double> g = n.grad;
        n.backward(*this, g);
    }
}

DenseMatrix Tape::channel(Var v, std::size_t k) const {
    const Node& n = nodes_[v];
    if (n.shape.size() != 3 || n.shape[1] != n.shape[2] || k >= n.shape[0])
        throw Error(ErrorCode::ShapeMismatch, "expected a [channels, n, n] stack");
    const std::size_t d = n.shape[1];
    DenseMatrix m(d, d);
    std::copy(n.value.begin() + k * d * d, n.value.begin() + (k + 1) * d * d, m.data().begin());
    return m;
}

}  // namespace cornet
