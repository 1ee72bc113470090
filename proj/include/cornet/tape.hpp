#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cornet/linalg.hpp"

namespace cornet {

/// Reverse-mode recorder. Every node holds a flat value with a shape; backward walks the
/// nodes in reverse recording order and calls each node's adjoint closure once.
class Tape {
public:
    using Var = std::size_t;
    using Shape = std::vector<std::size_t>;
    /// Receives the tape and the accumulated adjoint of the node's output.
    using Backward = std::function<void(Tape&, const std::vector<double>&)>;

    Var leaf(std::vector<double> value, Shape shape, bool requires_grad = false);
    Var leaf(const DenseMatrix& m, bool requires_grad = false);
    /// Records an op. The closure is dropped if no input needs a gradient.
    Var record(std::vector<double> value, Shape shape, std::vector<Var> inputs, Backward backward);

    const std::vector<double>& value(Var v) const { return nodes_[v].value; }
    const Shape& shape(Var v) const { return nodes_[v].shape; }
    const std::vector<double>& grad(Var v) const { return nodes_[v].grad; }
    bool needs_grad(Var v) const { return nodes_[v].needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Adds g (same length as the value) into the adjoint of v, if v needs one.
    void accumulate(Var v, std::span<const double> g);
    void accumulate(Var v, const DenseMatrix& g) { accumulate(v, g.data()); }
    void accumulate_at(Var v, std::size_t offset, std::span<const double> g);

    /// Seeds the scalar root with `seed` and runs every closure in reverse order.
    void backward(Var root, double seed = 1.0);

    /// Square matrix view of channel k of a [channels, n, n] value.
    DenseMatrix channel(Var v, std::size_t k) const;

private:
    struct Node {
        std::vector<double> value;
        Shape shape;
        std::vector<double> grad;
        bool needs_grad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

std::size_t shape_size(const Tape::Shape& s);

}  // namespace cornet
