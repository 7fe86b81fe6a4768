#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fex/ops.hpp"
#include "fex/rng.hpp"
#include "fex/topology.hpp"

namespace fex {

// Operator assignment, one entry per preorder slot: unary slots index into
// the unary alphabet, binary slots into the binary one.
struct OperatorSequence {
    std::vector<int> e;
};

inline void validate_ops(const TreeTopology& topo, const OperatorSequence& ops) {
    if (int(ops.e.size()) != topo.slot_count())
        throw std::invalid_argument("operator sequence length does not match topology");
    for (int i = 0; i < topo.slot_count(); ++i) {
        const int limit = is_unary(topo.nodes[i].kind) ? kUnaryCount : kBinaryCount;
        if (ops.e[i] < 0 || ops.e[i] >= limit)
            throw std::invalid_argument("operator index out of range at slot " + std::to_string(i));
    }
}

// A candidate solution u(x) = tree(x; ops, theta). Immutable by convention
// once built; evaluation never mutates, so trees can be shared across
// threads freely.
struct ExpressionTree {
    TreeTopology topo;
    OperatorSequence ops;
    std::vector<double> theta;

    ExpressionTree() = default;
    ExpressionTree(TreeTopology t, OperatorSequence o, std::vector<double> params)
        : topo(std::move(t)), ops(std::move(o)), theta(std::move(params)) {
        validate_ops(topo, ops);
        if (int(theta.size()) != topo.param_count)
            throw std::invalid_argument("theta size does not match topology");
    }

    double leaf_alpha(int leaf_node, int j) const {
        return theta[std::size_t(topo.param_offset[leaf_node] + j)];
    }
    double node_alpha(int node) const { return theta[std::size_t(topo.param_offset[node])]; }
    double node_beta(int node) const {
        const int n = topo.nodes[node].kind == NodeKind::unary_leaf ? topo.input_dim : 1;
        return theta[std::size_t(topo.param_offset[node] + n)];
    }
};

inline std::vector<double> random_theta(const TreeTopology& topo, Rng& rng) {
    std::vector<double> theta(std::size_t(topo.param_count));
    for (auto& v : theta) v = rng.uniform(-1.0, 1.0);
    return theta;
}

// Zeroes every leaf scale entry with |alpha| < tau. Biases and the scalar
// parameters of interior/root nodes are untouched. Idempotent.
inline ExpressionTree filter_coefficients(const ExpressionTree& tree, double tau) {
    if (tau < 0.0) throw std::invalid_argument("filter_coefficients: tau must be >= 0");
    ExpressionTree out = tree;
    for (int i = 0; i < tree.topo.slot_count(); ++i) {
        if (tree.topo.nodes[i].kind != NodeKind::unary_leaf) continue;
        const int off = tree.topo.param_offset[i];
        for (int j = 0; j < tree.topo.input_dim; ++j)
            if (std::abs(out.theta[std::size_t(off + j)]) < tau) out.theta[std::size_t(off + j)] = 0.0;
    }
    return out;
}

// Mask of theta entries zeroed by filtering; used to freeze them during the
// post-filter refit.
inline std::vector<bool> filtered_mask(const ExpressionTree& before, const ExpressionTree& after) {
    std::vector<bool> frozen(before.theta.size(), false);
    for (std::size_t i = 0; i < before.theta.size(); ++i)
        frozen[i] = after.theta[i] == 0.0 && before.theta[i] != 0.0;
    return frozen;
}

}  // namespace fex
