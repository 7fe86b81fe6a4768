#pragma once

#include <stdexcept>
#include <vector>

#include "fex/ops.hpp"

namespace fex {

enum class NodeKind { unary_leaf, unary_interior, unary_root, binary };

inline bool is_unary(NodeKind k) { return k != NodeKind::binary; }

// Fixed tree shapes in preorder. Depth 3:
//   [root, +/-/*, leaf, leaf]
// Depth 5:
//   [root, bin, interior, bin, leaf, leaf, interior, bin, leaf, leaf]
// Leaf nodes reduce the d-dimensional input to a scalar with a scale vector
// alpha in R^d and a bias; interior and root unary nodes carry a scalar
// (alpha, beta) pair.
struct TreeTopology {
    struct Node {
        NodeKind kind;
        int left = -1;   // binary children (preorder indices)
        int right = -1;
        int child = -1;  // unary child; -1 for leaves
    };

    int depth = 0;
    int input_dim = 0;
    std::vector<Node> nodes;        // preorder
    std::vector<int> param_offset;  // per node, -1 for binary nodes
    int param_count = 0;

    int slot_count() const { return int(nodes.size()); }

    int params_of(int node) const { return nodes[node].kind == NodeKind::unary_leaf ? input_dim + 1 : 2; }

    int leaf_count() const {
        int n = 0;
        for (const auto& nd : nodes) n += nd.kind == NodeKind::unary_leaf;
        return n;
    }
};

// Parameter vector layout: leaves left-to-right ([alpha_1..alpha_d, beta]
// each), then interior unary nodes left-to-right, then the root ([alpha,
// beta] each). This matches the order coefficients are reported in.
inline TreeTopology build_topology(int depth, int input_dim) {
    if (depth != 3 && depth != 5)
        throw std::invalid_argument("build_topology: depth must be 3 or 5");
    if (input_dim < 1)
        throw std::invalid_argument("build_topology: input_dim must be >= 1");

    TreeTopology t;
    t.depth = depth;
    t.input_dim = input_dim;

    using K = NodeKind;
    if (depth == 3) {
        t.nodes = {
            {K::unary_root, -1, -1, 1},
            {K::binary, 2, 3, -1},
            {K::unary_leaf},
            {K::unary_leaf},
        };
    } else {
        t.nodes = {
            {K::unary_root, -1, -1, 1},
            {K::binary, 2, 6, -1},
            {K::unary_interior, -1, -1, 3},
            {K::binary, 4, 5, -1},
            {K::unary_leaf},
            {K::unary_leaf},
            {K::unary_interior, -1, -1, 7},
            {K::binary, 8, 9, -1},
            {K::unary_leaf},
            {K::unary_leaf},
        };
    }

    t.param_offset.assign(t.nodes.size(), -1);
    int off = 0;
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        if (t.nodes[i].kind == K::unary_leaf) {
            t.param_offset[i] = off;
            off += input_dim + 1;
        }
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        if (t.nodes[i].kind == K::unary_interior) {
            t.param_offset[i] = off;
            off += 2;
        }
    t.param_offset[0] = off;
    off += 2;
    t.param_count = off;
    return t;
}

}  // namespace fex
