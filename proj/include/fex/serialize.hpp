#pragma once

#include <json.hpp>

#include "fex/tree.hpp"

namespace fex {

// Checkpoint record: {"depth", "dim", "ops", "theta"}. Operator indices are
// preorder slots into the fixed alphabets; theta uses the documented
// leaves-then-interior-then-root layout.
inline nlohmann::json tree_to_json(const ExpressionTree& tree) {
    return nlohmann::json{{"depth", tree.topo.depth},
                          {"dim", tree.topo.input_dim},
                          {"ops", tree.ops.e},
                          {"theta", tree.theta}};
}

inline ExpressionTree tree_from_json(const nlohmann::json& j) {
    const int depth = j.at("depth").get<int>();
    const int dim = j.at("dim").get<int>();
    OperatorSequence ops{j.at("ops").get<std::vector<int>>()};
    std::vector<double> theta = j.at("theta").get<std::vector<double>>();
    return ExpressionTree(build_topology(depth, dim), std::move(ops), std::move(theta));
}

}  // namespace fex
