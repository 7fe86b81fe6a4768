#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fex/ops.hpp"
#include "fex/tree.hpp"

namespace fex {

// Coefficients are printed with 4 decimals, trailing zeros trimmed.
inline std::string format_coeff(double x) {
    if (x == 0.0) x = 0.0;  // normalize -0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

namespace detail {

struct Rendered {
    bool is_const = false;
    double value = 0.0;
    std::string str;
    bool is_sum = false;   // contains top-level +/-
    bool is_atom = false;  // single token, safe to use unparenthesized in products
};

inline std::string unary_call(int op, const std::string& arg) {
    switch (op) {
        case kId: return arg;
        case kSquare: return arg + "^2";
        case kCube: return arg + "^3";
        case kQuartic: return arg + "^4";
        case kExp: return "exp(" + arg + ")";
        case kSin: return "sin(" + arg + ")";
        case kCos: return "cos(" + arg + ")";
        case kTanh: return "tanh(" + arg + ")";
        case kSigmoid: return "sigmoid(" + arg + ")";
        default: return arg;
    }
}

// Joins signed terms as "t1 + t2 - t3". Terms arrive with their sign split
// out so "a + -b" never appears.
struct TermList {
    std::string str;
    int count = 0;

    void add(double sign_value, const std::string& body) {
        const bool neg = sign_value < 0.0;
        if (count == 0) {
            str = (neg ? "-" : "") + body;
        } else {
            str += neg ? " - " : " + ";
            str += body;
        }
        ++count;
    }
};

inline Rendered make_const(double v) {
    Rendered r;
    r.is_const = true;
    r.value = v;
    return r;
}

inline Rendered render_node(const ExpressionTree& tree, int node);

inline Rendered render_leaf(const ExpressionTree& tree, int node) {
    const auto& topo = tree.topo;
    const int d = topo.input_dim;
    const int op = tree.ops.e[std::size_t(node)];
    const double beta = tree.node_beta(node);

    if (op == kZero) return make_const(beta);
    if (op == kOne) {
        double v = beta;
        for (int j = 0; j < d; ++j) v += tree.leaf_alpha(node, j);
        return make_const(v);
    }

    TermList terms;
    for (int j = 0; j < d; ++j) {
        const double a = tree.leaf_alpha(node, j);
        if (a == 0.0) continue;
        const std::string var = "x" + std::to_string(j + 1);
        const std::string call = unary_call(op, var);
        const double mag = std::abs(a);
        terms.add(a, mag == 1.0 ? call : format_coeff(mag) + "*" + call);
    }
    if (terms.count == 0) return make_const(beta);
    if (beta != 0.0) terms.add(beta, format_coeff(std::abs(beta)));

    Rendered r;
    r.str = terms.str;
    r.is_sum = terms.count > 1;
    r.is_atom = terms.count == 1 && tree.node_beta(node) == 0.0 && r.str[0] != '-' &&
                r.str.find('*') == std::string::npos;
    return r;
}

inline std::string parenthesize(const Rendered& r) {
    if (r.is_const) return format_coeff(r.value);
    return r.is_atom ? r.str : "(" + r.str + ")";
}

inline Rendered render_binary(const ExpressionTree& tree, int node) {
    const auto& nd = tree.topo.nodes[node];
    const int op = tree.ops.e[std::size_t(node)];
    Rendered a = render_node(tree, nd.left);
    Rendered b = render_node(tree, nd.right);
    if (a.is_const && b.is_const) {
        switch (op) {
            case kAdd: return make_const(a.value + b.value);
            case kSub: return make_const(a.value - b.value);
            default: return make_const(a.value * b.value);
        }
    }
    Rendered r;
    if (op == kMul) {
        r.str = parenthesize(a) + "*" + parenthesize(b);
        return r;
    }
    const std::string lhs = a.is_const ? format_coeff(a.value) : a.str;
    std::string rhs = b.is_const ? format_coeff(b.value) : b.str;
    if (b.is_sum || (!rhs.empty() && rhs[0] == '-')) rhs = "(" + rhs + ")";
    r.str = lhs + (op == kAdd ? " + " : " - ") + rhs;
    r.is_sum = true;
    return r;
}

inline Rendered render_node(const ExpressionTree& tree, int node) {
    const auto& nd = tree.topo.nodes[node];
    if (nd.kind == NodeKind::unary_leaf) return render_leaf(tree, node);
    if (nd.kind == NodeKind::binary) return render_binary(tree, node);

    // interior/root unary: alpha * g(child) + beta
    const int op = tree.ops.e[std::size_t(node)];
    const double alpha = tree.node_alpha(node);
    const double beta = tree.node_beta(node);
    Rendered c = render_node(tree, nd.child);

    if (op == kZero) return make_const(beta);
    if (op == kOne) return make_const(alpha + beta);
    if (alpha == 0.0) return make_const(beta);
    if (c.is_const) return make_const(alpha * unary_value(op, c.value, EvalMode::report) + beta);
    if (op == kId && alpha == 1.0 && beta == 0.0) return c;

    std::string call;
    if (op == kId) {
        call = parenthesize(c);
    } else if (op == kSquare || op == kCube || op == kQuartic) {
        call = unary_call(op, "(" + c.str + ")");
    } else {
        call = unary_call(op, c.str);
    }

    TermList terms;
    const double mag = std::abs(alpha);
    terms.add(alpha, mag == 1.0 ? call : format_coeff(mag) + "*" + call);
    if (beta != 0.0) terms.add(beta, format_coeff(std::abs(beta)));

    Rendered r;
    r.str = terms.str;
    r.is_sum = terms.count > 1;
    r.is_atom = terms.count == 1 && alpha == 1.0 && op != kId;
    return r;
}

}  // namespace detail

// Human-readable infix formula; zero-coefficient terms omitted, constant
// subtrees folded. Not meant to be parsed back.
inline std::string pretty_print(const ExpressionTree& tree) {
    detail::Rendered r = detail::render_node(tree, 0);
    if (r.is_const) return format_coeff(r.value);
    return r.str;
}

}  // namespace fex
