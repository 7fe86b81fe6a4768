#pragma once

#include <array>
#include <cstring>
#include <memory>
#include <span>
#include <vector>

#include "fex/matrix.hpp"
#include "fex/tree.hpp"

namespace fex {

// Precomputed g(x_ij) and g'(x_ij) for every unary operator over a fixed
// sample matrix. Leaf evaluation during parameter optimization then reduces
// to dot products, which is what makes the coarse/fine tuning loops cheap.
// Read-only after construction; shared across candidates and threads.
struct LeafTables {
    std::size_t rows = 0, cols = 0;
    bool with_deriv = false;
    std::array<std::vector<double>, kUnaryCount> g;
    std::array<std::vector<double>, kUnaryCount> g1;

    const double* g_row(int op, std::size_t i) const { return g[std::size_t(op)].data() + i * cols; }
    const double* g1_row(int op, std::size_t i) const { return g1[std::size_t(op)].data() + i * cols; }
};

inline LeafTables make_leaf_tables(const Matrix& X, EvalMode mode, bool with_deriv) {
    LeafTables t;
    t.rows = X.rows;
    t.cols = X.cols;
    t.with_deriv = with_deriv;
    const std::size_t n = X.rows * X.cols;
    for (int op = 0; op < kUnaryCount; ++op) {
        t.g[std::size_t(op)].resize(n);
        if (with_deriv) t.g1[std::size_t(op)].resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            if (with_deriv) {
                const UnaryDerivs d = unary_derivs(op, X.data[k], mode);
                t.g[std::size_t(op)][k] = d.g;
                t.g1[std::size_t(op)][k] = d.g1;
            } else {
                t.g[std::size_t(op)][k] = unary_value(op, X.data[k], mode);
            }
        }
    }
    return t;
}

namespace detail {

inline constexpr std::size_t kBlock = 256;

// Per-node scratch for one sample block. Forward stores values, spatial
// gradients and the unary derivative chain (g, g', g'') so the reverse pass
// does not re-evaluate transcendentals.
struct TreeWorkspace {
    int nodes = 0, dim = 0;
    std::vector<double> v;      // [node][block]
    std::vector<double> dv;     // [node][block][dim]
    std::vector<double> aux0;   // g(z)   at unary nodes
    std::vector<double> aux1;   // g'(z)
    std::vector<double> aux2;   // g''(z)
    std::vector<double> vbar;   // adjoints
    std::vector<double> dvbar;

    void resize(int n_nodes, int d) {
        nodes = n_nodes;
        dim = d;
        const std::size_t nb = std::size_t(n_nodes) * kBlock;
        v.resize(nb);
        aux0.resize(nb);
        aux1.resize(nb);
        aux2.resize(nb);
        vbar.resize(nb);
        dv.resize(nb * std::size_t(d));
        dvbar.resize(nb * std::size_t(d));
    }

    double* vrow(int node) { return v.data() + std::size_t(node) * kBlock; }
    double* dvrow(int node) { return dv.data() + std::size_t(node) * kBlock * std::size_t(dim); }
    double* vbrow(int node) { return vbar.data() + std::size_t(node) * kBlock; }
    double* dvbrow(int node) { return dvbar.data() + std::size_t(node) * kBlock * std::size_t(dim); }
};

// Forward sweep over samples [s0, s0+count). Preorder puts children after
// parents, so iterating node indices backwards is a valid evaluation order.
// want_dx controls whether spatial gradients are propagated; tables may be
// null, in which case leaf transcendentals are evaluated inline.
inline void tree_forward_block(const TreeTopology& topo, const OperatorSequence& ops,
                               std::span<const double> theta, const Matrix& X,
                               std::size_t s0, std::size_t count, const LeafTables* tables,
                               EvalMode mode, bool want_dx, bool want_grad,
                               TreeWorkspace& ws) {
    const int d = topo.input_dim;
    const int nn = topo.slot_count();
    for (int node = nn - 1; node >= 0; --node) {
        const auto& nd = topo.nodes[node];
        const int op = ops.e[std::size_t(node)];
        double* v = ws.vrow(node);
        double* dv = ws.dvrow(node);
        if (nd.kind == NodeKind::unary_leaf) {
            const double* alpha = theta.data() + topo.param_offset[node];
            const double beta = alpha[d];
            for (std::size_t s = 0; s < count; ++s) {
                const std::size_t row = s0 + s;
                double acc = beta;
                if (tables) {
                    const double* G = tables->g_row(op, row);
                    for (int j = 0; j < d; ++j) acc += alpha[j] * G[j];
                    if (want_dx) {
                        const double* G1 = tables->g1_row(op, row);
                        double* dst = dv + s * std::size_t(d);
                        for (int j = 0; j < d; ++j) dst[j] = alpha[j] * G1[j];
                    }
                } else {
                    const double* x = X.row(row);
                    double* dst = dv + s * std::size_t(d);
                    for (int j = 0; j < d; ++j) {
                        if (want_dx) {
                            const UnaryDerivs gd = unary_derivs(op, x[j], mode);
                            acc += alpha[j] * gd.g;
                            dst[j] = alpha[j] * gd.g1;
                        } else {
                            acc += alpha[j] * unary_value(op, x[j], mode);
                        }
                    }
                }
                v[s] = acc;
            }
        } else if (nd.kind == NodeKind::binary) {
            const double* va = ws.vrow(nd.left);
            const double* vb = ws.vrow(nd.right);
            const double* dva = ws.dvrow(nd.left);
            const double* dvb = ws.dvrow(nd.right);
            switch (op) {
                case kAdd:
                    for (std::size_t s = 0; s < count; ++s) v[s] = va[s] + vb[s];
                    if (want_dx)
                        for (std::size_t k = 0; k < count * std::size_t(d); ++k) dv[k] = dva[k] + dvb[k];
                    break;
                case kSub:
                    for (std::size_t s = 0; s < count; ++s) v[s] = va[s] - vb[s];
                    if (want_dx)
                        for (std::size_t k = 0; k < count * std::size_t(d); ++k) dv[k] = dva[k] - dvb[k];
                    break;
                default:
                    for (std::size_t s = 0; s < count; ++s) v[s] = va[s] * vb[s];
                    if (want_dx)
                        for (std::size_t s = 0; s < count; ++s) {
                            const double a = va[s], b = vb[s];
                            const double* ga = dva + s * std::size_t(d);
                            const double* gb = dvb + s * std::size_t(d);
                            double* dst = dv + s * std::size_t(d);
                            for (int j = 0; j < d; ++j) dst[j] = a * gb[j] + b * ga[j];
                        }
                    break;
            }
        } else {  // interior or root unary: alpha * g(child) + beta
            const double* alpha = theta.data() + topo.param_offset[node];
            const double beta = alpha[1];
            const double a = alpha[0];
            const double* vc = ws.vrow(nd.child);
            const double* dvc = ws.dvrow(nd.child);
            double* g0 = ws.aux0.data() + std::size_t(node) * kBlock;
            double* g1 = ws.aux1.data() + std::size_t(node) * kBlock;
            double* g2 = ws.aux2.data() + std::size_t(node) * kBlock;
            for (std::size_t s = 0; s < count; ++s) {
                if (want_grad || want_dx) {
                    const UnaryDerivs gd = unary_derivs(op, vc[s], mode);
                    g0[s] = gd.g;
                    g1[s] = gd.g1;
                    g2[s] = gd.g2;
                } else {
                    g0[s] = unary_value(op, vc[s], mode);
                }
                v[s] = a * g0[s] + beta;
            }
            if (want_dx)
                for (std::size_t s = 0; s < count; ++s) {
                    const double c = a * g1[s];
                    const double* src = dvc + s * std::size_t(d);
                    double* dst = dv + s * std::size_t(d);
                    for (int j = 0; j < d; ++j) dst[j] = c * src[j];
                }
        }
    }
}

// Reverse sweep. Seeds are the per-sample adjoints of the root value
// (vbar_root) and, when with_dx, of the root spatial gradient (dvbar_root,
// count x d). Accumulates into grad (size theta). The spatial-gradient
// adjoint is what carries the second-order term that the |grad u|^2 loss
// induces on theta.
inline void tree_reverse_block(const TreeTopology& topo, const OperatorSequence& ops,
                               std::span<const double> theta, const Matrix& X,
                               std::size_t s0, std::size_t count, const LeafTables* tables,
                               EvalMode mode, bool with_dx, TreeWorkspace& ws,
                               const double* vbar_root, const double* dvbar_root,
                               double* grad) {
    const int d = topo.input_dim;
    const int nn = topo.slot_count();
    std::memcpy(ws.vbrow(0), vbar_root, count * sizeof(double));
    if (with_dx)
        std::memcpy(ws.dvbrow(0), dvbar_root, count * std::size_t(d) * sizeof(double));
    for (int node = 1; node < nn; ++node) {
        std::memset(ws.vbrow(node), 0, count * sizeof(double));
        if (with_dx) std::memset(ws.dvbrow(node), 0, count * std::size_t(d) * sizeof(double));
    }

    for (int node = 0; node < nn; ++node) {
        const auto& nd = topo.nodes[node];
        const int op = ops.e[std::size_t(node)];
        const double* vb = ws.vbrow(node);
        const double* dvb = ws.dvbrow(node);
        if (nd.kind == NodeKind::unary_leaf) {
            double* ga = grad + topo.param_offset[node];
            for (std::size_t s = 0; s < count; ++s) {
                const std::size_t row = s0 + s;
                const double w = vb[s];
                ga[d] += w;  // beta
                if (tables) {
                    const double* G = tables->g_row(op, row);
                    if (with_dx) {
                        const double* G1 = tables->g1_row(op, row);
                        const double* gb = dvb + s * std::size_t(d);
                        for (int j = 0; j < d; ++j) ga[j] += w * G[j] + gb[j] * G1[j];
                    } else {
                        for (int j = 0; j < d; ++j) ga[j] += w * G[j];
                    }
                } else {
                    const double* x = X.row(row);
                    if (with_dx) {
                        const double* gb = dvb + s * std::size_t(d);
                        for (int j = 0; j < d; ++j) {
                            const UnaryDerivs gd = unary_derivs(op, x[j], mode);
                            ga[j] += w * gd.g + gb[j] * gd.g1;
                        }
                    } else {
                        for (int j = 0; j < d; ++j) ga[j] += w * unary_value(op, x[j], mode);
                    }
                }
            }
        } else if (nd.kind == NodeKind::binary) {
            double* vba = ws.vbrow(nd.left);
            double* vbb = ws.vbrow(nd.right);
            double* dvba = ws.dvbrow(nd.left);
            double* dvbb = ws.dvbrow(nd.right);
            const double* va = ws.vrow(nd.left);
            const double* vbv = ws.vrow(nd.right);
            const double* dva = ws.dvrow(nd.left);
            const double* dvbv = ws.dvrow(nd.right);
            switch (op) {
                case kAdd:
                    for (std::size_t s = 0; s < count; ++s) {
                        vba[s] += vb[s];
                        vbb[s] += vb[s];
                    }
                    if (with_dx)
                        for (std::size_t k = 0; k < count * std::size_t(d); ++k) {
                            dvba[k] += dvb[k];
                            dvbb[k] += dvb[k];
                        }
                    break;
                case kSub:
                    for (std::size_t s = 0; s < count; ++s) {
                        vba[s] += vb[s];
                        vbb[s] -= vb[s];
                    }
                    if (with_dx)
                        for (std::size_t k = 0; k < count * std::size_t(d); ++k) {
                            dvba[k] += dvb[k];
                            dvbb[k] -= dvb[k];
                        }
                    break;
                default:
                    for (std::size_t s = 0; s < count; ++s) {
                        vba[s] += vb[s] * vbv[s];
                        vbb[s] += vb[s] * va[s];
                    }
                    if (with_dx)
                        for (std::size_t s = 0; s < count; ++s) {
                            const double a = va[s], b = vbv[s];
                            const double* gb = dvb + s * std::size_t(d);
                            const double* ga_ = dva + s * std::size_t(d);
                            const double* gb_ = dvbv + s * std::size_t(d);
                            double* da = dvba + s * std::size_t(d);
                            double* db = dvbb + s * std::size_t(d);
                            double dota = 0.0, dotb = 0.0;
                            for (int j = 0; j < d; ++j) {
                                da[j] += b * gb[j];
                                db[j] += a * gb[j];
                                dota += gb[j] * gb_[j];
                                dotb += gb[j] * ga_[j];
                            }
                            vba[s] += dota;
                            vbb[s] += dotb;
                        }
                    break;
            }
        } else {
            // v = alpha*g(z)+beta, dv = alpha*g'(z)*dz with z the child value.
            const double a = theta[std::size_t(topo.param_offset[node])];
            double* ga = grad + topo.param_offset[node];
            double* vbc = ws.vbrow(nd.child);
            double* dvbc = ws.dvbrow(nd.child);
            const double* dvc = ws.dvrow(nd.child);
            const double* g0 = ws.aux0.data() + std::size_t(node) * kBlock;
            const double* g1 = ws.aux1.data() + std::size_t(node) * kBlock;
            const double* g2 = ws.aux2.data() + std::size_t(node) * kBlock;
            double acc_a = 0.0, acc_b = 0.0;
            for (std::size_t s = 0; s < count; ++s) {
                const double w = vb[s];
                acc_a += w * g0[s];
                acc_b += w;
                vbc[s] += w * a * g1[s];
                if (with_dx) {
                    const double* gb = dvb + s * std::size_t(d);
                    const double* dz = dvc + s * std::size_t(d);
                    double* dc = dvbc + s * std::size_t(d);
                    double dot = 0.0;
                    const double c = a * g1[s];
                    for (int j = 0; j < d; ++j) {
                        dot += gb[j] * dz[j];
                        dc[j] += c * gb[j];
                    }
                    acc_a += dot * g1[s];
                    vbc[s] += a * g2[s] * dot;
                }
            }
            ga[0] += acc_a;
            ga[1] += acc_b;
        }
    }
}

}  // namespace detail

// u(x_i) for every row of X.
inline std::vector<double> eval_batch(const ExpressionTree& tree, const Matrix& X,
                                      EvalMode mode = EvalMode::search) {
    if (int(X.cols) != tree.topo.input_dim)
        throw std::invalid_argument("eval_batch: input dimension mismatch");
    detail::TreeWorkspace ws;
    ws.resize(tree.topo.slot_count(), tree.topo.input_dim);
    std::vector<double> out(X.rows);
    for (std::size_t s0 = 0; s0 < X.rows; s0 += detail::kBlock) {
        const std::size_t count = std::min(detail::kBlock, X.rows - s0);
        detail::tree_forward_block(tree.topo, tree.ops, tree.theta, X, s0, count, nullptr,
                                   mode, /*want_dx=*/false, /*want_grad=*/false, ws);
        std::memcpy(out.data() + s0, ws.vrow(0), count * sizeof(double));
    }
    return out;
}

// Spatial gradient rows grad u(x_i); exact chain rule over the tree.
inline Matrix grad_input(const ExpressionTree& tree, const Matrix& X,
                         EvalMode mode = EvalMode::search) {
    if (int(X.cols) != tree.topo.input_dim)
        throw std::invalid_argument("grad_input: input dimension mismatch");
    detail::TreeWorkspace ws;
    ws.resize(tree.topo.slot_count(), tree.topo.input_dim);
    Matrix out(X.rows, X.cols);
    for (std::size_t s0 = 0; s0 < X.rows; s0 += detail::kBlock) {
        const std::size_t count = std::min(detail::kBlock, X.rows - s0);
        detail::tree_forward_block(tree.topo, tree.ops, tree.theta, X, s0, count, nullptr,
                                   mode, /*want_dx=*/true, /*want_grad=*/false, ws);
        std::memcpy(out.row(s0), ws.dvrow(0), count * X.cols * sizeof(double));
    }
    return out;
}

// Exact d/dtheta of a functional given its per-sample adjoints: ubar_i =
// dL/du(x_i) and, optionally, gbar row i = dL/d(grad u(x_i)).
inline std::vector<double> grad_params(const ExpressionTree& tree, const Matrix& X,
                                       std::span<const double> ubar, const Matrix* gbar,
                                       EvalMode mode = EvalMode::search) {
    if (int(X.cols) != tree.topo.input_dim)
        throw std::invalid_argument("grad_params: input dimension mismatch");
    if (ubar.size() != X.rows)
        throw std::invalid_argument("grad_params: adjoint length mismatch");
    const bool with_dx = gbar != nullptr;
    detail::TreeWorkspace ws;
    ws.resize(tree.topo.slot_count(), tree.topo.input_dim);
    std::vector<double> grad(tree.theta.size(), 0.0);
    for (std::size_t s0 = 0; s0 < X.rows; s0 += detail::kBlock) {
        const std::size_t count = std::min(detail::kBlock, X.rows - s0);
        detail::tree_forward_block(tree.topo, tree.ops, tree.theta, X, s0, count, nullptr,
                                   mode, with_dx, /*want_grad=*/true, ws);
        detail::tree_reverse_block(tree.topo, tree.ops, tree.theta, X, s0, count, nullptr,
                                   mode, with_dx, ws, ubar.data() + s0,
                                   with_dx ? gbar->row(s0) : nullptr, grad.data());
    }
    return grad;
}

}  // namespace fex
