#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fex/eval.hpp"
#include "fex/matrix.hpp"
#include "fex/model.hpp"
#include "fex/quadrature.hpp"

namespace fex {

// Monte Carlo sample set for the penalized variational functional: weighted
// interior points plus the two boundary clouds.
struct SampleBatch {
    Matrix interior;
    std::vector<double> weights;  // importance weights, one per interior row
    Matrix bdry_a;
    Matrix bdry_b;
};

// How the boundary penalty is normalized:
//   per_partition_mean: c * mean_A q^2 + c * mean_B (q-1)^2
//   shared_pair:        c/(N_A+N_B) * (sum_A q^2 + sum_B (q-1)^2)
// The second is the double-well convention where both boundaries share one
// N_bdry prefactor.
enum class BoundaryConvention { per_partition_mean, shared_pair };

struct LossSpec {
    double c_tilde = 1.0;
    BoundaryConvention convention = BoundaryConvention::per_partition_mean;
};

inline void validate_batch(const SampleBatch& batch) {
    if (batch.interior.rows == 0 || batch.bdry_a.rows == 0 || batch.bdry_b.rows == 0)
        throw std::invalid_argument("loss: every batch partition must be non-empty");
    if (batch.weights.size() != batch.interior.rows)
        throw std::invalid_argument("loss: weight vector length mismatch");
}

// Everything about a batch that candidates can share: leaf-operator tables
// (the expensive transcendentals) and envelope caches. Read-only once built.
struct BatchContext {
    SampleBatch batch;
    LossSpec spec;
    EvalMode mode = EvalMode::search;
    bool with_tables = false;
    LeafTables tab_interior, tab_a, tab_b;
    EnvelopeSet env_interior, env_a, env_b;

    static BatchContext make(const SolutionModel& shape, SampleBatch batch, LossSpec spec,
                             EvalMode mode, bool with_tables) {
        validate_batch(batch);
        BatchContext ctx;
        ctx.batch = std::move(batch);
        ctx.spec = spec;
        ctx.mode = mode;
        ctx.with_tables = with_tables;
        if (with_tables) {
            ctx.tab_interior = make_leaf_tables(ctx.batch.interior, mode, /*with_deriv=*/true);
            ctx.tab_a = make_leaf_tables(ctx.batch.bdry_a, mode, /*with_deriv=*/false);
            ctx.tab_b = make_leaf_tables(ctx.batch.bdry_b, mode, /*with_deriv=*/false);
        }
        ctx.env_interior = make_envelopes(shape, ctx.batch.interior, /*with_grad=*/true);
        ctx.env_a = make_envelopes(shape, ctx.batch.bdry_a, /*with_grad=*/false);
        ctx.env_b = make_envelopes(shape, ctx.batch.bdry_b, /*with_grad=*/false);
        return ctx;
    }
};

// Fused loss / loss-gradient evaluation for one candidate against a shared
// BatchContext. Holds per-tree scratch; not thread-safe, use one instance
// per worker.
class ModelEvaluator {
public:
    ModelEvaluator(const SolutionModel* shape, const BatchContext* ctx)
        : shape_(shape), ctx_(ctx) {
        offsets_.resize(shape->trees.size() + 1, 0);
        for (std::size_t k = 0; k < shape->trees.size(); ++k)
            offsets_[k + 1] = offsets_[k] + shape->trees[k].theta.size();
        ws_.resize(shape->trees.size());
        for (std::size_t k = 0; k < shape->trees.size(); ++k)
            ws_[k].resize(shape->trees[k].topo.slot_count(), shape->trees[k].topo.input_dim);
    }

    std::size_t theta_size() const { return offsets_.back(); }

    double loss(std::span<const double> theta) { return run(theta, {}); }

    double loss_grad(std::span<const double> theta, std::span<double> grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        return run(theta, grad);
    }

private:
    static constexpr std::size_t kB = detail::kBlock;

    // Interior blocks propagate spatial gradients; boundary blocks only
    // values. A non-finite contribution short-circuits to +inf.
    double run(std::span<const double> theta, std::span<double> grad) {
        const bool want_grad = !grad.empty();
        if (want_grad && grad.size() != theta_size())
            throw std::invalid_argument("ModelEvaluator: gradient size mismatch");

        const SampleBatch& b = ctx_->batch;
        const double c = ctx_->spec.c_tilde;
        const std::size_t na = b.bdry_a.rows, nb = b.bdry_b.rows;
        const double coef_a = ctx_->spec.convention == BoundaryConvention::per_partition_mean
                                  ? c / double(na)
                                  : c / double(na + nb);
        const double coef_b = ctx_->spec.convention == BoundaryConvention::per_partition_mean
                                  ? c / double(nb)
                                  : c / double(na + nb);

        double loss = interior_term(theta, grad, want_grad);
        if (!std::isfinite(loss)) return std::numeric_limits<double>::infinity();
        loss += boundary_term(theta, grad, want_grad, b.bdry_a,
                              ctx_->with_tables ? &ctx_->tab_a : nullptr, ctx_->env_a, coef_a, 0.0);
        if (!std::isfinite(loss)) return std::numeric_limits<double>::infinity();
        loss += boundary_term(theta, grad, want_grad, b.bdry_b,
                              ctx_->with_tables ? &ctx_->tab_b : nullptr, ctx_->env_b, coef_b, 1.0);
        return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
    }

    double interior_term(std::span<const double> theta, std::span<double> grad, bool want_grad) {
        const Matrix& X = ctx_->batch.interior;
        const LeafTables* tab = ctx_->with_tables ? &ctx_->tab_interior : nullptr;
        const EnvelopeSet& env = ctx_->env_interior;
        const int d = shape_->dim;
        const int K = shape_->tree_count();
        const double inv_n = 1.0 / double(X.rows);

        double acc = 0.0;
        std::vector<double> qgrad(kB * std::size_t(d));
        std::vector<double> qbar(kB), qgbar(kB * std::size_t(d));
        for (std::size_t s0 = 0; s0 < X.rows; s0 += kB) {
            const std::size_t count = std::min(kB, X.rows - s0);
            for (int k = 0; k < K; ++k)
                detail::tree_forward_block(shape_->trees[std::size_t(k)].topo,
                                           shape_->trees[std::size_t(k)].ops,
                                           tree_theta(theta, k), X, s0, count, tab, ctx_->mode,
                                           /*want_dx=*/true, want_grad, ws_[std::size_t(k)]);
            // combine trees with envelopes into grad q
            for (std::size_t s = 0; s < count; ++s) {
                double* gq = qgrad.data() + s * std::size_t(d);
                for (int j = 0; j < d; ++j) gq[j] = 0.0;
                for (int k = 0; k < K; ++k) {
                    const double* dv = ws_[std::size_t(k)].dvrow(0) + s * std::size_t(d);
                    if (env.trivial) {
                        for (int j = 0; j < d; ++j) gq[j] += dv[j];
                    } else {
                        const double e = env.val(s0 + s, std::size_t(k));
                        const double* ge = env.grad.row(s0 + s) + std::size_t(k) * std::size_t(d);
                        const double v = ws_[std::size_t(k)].vrow(0)[s];
                        for (int j = 0; j < d; ++j) gq[j] += e * dv[j] + v * ge[j];
                    }
                }
                double norm2 = 0.0;
                for (int j = 0; j < d; ++j) norm2 += gq[j] * gq[j];
                const double w = ctx_->batch.weights[s0 + s] * inv_n;
                acc += w * norm2;
                if (want_grad) {
                    qbar[s] = 0.0;
                    double* gb = qgbar.data() + s * std::size_t(d);
                    for (int j = 0; j < d; ++j) gb[j] = 2.0 * w * gq[j];
                }
            }
            if (!std::isfinite(acc)) return std::numeric_limits<double>::infinity();
            if (want_grad) {
                for (int k = 0; k < K; ++k) {
                    seed_and_reverse(theta, grad, k, X, s0, count, tab, env, qbar, qgbar,
                                     /*with_dx=*/true);
                }
            }
        }
        return acc;
    }

    double boundary_term(std::span<const double> theta, std::span<double> grad, bool want_grad,
                         const Matrix& X, const LeafTables* tab, const EnvelopeSet& env,
                         double coef, double target) {
        const int K = shape_->tree_count();
        double acc = 0.0;
        std::vector<double> qbar(kB);
        for (std::size_t s0 = 0; s0 < X.rows; s0 += kB) {
            const std::size_t count = std::min(kB, X.rows - s0);
            for (int k = 0; k < K; ++k)
                detail::tree_forward_block(shape_->trees[std::size_t(k)].topo,
                                           shape_->trees[std::size_t(k)].ops,
                                           tree_theta(theta, k), X, s0, count, tab, ctx_->mode,
                                           /*want_dx=*/false, want_grad, ws_[std::size_t(k)]);
            for (std::size_t s = 0; s < count; ++s) {
                double q = 0.0;
                for (int k = 0; k < K; ++k) {
                    const double v = ws_[std::size_t(k)].vrow(0)[s];
                    q += env.trivial ? v : v * env.val(s0 + s, std::size_t(k));
                }
                const double r = q - target;
                acc += coef * r * r;
                if (want_grad) qbar[s] = 2.0 * coef * r;
            }
            if (!std::isfinite(acc)) return std::numeric_limits<double>::infinity();
            if (want_grad) {
                for (int k = 0; k < K; ++k)
                    seed_and_reverse(theta, grad, k, X, s0, count, tab, env, qbar, {},
                                     /*with_dx=*/false);
            }
        }
        return acc;
    }

    // Translates model-level adjoints (qbar, qgbar) into tree-level seeds via
    // the product rule with the envelope, then runs the tree reverse pass.
    void seed_and_reverse(std::span<const double> theta, std::span<double> grad, int k,
                          const Matrix& X, std::size_t s0, std::size_t count,
                          const LeafTables* tab, const EnvelopeSet& env,
                          std::span<const double> qbar, std::span<const double> qgbar,
                          bool with_dx) {
        const int d = shape_->dim;
        std::vector<double>& vbar = seed_vbar_;
        std::vector<double>& dvbar = seed_dvbar_;
        vbar.resize(count);
        if (with_dx) dvbar.resize(count * std::size_t(d));
        for (std::size_t s = 0; s < count; ++s) {
            if (env.trivial) {
                vbar[s] = qbar[s];
                if (with_dx)
                    for (int j = 0; j < d; ++j)
                        dvbar[s * std::size_t(d) + std::size_t(j)] = qgbar[s * std::size_t(d) + std::size_t(j)];
            } else {
                const double e = env.val(s0 + s, std::size_t(k));
                double vb = qbar[s] * e;
                if (with_dx) {
                    const double* ge = env.grad.row(s0 + s) + std::size_t(k) * std::size_t(d);
                    const double* gb = qgbar.data() + s * std::size_t(d);
                    double* db = dvbar.data() + s * std::size_t(d);
                    for (int j = 0; j < d; ++j) {
                        vb += gb[j] * ge[j];
                        db[j] = gb[j] * e;
                    }
                }
                vbar[s] = vb;
            }
        }
        auto& tree = shape_->trees[std::size_t(k)];
        double* gk = grad.data() + offsets_[std::size_t(k)];
        detail::tree_reverse_block(tree.topo, tree.ops, tree_theta(theta, k), X, s0, count, tab,
                                   ctx_->mode, with_dx, ws_[std::size_t(k)], vbar.data(),
                                   with_dx ? dvbar.data() : nullptr, gk);
    }

    std::span<const double> tree_theta(std::span<const double> theta, int k) const {
        return theta.subspan(offsets_[std::size_t(k)],
                             offsets_[std::size_t(k) + 1] - offsets_[std::size_t(k)]);
    }

    const SolutionModel* shape_;
    const BatchContext* ctx_;
    std::vector<std::size_t> offsets_;
    std::vector<detail::TreeWorkspace> ws_;
    std::vector<double> seed_vbar_, seed_dvbar_;
};

// The generic penalized variational loss with per-partition boundary means;
// interior importance weights come from the batch.
inline double variational_loss(const SolutionModel& model, const SampleBatch& batch,
                               double c_tilde, EvalMode mode = EvalMode::search) {
    validate_batch(batch);
    BatchContext ctx = BatchContext::make(model, batch, {c_tilde, BoundaryConvention::per_partition_mean},
                                          mode, /*with_tables=*/false);
    ModelEvaluator ev(&model, &ctx);
    const std::vector<double> theta = model.theta_flat();
    return ev.loss(theta);
}

// Normalizer of the double-well interior weight, int_{-1}^{1} exp(-beta (t^2-1)^2) dt.
inline double doublewell_weight_normalizer(double beta) {
    return integrate([beta](double t) { return std::exp(-beta * (t * t - 1.0) * (t * t - 1.0)); },
                     -1.0, 1.0, 1e-12);
}

// Double-well form of the loss: interior summands are reweighted with the
// Gibbs factor of the non-sampled x1 direction, and both boundaries share a
// single N_bdry prefactor.
inline double doublewell_loss(const SolutionModel& model, const SampleBatch& batch,
                              double c_tilde, double beta, EvalMode mode = EvalMode::search) {
    validate_batch(batch);
    SampleBatch weighted = batch;
    const double z = doublewell_weight_normalizer(beta);
    for (std::size_t i = 0; i < weighted.interior.rows; ++i) {
        const double x1 = weighted.interior(i, 0);
        const double u = x1 * x1 - 1.0;
        weighted.weights[i] = std::exp(-beta * u * u) / z;
    }
    BatchContext ctx = BatchContext::make(model, std::move(weighted),
                                          {c_tilde, BoundaryConvention::shared_pair}, mode,
                                          /*with_tables=*/false);
    ModelEvaluator ev(&model, &ctx);
    const std::vector<double> theta = model.theta_flat();
    return ev.loss(theta);
}

}  // namespace fex
