#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "fex/eval.hpp"
#include "fex/matrix.hpp"
#include "fex/tree.hpp"

namespace fex {

// Committor ansatz: a sum of expression trees, each multiplied by a fixed
// envelope that carries the known singular behavior near the boundary sets.
//   plain:            q = J(x)
//   inverse_power:    q = J1(x) |x - c|^(-p) + J2(x)
//   fundamental_pair: q = q1 S(x - yA) + q2 S(x - yB) + q3
//   log_pair:         q = J1 log|x12 - cA|^2 + J2 log|x12 - cB|^2 + J0
// with S the free-space Green's function of the Laplacian and x12 the first
// two coordinates.
enum class ModelKind { plain, inverse_power, fundamental_pair, log_pair };

struct SolutionModel {
    ModelKind kind = ModelKind::plain;
    int dim = 0;
    std::vector<ExpressionTree> trees;
    std::vector<double> center_a;  // inverse_power/fundamental_pair: full-dim; log_pair: 2-d
    std::vector<double> center_b;
    int power = 0;  // inverse_power exponent (d - 2)

    int tree_count() const { return int(trees.size()); }

    std::size_t theta_size() const {
        std::size_t n = 0;
        for (const auto& t : trees) n += t.theta.size();
        return n;
    }

    std::vector<double> theta_flat() const {
        std::vector<double> out;
        out.reserve(theta_size());
        for (const auto& t : trees) out.insert(out.end(), t.theta.begin(), t.theta.end());
        return out;
    }

    void set_theta(std::span<const double> theta) {
        if (theta.size() != theta_size())
            throw std::invalid_argument("SolutionModel::set_theta: size mismatch");
        std::size_t off = 0;
        for (auto& t : trees) {
            std::copy(theta.begin() + long(off), theta.begin() + long(off + t.theta.size()),
                      t.theta.begin());
            off += t.theta.size();
        }
    }
};

inline double fundamental_solution(double r, int d) {
    if (d == 2) return -std::log(r) / (2.0 * std::numbers::pi);
    const double cd = std::tgamma(0.5 * d) / std::pow(2.0 * std::numbers::pi, 0.5 * d);
    return cd * std::pow(r, 2 - d);
}

// Envelope values (and spatial gradients) for every tree of a model over a
// sample matrix. Theta-independent, so one cache serves every candidate
// sharing the batch.
struct EnvelopeSet {
    bool trivial = true;  // all envelopes identically 1 (plain model)
    int count = 0;
    Matrix val;   // n x count
    Matrix grad;  // n x (count*d), row-major [k*d + j]
};

inline EnvelopeSet make_envelopes(const SolutionModel& model, const Matrix& X, bool with_grad) {
    EnvelopeSet env;
    env.count = model.tree_count();
    if (model.kind == ModelKind::plain) return env;
    env.trivial = false;

    const std::size_t n = X.rows;
    const int d = int(X.cols);
    env.val = Matrix(n, std::size_t(env.count), 1.0);
    if (with_grad) env.grad = Matrix(n, std::size_t(env.count) * std::size_t(d), 0.0);

    auto radial2 = [&](const double* x, const std::vector<double>& c, int ndims) {
        double r2 = 0.0;
        for (int j = 0; j < ndims; ++j) {
            const double z = x[j] - (j < int(c.size()) ? c[j] : 0.0);
            r2 += z * z;
        }
        return r2;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const double* x = X.row(i);
        double* e = env.val.row(i);
        double* ge = with_grad ? env.grad.row(i) : nullptr;
        switch (model.kind) {
            case ModelKind::inverse_power: {
                const double r2 = radial2(x, model.center_a, d);
                if (r2 == 0.0) throw std::domain_error("model envelope evaluated at singularity center");
                const double p = model.power;
                const double rp = std::pow(r2, -0.5 * p);  // r^-p
                e[0] = rp;
                if (ge) {
                    const double c = -p * rp / r2;  // -p r^(-p-2)
                    for (int j = 0; j < d; ++j)
                        ge[j] = c * (x[j] - (j < int(model.center_a.size()) ? model.center_a[j] : 0.0));
                }
                break;
            }
            case ModelKind::fundamental_pair: {
                const std::vector<double>* centers[2] = {&model.center_a, &model.center_b};
                for (int k = 0; k < 2; ++k) {
                    const double r2 = radial2(x, *centers[k], d);
                    if (r2 == 0.0) throw std::domain_error("model envelope evaluated at singularity center");
                    const double r = std::sqrt(r2);
                    e[k] = fundamental_solution(r, d);
                    if (ge) {
                        double c;
                        if (d == 2) {
                            c = -1.0 / (2.0 * std::numbers::pi * r2);
                        } else {
                            const double cd =
                                std::tgamma(0.5 * d) / std::pow(2.0 * std::numbers::pi, 0.5 * d);
                            c = cd * (2 - d) * std::pow(r, double(-d));
                        }
                        for (int j = 0; j < d; ++j)
                            ge[std::size_t(k) * std::size_t(d) + std::size_t(j)] =
                                c * (x[j] - (j < int(centers[k]->size()) ? (*centers[k])[j] : 0.0));
                    }
                }
                break;
            }
            case ModelKind::log_pair: {
                const std::vector<double>* centers[2] = {&model.center_a, &model.center_b};
                for (int k = 0; k < 2; ++k) {
                    const double z0 = x[0] - (*centers[k])[0];
                    const double z1 = x[1] - (*centers[k])[1];
                    const double r2 = z0 * z0 + z1 * z1;
                    if (r2 == 0.0) throw std::domain_error("model envelope evaluated at singularity center");
                    e[k] = std::log(r2);
                    if (ge) {
                        ge[std::size_t(k) * std::size_t(d)] = 2.0 * z0 / r2;
                        ge[std::size_t(k) * std::size_t(d) + 1] = 2.0 * z1 / r2;
                    }
                }
                break;
            }
            default: break;
        }
    }
    return env;
}

// q(x_i) for every row of X.
inline std::vector<double> model_eval(const SolutionModel& model, const Matrix& X,
                                      EvalMode mode = EvalMode::search) {
    std::vector<double> out(X.rows, 0.0);
    const EnvelopeSet env = make_envelopes(model, X, /*with_grad=*/false);
    for (int k = 0; k < model.tree_count(); ++k) {
        const std::vector<double> v = eval_batch(model.trees[std::size_t(k)], X, mode);
        for (std::size_t i = 0; i < X.rows; ++i)
            out[i] += env.trivial ? v[i] : v[i] * env.val(i, std::size_t(k));
    }
    return out;
}

// grad q(x_i): product rule of tree x envelope, envelopes differentiated in
// closed form.
inline Matrix model_grad(const SolutionModel& model, const Matrix& X,
                         EvalMode mode = EvalMode::search) {
    Matrix out(X.rows, X.cols, 0.0);
    const EnvelopeSet env = make_envelopes(model, X, /*with_grad=*/true);
    const int d = int(X.cols);
    for (int k = 0; k < model.tree_count(); ++k) {
        const auto& tree = model.trees[std::size_t(k)];
        const std::vector<double> v = eval_batch(tree, X, mode);
        const Matrix g = grad_input(tree, X, mode);
        for (std::size_t i = 0; i < X.rows; ++i) {
            double* dst = out.row(i);
            const double* gi = g.row(i);
            if (env.trivial) {
                for (int j = 0; j < d; ++j) dst[j] += gi[j];
            } else {
                const double e = env.val(i, std::size_t(k));
                const double* ge = env.grad.row(i) + std::size_t(k) * std::size_t(d);
                for (int j = 0; j < d; ++j) dst[j] += e * gi[j] + v[i] * ge[j];
            }
        }
    }
    return out;
}

}  // namespace fex
