#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace fex {

// Standard Adam (beta1=0.9, beta2=0.999, eps=1e-8, bias-corrected).
struct AdamState {
    std::vector<double> m, v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(std::span<double> theta, std::span<const double> grad,
                      AdamState& state, double lr) {
    if (theta.size() != grad.size() || theta.size() != state.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    ++state.t;
    const double c1 = 1.0 - std::pow(state.beta1, double(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, double(state.t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

// lr(t) = lr0 * 0.5 * (1 + cos(pi t / T)): lr(0) = lr0, lr(T) = 0.
inline double cosine_lr(double lr0, long t, long total) {
    if (total <= 0) return lr0;
    return lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * double(t) / double(total)));
}

}  // namespace fex
