#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace fex {

namespace detail {

// Gauss-Kronrod 7-15 nodes/weights on [-1,1] (QUADPACK values).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr double kGk15WeightsK[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

inline constexpr double kGk15WeightsG[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct GkEstimate {
    double integral;
    double error;
};

template <typename F>
GkEstimate gk15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kGk15Nodes[i]);
        fv[14 - i] = f(c + h * kGk15Nodes[i]);
    }
    fv[7] = f(c);
    double resk = 0.0, resg = 0.0;
    for (int i = 0; i < 7; ++i) resk += kGk15WeightsK[i] * (fv[i] + fv[14 - i]);
    resk += kGk15WeightsK[7] * fv[7];
    // Gauss nodes are the odd-indexed Kronrod nodes.
    for (int i = 0; i < 3; ++i) resg += kGk15WeightsG[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
    resg += kGk15WeightsG[3] * fv[7];
    return {resk * h, std::abs((resk - resg) * h)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod 7-15: repeatedly bisects the interval with
// the largest error estimate. Subdivisions are capped at 10^4.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-12, double abs_tol = 0.0) {
    struct Piece {
        double a, b, integral, error;
        bool operator<(const Piece& o) const { return error < o.error; }
    };
    std::priority_queue<Piece> queue;
    detail::GkEstimate first = detail::gk15(f, a, b);
    queue.push({a, b, first.integral, first.error});
    double total = first.integral;
    double total_err = first.error;
    int splits = 0;
    const int max_splits = 10000;
    while (total_err > std::max(abs_tol, rel_tol * std::abs(total)) && splits < max_splits) {
        const Piece p = queue.top();
        queue.pop();
        const double mid = 0.5 * (p.a + p.b);
        const detail::GkEstimate l = detail::gk15(f, p.a, mid);
        const detail::GkEstimate r = detail::gk15(f, mid, p.b);
        total += l.integral + r.integral - p.integral;
        total_err += l.error + r.error - p.error;
        queue.push({p.a, mid, l.integral, l.error});
        queue.push({mid, p.b, r.integral, r.error});
        ++splits;
    }
    if (splits >= max_splits && total_err > 1e3 * std::max(abs_tol, rel_tol * std::abs(total)))
        throw std::runtime_error("integrate: failed to converge within subdivision cap");
    return total;
}

}  // namespace fex
