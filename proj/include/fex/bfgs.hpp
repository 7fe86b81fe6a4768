#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace fex {

struct BfgsResult {
    std::vector<double> theta;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool started = true;  // false when f(theta0) was non-finite
};

// Dense BFGS on the inverse Hessian with Armijo backtracking (c = 1e-4,
// shrink 0.5, initial step 1). Terminates on max_iter, |grad| < 1e-10 or a
// failed line search; always reports the best iterate seen. Dimensions here
// are tiny (tens of parameters), so the O(n^2) update is irrelevant.
inline BfgsResult bfgs_minimize(const std::function<double(std::span<const double>)>& f,
                                const std::function<void(std::span<const double>, std::span<double>)>& grad,
                                std::span<const double> theta0, int max_iter) {
    const std::size_t n = theta0.size();
    BfgsResult res;
    res.theta.assign(theta0.begin(), theta0.end());

    std::vector<double> x(theta0.begin(), theta0.end());
    double fx = f(x);
    if (!std::isfinite(fx)) {
        res.started = false;
        res.f = fx;
        return res;
    }
    res.f = fx;

    std::vector<double> g(n), gnew(n), p(n), xnew(n), s(n), y(n), hy(n);
    grad(x, g);

    // H approximates the inverse Hessian, row-major.
    std::vector<double> H(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;

    const double c1 = 1e-4;
    for (int it = 0; it < max_iter; ++it) {
        double gnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) gnorm += g[i] * g[i];
        if (std::sqrt(gnorm) < 1e-10) break;

        double gtp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += H[i * n + j] * g[j];
            p[i] = -acc;
        }
        for (std::size_t i = 0; i < n; ++i) gtp += g[i] * p[i];
        if (gtp >= 0.0) {  // lost positive definiteness; restart from steepest descent
            std::fill(H.begin(), H.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
            for (std::size_t i = 0; i < n; ++i) p[i] = -g[i];
            gtp = -gnorm;
        }

        double alpha = 1.0;
        double fnew = fx;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            for (std::size_t i = 0; i < n; ++i) xnew[i] = x[i] + alpha * p[i];
            fnew = f(xnew);
            if (std::isfinite(fnew) && fnew <= fx + c1 * alpha * gtp) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;

        res.iterations = it + 1;
        grad(xnew, gnew);
        double ys = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xnew[i] - x[i];
            y[i] = gnew[i] - g[i];
            ys += y[i] * s[i];
        }

        x.swap(xnew);
        fx = fnew;
        g.swap(gnew);
        if (fx < res.f) {
            res.f = fx;
            res.theta = x;
        }

        if (ys > 1e-14) {
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
            const double r = 1.0 / ys;
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += H[i * n + j] * y[j];
                hy[i] = acc;
            }
            double yhy = 0.0;
            for (std::size_t i = 0; i < n; ++i) yhy += y[i] * hy[i];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    H[i * n + j] += -r * (s[i] * hy[j] + hy[i] * s[j]) +
                                    r * (1.0 + r * yhy) * s[i] * s[j];
        } else {
            std::fill(H.begin(), H.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
        }
    }
    return res;
}

}  // namespace fex
