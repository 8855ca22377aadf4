#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "levitrap/core.hpp"

// Small-problem numerical building blocks: dense linear solve, bracketed
// scalar minimization, and a Levenberg-Marquardt least-squares driver used by
// the spectral and scan fits.
namespace levitrap::detail {

/// Gaussian elimination with partial pivoting; A is row-major n x n.
inline std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
        if (std::abs(A[piv * n + col]) < 1e-300)
            throw numerical_error("singular normal equations in least-squares solve");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(A[col * n + c], A[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A[r * n + col] / A[col * n + col];
            for (std::size_t c = col; c < n; ++c) A[r * n + c] -= f * A[col * n + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= A[i * n + c] * x[c];
        x[i] = s / A[i * n + i];
    }
    return x;
}

/// Golden-section minimization of a unimodal scalar function on [lo, hi].
inline double golden_minimize(const std::function<double(double)>& f, double lo, double hi,
                              double rel_tol = 1e-12, int max_iter = 300) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < max_iter && (b - a) > rel_tol * (std::abs(a) + std::abs(b)); ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

/// Bisection root of f on [lo, hi]; requires a sign change.
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                          double rel_tol = 1e-12, int max_iter = 200) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (flo * fhi > 0.0) throw numerical_error("bisect_root: no sign change on bracket");
    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0 || (hi - lo) <= rel_tol * (std::abs(lo) + std::abs(hi))) return mid;
        if (flo * fm <= 0.0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

struct LmResult {
    std::vector<double> params;
    std::vector<double> param_errors; // 1-sigma from (J^T W J)^-1 * chi2/dof
    double rss = 0.0;
    int dof = 0;
    bool converged = false;
};

/// Levenberg-Marquardt with numeric (central difference) Jacobian.
/// model(params, x) -> y; weights are 1/sigma_i^2 (may be empty for unit).
inline LmResult lm_fit(const std::function<double(const std::vector<double>&, double)>& model,
                       const std::vector<double>& xs, const std::vector<double>& ys,
                       std::vector<double> weights, std::vector<double> p0, int max_iter = 200) {
    const std::size_t n = xs.size(), np = p0.size();
    if (n < np) throw numerical_error("lm_fit: fewer points than parameters");
    if (weights.empty()) weights.assign(n, 1.0);

    auto rss_of = [&](const std::vector<double>& p) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ys[i] - model(p, xs[i]);
            s += weights[i] * r * r;
        }
        return s;
    };

    std::vector<double> p = p0;
    double rss = rss_of(p);
    double lambda = 1e-3;
    bool converged = false;

    std::vector<double> jac(n * np);
    for (int iter = 0; iter < max_iter; ++iter) {
        // numeric Jacobian
        for (std::size_t j = 0; j < np; ++j) {
            const double h = 1e-7 * std::max(std::abs(p[j]), 1e-12);
            auto pp = p, pm = p;
            pp[j] += h;
            pm[j] -= h;
            for (std::size_t i = 0; i < n; ++i)
                jac[i * np + j] = (model(pp, xs[i]) - model(pm, xs[i])) / (2.0 * h);
        }
        // normal equations J^T W J + lambda diag, J^T W r
        std::vector<double> jtj(np * np, 0.0), jtr(np, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ys[i] - model(p, xs[i]);
            for (std::size_t j = 0; j < np; ++j) {
                jtr[j] += weights[i] * jac[i * np + j] * r;
                for (std::size_t k = j; k < np; ++k)
                    jtj[j * np + k] += weights[i] * jac[i * np + j] * jac[i * np + k];
            }
        }
        for (std::size_t j = 0; j < np; ++j)
            for (std::size_t k = 0; k < j; ++k) jtj[j * np + k] = jtj[k * np + j];

        bool improved = false;
        for (int attempt = 0; attempt < 12 && !improved; ++attempt) {
            auto damped = jtj;
            for (std::size_t j = 0; j < np; ++j) damped[j * np + j] *= (1.0 + lambda);
            std::vector<double> step;
            try {
                step = solve_dense(damped, jtr);
            } catch (const numerical_error&) {
                lambda *= 10.0;
                continue;
            }
            auto pnew = p;
            for (std::size_t j = 0; j < np; ++j) pnew[j] += step[j];
            const double rss_new = rss_of(pnew);
            if (rss_new < rss) {
                double step_norm = 0.0;
                for (std::size_t j = 0; j < np; ++j)
                    step_norm = std::max(step_norm,
                                         std::abs(step[j]) / std::max(std::abs(p[j]), 1e-12));
                p = pnew;
                const double drop = (rss - rss_new) / std::max(rss, 1e-300);
                rss = rss_new;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (drop < 1e-10 || step_norm < 1e-10) {
                    converged = true;
                }
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) {
            converged = true; // stuck at a (local) minimum
            break;
        }
        if (converged) break;
    }

    LmResult out;
    out.params = p;
    out.rss = rss;
    out.dof = int(n) - int(np);
    out.converged = converged;

    // covariance from the undamped normal equations
    std::vector<double> jtj(np * np, 0.0);
    for (std::size_t j = 0; j < np; ++j) {
        const double h = 1e-7 * std::max(std::abs(p[j]), 1e-12);
        auto pp = p, pm = p;
        pp[j] += h;
        pm[j] -= h;
        for (std::size_t i = 0; i < n; ++i)
            jac[i * np + j] = (model(pp, xs[i]) - model(pm, xs[i])) / (2.0 * h);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < np; ++j)
            for (std::size_t k = j; k < np; ++k)
                jtj[j * np + k] += weights[i] * jac[i * np + j] * jac[i * np + k];
    for (std::size_t j = 0; j < np; ++j)
        for (std::size_t k = 0; k < j; ++k) jtj[j * np + k] = jtj[k * np + j];

    out.param_errors.assign(np, 0.0);
    const double chi2_per_dof = out.dof > 0 ? rss / out.dof : 0.0;
    try {
        // invert via solves against unit vectors
        for (std::size_t j = 0; j < np; ++j) {
            std::vector<double> e(np, 0.0);
            e[j] = 1.0;
            const auto col = solve_dense(jtj, e);
            out.param_errors[j] = std::sqrt(std::max(0.0, col[j] * chi2_per_dof));
        }
    } catch (const numerical_error&) {
        // leave zero errors when the information matrix is singular
    }
    return out;
}

} // namespace levitrap::detail
