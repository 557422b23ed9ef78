#pragma once

// 1-D quadrature rules used by the sphere grids and the coupling integrals:
// Gauss-Legendre nodes/weights on [-1, 1] and an adaptive Simpson integrator.

#include <cmath>
#include <cstdlib>
#include <utility>

#include <Eigen/Dense>

#include <ctwist/errors.hpp>

namespace ctwist {

struct GaussLegendreRule {
    Eigen::ArrayXd nodes;   // ascending, strictly inside (-1, 1)
    Eigen::ArrayXd weights; // positive, sum to 2
};

// Nodes are the roots of the degree-n Legendre polynomial, found by Newton
// iteration from the Chebyshev estimate; exact for polynomials of degree
// 2n - 1.
inline GaussLegendreRule gauss_legendre(int n) {
    if (n < 1)
        throw InvalidArgument("gauss_legendre: need at least one node");
    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int k = 0; k < half; ++k) {
        // k-th root counted from x = +1 downward.
        double x = std::cos(M_PI * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes(n - 1 - k) = x;
        rule.weights(n - 1 - k) = w;
        rule.nodes(k) = -x;
        rule.weights(k) = w;
    }
    if (n % 2 == 1) { // middle node is exactly zero by symmetry
        rule.nodes(half - 1) = 0.0;
    }
    return rule;
}

namespace detail {

template <class F>
double simpson_recurse(F& f, double a, double m, double b, double fa, double fm, double fb,
                       double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    if (depth <= 0)
        throw QuadratureError("adaptive_simpson: tolerance not reached at maximum depth");
    return simpson_recurse(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_recurse(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

// Fixed-grid composite Simpson over an even number of panels; used as the
// coarse half of Richardson consistency checks.
template <class F>
double composite_simpson(F&& f, double a, double b, int panels) {
    if (panels < 2 || panels % 2 != 0)
        throw InvalidArgument("composite_simpson: need a positive even panel count");
    const double h = (b - a) / panels;
    double odd = 0.0;
    double even = 0.0;
    for (int i = 1; i < panels; i += 2)
        odd += f(a + i * h);
    for (int i = 2; i < panels; i += 2)
        even += f(a + i * h);
    return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

// Adaptive Simpson with an absolute tolerance; throws QuadratureError when the
// refinement depth is exhausted before the tolerance is met. The interval is
// pre-split into sixteen panels so integrands supported far from the midpoint
// cannot alias to zero against the first few samples.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol, int max_depth = 48) {
    if (!(abs_tol > 0.0))
        throw InvalidArgument("adaptive_simpson: tolerance must be positive");
    if (a == b)
        return 0.0;
    auto& fn = f;
    constexpr int panels = 16;
    const double h = (b - a) / panels;
    const double panel_tol = abs_tol / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double pa = a + i * h;
        const double pb = (i + 1 == panels) ? b : a + (i + 1) * h;
        const double m = 0.5 * (pa + pb);
        const double fa = fn(pa);
        const double fm = fn(m);
        const double fb = fn(pb);
        const double whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
        total += detail::simpson_recurse(fn, pa, m, pb, fa, fm, fb, whole, panel_tol, max_depth);
    }
    return total;
}

} // namespace ctwist
