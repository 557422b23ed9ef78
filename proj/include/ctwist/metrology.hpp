#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "closed_form.hpp"
#include "errors.hpp"
#include "math_util.hpp"
#include "spin_algebra.hpp"

namespace ctwist {

// -------------------------------------------------------------------------
// Quantum Fisher information, generator G (typically J_y), phase-estimation
// normalization: F = N for the +x coherent state, F = N^2 for a GHZ state.
// -------------------------------------------------------------------------

struct QfiDiagnostics {
    double generator_mean = 0.0;          // Tr[rho G]
    double rho_g_squared_trace_abs = 0.0; // |Tr[(rho G)^2]|, pure-state equality witness
    int floored_terms = 0;                // eigenpair terms dropped by the denominator floor
};

struct QfiEigenResult {
    double value = 0.0;
    QfiDiagnostics diagnostics;
};

inline constexpr double qfi_eigenvalue_floor = 1e-12;
inline constexpr double qfi_negativity_tol = 1e-8;

// Spectral route: F = 2 sum_{k,l} (lk - ll)^2 / (lk + ll) |<k|G|l>|^2.
// Eigenvalues below -qfi_negativity_tol are a physicality failure; small
// negatives from roundoff are clamped to zero. Pairs with lk + ll below the
// floor contribute nothing to F and are counted in the diagnostics.
inline QfiEigenResult qfi_eigen(const AtomicDensityMatrix& rho, const Eigen::MatrixXcd& g) {
    const int d = rho.basis().dim();
    if (g.rows() != d || g.cols() != d)
        throw InvalidArgument("qfi_eigen: generator dimension mismatch");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        0.5 * (rho.matrix() + Eigen::MatrixXcd(rho.matrix().adjoint())));
    if (es.info() != Eigen::Success)
        throw NonPhysicalState("qfi_eigen: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    if (lam.minCoeff() < -qfi_negativity_tol)
        throw NonPhysicalState("qfi_eigen: density matrix has eigenvalue " +
                               std::to_string(lam.minCoeff()) + " below tolerance");
    for (int i = 0; i < d; ++i) lam(i) = std::max(lam(i), 0.0);

    const Eigen::MatrixXcd g_eig = es.eigenvectors().adjoint() * g * es.eigenvectors();

    QfiEigenResult out;
    for (int k = 0; k < d; ++k) {
        for (int l = 0; l < d; ++l) {
            if (k == l) continue;
            const double denom = lam(k) + lam(l);
            const double diff = lam(k) - lam(l);
            if (denom < qfi_eigenvalue_floor) {
                if (std::norm(g_eig(k, l)) > 0.0) ++out.diagnostics.floored_terms;
                continue;
            }
            out.value += 2.0 * diff * diff / denom * std::norm(g_eig(k, l));
        }
    }
    out.diagnostics.generator_mean = rho.expectation(g).real();
    const Eigen::MatrixXcd rg = rho.matrix() * g;
    out.diagnostics.rho_g_squared_trace_abs = std::abs((rg * rg).trace());
    return out;
}

// Variance route: F = 4 (<G^2> - <G>^2). Equals the spectral route exactly on
// pure states; a lower bound otherwise.
inline double qfi_variance(const AtomicDensityMatrix& rho, const Eigen::MatrixXcd& g) {
    const complex g1 = rho.expectation(g);
    const complex g2 = rho.expectation(g * g);
    return 4.0 * (g2.real() - g1.real() * g1.real());
}

// -------------------------------------------------------------------------
// Exact coherence-factor sum for generator J_y on the closed-form states:
// F = N(N+1)/2 - 2 Re Tr[rho J_+^2], and the only coherences entering the
// trace are (m, m+2). Valid for both the unpumped and pumped families.
// -------------------------------------------------------------------------

inline double qfi_exact_sum(const ModelParams& p, const PhotonInput& input, double t) {
    detail::require_closed_form_applicable(p);
    if (p.eta != 0.0 && input.kind != PhotonInput::Kind::vacuum)
        throw InvalidArgument("qfi_exact_sum: pumped evolution starts from vacuum");

    const SpectralCoefficients s = SpectralCoefficients::compute(p);
    const DickeBasis& b = s.basis();
    const int n = p.n_atoms;
    const std::vector<double> w = coherent_state_weights(n);

    complex i_sum{0.0, 0.0};
    for (int k = 0; k + 2 <= n; ++k) {
        const double m = b.m(k);
        // C_m C_{m+2} <m+2|J_+^2|m> reduces to an exact rational:
        // 2^-N C(N,k) (N-k)(N-k-1).
        const double weight =
            std::exp(log_binomial(n, k) - n * std::log(2.0)) * (n - k) * (n - k - 1.0);
        // Tr[rho J_+^2] picks the (row k, col k+2) coherence, whose factor is
        // u(k, k+2) = conj(u(k+2, k)).
        const complex u = (p.eta == 0.0) ? coherence_factor_no_pump(s, input, k, k + 2, t)
                                         : coherence_factor_pumped(s, p.eta, k, k + 2, t);
        const complex interaction_phase = std::exp(complex(0.0, 4.0 * p.u * (m + 1.0) * t));
        i_sum += weight * interaction_phase * u;
    }
    return 0.5 * n * (n + 1.0) - 2.0 * i_sum.real();
}

// -------------------------------------------------------------------------
// Closed-form approximations (Gaussian-envelope family) and their regime
// warnings. Warnings fire when a "much greater than" premise has ratio >= 0.1;
// they are informational, never errors.
// -------------------------------------------------------------------------

struct QfiApproxResult {
    double value = 0.0;
    double envelope = 1.0; // the decoherence factor f entering the formula
    std::vector<std::string> warnings;
};

struct CrossoverTimes {
    double tau_a = std::numeric_limits<double>::infinity(); // coherent-seed ramp time
    double tau_b = std::numeric_limits<double>::infinity(); // pumped ramp time
};

inline CrossoverTimes crossover_times(const ModelParams& p, double nbar) {
    p.validate();
    CrossoverTimes out;
    const double root_n = std::sqrt(static_cast<double>(p.n_atoms));
    if (p.w0 != 0.0 && nbar > 0.0) out.tau_a = 1.0 / (root_n * std::abs(p.w0) * nbar);
    if (p.w0 != 0.0 && p.eta != 0.0)
        out.tau_b = std::pow(9.0 / (4.0 * p.n_atoms * p.w0 * p.w0 * std::pow(p.eta, 4.0)),
                             1.0 / 6.0);
    return out;
}

inline double qfi_plateau_interpolation(int n_atoms, double f) {
    return 0.5 * n_atoms * (1.0 + f) + 0.5 * static_cast<double>(n_atoms) * n_atoms * (1.0 - f);
}

namespace detail {

inline void warn_if_not_much_greater(std::vector<std::string>& warnings, double small,
                                     double large, const std::string& premise) {
    const double ratio = (large == 0.0) ? std::numeric_limits<double>::infinity()
                                        : std::abs(small) / std::abs(large);
    if (!(ratio < 0.1))
        warnings.push_back("regime: " + premise + " marginal (ratio " + std::to_string(ratio) +
                           " >= 0.1)");
}

} // namespace detail

// Coherent-seed envelope formula: f = exp(-2 t^2 / tau_a^2).
inline QfiApproxResult qfi_closed_form_no_pump(const ModelParams& p, double nbar, double t) {
    p.validate();
    QfiApproxResult out;
    detail::warn_if_not_much_greater(out.warnings, 1.0, nbar, "nbar >> 1");
    detail::warn_if_not_much_greater(out.warnings, p.u, p.w0 * nbar, "W0*nbar >> U");
    detail::warn_if_not_much_greater(out.warnings, 1.0, static_cast<double>(p.n_atoms),
                                     "N >> 1");
    detail::warn_if_not_much_greater(out.warnings, 8.0 * nbar * p.w0 * p.w0 * t * t, 1.0,
                                     "short-time envelope (8 nbar (W0 t)^2 << 1)");
    const double tau_a = crossover_times(p, nbar).tau_a;
    const double x = t / tau_a;
    out.envelope = std::exp(-2.0 * x * x);
    out.value = qfi_plateau_interpolation(p.n_atoms, out.envelope);
    return out;
}

// Continuum (Gaussian-integral) evaluation of the coherence sum for the
// unpumped coherent-seed case; sharper than the envelope formula at small t.
inline QfiApproxResult qfi_gaussian_integral_no_pump(const ModelParams& p, double nbar,
                                                     double t) {
    p.validate();
    QfiApproxResult out;
    detail::warn_if_not_much_greater(out.warnings, 1.0, nbar, "nbar >> 1");
    detail::warn_if_not_much_greater(out.warnings, p.u, p.w0 * nbar, "W0*nbar >> U");
    detail::warn_if_not_much_greater(out.warnings, 1.0, static_cast<double>(p.n_atoms),
                                     "N >> 1");

    const double n = p.n_atoms;
    const double w0t = p.w0 * t;
    const double sigma = 2.0 / n + 8.0 * nbar * w0t * w0t;
    const double a = -4.0 * p.w0 * t * nbar - 4.0 * p.u * t;
    const double b = 8.0 * nbar * w0t * w0t;
    detail::warn_if_not_much_greater(out.warnings, b, 1.0, "b << 1");

    const double theta = a - a * b / sigma;
    const double quad = (a * a - 4.0 * b * b) / (4.0 * sigma);
    const double amp = std::sqrt(2.0 / (n * sigma)) * std::exp(-quad) * std::exp(-b);
    const double cos_weight = 0.25 * n * n - 0.5 / sigma + quad / sigma;
    const double sin_weight = a * b / (sigma * sigma);
    const double re_i = amp * (std::cos(theta) * cos_weight - std::sin(theta) * sin_weight);

    out.envelope = std::exp(-quad);
    out.value = 0.5 * n * (n + 1.0) - 2.0 * re_i;
    return out;
}

// Pumped-vacuum envelope formulas. With the interaction term:
// f = exp(-2N (U t + (2/3) eta^2 W0 t^3)^2); without it: f = exp(-2 t^6/tau_b^6).
enum class PumpedEnvelope { interaction_free, with_interaction };

inline QfiApproxResult qfi_closed_form_pumped(const ModelParams& p, double t,
                                              PumpedEnvelope which) {
    p.validate();
    QfiApproxResult out;
    const double nbar_t = p.eta * p.eta * t * t; // transient photon scale
    detail::warn_if_not_much_greater(out.warnings, 1.0, nbar_t, "nbar(t) >> 1");
    detail::warn_if_not_much_greater(out.warnings, p.u, p.w0 * nbar_t, "W0*nbar(t) >> U");
    detail::warn_if_not_much_greater(out.warnings, 1.0, static_cast<double>(p.n_atoms),
                                     "N >> 1");
    if (which == PumpedEnvelope::with_interaction) {
        const double chi = p.u * t + (2.0 / 3.0) * p.eta * p.eta * p.w0 * t * t * t;
        out.envelope = std::exp(-2.0 * p.n_atoms * chi * chi);
    } else {
        const double tau_b = crossover_times(p, 0.0).tau_b;
        const double x = t / tau_b;
        out.envelope = std::exp(-2.0 * std::pow(x, 6.0));
    }
    out.value = qfi_plateau_interpolation(p.n_atoms, out.envelope);
    return out;
}

// -------------------------------------------------------------------------
// Spin squeezing.
// -------------------------------------------------------------------------

inline constexpr double depolarization_tol = 1e-12;

// xi^2 = N Var(J_z) / (<J_x>^2 + <J_y>^2): squeezing of J_z relative to the
// in-plane mean spin. Throws DepolarizedState when the in-plane mean spin is
// numerically zero.
inline double spin_squeezing_xi2(const AtomicDensityMatrix& rho) {
    const DickeBasis& b = rho.basis();
    const Eigen::MatrixXcd jz = jz_matrix(b);
    const double jx_mean = rho.expectation(jx_matrix(b)).real();
    const double jy_mean = rho.expectation(jy_matrix(b)).real();
    const double denom = jx_mean * jx_mean + jy_mean * jy_mean;
    if (denom <= depolarization_tol)
        throw DepolarizedState("spin_squeezing_xi2: in-plane mean spin is zero");
    const double jz_mean = rho.expectation(jz).real();
    const double jz2_mean = rho.expectation(jz * jz).real();
    return b.n_atoms() * (jz2_mean - jz_mean * jz_mean) / denom;
}

// Minimal variance over directions perpendicular to the full mean spin,
// normalized the same way: xi^2 = N min_perp Var(J_perp) / |<J>|^2.
inline double spin_squeezing_xi2_perp_min(const AtomicDensityMatrix& rho) {
    const DickeBasis& b = rho.basis();
    const Eigen::MatrixXcd jx = jx_matrix(b);
    const Eigen::MatrixXcd jy = jy_matrix(b);
    const Eigen::MatrixXcd jz = jz_matrix(b);

    Eigen::Vector3d mean(rho.expectation(jx).real(), rho.expectation(jy).real(),
                         rho.expectation(jz).real());
    const double mean_sq = mean.squaredNorm();
    if (mean_sq <= depolarization_tol)
        throw DepolarizedState("spin_squeezing_xi2_perp_min: mean spin is zero");

    const Eigen::Vector3d n_hat = mean.normalized();
    Eigen::Vector3d seed = std::abs(n_hat.x()) < 0.9 ? Eigen::Vector3d::UnitX()
                                                     : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d e1 = n_hat.cross(seed).normalized();
    const Eigen::Vector3d e2 = n_hat.cross(e1);

    const Eigen::MatrixXcd j1 = e1.x() * jx + e1.y() * jy + e1.z() * jz;
    const Eigen::MatrixXcd j2 = e2.x() * jx + e2.y() * jy + e2.z() * jz;

    const double v11 = rho.expectation(j1 * j1).real();
    const double v22 = rho.expectation(j2 * j2).real();
    const double v12 = rho.expectation(j1 * j2 + j2 * j1).real();
    // <J.e1> = <J.e2> = 0 by construction, so these are central moments.
    const double a_sum = v11 + v22;
    const double b_diff = v11 - v22;
    const double var_min = 0.5 * (a_sum - std::sqrt(b_diff * b_diff + v12 * v12));
    return b.n_atoms() * var_min / mean_sq;
}

} // namespace ctwist
