#pragma once

// Laboratory-to-model parameter chain: molecular coupling volume xi, pair Rabi
// coupling Omega_R, per-photon interaction U_0, the contact coupling g, and
// the quasi-1D two-mode couplings (epsilon, J, U, W_0) for Gaussian-Wannier
// wells in a standing-wave Gaussian cavity mode.
//
// Every function is unit-agnostic: pass inputs in any one consistent unit
// system and set `hbar` to its value in that system (1 for natural units).
// Energies come back in the same system. Dimensional homogeneity of the whole
// chain is enforced by a dual-unit-system self-test in the test suite.

#include <cmath>
#include <functional>

#include <ctwist/errors.hpp>
#include <ctwist/math_util.hpp>
#include <ctwist/quadrature.hpp>

namespace ctwist {

namespace units {
// CODATA-2018 conversion factors used by the named-unit constructors and the
// dual-system self-test.
inline constexpr double bohr_m = 5.29177210903e-11;
inline constexpr double amu_kg = 1.66053906660e-27;
inline constexpr double electron_mass_kg = 9.1093837015e-31;
inline constexpr double hbar_si = 1.054571817e-34;
// One hartree over hbar, in rad/s: the atomic unit of angular frequency.
// Derived from the three base constants above (not quoted independently) so
// that unit conversions round-trip exactly.
inline constexpr double hartree_over_hbar_si = hbar_si / (electron_mass_kg * bohr_m * bohr_m);
} // namespace units

struct ExperimentalInputs {
    double omega_0 = 0.0;       // pair-coupling Rabi frequency (angular)
    double delta_a = 0.0;       // molecular detuning (angular), sign-carrying
    double r_0 = 0.0;           // molecular length scale
    double m_atom = 0.0;        // atomic mass
    double a_s = 0.0;           // s-wave scattering length
    double k = 0.0;             // cavity wavenumber
    double sigma = 0.0;         // transverse mode waist
    double cavity_length = 0.0; // mirror-to-mirror length
    double l_h = 0.0;           // transverse harmonic confinement length
    double well_sep = 0.0;      // double-well center-to-center distance
    double well_width = 0.0;    // Gaussian-Wannier width
    double hbar = 1.0;          // value of hbar in the chosen unit system

    void validate() const {
        const double positives[] = {omega_0, r_0,          m_atom, a_s,        k,
                                    sigma,   cavity_length, l_h,    well_width, hbar};
        for (const double v : positives)
            if (!(v > 0.0) || !std::isfinite(v))
                throw InvalidArgument(
                    "ExperimentalInputs: frequencies, lengths, and mass must be positive");
        if (!(well_sep >= 0.0) || !std::isfinite(well_sep))
            throw InvalidArgument("ExperimentalInputs: well separation must be non-negative");
        if (delta_a == 0.0 || !std::isfinite(delta_a))
            throw InvalidArgument("ExperimentalInputs: molecular detuning must be nonzero");
    }

    // Named laboratory units: linear (not angular) frequencies in kHz, atomic
    // lengths in Bohr radii, mass in unified amu, cavity wavelength in nm, and
    // geometry lengths in micrometers. Output is SI with hbar set accordingly.
    static ExperimentalInputs from_laboratory_units(double omega_0_2pi_khz,
                                                    double delta_a_2pi_khz, double r_0_bohr,
                                                    double a_s_bohr, double m_atom_u,
                                                    double lambda_nm, double sigma_um,
                                                    double cavity_length_um, double l_h_um,
                                                    double well_sep_um, double well_width_um) {
        ExperimentalInputs in;
        in.omega_0 = 2.0 * pi * omega_0_2pi_khz * 1e3;
        in.delta_a = 2.0 * pi * delta_a_2pi_khz * 1e3;
        in.r_0 = r_0_bohr * units::bohr_m;
        in.a_s = a_s_bohr * units::bohr_m;
        in.m_atom = m_atom_u * units::amu_kg;
        in.k = 2.0 * pi / (lambda_nm * 1e-9);
        in.sigma = sigma_um * 1e-6;
        in.cavity_length = cavity_length_um * 1e-6;
        in.l_h = l_h_um * 1e-6;
        in.well_sep = well_sep_um * 1e-6;
        in.well_width = well_width_um * 1e-6;
        in.hbar = units::hbar_si;
        in.validate();
        return in;
    }

    // Rb-87 order-of-magnitude working point: 750 kHz pair coupling, 2 MHz
    // molecular detuning, scattering length 100 a0, Condon-scale r_0 = 250 a0,
    // 780 nm light in a centimeter cavity with a 30 um waist, 50 nm transverse
    // confinement, and half-wavelength wells of 60 nm Gaussian width.
    static ExperimentalInputs rubidium_example() {
        return from_laboratory_units(750.0, 2000.0, 250.0, 100.0, 87.0, 780.0, 30.0, 1e4,
                                     0.05, 0.39, 0.06);
    }
};

// Coupling volume of the Gaussian molecular ansatz phi(r) = A e^{-r^2/r_0^2}/r
// with A = sqrt(2/(pi r_0)): xi = integral of phi over all space.
inline double xi_gaussian(double r_0) {
    if (!(r_0 > 0.0))
        throw InvalidArgument("xi_gaussian: length scale must be positive");
    return 2.0 * std::sqrt(2.0 * pi) * std::pow(r_0, 1.5);
}

inline double omega_r(double omega_0, double xi) {
    if (!(omega_0 > 0.0) || !(xi > 0.0))
        throw InvalidArgument("omega_r: inputs must be positive");
    return 0.5 * omega_0 * xi;
}

// Per-photon pair interaction strength (natural units: energy x volume when
// hbar = 1); sign follows the detuning.
inline double u0(double omega_r_value, double delta_a) {
    if (delta_a == 0.0)
        throw InvalidArgument("u0: molecular detuning must be nonzero");
    return omega_r_value * omega_r_value / delta_a;
}

inline double contact_g(double a_s, double m_atom, double hbar = 1.0) {
    if (!(a_s > 0.0) || !(m_atom > 0.0) || !(hbar > 0.0))
        throw InvalidArgument("contact_g: inputs must be positive");
    return 4.0 * pi * hbar * hbar * a_s / m_atom;
}

// Full dimensionless chain xi -> Omega_R -> U_0, over g. Algebraically
// Omega_0^2 xi^2 m / (16 pi Delta_A a_s hbar); evaluated through the
// individual operations so a regression in any link shows up here.
inline double u0_over_g(const ExperimentalInputs& in) {
    in.validate();
    const double xi = xi_gaussian(in.r_0);
    const double wr = omega_r(in.omega_0, xi);
    const double u0_energy_volume = in.hbar * u0(wr, in.delta_a);
    return u0_energy_volume / contact_g(in.a_s, in.m_atom, in.hbar);
}

struct TwoModeCouplings {
    double epsilon = 0.0;             // on-site energy (includes transverse zero point)
    double tunneling_j = 0.0;         // inter-well tunneling amplitude
    double u = 0.0;                   // bare on-site interaction energy
    double w0 = 0.0;                  // per-photon cavity-assisted interaction energy
    double mode_overlap_factor = 0.0; // dimensionless well/mode overlap, -> 1 ideally
    double quartic_integral = 0.0;          // int |w|^4 dx
    double weighted_quartic_integral = 0.0; // int |w|^4 e^{-x^2/sigma^2} dx
};

namespace detail {

// Adaptive result cross-checked by Richardson comparison of two fixed grids;
// disagreement means the integrand was too sharp for the window resolution.
// The adaptive tolerance 1e-10 is anchored at order-one integrals and scaled
// up with the integral's magnitude so the rule is unit-system independent.
template <class F>
double checked_integral(F&& f, double half_window) {
    const double coarse = composite_simpson(f, -half_window, half_window, 2048);
    const double fine = composite_simpson(f, -half_window, half_window, 4096);
    const double tol = fine != 0.0 ? 1e-10 * std::abs(fine) : 1e-10;
    const double value = adaptive_simpson(f, -half_window, half_window, tol);
    const double scale = std::max({std::abs(value), std::abs(fine), 1e-30});
    if (std::abs(fine - coarse) > 1e-6 * scale)
        throw QuadratureError("two_mode_couplings: quadrature did not converge across grid "
                              "refinement; integrand too sharp for the window");
    return value;
}

} // namespace detail

// Quasi-1D couplings of the Gaussian-Wannier double well: on-site energy and
// tunneling from a caller-supplied longitudinal potential, the contact
// interaction scaled by the transverse area, and the cavity-assisted coupling
// with the standing-wave and waist factors evaluated literally.
inline TwoModeCouplings two_mode_couplings(const ExperimentalInputs& in, double u_0,
                                           const std::function<double(double)>& v_dw) {
    in.validate();
    if (!v_dw)
        throw InvalidArgument("two_mode_couplings: a longitudinal potential is required");

    const double s = in.well_width;
    const double d = in.well_sep;
    const double norm = std::pow(pi * s * s, -0.25);
    const auto wannier = [&](double center, double x) {
        const double z = (x - center) / s;
        return norm * std::exp(-0.5 * z * z);
    };
    const auto wannier_slope = [&](double center, double x) {
        return -(x - center) / (s * s) * wannier(center, x);
    };

    const double half_window = 8.0 * (0.5 * d + s);
    const double left = -0.5 * d;
    const double right = 0.5 * d;
    const double hh2m = in.hbar * in.hbar / (2.0 * in.m_atom);

    TwoModeCouplings out;

    const double onsite_kinetic = hh2m * detail::checked_integral(
        [&](double x) { const double g = wannier_slope(left, x); return g * g; }, half_window);
    const double onsite_potential = detail::checked_integral(
        [&](double x) { const double w = wannier(left, x); return w * w * v_dw(x); },
        half_window);
    const double transverse_zero_point = in.hbar * in.hbar / (in.m_atom * in.l_h * in.l_h);
    out.epsilon = transverse_zero_point + onsite_kinetic + onsite_potential;

    const double cross_kinetic = hh2m * detail::checked_integral(
        [&](double x) { return wannier_slope(left, x) * wannier_slope(right, x); },
        half_window);
    const double cross_potential = detail::checked_integral(
        [&](double x) { return wannier(left, x) * wannier(right, x) * v_dw(x); }, half_window);
    out.tunneling_j = -(cross_kinetic + cross_potential);

    const auto quartic = [&](double x) {
        const double w = wannier(left, x);
        return w * w * w * w;
    };
    out.quartic_integral = detail::checked_integral(quartic, half_window);
    out.weighted_quartic_integral = detail::checked_integral(
        [&](double x) {
            const double z = x / in.sigma;
            return quartic(x) * std::exp(-z * z);
        },
        half_window);

    out.u = contact_g(in.a_s, in.m_atom, in.hbar) / (2.0 * pi * in.l_h * in.l_h) *
            out.quartic_integral;

    const double standing_wave = 1.0 + std::exp(-0.5 * in.k * in.k * in.l_h * in.l_h);
    const double waist_norm = std::sqrt(2.0 * (in.l_h * in.l_h + 2.0 * in.sigma * in.sigma));
    out.w0 = u_0 * standing_wave /
             (in.cavity_length * pi * pi * in.sigma * in.l_h * in.l_h * waist_norm) *
             out.weighted_quartic_integral;

    out.mode_overlap_factor = standing_wave * in.sigma / waist_norm * out.weighted_quartic_integral /
                              out.quartic_integral;
    return out;
}

} // namespace ctwist
