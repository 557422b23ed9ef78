#pragma once

// Spin-coherent-state Husimi Q-function maps on the generalized Bloch sphere.
//
// Convention: the spin coherent state at polar angle theta and azimuth phi has
// Dicke amplitudes
//   <m|theta,phi> = sqrt(binom(N, N/2+m)) cos(theta/2)^{N/2+m}
//                   sin(theta/2)^{N/2-m} e^{-i(N/2+m) phi},
// so theta = 0 is the m = +N/2 pole and (theta, phi) = (pi/2, 0) is the +x
// coherent spin state. The map is normalized as Q = (N+1)/(4 pi) <t,p|rho|t,p>,
// which integrates to one over the sphere.

#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include <ctwist/errors.hpp>
#include <ctwist/math_util.hpp>
#include <ctwist/quadrature.hpp>
#include <ctwist/spin_algebra.hpp>

namespace ctwist {

struct SphereGrid {
    Eigen::ArrayXd theta;    // ascending in (0, pi)
    Eigen::ArrayXd phi;      // uniform in [0, 2 pi)
    Eigen::ArrayXXd weights; // (theta, phi)-indexed solid-angle weights

    // Gauss-Legendre in cos(theta) x uniform in phi. Exact-degree quadrature:
    // normalization holds to machine precision whenever n_phi exceeds the
    // atom number and 2 n_theta - 1 is at least the atom number.
    static SphereGrid gauss_legendre_grid(int n_theta = 128, int n_phi = 256) {
        if (n_theta < 1 || n_phi < 1)
            throw InvalidArgument("SphereGrid: grid sizes must be positive");
        const auto rule = gauss_legendre(n_theta);
        SphereGrid grid;
        grid.theta.resize(n_theta);
        grid.phi.resize(n_phi);
        grid.weights.resize(n_theta, n_phi);
        const double phi_weight = 2.0 * pi / n_phi;
        for (int i = 0; i < n_theta; ++i) {
            // Nodes ascend in cos(theta), so reverse to make theta ascend.
            grid.theta(i) = std::acos(rule.nodes(n_theta - 1 - i));
            grid.weights.row(i) = rule.weights(n_theta - 1 - i) * phi_weight;
        }
        for (int j = 0; j < n_phi; ++j)
            grid.phi(j) = 2.0 * pi * j / n_phi;
        return grid;
    }

    void validate() const {
        if (weights.rows() != theta.size() || weights.cols() != phi.size())
            throw InvalidArgument("SphereGrid: weight shape does not match the axes");
        if (std::abs(weights.sum() - 4.0 * pi) > 1e-9)
            throw InvalidArgument("SphereGrid: weights do not sum to the full solid angle");
    }
};

struct HusimiMap {
    SphereGrid grid;
    Eigen::ArrayXXd values; // Q in 1/steradian, same shape as grid.weights

    double integral() const { return (grid.weights * values).sum(); }
};

namespace detail {

// Radial (phi-independent) part of the spin-coherent amplitudes, evaluated in
// log space so the binomials stay finite for hundreds of atoms.
inline Eigen::ArrayXd spin_coherent_radial(int n_atoms, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const double lc = c > 0.0 ? std::log(c) : 0.0;
    const double ls = s > 0.0 ? std::log(s) : 0.0;
    Eigen::ArrayXd r(n_atoms + 1);
    for (int i = 0; i <= n_atoms; ++i) {
        if ((c == 0.0 && i > 0) || (s == 0.0 && i < n_atoms)) {
            r(i) = 0.0;
            continue;
        }
        r(i) = std::exp(0.5 * log_binomial(n_atoms, i) + i * lc + (n_atoms - i) * ls);
    }
    return r;
}

} // namespace detail

inline AtomicState spin_coherent_overlap(int n_atoms, double theta, double phi) {
    const DickeBasis basis(n_atoms);
    const Eigen::ArrayXd r = detail::spin_coherent_radial(n_atoms, theta);
    Eigen::VectorXcd c(basis.dim());
    for (int i = 0; i < basis.dim(); ++i)
        c(i) = std::polar(r(i), -double(i) * phi);
    return AtomicState(basis, c);
}

inline double husimi_q_point(const AtomicDensityMatrix& rho, double theta, double phi) {
    const int n = rho.basis().n_atoms();
    const Eigen::VectorXcd c = spin_coherent_overlap(n, theta, phi).amplitudes();
    const complex q = c.adjoint() * rho.matrix() * c;
    return (n + 1) / (4.0 * pi) * q.real();
}

// Per theta row the overlap is a trigonometric polynomial in phi:
//   <t,p|rho|t,p> = sum_d s_d e^{i d phi},  s_d = tr of the d-th subdiagonal of
// diag(r) rho diag(r), with s_{-d} = conj(s_d). Evaluating the diagonal sums
// once per row makes the map linear rather than quadratic in the grid size.
inline HusimiMap husimi_q(const AtomicDensityMatrix& rho, const SphereGrid& grid) {
    grid.validate();
    const int n = rho.basis().n_atoms();
    const int dim = n + 1;
    const int n_theta = static_cast<int>(grid.theta.size());
    const int n_phi = static_cast<int>(grid.phi.size());
    const double scale = dim / (4.0 * pi);

    HusimiMap map;
    map.grid = grid;
    map.values.resize(n_theta, n_phi);

    Eigen::MatrixXcd w(dim, dim);
    Eigen::VectorXcd s(dim);
    for (int ti = 0; ti < n_theta; ++ti) {
        const Eigen::ArrayXd r = detail::spin_coherent_radial(n, grid.theta(ti));
        w = r.matrix().asDiagonal() * rho.matrix() * r.matrix().asDiagonal();
        for (int d = 0; d < dim; ++d)
            s(d) = w.diagonal(-d).sum();
        for (int pj = 0; pj < n_phi; ++pj) {
            const double phi = grid.phi(pj);
            double q = s(0).real();
            for (int d = 1; d < dim; ++d)
                q += 2.0 * (s(d) * std::polar(1.0, d * phi)).real();
            map.values(ti, pj) = scale * q;
        }
    }
    return map;
}

// Circular spread of the map about the z-axis: 1 - |<e^{i phi}>_Q|, zero for a
// map concentrated at one azimuth and approaching one for an equatorial ring.
inline double azimuthal_circular_variance(const HusimiMap& map) {
    complex first_moment = 0.0;
    double mass = 0.0;
    for (int ti = 0; ti < map.values.rows(); ++ti)
        for (int pj = 0; pj < map.values.cols(); ++pj) {
            const double p = map.grid.weights(ti, pj) * map.values(ti, pj);
            first_moment += p * std::polar(1.0, map.grid.phi(pj));
            mass += p;
        }
    if (!(mass > 0.0))
        throw NonPhysicalState("azimuthal_circular_variance: map has no positive mass");
    return 1.0 - std::abs(first_moment) / mass;
}

inline void write_husimi_csv(const HusimiMap& map, std::ostream& os) {
    os << "theta_rad,phi_rad,weight_sr,husimi_q_per_sr\n";
    char line[160];
    for (int ti = 0; ti < map.values.rows(); ++ti)
        for (int pj = 0; pj < map.values.cols(); ++pj) {
            std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n",
                          map.grid.theta(ti), map.grid.phi(pj), map.grid.weights(ti, pj),
                          map.values(ti, pj));
            os << line;
        }
}

} // namespace ctwist
