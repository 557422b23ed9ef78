#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "math_util.hpp"

namespace ctwist {

// Collective-spin (Dicke) basis for N spin-1/2 atoms in the symmetric sector:
// j = N/2, basis states |j, m> with m ascending from -N/2 to +N/2. Magnetic
// quantum numbers are stored as exact integers 2m so half-integer spins (odd N)
// never touch floating point in bookkeeping.
class DickeBasis {
public:
    explicit DickeBasis(int n_atoms) : n_atoms_(n_atoms) {
        if (n_atoms < 1) throw InvalidArgument("DickeBasis: n_atoms must be >= 1");
    }

    int n_atoms() const { return n_atoms_; }
    int dim() const { return n_atoms_ + 1; }
    double j() const { return 0.5 * n_atoms_; }

    // 2m for basis index i in [0, dim): ascending -N, -N+2, ..., +N.
    int two_m(int i) const { return 2 * i - n_atoms_; }
    double m(int i) const { return 0.5 * two_m(i); }

    int index_of_two_m(int two_m_value) const {
        int i = (two_m_value + n_atoms_) / 2;
        if (i < 0 || i >= dim() || two_m(i) != two_m_value)
            throw InvalidArgument("DickeBasis: 2m value not in this basis");
        return i;
    }

    // Raising amplitude <m+1|J+|m> = sqrt(j(j+1) - m(m+1)), for index i -> i+1.
    double raise_amplitude(int i) const {
        const double jj = j();
        const double mm = m(i);
        return std::sqrt(jj * (jj + 1.0) - mm * (mm + 1.0));
    }

    // Lowering amplitude <m-1|J-|m> = sqrt(j(j+1) - m(m-1)), for index i -> i-1.
    double lower_amplitude(int i) const {
        const double jj = j();
        const double mm = m(i);
        return std::sqrt(jj * (jj + 1.0) - mm * (mm - 1.0));
    }

private:
    int n_atoms_;
};

inline Eigen::MatrixXcd jz_matrix(const DickeBasis& b) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(b.dim(), b.dim());
    for (int i = 0; i < b.dim(); ++i) out(i, i) = b.m(i);
    return out;
}

inline Eigen::MatrixXcd jplus_matrix(const DickeBasis& b) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(b.dim(), b.dim());
    for (int i = 0; i + 1 < b.dim(); ++i) out(i + 1, i) = b.raise_amplitude(i);
    return out;
}

inline Eigen::MatrixXcd jminus_matrix(const DickeBasis& b) {
    return jplus_matrix(b).adjoint();
}

inline Eigen::MatrixXcd jx_matrix(const DickeBasis& b) {
    Eigen::MatrixXcd jp = jplus_matrix(b);
    return 0.5 * (jp + jp.adjoint());
}

inline Eigen::MatrixXcd jy_matrix(const DickeBasis& b) {
    Eigen::MatrixXcd jp = jplus_matrix(b);
    return complex(0, -0.5) * (jp - Eigen::MatrixXcd(jp.adjoint()));
}

// Pure symmetric state: amplitude vector over the Dicke basis.
class AtomicState {
public:
    AtomicState(DickeBasis basis, Eigen::VectorXcd amplitudes)
        : basis_(basis), amps_(std::move(amplitudes)) {
        if (amps_.size() != basis_.dim())
            throw InvalidArgument("AtomicState: amplitude vector has wrong dimension");
    }

    const DickeBasis& basis() const { return basis_; }
    const Eigen::VectorXcd& amplitudes() const { return amps_; }
    complex amplitude(int i) const { return amps_(i); }
    double norm() const { return amps_.norm(); }

private:
    DickeBasis basis_;
    Eigen::VectorXcd amps_;
};

// Coherent spin state fully polarized along +x: C_m = sqrt(C(N, m + N/2) / 2^N).
// Amplitudes are real and positive; computed in log space so N = 1000 is fine.
inline AtomicState coherent_state_plus_x(int n_atoms) {
    DickeBasis b(n_atoms);
    Eigen::VectorXcd amps(b.dim());
    for (int i = 0; i < b.dim(); ++i) {
        const double log_amp = 0.5 * (log_binomial(n_atoms, i) - n_atoms * std::log(2.0));
        amps(i) = std::exp(log_amp);
    }
    return AtomicState(b, std::move(amps));
}

// The binomial weights |C_m|^2 of the +x coherent state.
inline std::vector<double> coherent_state_weights(int n_atoms) {
    std::vector<double> w(n_atoms + 1);
    for (int k = 0; k <= n_atoms; ++k)
        w[k] = std::exp(log_binomial(n_atoms, k) - n_atoms * std::log(2.0));
    return w;
}

// Mixed symmetric state. Construction validates Hermiticity and unit trace;
// positivity is checked where it is actually consumed (eigenvalue-based QFI).
class AtomicDensityMatrix {
public:
    static constexpr double hermiticity_tol = 1e-10;
    static constexpr double trace_tol = 1e-10;

    AtomicDensityMatrix(DickeBasis basis, Eigen::MatrixXcd rho)
        : basis_(basis), rho_(std::move(rho)) {
        if (rho_.rows() != basis_.dim() || rho_.cols() != basis_.dim())
            throw InvalidArgument("AtomicDensityMatrix: matrix has wrong dimension");
        const double herm_err = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
        if (herm_err > hermiticity_tol)
            throw NonPhysicalState("AtomicDensityMatrix: not Hermitian (max deviation " +
                                   std::to_string(herm_err) + ")");
        const double tr_err = std::abs(rho_.trace() - complex(1.0, 0.0));
        if (tr_err > trace_tol)
            throw NonPhysicalState("AtomicDensityMatrix: trace deviates from 1 by " +
                                   std::to_string(tr_err));
    }

    static AtomicDensityMatrix from_pure(const AtomicState& psi) {
        Eigen::VectorXcd v = psi.amplitudes() / psi.norm();
        return AtomicDensityMatrix(psi.basis(), v * v.adjoint());
    }

    const DickeBasis& basis() const { return basis_; }
    const Eigen::MatrixXcd& matrix() const { return rho_; }

    complex expectation(const Eigen::MatrixXcd& op) const {
        return (rho_ * op).trace();
    }

    double purity() const { return (rho_ * rho_).trace().real(); }

private:
    DickeBasis basis_;
    Eigen::MatrixXcd rho_;
};

} // namespace ctwist
