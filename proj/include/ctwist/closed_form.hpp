#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "math_util.hpp"
#include "spin_algebra.hpp"

namespace ctwist {

// Model parameters of the dispersive atom-cavity system, all rates in units of
// the atomic interaction U unless the caller chooses otherwise (the dynamics
// only ever sees ratios and products with time).
struct ModelParams {
    int n_atoms = 0;
    double u = 0.0;          // on-site atomic interaction (J_z^2 coefficient)
    double w0 = 0.0;         // dispersive atom-photon coupling (J_z^2 per photon)
    double delta_c = 0.0;    // effective cavity detuning (constant shifts absorbed)
    double eta = 0.0;        // cavity pump amplitude
    double kappa = 0.0;      // photon loss rate
    double tunneling_j = 0.0;// inter-well tunneling (dense evolution only)
    double epsilon = 0.0;    // single-particle offset; global phase at fixed N

    void validate() const {
        if (n_atoms < 1) throw InvalidArgument("ModelParams: n_atoms must be >= 1");
        if (kappa < 0.0) throw InvalidArgument("ModelParams: kappa must be >= 0");
        if (!(std::isfinite(u) && std::isfinite(w0) && std::isfinite(delta_c) &&
              std::isfinite(eta) && std::isfinite(kappa) && std::isfinite(tunneling_j)))
            throw InvalidArgument("ModelParams: non-finite parameter");
    }
};

// Initial state of the cavity mode.
struct PhotonInput {
    enum class Kind { vacuum, coherent, fock };

    Kind kind = Kind::vacuum;
    complex alpha{0.0, 0.0}; // coherent amplitude
    int fock_n = 0;          // Fock occupation

    static PhotonInput make_vacuum() { return {}; }
    static PhotonInput make_coherent(complex a) {
        PhotonInput p;
        p.kind = Kind::coherent;
        p.alpha = a;
        return p;
    }
    static PhotonInput make_fock(int n) {
        if (n < 0) throw InvalidArgument("PhotonInput: Fock occupation must be >= 0");
        PhotonInput p;
        p.kind = Kind::fock;
        p.fock_n = n;
        return p;
    }

    double mean_photons() const {
        switch (kind) {
            case Kind::vacuum: return 0.0;
            case Kind::coherent: return std::norm(alpha);
            case Kind::fock: return static_cast<double>(fock_n);
        }
        return 0.0;
    }
};

// Per-sector spectral data: each Dicke sector |m> sees the cavity frequency
// omega_m = -delta_c + 2*w0*m^2 and (when pumped) the displaced-frame
// amplitude beta_m = eta / omega_m.
class SpectralCoefficients {
public:
    static SpectralCoefficients compute(const ModelParams& p) {
        p.validate();
        SpectralCoefficients s(DickeBasis(p.n_atoms));
        const double jmax = 0.5 * p.n_atoms;
        s.resonance_threshold_ =
            1e-9 * std::max({std::abs(p.delta_c), 2.0 * std::abs(p.w0) * jmax * jmax, 1e-30});
        s.omega_.resize(s.basis_.dim());
        s.beta_.resize(s.basis_.dim(), 0.0);
        for (int i = 0; i < s.basis_.dim(); ++i) {
            const double m = s.basis_.m(i);
            s.omega_[i] = -p.delta_c + 2.0 * p.w0 * m * m;
        }
        if (p.eta != 0.0) {
            for (int i = 0; i < s.basis_.dim(); ++i) {
                if (std::abs(s.omega_[i]) <= s.resonance_threshold_)
                    throw ResonanceError(
                        "SpectralCoefficients: sector 2m = " + std::to_string(s.basis_.two_m(i)) +
                        " is resonant (omega_m = " + std::to_string(s.omega_[i]) +
                        "); the pumped closed form is undefined there");
                s.beta_[i] = p.eta / s.omega_[i];
            }
        }
        return s;
    }

    const DickeBasis& basis() const { return basis_; }
    double omega(int i) const { return omega_[i]; }
    double beta(int i) const { return beta_[i]; }
    double resonance_threshold() const { return resonance_threshold_; }

    double max_abs_omega() const {
        double v = 0.0;
        for (double w : omega_) v = std::max(v, std::abs(w));
        return v;
    }

    // Transient coherent displacement of sector m under the pump:
    // gamma_m(t) = beta_m (e^{-i omega_m t} - 1); the cavity amplitude is -i*gamma_m.
    complex gamma_at(int i, double t) const {
        return beta_[i] * (std::exp(complex(0.0, -omega_[i] * t)) - complex(1.0, 0.0));
    }

private:
    explicit SpectralCoefficients(DickeBasis b) : basis_(b) {}

    DickeBasis basis_;
    std::vector<double> omega_;
    std::vector<double> beta_;
    double resonance_threshold_ = 0.0;
};

// Photon-sector coherence factor u_{mm'}(t) for an unpumped cavity prepared in
// `input`: the overlap of the field states dragged along by sectors m and m'.
// For a coherent state: exp(|alpha|^2 (e^{-i(omega_m - omega_m')t} - 1));
// a Fock state only acquires a phase; vacuum gives exactly 1.
inline complex coherence_factor_no_pump(const SpectralCoefficients& s, const PhotonInput& input,
                                        int i, int j, double t) {
    const double dw = s.omega(i) - s.omega(j);
    switch (input.kind) {
        case PhotonInput::Kind::vacuum:
            return {1.0, 0.0};
        case PhotonInput::Kind::fock:
            return std::exp(complex(0.0, -dw * t * input.fock_n));
        case PhotonInput::Kind::coherent: {
            const double nbar = std::norm(input.alpha);
            const complex ex = std::exp(complex(0.0, -dw * t)) - complex(1.0, 0.0);
            return std::exp(nbar * ex);
        }
    }
    return {1.0, 0.0};
}

// Coherence factor for the pumped cavity starting from vacuum. Sector m carries
// the phase eta*beta_m*t - beta_m^2 sin(omega_m t) and the displacement -i*gamma_m(t);
// u_{mm'} is the phase difference times the displaced-state overlap. |u| <= 1 and
// u_{mm} = 1 exactly.
inline complex coherence_factor_pumped(const SpectralCoefficients& s, double eta, int i, int j,
                                       double t) {
    const complex gi = s.gamma_at(i, t);
    const complex gj = s.gamma_at(j, t);
    const double phase = eta * t * (s.beta(i) - s.beta(j)) -
                         (s.beta(i) * s.beta(i) * std::sin(s.omega(i) * t) -
                          s.beta(j) * s.beta(j) * std::sin(s.omega(j) * t));
    const complex overlap_exponent =
        -0.5 * (std::norm(gi) + std::norm(gj)) + gi * std::conj(gj);
    return std::exp(complex(0.0, phase) + overlap_exponent);
}

namespace detail {

inline void require_closed_form_applicable(const ModelParams& p) {
    p.validate();
    if (p.kappa != 0.0)
        throw InvalidArgument("closed form: photon loss (kappa != 0) is not representable; "
                              "use the Lindblad engine");
    if (p.tunneling_j != 0.0)
        throw InvalidArgument("closed form: tunneling couples sectors; use dense evolution");
}

template <typename CoherenceFn>
AtomicDensityMatrix assemble_reduced_state(const ModelParams& p, double t, CoherenceFn&& u) {
    const AtomicState css = coherent_state_plus_x(p.n_atoms);
    const DickeBasis& b = css.basis();
    Eigen::MatrixXcd rho(b.dim(), b.dim());
    for (int i = 0; i < b.dim(); ++i) {
        const double mi = b.m(i);
        rho(i, i) = std::norm(css.amplitude(i));
        for (int j = 0; j < i; ++j) {
            const double mj = b.m(j);
            const complex interaction_phase =
                std::exp(complex(0.0, -p.u * (mi * mi - mj * mj) * t));
            const complex val = css.amplitude(i) * std::conj(css.amplitude(j)) *
                                interaction_phase * u(i, j);
            rho(i, j) = val;
            rho(j, i) = std::conj(val);
        }
    }
    return AtomicDensityMatrix(b, std::move(rho));
}

} // namespace detail

// Reduced atomic state at time t for an unpumped cavity (eta = 0) prepared in
// `input`, atoms starting in the +x coherent state. Diagonal is the exact
// binomial distribution at all times.
inline AtomicDensityMatrix evolve_no_pump(const ModelParams& p, const PhotonInput& input,
                                          double t) {
    detail::require_closed_form_applicable(p);
    if (p.eta != 0.0)
        throw InvalidArgument("evolve_no_pump: eta != 0; use evolve_pumped");
    const SpectralCoefficients s = SpectralCoefficients::compute(p);
    return detail::assemble_reduced_state(
        p, t, [&](int i, int j) { return coherence_factor_no_pump(s, input, i, j, t); });
}

// Reduced atomic state at time t for a pumped cavity starting from vacuum.
inline AtomicDensityMatrix evolve_pumped(const ModelParams& p, double t) {
    detail::require_closed_form_applicable(p);
    const SpectralCoefficients s = SpectralCoefficients::compute(p);
    return detail::assemble_reduced_state(
        p, t, [&](int i, int j) { return coherence_factor_pumped(s, p.eta, i, j, t); });
}

// Mean intracavity photon number matching the closed forms above: constant for
// the unpumped cases, sum over sector displacements for the pumped one.
inline double closed_form_mean_photons(const ModelParams& p, const PhotonInput& input, double t) {
    detail::require_closed_form_applicable(p);
    if (p.eta == 0.0) return input.mean_photons();
    const SpectralCoefficients s = SpectralCoefficients::compute(p);
    const std::vector<double> w = coherent_state_weights(p.n_atoms);
    double n = 0.0;
    for (int i = 0; i < s.basis().dim(); ++i) n += w[i] * std::norm(s.gamma_at(i, t));
    return n;
}

} // namespace ctwist
