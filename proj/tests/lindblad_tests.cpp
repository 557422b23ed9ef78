#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <ctwist/lindblad.hpp>
#include <ctwist/metrology.hpp>

#include "oracles.hpp"

using ctwist::complex;
using Catch::Approx;

namespace {

ctwist::ModelParams params(int n, double u, double w0, double dc, double eta = 0.0,
                           double kappa = 0.0, double j = 0.0) {
    ctwist::ModelParams p;
    p.n_atoms = n;
    p.u = u;
    p.w0 = w0;
    p.delta_c = dc;
    p.eta = eta;
    p.kappa = kappa;
    p.tunneling_j = j;
    return p;
}

ctwist::JointBlockState css_block_state(const ctwist::ModelParams& p, int n_max,
                                        const ctwist::PhotonInput& input) {
    return ctwist::make_initial_block_state(ctwist::coherent_state_plus_x(p.n_atoms),
                                            ctwist::FockSpace{n_max}, input);
}

ctwist::DenseJointState css_dense_state(const ctwist::ModelParams& p, int n_max,
                                        const ctwist::PhotonInput& input) {
    return ctwist::make_initial_dense_state(ctwist::coherent_state_plus_x(p.n_atoms),
                                            ctwist::FockSpace{n_max}, input);
}

double max_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("photonic block Hamiltonian entries") {
    const ctwist::FockSpace fock{7};
    const auto p = params(4, 0.7, 1.3, 0.9, 1.7);

    SECTION("pump and diagonal elements") {
        const auto h = ctwist::build_hamiltonian_block(p, /*two_m=*/-2, fock);
        const double m = -1.0;
        const double w = -p.delta_c + 2.0 * p.w0 * m * m;
        for (int n = 0; n <= 7; ++n) {
            CHECK(h(n, n).real() == Approx(w * n + p.u * m * m).margin(1e-14));
            CHECK(h(n, n).imag() == Approx(0.0).margin(1e-15));
        }
        for (int n = 0; n < 7; ++n) {
            CHECK(h(n + 1, n) == complex(0.0, -p.eta * std::sqrt(n + 1.0)));
            CHECK(h(n, n + 1) == complex(0.0, p.eta * std::sqrt(n + 1.0)));
        }
        CHECK(max_diff(h, h.adjoint()) == 0.0);
    }

    SECTION("no pump, central sector, unit detuning: H = -n_hat") {
        auto q = params(4, 0.0, 1.0, 1.0);
        const auto h = ctwist::build_hamiltonian_block(q, 0, fock);
        for (int n = 0; n <= 7; ++n)
            for (int k = 0; k <= 7; ++k)
                CHECK(h(n, k) == complex(n == k ? -double(n) : 0.0, 0.0));
    }

    SECTION("tunneling invalidates the block form") {
        auto q = params(4, 1.0, 1.0, 1.0, 0.0, 0.0, 0.5);
        CHECK_THROWS_AS(ctwist::build_hamiltonian_block(q, 0, fock), ctwist::BlockFormInvalid);
        auto state = css_block_state(params(4, 1, 1, 1), 4, ctwist::PhotonInput::make_vacuum());
        CHECK_THROWS_AS(ctwist::evolve_blocks(state, q, {}, 0.1), ctwist::BlockFormInvalid);
    }
}

TEST_CASE("photon cutoff heuristic") {
    SECTION("coherent seed dominates") {
        const auto p = params(6, 1.0, 1.0, 1.0);
        const auto in = ctwist::PhotonInput::make_coherent(std::sqrt(40.0));
        CHECK(ctwist::choose_fock_cutoff(p, in, 0.025) == 101);
    }
    SECTION("vacuum floor") {
        const auto p = params(6, 1.0, 1.0, 1.0);
        CHECK(ctwist::choose_fock_cutoff(p, ctwist::PhotonInput::make_vacuum(), 5.0) == 10);
    }
    SECTION("worst-sector displacement dominates the pumped heuristic") {
        // N = 2 with unit couplings has a sector at |omega| = 1, so 2 beta = 16.
        const auto p = params(2, 1.0, 1.0, 1.0, 8.0);
        const int n_max = ctwist::choose_fock_cutoff(p, ctwist::PhotonInput::make_vacuum(), 0.2);
        CHECK(n_max == 394);
        // Certify by running at that cutoff: the top level must stay empty.
        auto state = css_block_state(p, n_max, ctwist::PhotonInput::make_vacuum());
        REQUIRE_NOTHROW(state = ctwist::evolve_blocks(std::move(state), p, {}, 0.2));
        CHECK(state.peak_top_level_population < 1e-8);
    }
    SECTION("loss-aware refinement never exceeds the bare heuristic") {
        auto p = params(2, 1.0, 1.0, 1.0, 8.0);
        const auto vac = ctwist::PhotonInput::make_vacuum();
        CHECK(ctwist::choose_fock_cutoff_damped(p, vac, 0.2) <=
              ctwist::choose_fock_cutoff(p, vac, 0.2));
        // Within a horizon of 0.2 the pump displaces at most eta*t = 1.6.
        CHECK(ctwist::choose_fock_cutoff_damped(p, vac, 0.2) == 26);
        p.kappa = 100.0; // drain faster than the drive rings up
        CHECK(ctwist::choose_fock_cutoff_damped(p, vac, 5.0) <= 30);
    }
}

TEST_CASE("initial joint states") {
    const auto p = params(3, 1.0, 1.0, 0.5);
    const ctwist::FockSpace fock{20};
    const auto in = ctwist::PhotonInput::make_coherent(complex(1.1, -0.4));

    SECTION("blocks are rank-one products of atomic and photonic amplitudes") {
        const auto atoms = ctwist::coherent_state_plus_x(3);
        const auto state = ctwist::make_initial_block_state(atoms, fock, in);
        const auto phi = ctwist::photon_input_vector(in, fock);
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) {
                const Eigen::MatrixXcd expect = atoms.amplitude(i) *
                                                std::conj(atoms.amplitude(j)) *
                                                (phi * phi.adjoint());
                CHECK(max_diff(state.block(i, j), expect) < 1e-15);
            }
        CHECK(std::abs(state.global_trace() - complex(1.0, 0.0)) < 1e-12);
        // Separable state: tracing photons returns the atomic projector exactly.
        const auto rho = ctwist::partial_trace_photons(state);
        const Eigen::VectorXcd c = atoms.amplitudes();
        CHECK(max_diff(rho.matrix(), c * c.adjoint()) < 1e-12);
    }

    SECTION("photon observables at t = 0") {
        const auto state = ctwist::make_initial_block_state(ctwist::coherent_state_plus_x(3),
                                                            fock, in);
        const auto obs = ctwist::photon_observables(state);
        CHECK(obs.n_mean == Approx(std::norm(in.alpha)).epsilon(1e-9));
        CHECK(obs.n_var == Approx(std::norm(in.alpha)).epsilon(1e-7));
        const auto fk = ctwist::make_initial_block_state(
            ctwist::coherent_state_plus_x(3), fock, ctwist::PhotonInput::make_fock(5));
        const auto fobs = ctwist::photon_observables(fk);
        CHECK(fobs.n_mean == Approx(5.0).margin(1e-12));
        CHECK(fobs.n_var == Approx(0.0).margin(1e-12));
    }

    SECTION("truncation guards") {
        CHECK_THROWS_AS(ctwist::photon_input_vector(ctwist::PhotonInput::make_coherent(2.0),
                                                    ctwist::FockSpace{5}),
                        ctwist::CutoffExceeded);
        CHECK_THROWS_AS(ctwist::photon_input_vector(ctwist::PhotonInput::make_fock(9),
                                                    ctwist::FockSpace{8}),
                        ctwist::CutoffExceeded);
        double r = 0.0;
        const auto phi = ctwist::photon_input_vector(in, fock, &r);
        CHECK(r >= 1.0 - 1e-10);
        CHECK(phi.norm() == Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("lossless block evolution matches the closed forms") {
    SECTION("coherent input, no pump") {
        const auto p = params(6, 1.0, 1.0, 1.0);
        const auto in = ctwist::PhotonInput::make_coherent(2.0); // 4 photons on average
        const int n_max = ctwist::choose_fock_cutoff_damped(p, in, 0.2);
        auto state = css_block_state(p, n_max, in);
        for (const double t : {0.05, 0.1, 0.2}) {
            state = ctwist::evolve_blocks(std::move(state), p, {}, t);
            const auto rho = ctwist::partial_trace_photons(state);
            const auto ref = ctwist::evolve_no_pump(p, in, t);
            CHECK(max_diff(rho.matrix(), ref.matrix()) < 1e-6);
        }
    }

    SECTION("complex coherent amplitude") {
        const auto p = params(5, 0.7, 1.3, 0.9);
        const auto in = ctwist::PhotonInput::make_coherent(complex(1.0, 0.5));
        auto state = css_block_state(p, 24, in);
        state = ctwist::evolve_blocks(std::move(state), p, {}, 0.13);
        const auto rho = ctwist::partial_trace_photons(state);
        CHECK(max_diff(rho.matrix(), ctwist::evolve_no_pump(p, in, 0.13).matrix()) < 1e-7);
    }

    SECTION("pumped from vacuum") {
        const auto p = params(6, 1.0, 1.0, 1.0, 8.0);
        const auto in = ctwist::PhotonInput::make_vacuum();
        const int n_max = ctwist::choose_fock_cutoff_damped(p, in, 0.2);
        auto state = css_block_state(p, n_max, in);
        for (const double t : {0.05, 0.1, 0.2}) {
            state = ctwist::evolve_blocks(std::move(state), p, {}, t);
            const auto rho = ctwist::partial_trace_photons(state);
            const auto ref = ctwist::evolve_pumped(p, t);
            CHECK(max_diff(rho.matrix(), ref.matrix()) < 1e-6);
        }
        // Mean photon number follows the same closed form.
        const auto obs = ctwist::photon_observables(state);
        CHECK(obs.n_mean == Approx(ctwist::closed_form_mean_photons(p, in, 0.2)).epsilon(1e-5));
    }
}

TEST_CASE("lossy block evolution matches the exact damped-kernel solution") {
    SECTION("coherent input, no pump, kappa > 0") {
        auto p = params(4, 0.6, 1.1, 0.8);
        const complex a0(1.1, 0.0);
        const auto in = ctwist::PhotonInput::make_coherent(a0);
        for (const double kappa : {0.5, 2.0}) {
            p.kappa = kappa;
            auto state = css_block_state(p, 22, in);
            for (const double t : {0.3, 0.9}) {
                state = ctwist::evolve_blocks(std::move(state), p, {}, t);
                const auto rho = ctwist::partial_trace_photons(state);
                CHECK(max_diff(rho.matrix(), oracle::reduced_state_lossy_no_pump(p, a0, t)) <
                      1e-7);
                const auto obs = ctwist::photon_observables(state);
                CHECK(obs.n_mean == Approx(oracle::mean_photons_lossy(p, in, t)).epsilon(1e-6));
            }
        }
    }

    SECTION("vacuum input, pumped, kappa > 0") {
        auto p = params(4, 0.9, 1.2, 1.1, 1.3);
        const auto in = ctwist::PhotonInput::make_vacuum();
        for (const double kappa : {0.7, 3.0}) {
            p.kappa = kappa;
            auto state = css_block_state(p, 20, in);
            for (const double t : {0.25, 0.8}) {
                state = ctwist::evolve_blocks(std::move(state), p, {}, t);
                const auto rho = ctwist::partial_trace_photons(state);
                CHECK(max_diff(rho.matrix(), oracle::reduced_state_lossy_pumped(p, t)) < 1e-7);
                const auto obs = ctwist::photon_observables(state);
                CHECK(obs.n_mean == Approx(oracle::mean_photons_lossy(p, in, t)).epsilon(1e-6));
            }
        }
    }

    SECTION("bare cavity decay laws") {
        // Undriven damped cavity: <n>(t) = |alpha|^2 e^{-kappa t} for any couplings;
        // here even the atom-photon coupling is off.
        auto p = params(3, 0.0, 0.0, 0.7, 0.0, 0.9);
        const auto in = ctwist::PhotonInput::make_coherent(1.3);
        auto state = css_block_state(p, 16, in);
        for (const double t : {0.5, 1.2}) {
            state = ctwist::evolve_blocks(std::move(state), p, {}, t);
            const auto obs = ctwist::photon_observables(state);
            CHECK(obs.n_mean ==
                  Approx(std::norm(complex(1.3)) * std::exp(-p.kappa * t)).epsilon(1e-6));
        }
        // Fock input decays at the same exponential rate.
        auto q = params(3, 0.5, 0.8, 0.6, 0.0, 0.8);
        auto fstate = css_block_state(q, 12, ctwist::PhotonInput::make_fock(2));
        fstate = ctwist::evolve_blocks(std::move(fstate), q, {}, 0.7);
        const auto fobs = ctwist::photon_observables(fstate);
        CHECK(fobs.n_mean == Approx(2.0 * std::exp(-q.kappa * 0.7)).epsilon(1e-6));
    }

    SECTION("diagonal-sector traces are conserved even with loss") {
        auto p = params(5, 0.8, 1.1, 0.9, 1.2, 1.7);
        auto state = css_block_state(p, 18, ctwist::PhotonInput::make_vacuum());
        std::vector<double> before;
        for (int i = 0; i < state.basis.dim(); ++i)
            before.push_back(state.block(i, i).trace().real());
        state = ctwist::evolve_blocks(std::move(state), p, {}, 0.6);
        for (int i = 0; i < state.basis.dim(); ++i)
            CHECK(state.block(i, i).trace().real() == Approx(before[i]).margin(1e-10));
    }
}

TEST_CASE("block and dense representations agree") {
    const auto p = params(4, 0.7, 1.2, -0.8, 1.9, 1.1);
    const auto in = ctwist::PhotonInput::make_coherent(0.9);
    ctwist::IntegratorConfig cfg;
    cfg.dt = 2.5e-4;

    SECTION("symmetric initial state (mirror fast path)") {
        auto bs = css_block_state(p, 20, in);
        bs = ctwist::evolve_blocks(std::move(bs), p, cfg, 0.35);
        auto ds = css_dense_state(p, 20, in);
        ds = ctwist::evolve_dense(std::move(ds), p, cfg, 0.35);
        CHECK(max_diff(ctwist::partial_trace_photons(bs).matrix(),
                       ctwist::partial_trace_photons(ds).matrix()) < 1e-8);
        const auto ob = ctwist::photon_observables(bs);
        const auto od = ctwist::photon_observables(ds);
        CHECK(ob.n_mean == Approx(od.n_mean).margin(1e-8));
        CHECK(ob.n_var == Approx(od.n_var).margin(1e-8));
    }

    SECTION("asymmetric atomic amplitudes (full per-pair path)") {
        Eigen::VectorXcd c(5);
        c << complex(0.9, 0.0), complex(0.1, 0.3), complex(-0.2, 0.1), complex(0.05, -0.15),
            complex(0.2, 0.0);
        c.normalize();
        const ctwist::AtomicState atoms(ctwist::DickeBasis(4), c);
        auto bs = ctwist::make_initial_block_state(atoms, ctwist::FockSpace{20}, in);
        bs = ctwist::evolve_blocks(std::move(bs), p, cfg, 0.35);
        auto ds = ctwist::make_initial_dense_state(atoms, ctwist::FockSpace{20}, in);
        ds = ctwist::evolve_dense(std::move(ds), p, cfg, 0.35);
        CHECK(max_diff(ctwist::partial_trace_photons(bs).matrix(),
                       ctwist::partial_trace_photons(ds).matrix()) < 1e-8);
    }
}

TEST_CASE("dense path handles tunneling") {
    SECTION("against brute-force joint diagonalization") {
        auto p = params(3, 0.6, 0.9, 0.7, 1.1, 0.0, 0.8);
        const auto in = ctwist::PhotonInput::make_coherent(0.8);
        const int n_max = 24;
        auto ds = css_dense_state(p, n_max, in);
        ds = ctwist::evolve_dense(std::move(ds), p, {}, 0.4);
        const auto rho = ctwist::partial_trace_photons(ds);
        const auto ref = oracle::reduced_state_unitary(p, in, n_max, 0.4);
        CHECK(max_diff(rho.matrix(), ref) < 1e-7);
    }

    SECTION("pure tunneling is a collective rotation") {
        // All atoms in the upper well; a quarter Rabi period later the spin
        // points along +y: the per-atom equal superposition with phase i.
        auto p = params(4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.8);
        const ctwist::DickeBasis basis(4);
        Eigen::VectorXcd c = Eigen::VectorXcd::Zero(5);
        c(4) = 1.0; // m = +j
        auto ds = ctwist::make_initial_dense_state(ctwist::AtomicState(basis, c),
                                                   ctwist::FockSpace{2},
                                                   ctwist::PhotonInput::make_vacuum());
        const double t_quarter = ctwist::pi / (4.0 * p.tunneling_j);
        ds = ctwist::evolve_dense(std::move(ds), p, {}, t_quarter);
        const auto rho = ctwist::partial_trace_photons(ds);
        const auto jy = ctwist::jy_matrix(basis);
        const auto jz = ctwist::jz_matrix(basis);
        CHECK(rho.expectation(jz).real() == Approx(0.0).margin(1e-7));
        CHECK(rho.expectation(jy).real() == Approx(2.0).margin(1e-7));
    }
}

TEST_CASE("RK4 convergence order") {
    const auto p = params(3, 0.8, 1.1, 0.9, 1.1, 0.8);
    const auto in = ctwist::PhotonInput::make_coherent(0.9);
    const auto run = [&](double dt) {
        ctwist::IntegratorConfig cfg;
        cfg.dt = dt;
        auto state = css_block_state(p, 14, in);
        state = ctwist::evolve_blocks(std::move(state), p, cfg, 0.2);
        return ctwist::partial_trace_photons(state).matrix();
    };
    const auto ref = run(5e-4);
    const double e1 = max_diff(run(4e-3), ref);
    const double e2 = max_diff(run(2e-3), ref);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
}

TEST_CASE("long-run conservation laws") {
    SECTION("trace, Hermiticity, positivity over 1e4 dense steps") {
        const auto p = params(2, 0.5, 0.8, 0.6, 0.7, 0.9);
        ctwist::IntegratorConfig cfg;
        cfg.dt = 1e-4;
        auto ds = css_dense_state(p, 12, ctwist::PhotonInput::make_coherent(0.7));
        ds = ctwist::evolve_dense(std::move(ds), p, cfg, 1.0); // 10^4 steps
        CHECK(std::abs(ds.trace() - complex(1.0, 0.0)) < 1e-9);
        CHECK(max_diff(ds.rho, ds.rho.adjoint()) < 1e-9);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(ds.rho);
        CHECK(es.eigenvalues().minCoeff() > -1e-7);
    }

    SECTION("joint purity is constant without loss") {
        const auto p = params(2, 0.5, 0.8, 0.6, 1.3, 0.0);
        auto ds = css_dense_state(p, 14, ctwist::PhotonInput::make_vacuum());
        CHECK(ds.purity() == Approx(1.0).epsilon(1e-10));
        ds = ctwist::evolve_dense(std::move(ds), p, {}, 0.5);
        CHECK(ds.purity() == Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("strong loss restores the bare twisting dynamics") {
    // With the cavity drained (or never populated), only the atomic
    // interaction term acts, so the reduced dynamics is one-axis twisting.
    auto p = params(8, 1.0, 1.0, 1.0, 0.0, 1000.0);
    const auto in = ctwist::PhotonInput::make_vacuum();
    auto oat = p;
    oat.kappa = 0.0;
    auto state = css_block_state(p, 10, in);
    const auto jy = ctwist::jy_matrix(ctwist::DickeBasis(8));
    for (const double t : {0.02, 0.05, 0.1}) {
        state = ctwist::evolve_blocks(std::move(state), p, {}, t);
        const double f_lindblad =
            ctwist::qfi_eigen(ctwist::partial_trace_photons(state), jy).value;
        const double f_oat = ctwist::qfi_exact_sum(oat, in, t);
        CHECK(f_lindblad == Approx(f_oat).epsilon(0.01));
    }
}

TEST_CASE("pump growth law at small detuning") {
    // Early-time mean photon number grows as (eta t)^2 up to O((delta_c t)^2).
    const auto p = params(3, 0.0, 0.0, 0.5, 3.0);
    auto state = css_block_state(p, 16, ctwist::PhotonInput::make_vacuum());
    state = ctwist::evolve_blocks(std::move(state), p, {}, 0.2);
    const auto obs = ctwist::photon_observables(state);
    const double expected = p.eta * p.eta * 0.2 * 0.2;
    CHECK(std::abs(obs.n_mean - expected) / expected < 0.02);
}

TEST_CASE("checkpointing") {
    const auto p = params(4, 0.7, 1.2, 0.9, 1.1, 0.6);
    const auto in = ctwist::PhotonInput::make_coherent(complex(0.8, 0.3));
    const std::string path = "ctwist_test_checkpoint.bin";

    SECTION("round trip is bit-exact") {
        auto state = css_block_state(p, 15, in);
        state = ctwist::evolve_blocks(std::move(state), p, {}, 0.23);
        ctwist::save_checkpoint(state, p, path);
        const auto loaded = ctwist::load_checkpoint(path);
        REQUIRE(loaded.state.basis.n_atoms() == 4);
        REQUIRE(loaded.state.fock.n_max == 15);
        CHECK(loaded.state.time == state.time);
        CHECK(loaded.params.u == p.u);
        CHECK(loaded.params.kappa == p.kappa);
        CHECK(loaded.state.input_renormalization == state.input_renormalization);
        REQUIRE(loaded.state.blocks.size() == state.blocks.size());
        for (std::size_t b = 0; b < state.blocks.size(); ++b) {
            REQUIRE(loaded.state.blocks[b].size() == state.blocks[b].size());
            CHECK(std::memcmp(loaded.state.blocks[b].data(), state.blocks[b].data(),
                              sizeof(complex) * state.blocks[b].size()) == 0);
        }
        std::filesystem::remove(path);
    }

    SECTION("resuming reproduces an uninterrupted run") {
        ctwist::IntegratorConfig cfg;
        cfg.dt = 1e-3;
        auto straight = css_block_state(p, 15, in);
        straight = ctwist::evolve_blocks(std::move(straight), p, cfg, 0.2);

        auto first = css_block_state(p, 15, in);
        first = ctwist::evolve_blocks(std::move(first), p, cfg, 0.1);
        ctwist::save_checkpoint(first, p, path);
        auto resumed = ctwist::load_checkpoint(path).state;
        resumed = ctwist::evolve_blocks(std::move(resumed), p, cfg, 0.2);
        std::filesystem::remove(path);

        double worst = 0.0;
        for (std::size_t b = 0; b < straight.blocks.size(); ++b)
            worst = std::max(worst, max_diff(straight.blocks[b], resumed.blocks[b]));
        CHECK(worst < 1e-12);
    }

    SECTION("malformed files are rejected") {
        auto state = css_block_state(p, 5, ctwist::PhotonInput::make_vacuum());
        ctwist::save_checkpoint(state, p, path);
        // Truncate.
        {
            std::ifstream is(path, std::ios::binary);
            std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
            std::ofstream os(path, std::ios::binary | std::ios::trunc);
            os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        }
        CHECK_THROWS_AS(ctwist::load_checkpoint(path), ctwist::CheckpointError);
        // Corrupt the magic.
        ctwist::save_checkpoint(state, p, path);
        {
            std::fstream fs(path, std::ios::binary | std::ios::in | std::ios::out);
            fs.seekp(0);
            fs.write("XX", 2);
        }
        CHECK_THROWS_AS(ctwist::load_checkpoint(path), ctwist::CheckpointError);
        std::filesystem::remove(path);
        CHECK_THROWS_AS(ctwist::load_checkpoint("no_such_checkpoint.bin"),
                        ctwist::CheckpointError);
    }
}

TEST_CASE("integrator guards") {
    SECTION("oversized steps are caught, not returned") {
        auto p = params(3, 1.0, 1.0, 1.0, 0.0, 30.0);
        ctwist::IntegratorConfig cfg;
        cfg.dt = 0.5; // kappa * n_max * dt >> 1: hopelessly unstable
        auto state = css_block_state(p, 14, ctwist::PhotonInput::make_coherent(1.0));
        CHECK_THROWS_AS(ctwist::evolve_blocks(std::move(state), p, cfg, 5.0),
                        ctwist::StepTooLarge);
    }

    SECTION("an exhausted Fock ladder is reported") {
        auto p = params(2, 1.0, 1.0, 1.0, 5.0);
        auto state = css_block_state(p, 4, ctwist::PhotonInput::make_vacuum());
        CHECK_THROWS_AS(ctwist::evolve_blocks(std::move(state), p, {}, 1.0),
                        ctwist::CutoffExceeded);
    }

    SECTION("time cannot run backwards") {
        auto p = params(2, 1.0, 1.0, 1.0);
        auto state = css_block_state(p, 4, ctwist::PhotonInput::make_vacuum());
        state.time = 1.0;
        CHECK_THROWS_AS(ctwist::evolve_blocks(std::move(state), p, {}, 0.5),
                        ctwist::InvalidArgument);
    }

    SECTION("dense dimension guard") {
        CHECK_THROWS_AS(ctwist::make_initial_dense_state(ctwist::coherent_state_plus_x(63),
                                                         ctwist::FockSpace{64},
                                                         ctwist::PhotonInput::make_vacuum()),
                        ctwist::DimensionTooLarge);
    }
}
