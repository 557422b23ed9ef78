#include <catch2/catch_amalgamated.hpp>

#include "ctwist/spin_algebra.hpp"
#include "oracles.hpp"

using namespace ctwist;
using Catch::Approx;
using Eigen::MatrixXcd;

namespace {
double max_abs(const MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }
} // namespace

TEST_CASE("Dicke basis indexing is exact-integer and ascending") {
    for (int n : {1, 2, 3, 10, 100}) {
        DickeBasis b(n);
        REQUIRE(b.dim() == n + 1);
        REQUIRE(b.two_m(0) == -n);
        REQUIRE(b.two_m(b.dim() - 1) == n);
        for (int i = 0; i < b.dim(); ++i) {
            REQUIRE(b.two_m(i) == 2 * i - n);
            REQUIRE(b.index_of_two_m(b.two_m(i)) == i);
        }
        REQUIRE_THROWS_AS(b.index_of_two_m(n + 1), InvalidArgument);
        REQUIRE_THROWS_AS(b.index_of_two_m(-n - 2), InvalidArgument);
    }
    REQUIRE_THROWS_AS(DickeBasis(0), InvalidArgument);
}

TEST_CASE("collective operators satisfy su(2) on all tested sizes") {
    for (int n : {1, 2, 3, 10, 100, 200}) {
        DickeBasis b(n);
        const MatrixXcd jx = jx_matrix(b), jy = jy_matrix(b), jz = jz_matrix(b);
        const double scale = b.j() * b.j();

        const MatrixXcd comm_xy = jx * jy - jy * jx - complex(0, 1) * jz;
        const MatrixXcd comm_yz = jy * jz - jz * jy - complex(0, 1) * jx;
        const MatrixXcd comm_zx = jz * jx - jx * jz - complex(0, 1) * jy;
        REQUIRE(max_abs(comm_xy) < 1e-12 * scale);
        REQUIRE(max_abs(comm_yz) < 1e-12 * scale);
        REQUIRE(max_abs(comm_zx) < 1e-12 * scale);

        const double jj = b.j() * (b.j() + 1.0);
        const MatrixXcd casimir =
            jx * jx + jy * jy + jz * jz - jj * MatrixXcd::Identity(b.dim(), b.dim());
        REQUIRE(max_abs(casimir) < 1e-11 * scale);

        // Hermiticity and ladder structure.
        REQUIRE(max_abs(jx - jx.adjoint()) < 1e-14 * b.j());
        REQUIRE(max_abs(jy - jy.adjoint()) < 1e-14 * b.j());
        const MatrixXcd jp = jplus_matrix(b);
        REQUIRE(max_abs(jp - (jx + complex(0, 1) * jy)) < 1e-12 * b.j());
        for (int i = 0; i + 1 < b.dim(); ++i) {
            const double m = b.m(i);
            REQUIRE(jp(i + 1, i).real() ==
                    Approx(std::sqrt(jj - m * (m + 1.0))).epsilon(1e-13));
        }
    }
}

TEST_CASE("coherent +x state: binomial weights, normalization, polarization") {
    for (int n : {1, 2, 3, 10, 100}) {
        AtomicState css = coherent_state_plus_x(n);
        REQUIRE(css.norm() == Approx(1.0).epsilon(1e-12));

        const auto exact = oracle::css_amplitudes(n);
        for (int i = 0; i <= n; ++i)
            REQUIRE(css.amplitude(i).real() == Approx(exact[i]).epsilon(1e-12));

        AtomicDensityMatrix rho = AtomicDensityMatrix::from_pure(css);
        DickeBasis b(n);
        REQUIRE(rho.expectation(jx_matrix(b)).real() == Approx(0.5 * n).epsilon(1e-12));
        REQUIRE(std::abs(rho.expectation(jy_matrix(b))) < 1e-12 * n);
        REQUIRE(std::abs(rho.expectation(jz_matrix(b))) < 1e-12 * n);
        // Var(Jz) = N/4 for the coherent state.
        const MatrixXcd jz = jz_matrix(b);
        REQUIRE(rho.expectation(jz * jz).real() == Approx(0.25 * n).epsilon(1e-12));
        REQUIRE(rho.purity() == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("density-matrix validation rejects unphysical input") {
    DickeBasis b(3);
    MatrixXcd good = MatrixXcd::Zero(4, 4);
    good.diagonal().setConstant(0.25);
    REQUIRE_NOTHROW(AtomicDensityMatrix(b, good));

    MatrixXcd non_hermitian = good;
    non_hermitian(0, 1) = complex(0.1, 0.0); // no matching (1,0) entry
    REQUIRE_THROWS_AS(AtomicDensityMatrix(b, non_hermitian), NonPhysicalState);

    MatrixXcd bad_trace = good;
    bad_trace(0, 0) = 0.5;
    REQUIRE_THROWS_AS(AtomicDensityMatrix(b, bad_trace), NonPhysicalState);

    MatrixXcd wrong_dim = MatrixXcd::Identity(3, 3) / 3.0;
    REQUIRE_THROWS_AS(AtomicDensityMatrix(b, wrong_dim), InvalidArgument);
}
