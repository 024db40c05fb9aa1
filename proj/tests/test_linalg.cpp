#include <catch2/catch_amalgamated.hpp>

#include "plode/linalg.hpp"
#include "support.hpp"

using namespace plode;

namespace {

bool close(const Mat& a, const Mat& b, double atol) { return (a - b).norm() <= atol; }

}  // namespace

TEST_CASE("decompose sorts the spectrum and reconstructs via Schur") {
    const Mat a{{0.0, -1.0}, {1.0, 0.0}};
    const auto d = decompose(a);

    REQUIRE(d.eigenvalues.size() == 2);
    CHECK(std::abs(d.eigenvalues[0] - Complex(0.0, -1.0)) < 1e-14);
    CHECK(std::abs(d.eigenvalues[1] - Complex(0.0, 1.0)) < 1e-14);
    CHECK(d.is_diagonalizable);

    const CMat rebuilt = d.schur_q * d.schur_t * d.schur_q.adjoint();
    CHECK((rebuilt - a.cast<Complex>()).norm() <= 1e-12 * a.norm());

    // eigenpairs actually satisfy A v = lambda v
    for (int i = 0; i < 2; ++i) {
        const CVec v = d.eigenvectors.col(i);
        CHECK((a.cast<Complex>() * v - d.eigenvalues[i] * v).norm() < 1e-13);
    }
}

TEST_CASE("decompose flags a defective matrix") {
    const Mat jordan{{1.0, 1.0}, {0.0, 1.0}};
    const auto d = decompose(jordan);
    CHECK_FALSE(d.is_diagonalizable);
    CHECK(d.condition_estimate > tol::diagonalizable_condition);

    CHECK(decompose(Mat::Identity(3, 3)).condition_estimate < 1.0 + 1e-12);
}

TEST_CASE("mat_exp is entrywise on diagonals and exact on the rotation generator") {
    const Mat d = Vec{{-4.605170185988091, 0.0, 2.5}}.asDiagonal();
    const Mat e = mat_exp(d);
    for (int i = 0; i < 3; ++i)
        CHECK_THAT(e(i, i), Catch::Matchers::WithinULP(std::exp(d(i, i)), 2));
    CHECK(e(0, 1) == 0.0);

    const Mat gen{{0.0, -M_PI / 2}, {M_PI / 2, 0.0}};
    CHECK(close(mat_exp(gen), Mat{{0.0, -1.0}, {1.0, 0.0}}, 1e-15));

    CHECK(close(mat_exp(Mat::Zero(4, 4)), Mat::Identity(4, 4), 0.0));
    CHECK_THROWS_AS(mat_exp(Mat{{1e10}}), OverflowError);
}

TEST_CASE("mat_log_principal recovers the rotation generator") {
    const Mat a{{0.0, -1.0}, {1.0, 0.0}};
    const auto lg = mat_log_principal(a);
    CHECK(lg.was_projected_real);
    CHECK(close(lg.real_value(), Mat{{0.0, -M_PI / 2}, {M_PI / 2, 0.0}}, 1e-14));
}

TEST_CASE("mat_log_principal on the accumulator region matrix") {
    // upper-triangular region matrix of the 2-unit accumulator, all gates open
    const Mat w_omega{{1.0, 1.0}, {0.0, 0.01}};
    const auto lg = mat_log_principal(w_omega);
    CHECK(lg.was_projected_real);
    const Mat want{{0.0, 4.6516870565536275}, {0.0, -4.605170185988091}};
    CHECK(close(lg.real_value(), want, 1e-13));
}

TEST_CASE("mat_log_principal keeps the branch at +pi for negative spectra") {
    const Mat a = (-2.0) * Mat::Identity(2, 2);
    const auto lg = mat_log_principal(a);
    CHECK_FALSE(lg.was_projected_real);
    CHECK(lg.max_imag > 3.0);
    for (int i = 0; i < 2; ++i) {
        CHECK_THAT(lg.value(i, i).real(), Catch::Matchers::WithinULP(std::log(2.0), 4));
        CHECK_THAT(lg.value(i, i).imag(), Catch::Matchers::WithinULP(M_PI, 4));
    }
    CHECK_THROWS_AS(lg.real_value(), AccuracyError);
    CHECK((mat_exp(lg.value) - a.cast<Complex>()).norm() <= 1e-13 * a.norm());
}

TEST_CASE("mat_log_principal rejects singular and sloppy inputs") {
    CHECK_THROWS_AS(mat_log_principal(Mat{{1.0, 0.0}, {0.0, 1e-20}}), SingularMatrixError);
    CHECK_THROWS_AS(mat_log_principal(Mat::Zero(2, 2)), SingularMatrixError);
    CHECK_THROWS_AS(mat_log_principal(Mat{{std::nan(""), 0.0}, {0.0, 1.0}}),
                    InvalidStateError);
}

TEST_CASE("exp(log(A)) roundtrips on random well-conditioned matrices") {
    testsup::Rng rng(407);
    int done = 0;
    while (done < 30) {
        const int m = rng.uniform_int(2, 6);
        // exp(B) is always invertible with decent conditioning for small B
        const Mat b = testsup::random_matrix(rng, m, -0.8, 0.8);
        const Mat a = mat_exp(b);
        const auto lg = mat_log_principal(a);
        CHECK((mat_exp(lg.value) - a.cast<Complex>()).norm() <= tol::roundtrip * a.norm());
        done += 1;
    }
}

TEST_CASE("real_log_exists classifies block structure") {
    auto verdict = [](const Mat& a) { return real_log_exists(a).verdict; };

    CHECK(verdict(Mat::Identity(3, 3)) == RealLogVerdict::yes);
    CHECK(verdict(Mat{{2.0, 1.0}, {0.0, 2.0}}) == RealLogVerdict::yes);

    // an even count of negative 1x1 blocks pairs up; an odd count cannot
    CHECK(verdict((-2.0) * Mat::Identity(2, 2)) == RealLogVerdict::yes);
    CHECK(verdict(Mat{{-2.0, 0.0}, {0.0, 3.0}}) == RealLogVerdict::no);
    CHECK(verdict(Mat{{-2.0, 0.0}, {0.0, -3.0}}) == RealLogVerdict::no);

    // single 2x2 Jordan block at -2: odd count of size-2 blocks
    const Mat j2{{-2.0, 1.0}, {0.0, -2.0}};
    const auto rep = real_log_exists(j2);
    CHECK(rep.verdict == RealLogVerdict::no);
    CHECK(rep.explanation.find("size 2") != std::string::npos);

    // two 2x2 Jordan blocks at -1: even count, a real log exists
    Mat twin = Mat::Zero(4, 4);
    twin.block(0, 0, 2, 2) = Mat{{-1.0, 1.0}, {0.0, -1.0}};
    twin.block(2, 2, 2, 2) = Mat{{-1.0, 1.0}, {0.0, -1.0}};
    CHECK(verdict(twin) == RealLogVerdict::yes);

    CHECK(verdict(Mat{{0.0, 0.0}, {0.0, 1.0}}) == RealLogVerdict::no_singular);

    // rotations have complex spectra: no negative-real cluster to check
    CHECK(verdict(Mat{{0.0, -1.0}, {1.0, 0.0}}) == RealLogVerdict::yes);
}

TEST_CASE("real_log pairs a negative double eigenvalue into a rotation block") {
    const Mat a = (-2.0) * Mat::Identity(2, 2);
    const auto r = real_log(a);
    REQUIRE(r.ok);
    const double l2 = std::log(2.0);
    CHECK(close(r.value, Mat{{l2, M_PI}, {-M_PI, l2}}, 1e-12));
    CHECK(close(mat_exp(r.value), a, 1e-13));
}

TEST_CASE("real_log handles mixed positive, negative, and complex spectra") {
    testsup::Rng rng(811);
    // build S * blkdiag(3, -2, -2, rot(0.7)*1.3) * S^{-1}
    Mat core = Mat::Zero(5, 5);
    core(0, 0) = 3.0;
    core(1, 1) = -2.0;
    core(2, 2) = -2.0;
    core.block(3, 3, 2, 2) = 1.3 * Mat{{std::cos(0.7), -std::sin(0.7)},
                                       {std::sin(0.7), std::cos(0.7)}};
    Eigen::HouseholderQR<Mat> qr(testsup::random_matrix(rng, 5));
    const Mat s = qr.householderQ();
    const Mat a = s * core * s.transpose();

    const auto r = real_log(a);
    REQUIRE(r.ok);
    CHECK(r.value.allFinite());
    CHECK((mat_exp(r.value) - a).norm() <= 1e-9 * a.norm());
}

TEST_CASE("real_log declines when no real branch exists") {
    const auto odd = real_log(Mat{{-2.0, 0.0}, {0.0, 3.0}});
    CHECK_FALSE(odd.ok);
    CHECK(odd.reason.find("no real logarithm") != std::string::npos);

    // real log exists for the twin Jordan pair, but pairing via an eigenbasis
    // cannot reach it; the constructor declines instead of guessing
    Mat twin = Mat::Zero(4, 4);
    twin.block(0, 0, 2, 2) = Mat{{-1.0, 1.0}, {0.0, -1.0}};
    twin.block(2, 2, 2, 2) = Mat{{-1.0, 1.0}, {0.0, -1.0}};
    CHECK(real_log_exists(twin).verdict == RealLogVerdict::yes);
    CHECK_FALSE(real_log(twin).ok);

    CHECK_FALSE(real_log(Mat{{0.0, 0.0}, {0.0, 1.0}}).ok);
}

TEST_CASE("integral_spectrum matches closed form, series, and limits") {
    // s(0) = T exactly
    CHECK(integral_spectrum(Complex(0.0, 0.0), 0.75) == Complex(0.75, 0.0));

    // closed form at a garden-variety eigenvalue
    const Complex lam(-0.35, 0.6);
    const Complex direct = (std::exp(lam * 2.0) - 1.0) / lam;
    CHECK(std::abs(integral_spectrum(lam, 2.0) - direct) < 1e-15);

    // series and closed form agree near the switch point (the direct form
    // loses ~4 digits to cancellation there, hence the loose bound)
    for (double mag : {0.9e-4, 1.1e-4}) {
        const Complex small(mag, mag / 3);
        const Complex v = integral_spectrum(small, 1.0);
        const Complex ref = (std::exp(small) - 1.0) / small;
        CHECK(std::abs(v - ref) <= 1e-11);
    }

    // 2*pi*i annihilates the integral; pi*i does not
    CHECK(std::abs(integral_spectrum(Complex(0.0, 2.0 * M_PI), 1.0)) < 1e-15);
    CHECK_THAT(std::abs(integral_spectrum(Complex(0.0, M_PI), 1.0)),
               Catch::Matchers::WithinAbs(2.0 / M_PI, 1e-15));
}

TEST_CASE("integral_exp integrates the matrix exponential") {
    // nilpotent: int_0^1 exp(-N t) dt with N = [[0,1],[0,0]]
    const Mat n{{0.0, 1.0}, {0.0, 0.0}};
    CHECK(close(integral_exp(Mat(-n), 1.0), Mat{{1.0, -0.5}, {0.0, 1.0}}, 1e-15));

    // diagonal: entries are integral_spectrum values
    const Mat d = Vec{{-4.605170185988091, 1.7}}.asDiagonal();
    const Mat got = integral_exp(d, 0.5);
    for (int i = 0; i < 2; ++i) {
        const Complex want = integral_spectrum(Complex(d(i, i), 0.0), 0.5);
        CHECK_THAT(got(i, i), Catch::Matchers::WithinRel(want.real(), 1e-13));
    }

    // complex overload agrees with the real one on real input
    const CMat gc = integral_exp(CMat(d.cast<Complex>()), 0.5);
    CHECK((gc - got.cast<Complex>()).norm() < 1e-14);

    CHECK_THROWS_AS(integral_exp(d, 0.0), InvalidStateError);
}

TEST_CASE("integral_invertibility flags only true 2*pi*i resonances") {
    const CMat spin = Mat{{0.0, -2.0 * M_PI}, {2.0 * M_PI, 0.0}}.cast<Complex>();
    const auto bad = integral_invertibility(spin, 1.0);
    CHECK_FALSE(bad.invertible);
    CHECK_THAT(std::abs(bad.offending_eigenvalue.imag()),
               Catch::Matchers::WithinRel(2.0 * M_PI, 1e-12));

    const CMat half = Mat{{0.0, -M_PI}, {M_PI, 0.0}}.cast<Complex>();
    CHECK(integral_invertibility(half, 1.0).invertible);

    // huge decay rates are fine: lambda*T nowhere near 2*pi*i*Z
    const CMat decay = Mat{{-1e12, 0.0}, {0.0, -3.0}}.cast<Complex>();
    CHECK(integral_invertibility(decay, 1.0).invertible);

    // resonance at T=2 that T=1 misses
    const CMat slow = Mat{{0.0, -M_PI}, {M_PI, 0.0}}.cast<Complex>();
    CHECK_FALSE(integral_invertibility(slow, 2.0).invertible);
}
