#include <catch2/catch_amalgamated.hpp>

#include "plode/convert.hpp"
#include "support.hpp"

using namespace plode;

namespace {

PlrnnModel addition_model() {
    PlrnnModel m;
    m.a_diag = Vec{{1.0, 0.01}};
    m.w = Mat{{0.0, 1.0}, {0.0, 0.0}};
    m.h = Vec{{0.0, -0.995}};
    m.dt = 1.0;
    m.c = Mat{{0.0, 0.0}, {1.0, 0.995}};
    return m;
}

RegionSystem make_rs(const Mat& w_omega, const Vec& h) {
    RegionSystem rs;
    rs.region = RegionIndex{std::vector<std::uint8_t>(static_cast<std::size_t>(w_omega.rows()), 1)};
    rs.w_omega = w_omega;
    rs.h = h;
    return rs;
}

double max_abs(const CMat& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("scalar doubling map converts by the no-unit-eigenvalue rule") {
    const auto rs = make_rs(Mat{{2.0}}, Vec{{1.0}});
    const auto crs = convert_region(rs, 1.0);

    CHECK(crs.theorem_used == Theorem::t1);
    CHECK(crs.unit_eig_count == 0);
    CHECK(crs.realness == Realness::real);
    CHECK_THAT(crs.w_tilde_real()(0, 0), Catch::Matchers::WithinULP(std::log(2.0), 2));
    CHECK_THAT(crs.h_tilde_real()[0], Catch::Matchers::WithinULP(std::log(2.0), 2));

    // flow for one unit of time reproduces 2*3 + 1
    const CVec z1 = flow_state(crs.w_tilde, crs.h_tilde, CVec::Constant(1, 3.0), 1.0);
    CHECK_THAT(z1[0].real(), Catch::Matchers::WithinAbs(7.0, 1e-12));
    CHECK(verify_step(rs, crs, Vec{{3.0}}, 1.0) <= 1e-12);
}

TEST_CASE("identity region map collapses to a constant drift") {
    const Vec h{{0.3, -1.7, 0.002}};
    const auto rs = make_rs(Mat::Identity(3, 3), h);
    const auto crs = convert_region(rs, 0.25);

    CHECK(crs.theorem_used == Theorem::t2);
    CHECK(crs.unit_eig_count == 3);
    CHECK(crs.realness == Realness::real);
    CHECK(max_abs(crs.w_tilde) == 0.0);
    for (int i = 0; i < 3; ++i)
        CHECK_THAT(crs.h_tilde_real()[i],
                   Catch::Matchers::WithinULP(h[i] / 0.25, 2));

    // drift-only flow: z0 + t * h_tilde, exercised through the singular branch
    const CVec z1 = flow_state(crs.w_tilde, crs.h_tilde, CVec::Zero(3), 0.25);
    CHECK((z1.real() - h).norm() <= 1e-12);
}

TEST_CASE("defective unit eigenvalue goes through the averaged-integral rule") {
    const auto rs = make_rs(Mat{{1.0, 1.0}, {0.0, 1.0}}, Vec{{1.0, 0.0}});
    const auto crs = convert_region(rs, 1.0);

    CHECK(crs.theorem_used == Theorem::t3);
    CHECK(crs.unit_eig_count == 2);
    CHECK(crs.realness == Realness::real);
    CHECK((crs.w_tilde_real() - Mat{{0.0, 1.0}, {0.0, 0.0}}).norm() <= 1e-12);
    CHECK((crs.h_tilde_real() - Vec{{1.0, 0.0}}).norm() <= 1e-12);
    CHECK(verify_step(rs, crs, Vec{{0.4, -2.0}}, 1.0) <= 1e-12);
}

TEST_CASE("accumulator model: all four regions, one shared unit eigenvalue") {
    const auto m = addition_model();
    const auto cm = convert_model(m);

    REQUIRE(cm.regions.size() == 4);
    REQUIRE(cm.report.regions.size() == 4);

    const Mat w_off{{0.0, 0.0}, {0.0, -4.605170185988091}};
    const Vec h_off{{0.0, -4.628428621270859}};
    const Mat w_on{{0.0, 4.6516870565536275}, {0.0, -4.605170185988091}};
    const Vec h_on{{3.6701299204756155, -4.628428621270859}};

    for (const auto& crs : cm.regions) {
        CHECK(crs.theorem_used == Theorem::t2);
        CHECK(crs.unit_eig_count == 1);
        CHECK(crs.realness == Realness::real);
        const bool gate_open = crs.region.bits[1] == 1;
        const Mat& want_w = gate_open ? w_on : w_off;
        const Vec& want_h = gate_open ? h_on : h_off;
        CHECK((crs.w_tilde_real() - want_w).norm() <= 1e-12 * want_w.norm());
        CHECK((crs.h_tilde_real() - want_h).norm() <= 1e-12 * want_h.norm());
    }

    for (const auto& row : cm.report.regions) {
        CHECK(row.converted());
        CHECK(row.invertible);
        CHECK(row.diagonalizable);
        CHECK(row.unit_eig_count == 1);
        CHECK(row.real_log_verdict == RealLogVerdict::yes);
        CHECK(row.roundtrip_residual <= tol::roundtrip);
        CHECK(row.equivalence_residual <= 1e-12);
    }
}

TEST_CASE("one discrete step equals one unit of flow across random models") {
    testsup::Rng rng(1201);
    int checked = 0;
    double worst = 0.0;
    while (checked < 40) {
        const int m = rng.uniform_int(1, 5);
        PlrnnModel model;
        model.a_diag = testsup::random_vector(rng, m, -0.9, 0.9);
        model.w = testsup::random_matrix(rng, m, -0.7, 0.7);
        model.h = testsup::random_vector(rng, m);
        model.dt = rng.uniform(0.1, 2.0);

        const Vec z0 = testsup::random_vector(rng, m, -2.0, 2.0);
        const auto rs = region_system(model, classify_state(z0));
        ContinuousRegionSystem crs;
        try {
            crs = convert_region(rs, model.dt);
        } catch (const NotConvertibleError&) {
            continue;  // random w_omega happened to be singular
        }
        worst = std::max(worst, verify_step(rs, crs, z0, model.dt));
        checked += 1;
    }
    CHECK(worst <= tol::step);
}

TEST_CASE("no constant in, no constant out") {
    const auto rs = make_rs(Mat{{0.3, 0.1}, {-0.2, 0.5}}, Vec::Zero(2));
    const auto crs = convert_region(rs, 0.7);
    CHECK(max_abs(CMat(crs.h_tilde)) == 0.0);
}

TEST_CASE("generator spectrum is the log of the map spectrum") {
    const Mat w{{0.8, 0.3, 0.0}, {0.0, 0.5, 0.2}, {0.1, 0.0, 0.9}};
    const auto rs = make_rs(w, Vec{{1.0, -1.0, 0.5}});
    const double dt = 0.4;
    const auto crs = convert_region(rs, dt);
    CHECK(crs.theorem_used == Theorem::t1);

    const auto dw = decompose(w);
    const auto dg = decompose(crs.w_tilde_real());
    // matched sorting: both spectra ordered by (Re, Im)
    CVec want(3);
    for (int i = 0; i < 3; ++i) want[i] = detail::log_principal(dw.eigenvalues[i]) / dt;
    std::vector<int> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (want[a].real() != want[b].real()) return want[a].real() < want[b].real();
        return want[a].imag() < want[b].imag();
    });
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(dg.eigenvalues[i] - want[order[static_cast<std::size_t>(i)]]) <= 1e-9);
}

TEST_CASE("discrete fixed points are continuous equilibria") {
    testsup::Rng rng(77);
    for (int trial = 0; trial < 15; ++trial) {
        const int m = rng.uniform_int(2, 5);
        const Mat w = testsup::random_matrix(rng, m, -0.6, 0.6);
        const Vec h = testsup::random_vector(rng, m);
        const auto rs = make_rs(w, h);

        ContinuousRegionSystem crs;
        try {
            crs = convert_region(rs, 1.0);
        } catch (const NotConvertibleError&) {
            continue;
        }
        const Vec zstar = (Mat::Identity(m, m) - w).partialPivLu().solve(h);
        const CVec g = crs.w_tilde * zstar.cast<Complex>() + crs.h_tilde;
        CHECK(g.cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, zstar.norm()));
    }
}

TEST_CASE("positive-definite maps convert on the real branch directly") {
    testsup::Rng rng(901);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat b = testsup::random_matrix(rng, 4);
        Mat spd = b * b.transpose() + 0.1 * Mat::Identity(4, 4);
        spd *= 2.2 / spd.norm();  // keep eigenvalues away from 1
        const auto probe = decompose(spd);
        bool has_unit = false;
        for (int i = 0; i < 4; ++i)
            if (std::abs(probe.eigenvalues[i] - 1.0) <= tol::unit * spd.norm())
                has_unit = true;
        if (has_unit) continue;

        const auto crs = convert_region(make_rs(spd, testsup::random_vector(rng, 4)), 1.0);
        CHECK(crs.theorem_used == Theorem::t1);
        CHECK(crs.realness == Realness::real);
    }
}

TEST_CASE("paired negative eigenvalues take the real branch of the log") {
    const auto rs = make_rs((-2.0) * Mat::Identity(2, 2), Vec{{1.0, 1.0}});
    const auto crs = convert_region(rs, 1.0);

    CHECK(crs.theorem_used == Theorem::t1);
    CHECK(crs.realness == Realness::real);
    const double l2 = std::log(2.0);
    CHECK((crs.w_tilde_real() - Mat{{l2, M_PI}, {-M_PI, l2}}).norm() <= 1e-12);
    CHECK(verify_step(rs, crs, Vec{{0.3, -0.8}}, 1.0) <= 1e-12);
}

TEST_CASE("an unpairable negative eigenvalue stays complex but step-exact") {
    const auto rs = make_rs(Mat{{-2.0, 0.0}, {0.0, 3.0}}, Vec{{1.0, -1.0}});
    const auto crs = convert_region(rs, 1.0);

    CHECK(crs.realness == Realness::complex_log);
    CHECK(crs.max_imag > 1.0);
    CHECK_THROWS_AS(crs.w_tilde_real(), InvalidStateError);
    CHECK_THROWS_AS(crs.h_tilde_real(), InvalidStateError);
    CHECK(verify_step(rs, crs, Vec{{0.5, 0.5}}, 1.0) <= 1e-12);

    // mid-step the flow is genuinely complex, but every step anchor is real
    const CVec mid = flow_state(crs.w_tilde, crs.h_tilde, CVec::Zero(2), 0.37);
    CHECK(mid.imag().cwiseAbs().maxCoeff() > 1e-3);
    const CVec anchor = flow_state(crs.w_tilde, crs.h_tilde, CVec::Zero(2), 1.0);
    CHECK(anchor.imag().cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("singular region maps are rejected, partial failures are recorded") {
    CHECK_THROWS_AS(convert_region(make_rs(Mat{{0.0, 1.0}, {0.0, 0.5}}, Vec::Zero(2)), 1.0),
                    NotConvertibleError);
    CHECK_THROWS_MATCHES(
        convert_region(make_rs(Mat::Zero(2, 2), Vec::Zero(2)), 1.0), NotConvertibleError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("invertible")));

    // gating unit 1 off makes column 1 zero: w_omega singular in two regions
    PlrnnModel m;
    m.a_diag = Vec{{0.0, 0.5}};
    m.w = Mat{{2.0, 0.0}, {0.0, 0.0}};
    m.h = Vec{{0.1, 0.1}};
    const auto cm = convert_model(m);
    CHECK(cm.regions.size() == 2);
    REQUIRE(cm.report.regions.size() == 4);
    int failed = 0;
    for (const auto& row : cm.report.regions)
        if (!row.converted()) {
            failed += 1;
            CHECK_FALSE(row.invertible);
            CHECK(row.error.find("singular") != std::string::npos);
        }
    CHECK(failed == 2);

    // nothing convertible at all
    PlrnnModel dead;
    dead.a_diag = Vec{{0.0}};
    dead.w = Mat{{0.0}};
    dead.h = Vec{{1.0}};
    CHECK_THROWS_AS(convert_model(dead), NotConvertibleError);
}

TEST_CASE("verify_step rejects mismatched regions") {
    const auto rs_a = make_rs(Mat{{2.0}}, Vec{{1.0}});
    auto crs = convert_region(rs_a, 1.0);
    crs.region = RegionIndex{{0}};
    CHECK_THROWS_AS(verify_step(rs_a, crs, Vec{{1.0}}, 1.0), InvalidStateError);
}

TEST_CASE("convert_region validates dt") {
    const auto rs = make_rs(Mat{{2.0}}, Vec{{1.0}});
    CHECK_THROWS_AS(convert_region(rs, 0.0), InvalidStateError);
    CHECK_THROWS_AS(convert_region(rs, -1.0), InvalidStateError);
}
