#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plode/errors.hpp"
#include "plode/linalg.hpp"
#include "plode/model.hpp"

namespace plode {

enum class Theorem { t1, t2, t3 };
enum class Realness { real, projected, complex_log };

inline std::string to_string(Theorem t) {
    switch (t) {
        case Theorem::t1: return "T1";
        case Theorem::t2: return "T2";
        default: return "T3";
    }
}

inline std::string to_string(Realness r) {
    switch (r) {
        case Realness::real: return "real";
        case Realness::projected: return "projected";
        default: return "complex";
    }
}

// One region of the continuous system dz/dt = w_tilde * z + h_tilde.
// Entries are stored complex; realness says whether the imaginary parts are
// exactly zero, were projected away (max_imag records what was dropped), or
// are structural.
struct ContinuousRegionSystem {
    RegionIndex region;
    CMat w_tilde;
    CVec h_tilde;
    Theorem theorem_used = Theorem::t1;
    int unit_eig_count = 0;
    Realness realness = Realness::real;
    double max_imag = 0.0;
    // Linear map taking the discrete affine constant to the continuous one.
    // Kept in memory (not serialized) so time-varying inputs can be folded
    // step by step: h_tilde_eff = h_map * (h + C s_t).
    CMat h_map;

    Mat w_tilde_real() const {
        if (realness == Realness::complex_log)
            throw InvalidStateError("w_tilde has structural imaginary parts");
        return w_tilde.real();
    }
    Vec h_tilde_real() const {
        if (realness == Realness::complex_log)
            throw InvalidStateError("h_tilde has structural imaginary parts");
        return h_tilde.real();
    }
};

struct RegionReport {
    std::uint64_t ordinal = 0;
    bool invertible = false;
    int unit_eig_count = 0;
    bool diagonalizable = false;
    RealLogVerdict real_log_verdict = RealLogVerdict::no;
    Theorem theorem_used = Theorem::t1;
    Realness realness = Realness::real;
    double max_imag = 0.0;
    double roundtrip_residual = 0.0;    // |exp(dt*w_tilde) - w_omega| / |w_omega|
    double equivalence_residual = 0.0;  // verify_step at a probe state
    std::string error;                  // empty = converted

    bool converted() const { return error.empty(); }
};

struct ConversionReport {
    std::vector<RegionReport> regions;
};

struct ConvertedModel {
    double dt = 1.0;
    std::vector<ContinuousRegionSystem> regions;  // successfully converted only
    ConversionReport report;                      // one row per enumerated region
};

// Exact affine flow  z(t) = e^{Wt} z0 + (int_0^t e^{Wu} du) h.
// No time stepping: one matrix exponential per evaluation.
inline CVec flow_state(const CMat& w_tilde, const CVec& h_tilde, const CVec& z0, double t) {
    if (t == 0.0) return z0;
    const CMat e = mat_exp(CMat(w_tilde * t));
    Eigen::FullPivLU<CMat> lu(w_tilde);
    if (lu.isInvertible()) {
        const CVec x = lu.solve(h_tilde);
        return e * z0 + (e * x - x);
    }
    return e * z0 + integral_exp(w_tilde, t) * h_tilde;
}

namespace detail {

// log(lambda)/(lambda - 1), series-guarded near the removable point at 1
inline Complex log_over_gap(Complex lambda) {
    const Complex e = lambda - 1.0;
    if (std::abs(e) < 1e-4)
        return 1.0 - e / 2.0 + e * e / 3.0 - e * e * e / 4.0 + e * e * e * e / 5.0 -
               e * e * e * e * e / 6.0;
    return log_principal(lambda) / e;
}

struct EigenSplit {
    CMat v;         // eigenvectors, unit eigenvalues first
    CVec lambda;    // matching order
    int unit_count = 0;
};

inline EigenSplit split_units_first(const SpectralDecomposition& d, double unit_tol_abs) {
    EigenSplit s;
    const Eigen::Index m = d.eigenvalues.size();
    s.v.resize(m, m);
    s.lambda.resize(m);
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(d.eigenvalues[i] - 1.0) <= unit_tol_abs) {
            s.v.col(pos) = d.eigenvectors.col(i);
            s.lambda[pos] = d.eigenvalues[i];
            pos += 1;
        }
    s.unit_count = static_cast<int>(pos);
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(d.eigenvalues[i] - 1.0) > unit_tol_abs) {
            s.v.col(pos) = d.eigenvectors.col(i);
            s.lambda[pos] = d.eigenvalues[i];
            pos += 1;
        }
    return s;
}

// V * diag(vals) * V^{-1}
inline CMat eigen_rebuild(const CMat& v, const CVec& vals) {
    return similarity_from_diag(v, vals);
}

}  // namespace detail

// Theorems 1-3 dispatch: discrete region map (w_omega, h) over one step dt
// becomes the flow generator (w_tilde, h_tilde).
inline ContinuousRegionSystem convert_region(const RegionSystem& rs, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw InvalidStateError("convert_region: dt must be positive and finite");
    const Mat& w = rs.w_omega;
    if (!w.allFinite()) throw InvalidStateError("convert_region: non-finite w_omega");
    const double anorm = w.norm();

    const SpectralDecomposition d = decompose(w);
    const double min_abs = d.eigenvalues.cwiseAbs().minCoeff();
    if (anorm == 0.0 || min_abs <= tol::singular * anorm)
        throw NotConvertibleError(
            "convert_region: w_omega is singular (min |eigenvalue| = " +
            std::to_string(min_abs) + "); the conversion requires an invertible w_omega");

    const double unit_tol_abs = tol::unit * anorm;
    int n = 0;
    for (Eigen::Index i = 0; i < d.eigenvalues.size(); ++i)
        if (std::abs(d.eigenvalues[i] - 1.0) <= unit_tol_abs) n += 1;

    const Eigen::Index m = w.rows();
    const bool clean_basis = d.is_diagonalizable && d.condition_estimate <= tol::t2_condition;
    const CVec h = rs.h.cast<Complex>();

    ContinuousRegionSystem out;
    out.region = rs.region;
    out.unit_eig_count = n;

    CMat w_tilde;
    CMat h_map;

    if (n == 0) {
        out.theorem_used = Theorem::t1;
        const MatrixFunctionResult lg = mat_log_principal(w);
        w_tilde = lg.value / dt;
        // h_map = -(1/dt) log(W) (I - W)^{-1}; no unit eigenvalue, so I - W invertible
        const CMat gap = CMat::Identity(m, m) - w.cast<Complex>();
        h_map = -(1.0 / dt) * lg.value * gap.partialPivLu().inverse();

        if (clean_basis) {
            // consistency: the unit-block formula with an empty unit block
            // must reproduce the same generator and constant
            const auto split = detail::split_units_first(d, unit_tol_abs);
            CVec wvals(m), hvals(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                wvals[i] = detail::log_principal(split.lambda[i]) / dt;
                hvals[i] = detail::log_over_gap(split.lambda[i]) / dt;
            }
            const CMat w2 = detail::eigen_rebuild(split.v, wvals);
            const CMat hm2 = detail::eigen_rebuild(split.v, hvals);
            const double dw = (w2 - w_tilde).norm() / std::max(1.0, w_tilde.norm());
            const double dh = (hm2 * h - h_map * h).norm() / std::max(1.0, (h_map * h).norm());
            if (dw > 1e-10 || dh > 1e-10)
                throw AccuracyError(
                    "convert_region: unit-block and direct-log paths disagree (" +
                    std::to_string(std::max(dw, dh)) + ")");
        }
    } else if (clean_basis) {
        out.theorem_used = Theorem::t2;
        const auto split = detail::split_units_first(d, unit_tol_abs);
        CVec wvals(m), hvals(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            if (i < split.unit_count) {
                wvals[i] = Complex(0.0, 0.0);
                hvals[i] = Complex(1.0 / dt, 0.0);
            } else {
                wvals[i] = detail::log_principal(split.lambda[i]) / dt;
                hvals[i] = detail::log_over_gap(split.lambda[i]) / dt;
            }
        }
        w_tilde = detail::eigen_rebuild(split.v, wvals);
        h_map = detail::eigen_rebuild(split.v, hvals);
    } else {
        out.theorem_used = Theorem::t3;
        const MatrixFunctionResult lg = mat_log_principal(w);
        w_tilde = lg.value / dt;
        // h_map = (W int_0^dt e^{-(tau/dt) log W} dtau)^{-1}
        const CMat gen = -w_tilde;
        const auto inv = integral_invertibility(gen, dt);
        if (!inv.invertible)
            throw IntegralSingularError(
                "convert_region: the averaging integral is singular; eigenvalue " +
                std::to_string(inv.offending_eigenvalue.real()) + " + " +
                std::to_string(inv.offending_eigenvalue.imag()) + "i times dt lies in 2*pi*i*Z");
        const CMat b = w.cast<Complex>() * integral_exp(gen, dt);
        h_map = b.partialPivLu().inverse();
    }

    CVec h_tilde = h_map * h;

    // how real is the result, and can a complex one be repaired by choosing
    // a different (paired real) branch of the logarithm
    const double scale = std::max({1.0, w_tilde.norm(), h_tilde.norm()});
    double mi = w_tilde.imag().cwiseAbs().maxCoeff();
    if (m > 0) mi = std::max(mi, h_tilde.imag().cwiseAbs().maxCoeff());
    mi = std::max(mi, h_map.imag().cwiseAbs().maxCoeff());

    if (mi <= 1e-13 * scale) {
        out.realness = Realness::real;
        out.max_imag = 0.0;
        w_tilde = w_tilde.real().cast<Complex>();
        h_map = h_map.real().cast<Complex>();
        h_tilde = h_map * h;
    } else if (mi <= tol::project * scale) {
        out.realness = Realness::projected;
        out.max_imag = mi;
        w_tilde = w_tilde.real().cast<Complex>();
        h_map = h_map.real().cast<Complex>();
        h_tilde = h_map * h;
    } else {
        const RealLogResult paired = real_log(w);
        if (paired.ok) {
            // same discrete map, real generator: exp(L) = W with L real, and
            // the constant follows from (int_0^dt e^{Wu} du) h_tilde = h
            out.realness = Realness::real;
            out.max_imag = 0.0;
            w_tilde = (paired.value / dt).cast<Complex>();
            const Mat b = integral_exp(Mat(paired.value / dt), dt);
            Eigen::FullPivLU<Mat> lu(b);
            if (!lu.isInvertible())
                throw IntegralSingularError(
                    "convert_region: the averaging integral of the paired real "
                    "logarithm is singular");
            h_map = lu.inverse().cast<Complex>();
            h_tilde = h_map * h;
        } else {
            out.realness = Realness::complex_log;
            out.max_imag = mi;
        }
    }

    // executable contract: one discrete step is one unit of flow
    const double rt = (mat_exp(CMat(w_tilde * dt)) - w.cast<Complex>()).norm() / anorm;
    if (rt > tol::roundtrip)
        throw AccuracyError("convert_region: exp(dt*w_tilde) misses w_omega by " +
                            std::to_string(rt) + " relative");

    out.w_tilde = std::move(w_tilde);
    out.h_tilde = std::move(h_tilde);
    out.h_map = std::move(h_map);
    return out;
}

// Infinity-norm gap between one discrete step and the flow at t = dt.
inline double verify_step(const RegionSystem& rs, const ContinuousRegionSystem& crs,
                          const Vec& z0, double dt) {
    if (rs.region.bits != crs.region.bits)
        throw InvalidStateError("verify_step: region mismatch");
    const Vec discrete = rs.w_omega * z0 + rs.h;
    const CVec zeta = flow_state(crs.w_tilde, crs.h_tilde, z0.cast<Complex>(), dt);
    return (zeta - discrete.cast<Complex>()).cwiseAbs().maxCoeff();
}

// require_any: a model with no convertible region is an error for simulation
// callers, but report-only callers still want the full failure table.
inline ConvertedModel convert_model(const PlrnnModel& model, bool require_any = true) {
    model.validate();
    ConvertedModel out;
    out.dt = model.dt;
    const auto systems = enumerate_regions(model);

    for (const auto& rs : systems) {
        RegionReport row;
        row.ordinal = rs.region.ordinal();

        const SpectralDecomposition d = decompose(rs.w_omega);
        const double anorm = rs.w_omega.norm();
        const double min_abs = d.eigenvalues.cwiseAbs().minCoeff();
        row.invertible = anorm > 0.0 && min_abs > tol::singular * anorm;
        row.diagonalizable = d.is_diagonalizable;
        const double unit_tol_abs = tol::unit * anorm;
        for (Eigen::Index i = 0; i < d.eigenvalues.size(); ++i)
            if (std::abs(d.eigenvalues[i] - 1.0) <= unit_tol_abs) row.unit_eig_count += 1;
        row.real_log_verdict = real_log_exists(rs.w_omega).verdict;

        try {
            ContinuousRegionSystem crs = convert_region(rs, model.dt);
            row.theorem_used = crs.theorem_used;
            row.realness = crs.realness;
            row.max_imag = crs.max_imag;
            row.roundtrip_residual =
                (mat_exp(CMat(crs.w_tilde * model.dt)) - rs.w_omega.cast<Complex>()).norm() /
                anorm;
            row.equivalence_residual =
                verify_step(rs, crs, Vec::Ones(model.dim()), model.dt);
            out.regions.push_back(std::move(crs));
        } catch (const Error& e) {
            row.error = e.what();
        }
        out.report.regions.push_back(std::move(row));
    }

    if (require_any && out.regions.empty())
        throw NotConvertibleError("convert_model: no region could be converted");
    return out;
}

} // namespace plode
