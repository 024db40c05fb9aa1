#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "plode/errors.hpp"
#include "plode/model.hpp"

namespace plode {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

namespace tol {
// All tolerances the pipeline relies on, pinned in one place.
inline constexpr double unit = 1e-9;         // |lambda-1| <= unit*|W| counts as a unit eigenvalue
inline constexpr double roundtrip = 1e-10;   // relative Frobenius, exp(log(A)) vs A
inline constexpr double project = 1e-9;      // imaginary parts below project*|result| are dropped
inline constexpr double singular = 1e-12;    // |lambda| <= singular*|A| counts as singular
inline constexpr double cluster = 1e-8;      // eigenvalue clustering, relative to |A|
inline constexpr double rank = 1e-8;         // SVD rank cut, relative to sigma_max
inline constexpr double t2_condition = 1e8;  // eigenvector conditioning above which T2 falls back to T3
inline constexpr double step = 1e-8;         // discrete-vs-continuous state agreement
inline const double diagonalizable_condition =
    1.0 / (1e3 * std::numeric_limits<double>::epsilon());
}  // namespace tol

struct SpectralDecomposition {
    CVec eigenvalues;        // sorted by (Re, Im, original index)
    CMat eigenvectors;       // columns matched to eigenvalues
    bool is_diagonalizable = false;
    double condition_estimate = 0.0;  // eigenvector-matrix condition number
    CMat schur_t;
    CMat schur_q;
};

struct MatrixFunctionResult {
    CMat value;
    double max_imag = 0.0;
    bool was_projected_real = false;

    Mat real_value() const {
        if (!was_projected_real && max_imag > 0.0)
            throw AccuracyError("matrix function result is not real");
        return value.real();
    }
};

namespace detail {

inline bool exactly_diagonal(const CMat& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (i != j && a(i, j) != Complex(0.0, 0.0)) return false;
    return true;
}

// Principal scalar log with the branch cut resolved upward: a negative real
// input (even with -0.0 imaginary part) maps to Im = +pi.
inline Complex log_principal(Complex z) {
    if (z.imag() == 0.0) z = Complex(z.real(), +0.0);
    return std::log(z);
}

inline std::string fingerprint(const CMat& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
           ", |A|_F = " + std::to_string(a.norm());
}

}  // namespace detail

inline CMat mat_exp(const CMat& a) {
    if (!a.allFinite()) throw InvalidStateError("mat_exp: non-finite input");
    CMat e;
    if (detail::exactly_diagonal(a)) {
        e = CMat::Zero(a.rows(), a.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i) e(i, i) = std::exp(a(i, i));
    } else {
        e = a.exp();  // scaling-and-squaring Pade
    }
    if (!e.allFinite())
        throw OverflowError("mat_exp: overflow for " + detail::fingerprint(a));
    return e;
}

inline Mat mat_exp(const Mat& a) {
    if (!a.allFinite()) throw InvalidStateError("mat_exp: non-finite input");
    Mat e;
    if (a.isDiagonal(0.0)) {
        e = Mat::Zero(a.rows(), a.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i) e(i, i) = std::exp(a(i, i));
    } else {
        e = a.exp();
    }
    if (!e.allFinite())
        throw OverflowError("mat_exp: overflow for " + detail::fingerprint(a.cast<Complex>()));
    return e;
}

// Expressions (Zero(), products, blocks) would otherwise be ambiguous
// between the real and complex overloads.
template <typename Derived>
auto mat_exp(const Eigen::MatrixBase<Derived>& a) {
    if constexpr (std::is_same_v<typename Derived::Scalar, Complex>)
        return mat_exp(CMat(a));
    else
        return mat_exp(Mat(a));
}

inline SpectralDecomposition decompose(const Mat& a) {
    if (!a.allFinite()) throw InvalidStateError("decompose: non-finite input");
    const CMat ac = a.cast<Complex>();

    Eigen::ComplexEigenSolver<CMat> es(ac, /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success)
        throw AccuracyError("decompose: eigensolver failed on " + detail::fingerprint(ac));

    SpectralDecomposition d;
    const Eigen::Index m = a.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    const CVec& ev = es.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
        if (ev[i].real() != ev[j].real()) return ev[i].real() < ev[j].real();
        return ev[i].imag() < ev[j].imag();
    });
    d.eigenvalues.resize(m);
    d.eigenvectors.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        d.eigenvalues[i] = ev[order[static_cast<std::size_t>(i)]];
        d.eigenvectors.col(i) = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    }

    Eigen::JacobiSVD<CMat> svd(d.eigenvectors);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    d.condition_estimate = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    d.is_diagonalizable = d.condition_estimate < tol::diagonalizable_condition;

    Eigen::ComplexSchur<CMat> schur(ac, /*computeU=*/true);
    if (schur.info() != Eigen::Success)
        throw AccuracyError("decompose: Schur iteration failed on " + detail::fingerprint(ac));
    d.schur_t = schur.matrixT();
    d.schur_q = schur.matrixU();
    return d;
}

namespace detail {

// V * diag(vals) * V^{-1} without forming the inverse.
inline CMat similarity_from_diag(const CMat& v, const CVec& vals) {
    const CMat x = v * vals.asDiagonal();
    return v.transpose().partialPivLu().solve(x.transpose()).transpose();
}

}  // namespace detail

inline MatrixFunctionResult mat_log_principal(const Mat& a) {
    if (!a.allFinite()) throw InvalidStateError("mat_log_principal: non-finite input");
    const double anorm = a.norm();
    const SpectralDecomposition d = decompose(a);
    const double min_abs = d.eigenvalues.cwiseAbs().minCoeff();
    if (min_abs <= tol::singular * anorm)
        throw SingularMatrixError("mat_log_principal: eigenvalue of magnitude " +
                                  std::to_string(min_abs) + " is numerically zero");

    CMat log;
    if (d.is_diagonalizable && d.condition_estimate <= tol::t2_condition) {
        CVec logvals(d.eigenvalues.size());
        for (Eigen::Index i = 0; i < logvals.size(); ++i)
            logvals[i] = detail::log_principal(d.eigenvalues[i]);
        log = detail::similarity_from_diag(d.eigenvectors, logvals);
    } else {
        // Schur-based inverse scaling-and-squaring on the complexified matrix.
        log = a.cast<Complex>().log();
    }

    const double resid = (mat_exp(log) - a.cast<Complex>()).norm() / anorm;
    if (resid > tol::roundtrip)
        throw AccuracyError("mat_log_principal: roundtrip residual " + std::to_string(resid) +
                            " exceeds " + std::to_string(tol::roundtrip));

    MatrixFunctionResult r;
    r.max_imag = log.imag().cwiseAbs().maxCoeff();
    if (r.max_imag <= tol::project * log.norm()) {
        r.value = log.real().cast<Complex>();
        r.was_projected_real = true;
    } else {
        r.value = std::move(log);
    }
    return r;
}

enum class RealLogVerdict { yes, no, no_singular };

struct RealLogReport {
    RealLogVerdict verdict = RealLogVerdict::no;
    std::string explanation;
};

namespace detail {

inline Eigen::Index svd_rank(const Mat& b) {
    Eigen::JacobiSVD<Mat> svd(b);
    const double smax = svd.singularValues().size() ? svd.singularValues().maxCoeff() : 0.0;
    if (smax == 0.0) return 0;
    return (svd.singularValues().array() > tol::rank * smax).count();
}

struct EigCluster {
    Complex mean;
    std::vector<Eigen::Index> members;
};

inline std::vector<EigCluster> cluster_eigenvalues(const CVec& ev, double ctol) {
    std::vector<EigCluster> out;
    std::vector<bool> used(static_cast<std::size_t>(ev.size()), false);
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        EigCluster c;
        c.members.push_back(i);
        used[static_cast<std::size_t>(i)] = true;
        for (Eigen::Index j = i + 1; j < ev.size(); ++j) {
            if (!used[static_cast<std::size_t>(j)] && std::abs(ev[j] - ev[i]) <= ctol) {
                c.members.push_back(j);
                used[static_cast<std::size_t>(j)] = true;
            }
        }
        Complex sum = 0.0;
        for (auto k : c.members) sum += ev[k];
        c.mean = sum / static_cast<double>(c.members.size());
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace detail

// Does a real logarithm exist: invertible and every Jordan block with a
// negative eigenvalue occurs an even number of times.  Block structure is
// read off rank sequences of (A - lambda I)^j at clustered eigenvalues.
inline RealLogReport real_log_exists(const Mat& a) {
    if (!a.allFinite()) throw InvalidStateError("real_log_exists: non-finite input");
    RealLogReport rep;
    const double anorm = a.norm();
    const SpectralDecomposition d = decompose(a);
    const double min_abs = d.eigenvalues.cwiseAbs().minCoeff();
    if (anorm == 0.0 || min_abs <= tol::singular * anorm) {
        rep.verdict = RealLogVerdict::no_singular;
        rep.explanation = "matrix is numerically singular (min |eigenvalue| = " +
                          std::to_string(min_abs) + ")";
        return rep;
    }

    const double ctol = tol::cluster * anorm;
    const Eigen::Index m = a.rows();
    for (const auto& c : detail::cluster_eigenvalues(d.eigenvalues, ctol)) {
        if (!(std::abs(c.mean.imag()) <= ctol && c.mean.real() < 0.0)) continue;
        const auto mult = static_cast<Eigen::Index>(c.members.size());
        // rank sequence of (A - lambda I)^j decides the block-size multiset
        Mat b = a - c.mean.real() * Mat::Identity(m, m);
        std::vector<Eigen::Index> ranks{m};  // rank of B^0
        Mat p = Mat::Identity(m, m);
        for (Eigen::Index j = 1; j <= mult + 1; ++j) {
            p = p * b;
            ranks.push_back(detail::svd_rank(p));
        }
        for (Eigen::Index j = 1; j <= mult; ++j) {
            const auto ge_j = ranks[j - 1] - ranks[j];
            const auto ge_j1 = ranks[j] - ranks[j + 1];
            const auto exactly_j = ge_j - ge_j1;
            if (exactly_j % 2 != 0) {
                rep.verdict = RealLogVerdict::no;
                rep.explanation = "Jordan blocks of size " + std::to_string(j) +
                                  " at eigenvalue " + std::to_string(c.mean.real()) +
                                  " occur " + std::to_string(exactly_j) +
                                  " time(s), an odd count (rank threshold " +
                                  std::to_string(tol::rank) + " relative)";
                return rep;
            }
        }
    }
    rep.verdict = RealLogVerdict::yes;
    rep.explanation =
        "invertible; every Jordan block with a negative eigenvalue occurs an even "
        "number of times (cluster tolerance " + std::to_string(tol::cluster) + " relative)";
    return rep;
}

struct RealLogResult {
    bool ok = false;
    Mat value;
    std::string reason;
};

// Best-effort real logarithm: pairs negative/complex eigenstructure into 2x2
// rotation-form blocks.  Declines (ok = false) rather than guessing.
inline RealLogResult real_log(const Mat& a) {
    RealLogResult res;
    const RealLogReport exists = real_log_exists(a);
    if (exists.verdict != RealLogVerdict::yes) {
        res.reason = "no real logarithm: " + exists.explanation;
        return res;
    }
    const SpectralDecomposition d = decompose(a);
    if (!d.is_diagonalizable || d.condition_estimate > tol::t2_condition) {
        res.reason = "eigenbasis defective or ill-conditioned; real pairing not attempted";
        return res;
    }

    const Eigen::Index m = a.rows();
    const double ctol = tol::cluster * std::max(a.norm(), 1.0);
    Mat s = Mat::Zero(m, m);
    Mat block = Mat::Zero(m, m);
    std::vector<bool> used(static_cast<std::size_t>(m), false);

    auto phase_fix_real = [&](Eigen::Index col, Vec& out) -> bool {
        CVec v = d.eigenvectors.col(col);
        Eigen::Index k;
        v.cwiseAbs().maxCoeff(&k);
        v *= std::conj(v[k]) / std::abs(v[k]);
        if (v.imag().norm() > 1e-8 * v.norm()) return false;
        out = v.real();
        return true;
    };

    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        const Complex lam = d.eigenvalues[i];
        if (std::abs(lam.imag()) <= ctol && lam.real() > 0.0) {
            Vec v;
            if (!phase_fix_real(i, v)) {
                res.reason = "complex eigenvector for a real eigenvalue";
                return res;
            }
            s.col(pos) = v;
            block(pos, pos) = std::log(lam.real());
            used[static_cast<std::size_t>(i)] = true;
            pos += 1;
            continue;
        }
        // negative-real or complex: needs a partner
        Eigen::Index partner = -1;
        const bool negative_real = std::abs(lam.imag()) <= ctol;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            const Complex mu = d.eigenvalues[j];
            const bool match = negative_real ? std::abs(mu - lam) <= 2 * ctol
                                             : std::abs(mu - std::conj(lam)) <= 2 * ctol;
            if (match) { partner = j; break; }
        }
        if (partner < 0) {
            res.reason = "unpaired eigenvalue " + std::to_string(lam.real());
            return res;
        }
        Vec v1, v2;
        if (negative_real && phase_fix_real(i, v1) && phase_fix_real(partner, v2)) {
            // two real eigendirections of the same negative eigenvalue
            const double alpha = std::log(std::abs(lam.real()));
            s.col(pos) = v1;
            s.col(pos + 1) = v2;
            block(pos, pos) = alpha;
            block(pos + 1, pos + 1) = alpha;
            block(pos, pos + 1) = M_PI;
            block(pos + 1, pos) = -M_PI;
        } else {
            // conjugate pair: real/imag parts of one eigenvector
            const Complex lam_up = lam.imag() >= 0.0 ? lam : std::conj(lam);
            const CVec v = lam.imag() >= 0.0 ? d.eigenvectors.col(i)
                                             : d.eigenvectors.col(partner);
            const Complex lg = detail::log_principal(lam_up);
            s.col(pos) = v.real();
            s.col(pos + 1) = v.imag();
            block(pos, pos) = lg.real();
            block(pos + 1, pos + 1) = lg.real();
            block(pos, pos + 1) = lg.imag();
            block(pos + 1, pos) = -lg.imag();
        }
        used[static_cast<std::size_t>(i)] = true;
        used[static_cast<std::size_t>(partner)] = true;
        pos += 2;
    }

    Eigen::FullPivLU<Mat> lu(s);
    if (!lu.isInvertible()) {
        res.reason = "pairing basis is numerically singular";
        return res;
    }
    Mat log = s * block * lu.inverse();
    const double resid = (mat_exp(log) - a).norm() / a.norm();
    if (resid > tol::roundtrip) {
        res.reason = "real pairing roundtrip residual " + std::to_string(resid);
        return res;
    }
    res.ok = true;
    res.value = std::move(log);
    return res;
}

// Spectrum map of B = int_0^T exp(A tau) dtau:  s(lambda) = (e^{lambda T}-1)/lambda,
// s(0) = T.  Series below |lambda T| = 1e-4 avoids cancellation.
inline Complex integral_spectrum(Complex lambda, double t) {
    const Complex x = lambda * t;
    if (std::abs(x) < 1e-4) {
        return t * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0 +
                    x * x * x * x / 120.0 + x * x * x * x * x / 720.0);
    }
    return (std::exp(x) - 1.0) / lambda;
}

namespace detail {

template <typename MatT>
MatT integral_exp_impl(const MatT& a, double t) {
    const Eigen::Index m = a.rows();
    MatT aug = MatT::Zero(2 * m, 2 * m);
    aug.topLeftCorner(m, m) = a * t;
    aug.topRightCorner(m, m).setIdentity();
    aug.topRightCorner(m, m) *= t;
    const MatT e = mat_exp(MatT(aug));
    return e.topRightCorner(m, m);
}

}  // namespace detail

inline CMat integral_exp(const CMat& a, double t) {
    if (!(t > 0.0)) throw InvalidStateError("integral_exp: t must be positive");
    return detail::integral_exp_impl(a, t);
}

inline Mat integral_exp(const Mat& a, double t) {
    if (!(t > 0.0)) throw InvalidStateError("integral_exp: t must be positive");
    return detail::integral_exp_impl(a, t);
}

struct IntegralInvertibility {
    bool invertible = true;
    Complex offending_eigenvalue{0.0, 0.0};
};

// Proposition-style criterion: the integral is singular iff some eigenvalue
// satisfies lambda*T in 2*pi*i*Z \ {0}.
inline IntegralInvertibility integral_invertibility(const CMat& a, double t) {
    Eigen::ComplexEigenSolver<CMat> es(a, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw AccuracyError("integral_invertibility: eigensolver failed");
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const Complex xt = es.eigenvalues()[i] * t;
        const double k = std::round(xt.imag() / (2.0 * M_PI));
        if (k == 0.0) continue;
        const Complex target(0.0, 2.0 * M_PI * k);
        if (std::abs(xt - target) <= 1e-9 * std::max(1.0, std::abs(xt)))
            return {false, es.eigenvalues()[i]};
    }
    return {true, Complex(0.0, 0.0)};
}

} // namespace plode
