#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "plode/convert.hpp"
#include "plode/dynamics.hpp"
#include "plode/errors.hpp"
#include "plode/log.hpp"
#include "plode/model.hpp"

namespace plode {

struct TrajectoryEquivalence {
    double max_residual = 0.0;
    std::vector<double> residual_at_step;     // infinity norm at each anchor
    std::set<std::uint64_t> regions_visited;  // ordinals along the discrete run
    double mode_gap = 0.0;  // step-anchored vs event-driven, max gap at anchors
};

struct EquivalenceReport {
    std::vector<TrajectoryEquivalence> trajectories;

    double max_residual() const {
        double m = 0.0;
        for (const auto& t : trajectories) m = std::max(m, t.max_residual);
        return m;
    }
};

// For each start: run the discrete map and the anchored flow side by side and
// measure the contract gap at every step time.
inline EquivalenceReport run_equivalence_suite(const PlrnnModel& model,
                                               const ConvertedModel& converted,
                                               const std::vector<Vec>& initial_states,
                                               int steps) {
    model.validate();
    if (initial_states.empty())
        throw InvalidStateError("run_equivalence_suite: no initial states");
    if (steps <= 0) throw InvalidStateError("run_equivalence_suite: steps must be positive");

    EquivalenceReport report;
    const double t_end = steps * model.dt;

    for (const Vec& z0 : initial_states) {
        TrajectoryEquivalence row;
        const Trajectory disc = simulate_discrete(model, z0, steps);
        const Trajectory cont = simulate_continuous(model, converted, z0, t_end,
                                                    SimMode::step_anchored, model.dt);
        // dense_dt = dt leaves exactly the anchor samples, aligned 1:1
        for (std::size_t k = 0; k < disc.states.size(); ++k) {
            const double r = (cont.states[k] - disc.states[k]).cwiseAbs().maxCoeff();
            row.residual_at_step.push_back(r);
            row.max_residual = std::max(row.max_residual, r);
        }
        for (const auto& region : disc.regions) row.regions_visited.insert(region.ordinal());

        try {
            const Trajectory ev = simulate_continuous(model, converted, z0, t_end,
                                                      SimMode::event_driven, model.dt);
            std::size_t j = 0;
            for (std::size_t k = 0; k < cont.times.size(); ++k) {
                while (j + 1 < ev.times.size() && ev.times[j] < cont.times[k] - 1e-12) j += 1;
                if (std::abs(ev.times[j] - cont.times[k]) <= 1e-12)
                    row.mode_gap = std::max(
                        row.mode_gap,
                        (ev.states[j] - cont.states[k]).cwiseAbs().maxCoeff());
            }
        } catch (const AccuracyError&) {
            // complex-branch region mid-step: the event mode has no real state
            row.mode_gap = std::numeric_limits<double>::quiet_NaN();
            log_info("equivalence suite: event-driven comparison skipped "
                     "(complex-branch region along the trajectory)");
        }
        report.trajectories.push_back(std::move(row));
    }
    return report;
}

// Border-tangency conditions at zeta_star for the switching plane zeta_s = 0,
// with H(zeta) = zeta_s.  H is linear, so its Hessian contributes nothing to
// the second-order condition.
struct GrazingResiduals {
    double on_border = 0.0;      // zeta*_s
    double gradient_norm = 1.0;  // |grad H| for a coordinate plane
    double tangency_1 = 0.0;     // <grad H, w1 zeta* + h1>
    double tangency_2 = 0.0;
    double curvature_1 = 0.0;    // <grad H, w1 (w1 zeta* + h1)>
    double curvature_2 = 0.0;

    double first_order_norm() const {
        return std::max({std::abs(on_border), std::abs(tangency_1), std::abs(tangency_2)});
    }
};

namespace detail {

inline void require_real_side(const ContinuousRegionSystem& crs, const char* which) {
    if (crs.realness == Realness::complex_log)
        throw InvalidStateError(std::string("grazing: ") + which +
                                " has a complex generator; tangency conditions are "
                                "defined for real systems");
}

}  // namespace detail

inline GrazingResiduals grazing_residuals(const ContinuousRegionSystem& side_1,
                                          const ContinuousRegionSystem& side_2,
                                          const Vec& zeta_star, int s) {
    detail::require_real_side(side_1, "side 1");
    detail::require_real_side(side_2, "side 2");
    const auto m = zeta_star.size();
    if (s < 1 || s > m) throw DimensionError("grazing: border coordinate out of range");
    if (!zeta_star.allFinite()) throw InvalidStateError("grazing: non-finite state");
    if (side_1.w_tilde.rows() != m || side_2.w_tilde.rows() != m)
        throw DimensionError("grazing: dimension mismatch");

    const Mat w1 = side_1.w_tilde_real();
    const Mat w2 = side_2.w_tilde_real();
    const Vec h1 = side_1.h_tilde_real();
    const Vec h2 = side_2.h_tilde_real();
    const Eigen::Index i = s - 1;

    GrazingResiduals r;
    r.on_border = zeta_star[i];
    r.gradient_norm = 1.0;
    const Vec v1 = w1 * zeta_star + h1;
    const Vec v2 = w2 * zeta_star + h2;
    r.tangency_1 = v1[i];
    r.tangency_2 = v2[i];
    r.curvature_1 = (w1 * v1)[i];
    r.curvature_2 = (w2 * v2)[i];
    return r;
}

// observer invoked once per Newton iterate (for parameter sweeps and tracing)
using BifurcationParameterHook =
    std::function<void(int iteration, const Vec& state, const GrazingResiduals& residuals)>;

struct GrazingCandidate {
    Vec state;
    GrazingResiduals residuals;
};

// Damped Newton on {zeta_s = 0, tangency_1 = 0} over the 2-plane spanned by
// coordinates s and the strongest off-border coupling of side 1; remaining
// coordinates stay frozen at the seed.
inline std::optional<GrazingCandidate> find_grazing_candidate(
    const ContinuousRegionSystem& side_1, const ContinuousRegionSystem& side_2,
    const Vec& seed, int s, const BifurcationParameterHook& hook = nullptr) {
    detail::require_real_side(side_1, "side 1");
    detail::require_real_side(side_2, "side 2");
    const auto m = seed.size();
    if (s < 1 || s > m) throw DimensionError("grazing: border coordinate out of range");
    if (!seed.allFinite()) throw InvalidStateError("grazing: non-finite seed");
    if (m < 2) return std::nullopt;  // the tangency system needs a second coordinate

    const Mat w1 = side_1.w_tilde_real();
    const Vec h1 = side_1.h_tilde_real();
    const Eigen::Index si = s - 1;

    Eigen::Index j = -1;
    double best = -1.0;
    for (Eigen::Index c = 0; c < m; ++c)
        if (c != si && std::abs(w1(si, c)) > best) {
            best = std::abs(w1(si, c));
            j = c;
        }

    for (int attempt = 0; attempt < 3; ++attempt) {
        Vec zeta = seed;
        zeta[si] += 0.05 * attempt;
        zeta[j] += 0.05 * attempt;

        auto f = [&](const Vec& z) {
            return Eigen::Vector2d(z[si], (w1 * z + h1)[si]);
        };
        Eigen::Matrix2d jac;
        jac << 1.0, 0.0, w1(si, si), w1(si, j);
        if (std::abs(jac.determinant()) < 1e-14) {
            log_info("grazing: singular Newton system (no coupling into the border "
                     "coordinate); perturbing the seed");
            continue;
        }

        Eigen::Vector2d res = f(zeta);
        for (int iter = 0; iter < 100; ++iter) {
            if (hook) hook(iter, zeta, grazing_residuals(side_1, side_2, zeta, s));
            if (res.norm() <= 1e-8)
                return GrazingCandidate{zeta, grazing_residuals(side_1, side_2, zeta, s)};
            const Eigen::Vector2d delta = jac.partialPivLu().solve(res);
            double step_scale = 1.0;
            Vec trial = zeta;
            Eigen::Vector2d trial_res;
            bool improved = false;
            for (int halving = 0; halving < 20; ++halving) {
                trial = zeta;
                trial[si] -= step_scale * delta[0];
                trial[j] -= step_scale * delta[1];
                trial_res = f(trial);
                if (trial_res.norm() < res.norm()) {
                    improved = true;
                    break;
                }
                step_scale *= 0.5;
            }
            if (!improved) break;  // stuck: try the next perturbed seed
            zeta = trial;
            res = trial_res;
        }
        if (res.norm() <= 1e-8)
            return GrazingCandidate{zeta, grazing_residuals(side_1, side_2, zeta, s)};
    }
    return std::nullopt;
}

} // namespace plode
