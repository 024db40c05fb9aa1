#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plode/convert.hpp"
#include "plode/errors.hpp"
#include "plode/linalg.hpp"
#include "plode/log.hpp"
#include "plode/model.hpp"

namespace plode {

struct BoundaryEvent {
    double time = 0.0;
    int coordinate = 0;  // 1-based state index whose sign flips
    int direction = 0;   // +1 into the positive half-space, -1 out of it
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<RegionIndex> regions;
    std::vector<BoundaryEvent> events;
};

struct FlowSample {
    Vec point;
    Vec velocity;
    RegionIndex region;
    bool equilibrium_candidate = false;
};

enum class SimMode { step_anchored, event_driven };

inline constexpr double kZenoEventsPerUnitTime = 1e6;
inline constexpr std::size_t kSampleCap = 10'000'000;

inline Trajectory simulate_discrete(const PlrnnModel& model, const Vec& z0, int steps,
                                    const std::optional<Mat>& inputs = std::nullopt) {
    model.validate();
    if (steps <= 0) throw InvalidStateError("simulate_discrete: steps must be positive");
    if (!z0.allFinite() || z0.size() != model.dim())
        throw InvalidStateError("simulate_discrete: bad initial state");
    if (inputs && (inputs->rows() != model.input_dim() || inputs->cols() < steps))
        throw DimensionError("simulate_discrete: inputs must be K x steps");

    Trajectory tr;
    tr.times.reserve(static_cast<std::size_t>(steps) + 1);
    Vec z = z0;
    tr.times.push_back(0.0);
    tr.states.push_back(z);
    tr.regions.push_back(classify_state(z));
    for (int k = 0; k < steps; ++k) {
        try {
            if (inputs)
                z = step_discrete(model, z, Vec(inputs->col(k)));
            else
                z = step_discrete(model, z);
        } catch (const OverflowError& e) {
            throw OverflowError("step " + std::to_string(k + 1) + ": " + e.what());
        }
        tr.times.push_back(static_cast<double>(k + 1) * model.dt);
        tr.states.push_back(z);
        tr.regions.push_back(classify_state(z));
    }
    return tr;
}

namespace detail {

// real state out of a possibly-complex flow value; large imaginary parts mean
// the caller asked for a mid-step state of a complex-branch region
inline Vec realize_state(const CVec& z, const std::string& where) {
    const double mi = z.imag().cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
    if (mi > 1e-9 * scale)
        throw AccuracyError(where + ": state has imaginary magnitude " +
                            std::to_string(mi) +
                            "; complex-branch regions are only real at step anchors");
    return z.real();
}

}  // namespace detail

// Closed-form state of one region's flow after time t >= 0.  No integrator:
// one matrix exponential (plus one for the drift when the generator is
// singular).
inline Vec flow_at(const ContinuousRegionSystem& crs, const Vec& z0, double t) {
    if (!z0.allFinite()) throw InvalidStateError("flow_at: non-finite state");
    if (!(t >= 0.0) || !std::isfinite(t))
        throw InvalidStateError("flow_at: t must be finite and nonnegative");
    const CVec zeta = flow_state(crs.w_tilde, crs.h_tilde, z0.cast<Complex>(), t);
    return detail::realize_state(zeta, "flow_at");
}

namespace detail {

inline const ContinuousRegionSystem& find_region(const ConvertedModel& converted,
                                                 const RegionIndex& region) {
    for (const auto& crs : converted.regions)
        if (crs.region.bits == region.bits) return crs;
    for (const auto& row : converted.report.regions)
        if (row.ordinal == region.ordinal() && !row.converted())
            throw NotConvertibleError("region " + std::to_string(region.ordinal()) +
                                      " was not converted: " + row.error);
    throw NotConvertibleError("region " + std::to_string(region.ordinal()) +
                              " is missing from the converted model");
}

inline CVec effective_h(const ContinuousRegionSystem& crs, const PlrnnModel& model,
                        const std::optional<Mat>& inputs, int step) {
    if (!inputs) return crs.h_tilde;
    if (crs.h_map.rows() != crs.h_tilde.size())
        throw InvalidStateError("region " + std::to_string(crs.region.ordinal()) +
                                " carries no offset map; inputs need a freshly "
                                "converted system");
    return crs.h_map * CVec((model.h + model.c * inputs->col(step)).cast<Complex>());
}

}  // namespace detail

inline Trajectory simulate_continuous(const PlrnnModel& model, const ConvertedModel& converted,
                                      const Vec& z0, double t_end, SimMode mode,
                                      double dense_dt = 0.0,
                                      const std::optional<Mat>& inputs = std::nullopt) {
    model.validate();
    if (!z0.allFinite() || z0.size() != model.dim())
        throw InvalidStateError("simulate_continuous: bad initial state");
    if (!(t_end > 0.0) || !std::isfinite(t_end))
        throw InvalidStateError("simulate_continuous: t_end must be positive");
    if (dense_dt == 0.0) dense_dt = model.dt / 64.0;
    if (!(dense_dt > 0.0) || dense_dt > model.dt + 1e-15 * model.dt)
        throw InvalidStateError("simulate_continuous: dense_dt must lie in (0, dt]");
    if (t_end / dense_dt > static_cast<double>(kSampleCap))
        throw CapExceededError("simulate_continuous: more than 1e7 samples requested");

    const double dt = model.dt;
    const int total_steps = static_cast<int>(std::ceil(t_end / dt - 1e-12));
    if (inputs && (inputs->rows() != model.input_dim() || inputs->cols() < total_steps))
        throw DimensionError("simulate_continuous: inputs must cover every step");

    Trajectory tr;
    auto push = [&](double t, const Vec& z) {
        if (!tr.times.empty() && t <= tr.times.back()) return;  // keep times strict
        tr.times.push_back(t);
        tr.states.push_back(z);
        tr.regions.push_back(classify_state(z));
    };

    Vec z = z0;
    push(0.0, z);

    if (mode == SimMode::step_anchored) {
        // region frozen at each step's start; the flow of that one region is
        // sampled across the whole step
        for (int k = 0; k < total_steps; ++k) {
            const double t0 = k * dt;
            const double t1 = std::min((k + 1) * dt, t_end);
            const auto& crs = detail::find_region(converted, classify_state(z));
            const CVec h_eff = detail::effective_h(crs, model, inputs, k);
            const CVec zc = z.cast<Complex>();
            for (double tau = dense_dt; tau < (t1 - t0) - 1e-12 * dt; tau += dense_dt)
                push(t0 + tau,
                     detail::realize_state(flow_state(crs.w_tilde, h_eff, zc, tau),
                                           "simulate_continuous"));
            const Vec z_next = detail::realize_state(
                flow_state(crs.w_tilde, h_eff, zc, t1 - t0), "simulate_continuous");
            push(t1, z_next);
            z = z_next;
        }
        return tr;
    }

    // event-driven: inside each discrete step the flow switches region at
    // boundary crossings, located by dense bracketing plus bisection
    double t_cur = 0.0;
    std::size_t event_count = 0;
    int flip_coord = -1;  // forced gate bit right after an event
    int flip_dir = 0;
    const int m = model.dim();

    while (t_cur < t_end - 1e-12 * dt) {
        const int k =
            std::min(static_cast<int>((t_cur + 1e-9 * dt) / dt), total_steps - 1);
        const double horizon = std::min((k + 1) * dt, t_end);

        RegionIndex region = classify_state(z);
        if (flip_coord >= 0)
            region.bits[static_cast<std::size_t>(flip_coord)] = flip_dir > 0 ? 1 : 0;
        const auto& crs = detail::find_region(converted, region);
        const CVec h_eff = detail::effective_h(crs, model, inputs, k);
        const CVec zc = z.cast<Complex>();
        auto flow = [&](double tau) {
            return detail::realize_state(flow_state(crs.w_tilde, h_eff, zc, tau),
                                         "simulate_continuous");
        };

        std::vector<bool> prev_pos(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) prev_pos[static_cast<std::size_t>(i)] = z[i] > 0.0;
        if (flip_coord >= 0) prev_pos[static_cast<std::size_t>(flip_coord)] = flip_dir > 0;
        flip_coord = -1;
        flip_dir = 0;

        bool crossed = false;
        double tau_prev = 0.0;
        while (!crossed) {
            const double tau = std::min(tau_prev + dense_dt, horizon - t_cur);
            const Vec zt = flow(tau);
            std::vector<int> flipped;
            for (int i = 0; i < m; ++i)
                if ((zt[i] > 0.0) != prev_pos[static_cast<std::size_t>(i)])
                    flipped.push_back(i);

            if (!flipped.empty()) {
                // bisect every flipping coordinate; the earliest one wins
                int hit = -1;
                double tau_event = horizon;
                for (int i : flipped) {
                    double lo = tau_prev, hi = tau;
                    const bool lo_pos = prev_pos[static_cast<std::size_t>(i)];
                    while (hi - lo > 1e-12 * dt) {
                        const double mid = 0.5 * (lo + hi);
                        if ((flow(mid)[i] > 0.0) == lo_pos)
                            lo = mid;
                        else
                            hi = mid;
                    }
                    if (hi < tau_event) {
                        tau_event = hi;
                        hit = i;
                    }
                }
                const Vec z_event = flow(tau_event);
                const int dir = prev_pos[static_cast<std::size_t>(hit)] ? -1 : +1;
                tr.events.push_back({t_cur + tau_event, hit + 1, dir});
                push(t_cur + tau_event, z_event);
                z = z_event;
                t_cur += tau_event;
                flip_coord = hit;
                flip_dir = dir;
                event_count += 1;
                if (static_cast<double>(event_count) >
                    kZenoEventsPerUnitTime * std::max(1.0, t_cur))
                    throw CapExceededError(
                        "simulate_continuous: Zeno-like behavior, over 1e6 boundary "
                        "events per unit time");
                crossed = true;
            } else {
                // same orthant at both ends; a double crossing inside would be
                // invisible, so probe the midpoint
                const Vec zm = flow(0.5 * (tau_prev + tau));
                for (int i = 0; i < m; ++i)
                    if ((zm[i] > 0.0) != prev_pos[static_cast<std::size_t>(i)] &&
                        (zm[i] > 0.0) != (zt[i] > 0.0))
                        log_info("possible double boundary crossing of coordinate " +
                                 std::to_string(i + 1) + " near t = " +
                                 std::to_string(t_cur + tau) +
                                 "; consider a smaller dense step");
                if (tau >= horizon - t_cur - 1e-15 * dt) {
                    push(t_cur + tau, zt);
                    z = zt;
                    t_cur = horizon;
                    break;
                }
                push(t_cur + tau, zt);
                for (int i = 0; i < m; ++i) prev_pos[static_cast<std::size_t>(i)] = zt[i] > 0.0;
                tau_prev = tau;
            }
        }
    }
    return tr;
}

// velocity = w_tilde * p + h_tilde in the region the point classifies into
inline std::vector<FlowSample> sample_flow_field(const ConvertedModel& converted,
                                                 const std::vector<Vec>& grid) {
    if (grid.size() > kSampleCap)
        throw CapExceededError("sample_flow_field: more than 1e7 grid points");
    std::vector<FlowSample> out;
    out.reserve(grid.size());
    for (const Vec& p : grid) {
        FlowSample fs;
        fs.point = p;
        fs.region = classify_state(p);
        const auto& crs = detail::find_region(converted, fs.region);
        const CVec v = crs.w_tilde * p.cast<Complex>() + crs.h_tilde;
        fs.velocity = v.real();
        fs.equilibrium_candidate =
            fs.velocity.norm() <= 1e-9 * std::max(1.0, p.norm());
        out.push_back(std::move(fs));
    }
    return out;
}

enum class FixedPointKind { isolated, line_attractor };

struct FixedPoint {
    Vec state;
    RegionIndex region;
    FixedPointKind kind = FixedPointKind::isolated;
    Mat direction;  // null-space basis of (w_omega - I); empty for isolated
};

struct FixedPointReport {
    std::vector<FixedPoint> genuine;  // state classifies into its own region
    std::vector<FixedPoint> virtual_points;  // solves the region map elsewhere
};

// Per region: fixed points of z -> w_omega z + h.  A unit eigenvalue turns
// the solution set into an affine subspace (the line-attractor case).
inline FixedPointReport fixed_points(const PlrnnModel& model, const ConvertedModel& converted) {
    model.validate();
    (void)converted;  // fixed sets are a property of the region maps themselves
    FixedPointReport out;
    const int m = model.dim();

    for (const auto& rs : enumerate_regions(model)) {
        const Mat b = rs.w_omega - Mat::Identity(m, m);
        Eigen::FullPivLU<Mat> lu(b);
        lu.setThreshold(1e-10);  // relative to the largest pivot

        if (lu.isInvertible()) {
            const Vec zstar = lu.solve(Vec(-rs.h));
            FixedPoint fp;
            fp.state = zstar;
            fp.region = rs.region;
            fp.kind = FixedPointKind::isolated;
            if (classify_state(zstar).bits == rs.region.bits)
                out.genuine.push_back(std::move(fp));
            else
                out.virtual_points.push_back(std::move(fp));
            continue;
        }

        const Vec x0 = lu.solve(Vec(-rs.h));
        if ((b * x0 + rs.h).norm() > 1e-9 * std::max(1.0, rs.h.norm()))
            continue;  // inconsistent: this region has no fixed set
        Mat kernel = lu.kernel();
        for (Eigen::Index j = 0; j < kernel.cols(); ++j) kernel.col(j).normalize();

        FixedPoint fp;
        fp.region = rs.region;
        fp.kind = FixedPointKind::line_attractor;
        fp.direction = kernel;
        fp.state = x0;

        // hunt for a representative inside the region along the solution set
        bool found = false;
        const std::vector<double> offsets{0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0};
        std::vector<std::size_t> idx(static_cast<std::size_t>(kernel.cols()), 0);
        while (true) {
            Vec cand = x0;
            for (Eigen::Index j = 0; j < kernel.cols(); ++j)
                cand += offsets[idx[static_cast<std::size_t>(j)]] * kernel.col(j);
            if (classify_state(cand).bits == rs.region.bits) {
                fp.state = cand;
                found = true;
                break;
            }
            // odometer over the offset grid
            Eigen::Index j = 0;
            for (; j < kernel.cols(); ++j) {
                idx[static_cast<std::size_t>(j)] += 1;
                if (idx[static_cast<std::size_t>(j)] < offsets.size()) break;
                idx[static_cast<std::size_t>(j)] = 0;
            }
            if (j == kernel.cols()) break;
        }
        if (found)
            out.genuine.push_back(std::move(fp));
        else
            out.virtual_points.push_back(std::move(fp));
    }
    return out;
}

} // namespace plode
