#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plode/errors.hpp"

namespace plode {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Discrete-time ReLU network  z' = A z + W max(z,0) + h (+ C s).
// A is diagonal, stored as its diagonal vector.
struct PlrnnModel {
    Vec a_diag;
    Mat w;
    Vec h;
    double dt = 1.0;
    Mat c;  // M x K input loading; 0 columns when the model takes no input

    int dim() const { return static_cast<int>(a_diag.size()); }
    int input_dim() const { return static_cast<int>(c.cols()); }

    void validate() const {
        const auto m = a_diag.size();
        if (m < 1)
            throw DimensionError("model dimension must be >= 1");
        if (w.rows() != m || w.cols() != m)
            throw DimensionError("w must be " + std::to_string(m) + "x" + std::to_string(m));
        if (h.size() != m)
            throw DimensionError("h must have length " + std::to_string(m));
        if (c.size() > 0 && c.rows() != m)
            throw DimensionError("c must have " + std::to_string(m) + " rows");
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw InvalidStateError("dt must be positive and finite");
        if (!a_diag.allFinite() || !w.allFinite() || !h.allFinite() || !(c.size() == 0 || c.allFinite()))
            throw InvalidStateError("model entries must be finite");
    }
};

// Gating pattern d = (d_1..d_M), d_i = 1 iff z_i > 0.  The ordinal packs the
// bits with d_1 as the least significant digit (mirrored binary string).
struct RegionIndex {
    std::vector<std::uint8_t> bits;

    int dim() const { return static_cast<int>(bits.size()); }

    std::uint64_t ordinal() const {
        std::uint64_t k = 0;
        for (std::size_t i = 0; i < bits.size(); ++i)
            if (bits[i]) k |= (std::uint64_t{1} << i);
        return k;
    }

    static RegionIndex from_ordinal(std::uint64_t k, int m) {
        RegionIndex r;
        r.bits.resize(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i)
            r.bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((k >> i) & 1u);
        return r;
    }

    bool operator==(const RegionIndex& o) const { return bits == o.bits; }
    bool operator!=(const RegionIndex& o) const { return bits != o.bits; }
};

// The affine map valid inside one region: z' = w_omega z + h.
struct RegionSystem {
    RegionIndex region;
    Mat w_omega;
    Vec h;
};

// Shared facet between two regions differing in bit s: {z_s = 0} intersected
// with the common sign pattern of the other coordinates.
struct Boundary {
    int s = 0;                         // 1-based zero coordinate
    std::vector<std::int8_t> signs;    // +1 / -1 fixed sign, 0 = free (at s)
};

inline RegionIndex classify_state(const Vec& z) {
    if (!z.allFinite())
        throw InvalidStateError("classify_state: non-finite entry in state");
    RegionIndex r;
    r.bits.resize(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i)
        r.bits[static_cast<std::size_t>(i)] = z[i] > 0.0 ? 1 : 0;  // z_i = 0 gates off
    return r;
}

inline RegionSystem region_system(const PlrnnModel& model, const RegionIndex& region) {
    const int m = model.dim();
    if (region.dim() != m)
        throw DimensionError("region_system: region has wrong dimension");
    Mat w_omega = model.w;
    for (int j = 0; j < m; ++j)
        if (!region.bits[static_cast<std::size_t>(j)]) w_omega.col(j).setZero();
    w_omega.diagonal() += model.a_diag;
    return RegionSystem{region, std::move(w_omega), model.h};
}

inline constexpr int kRegionEnumerationCap = 20;  // 2^M region systems

inline std::vector<RegionSystem> enumerate_regions(const PlrnnModel& model,
                                                   int cap = kRegionEnumerationCap) {
    const int m = model.dim();
    if (m > cap)
        throw CapExceededError("enumerate_regions: M = " + std::to_string(m) +
                               " exceeds the enumeration cap " + std::to_string(cap) +
                               " (use region_system for lazy access)");
    std::vector<RegionSystem> out;
    out.reserve(std::size_t{1} << m);
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << m); ++k)
        out.push_back(region_system(model, RegionIndex::from_ordinal(k, m)));
    return out;
}

// Shared boundary of two regions, present iff they differ in exactly one bit.
inline std::optional<Boundary> boundaries(const RegionIndex& a, const RegionIndex& b) {
    if (a.dim() != b.dim())
        throw DimensionError("boundaries: regions have different dimensions");
    int flip = -1;
    for (int i = 0; i < a.dim(); ++i) {
        if (a.bits[static_cast<std::size_t>(i)] != b.bits[static_cast<std::size_t>(i)]) {
            if (flip >= 0) return std::nullopt;  // more than one bit differs
            flip = i;
        }
    }
    if (flip < 0) return std::nullopt;  // same region
    Boundary bd;
    bd.s = flip + 1;
    bd.signs.resize(static_cast<std::size_t>(a.dim()));
    for (int i = 0; i < a.dim(); ++i)
        bd.signs[static_cast<std::size_t>(i)] =
            (i == flip) ? 0 : (a.bits[static_cast<std::size_t>(i)] ? +1 : -1);
    return bd;
}

inline Vec step_discrete(const PlrnnModel& model, const Vec& z,
                         const std::optional<Vec>& input = std::nullopt) {
    if (z.size() != model.dim())
        throw DimensionError("step_discrete: state has wrong dimension");
    if (!z.allFinite())
        throw InvalidStateError("step_discrete: non-finite state");
    Vec next = model.a_diag.cwiseProduct(z) + model.w * z.cwiseMax(0.0) + model.h;
    if (input) {
        if (model.input_dim() == 0)
            throw DimensionError("step_discrete: model takes no input");
        if (input->size() != model.input_dim())
            throw DimensionError("step_discrete: input has wrong dimension");
        next += model.c * (*input);
    }
    if (!next.allFinite())
        throw OverflowError("step_discrete: non-finite result");
    return next;
}

} // namespace plode
