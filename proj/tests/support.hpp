#pragma once

// Shared helpers for the test suite: a deterministic RNG (so failures
// reproduce bit-for-bit across runs) and matrix comparison shorthands.

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace testsup {

// splitmix64: tiny, seedable, good enough for fixture generation
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

  private:
    std::uint64_t state_;
};

inline Eigen::MatrixXd random_matrix(Rng& rng, int m, double lo = -1.0, double hi = 1.0) {
    Eigen::MatrixXd a(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) a(i, j) = rng.uniform(lo, hi);
    return a;
}

inline Eigen::VectorXd random_vector(Rng& rng, int m, double lo = -1.0, double hi = 1.0) {
    Eigen::VectorXd v(m);
    for (int i = 0; i < m; ++i) v[i] = rng.uniform(lo, hi);
    return v;
}

inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
    const double denom = want.norm();
    return denom > 0.0 ? (got - want).norm() / denom : (got - want).norm();
}

}  // namespace testsup
