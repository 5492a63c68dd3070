#pragma once

#include <cmath>
#include <cstdint>

#include "uavsim/linalg.hpp"

namespace uavsim {

/// Noise channels drawn from disjoint substreams so that enabling or
/// disabling one consumer never perturbs the draws seen by another.
enum class NoiseChannel : std::uint32_t {
    process = 0,
    gps = 1,
    imu = 2,
    signal = 3,
    init = 4,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Deterministic standard-normal stream (xorshift-mixed counter + Box-Muller).
/// Identical output across platforms for a given (seed, agent, channel).
class GaussianStream {
public:
    GaussianStream(std::uint64_t master_seed, std::uint32_t agent, NoiseChannel channel)
        : state_(splitmix64(master_seed ^ splitmix64((std::uint64_t(agent) << 8) |
                                                     std::uint64_t(channel)))) {}

    explicit GaussianStream(std::uint64_t seed) : state_(splitmix64(seed)) {}

    double uniform() {
        state_ = splitmix64(state_);
        return double(state_ >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Vec normal_vec(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    /// Draw from N(0, cov) given a precomputed factor L with L*L^T = cov.
    Vec correlated(const Mat& chol_factor) {
        return chol_factor * normal_vec(chol_factor.cols());
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace uavsim
