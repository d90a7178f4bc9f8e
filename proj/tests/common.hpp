#pragma once

#include "koopeq/grid.hpp"
#include "koopeq/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace koopeq::testing {

/// Seeded standard-normal matrix.
inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = nd(rng);
    return m;
}

inline GridField random_field(std::size_t n, std::uint64_t seed, double domain_length = 2.0 * std::numbers::pi) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    return GridField(std::move(v), domain_length);
}

inline SimConfig ks_config(double mu, double tau, std::uint64_t seed = 1) {
    SimConfig c;
    c.mu = mu;
    c.tau = tau;
    c.seed = seed;
    return c;
}

/// Full-size trajectories (N=32, M=1000), integrated once per test binary.
inline const Trajectory& ks_mu15() {
    static const Trajectory t = integrate_ks(ks_config(15.0, 0.2));
    return t;
}

inline const Trajectory& ks_mu18() {
    static const Trajectory t = integrate_ks(ks_config(18.0, 0.05));
    return t;
}

}  // namespace koopeq::testing
