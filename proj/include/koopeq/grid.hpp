#pragma once

#include "koopeq/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace koopeq {

/// A periodic 1-D field sampled at x_i = i * L / N, i = 0..N-1.
class GridField {
public:
    GridField() = default;

    GridField(std::vector<double> values, double domain_length)
        : values_(std::move(values)), length_(domain_length) {
        validate();
    }

    /// Samples f at the grid points of an N-point grid on [0, L).
    template <typename F>
    static GridField sample(std::size_t n, double domain_length, F&& f) {
        std::vector<double> v(n);
        const double dx = domain_length / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = f(dx * static_cast<double>(i));
        return GridField(std::move(v), domain_length);
    }

    static GridField zeros(std::size_t n, double domain_length) {
        return GridField(std::vector<double>(n, 0.0), domain_length);
    }

    std::size_t size() const noexcept { return values_.size(); }
    double domain_length() const noexcept { return length_; }
    double dx() const noexcept { return length_ / static_cast<double>(values_.size()); }
    double x(std::size_t i) const noexcept { return dx() * static_cast<double>(i); }

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }

    Eigen::Map<const Eigen::VectorXd> eigen() const {
        return {values_.data(), static_cast<Eigen::Index>(values_.size())};
    }

    bool same_grid(const GridField& other) const noexcept {
        return size() == other.size() && length_ == other.length_;
    }

    void validate() const {
        require(length_ > 0.0 && std::isfinite(length_), ErrorKind::invalid_input,
                "domain length must be positive and finite");
        require(values_.size() >= 4 && values_.size() % 2 == 0, ErrorKind::invalid_input,
                "grid size must be even and >= 4, got " + std::to_string(values_.size()));
        for (double v : values_)
            require(std::isfinite(v), ErrorKind::invalid_input, "field contains non-finite values");
    }

    friend bool operator==(const GridField&, const GridField&) = default;

private:
    std::vector<double> values_;
    double length_ = 2.0 * std::numbers::pi;
};

/// Time-ordered snapshots spaced `tau` apart, stored column-wise (N x S).
struct Trajectory {
    Eigen::MatrixXd data;  // column k = snapshot k
    double domain_length = 2.0 * std::numbers::pi;
    double tau = 1.0;
    double mu = 0.0;
    double dt = 1.0;
    long burn_in_steps = 0;

    std::size_t grid_size() const noexcept { return static_cast<std::size_t>(data.rows()); }
    std::size_t num_snapshots() const noexcept { return static_cast<std::size_t>(data.cols()); }

    GridField snapshot(std::size_t k) const {
        require(k < num_snapshots(), ErrorKind::index, "snapshot index out of range");
        std::vector<double> v(data.col(static_cast<Eigen::Index>(k)).data(),
                              data.col(static_cast<Eigen::Index>(k)).data() + data.rows());
        return GridField(std::move(v), domain_length);
    }

    /// Builds a trajectory from a list of fields on a common grid.
    static Trajectory from_snapshots(const std::vector<GridField>& snaps, double tau, double mu = 0.0,
                                     double dt = 0.0, long burn_in_steps = 0) {
        require(!snaps.empty(), ErrorKind::empty_data, "trajectory needs at least one snapshot");
        Trajectory t;
        const auto n = static_cast<Eigen::Index>(snaps.front().size());
        t.data.resize(n, static_cast<Eigen::Index>(snaps.size()));
        for (std::size_t k = 0; k < snaps.size(); ++k) {
            require(snaps[k].same_grid(snaps.front()), ErrorKind::dimension_mismatch,
                    "snapshots must share N and L");
            t.data.col(static_cast<Eigen::Index>(k)) = snaps[k].eigen();
        }
        t.domain_length = snaps.front().domain_length();
        t.tau = tau;
        t.mu = mu;
        t.dt = dt > 0.0 ? dt : tau;
        t.burn_in_steps = burn_in_steps;
        return t;
    }

    /// Keeps snapshots [first, first + count).
    Trajectory slice(std::size_t first, std::size_t count) const {
        require(first + count <= num_snapshots(), ErrorKind::index, "trajectory slice out of range");
        Trajectory t = *this;
        t.data = data.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
        return t;
    }
};

enum class InitialCondition { random_smooth, named_profile };

struct SimConfig {
    std::size_t n = 32;
    double domain_length = 2.0 * std::numbers::pi;
    double mu = 15.0;
    double dt = 0.01;
    double tau = 0.2;
    double burn_in_time = 50.0;
    std::size_t num_snapshots = 1000;  // M; the trajectory holds M + 1 fields
    std::uint64_t seed = 0;
    InitialCondition initial_condition = InitialCondition::random_smooth;
    std::string profile = "zero";  // used with named_profile: zero | sin | cos

    /// Number of integrator steps per stored sample; throws when tau/dt is not integral.
    long steps_per_sample() const {
        const double r = tau / dt;
        const double rounded = std::round(r);
        require(rounded >= 1.0 && std::abs(r - rounded) <= 1e-9 * rounded, ErrorKind::precondition,
                "tau must be a positive integer multiple of dt");
        return static_cast<long>(rounded);
    }

    long burn_in_steps() const { return static_cast<long>(std::llround(burn_in_time / dt)); }

    void validate() const {
        require(n >= 4 && n % 2 == 0, ErrorKind::precondition, "N must be even and >= 4");
        require(domain_length > 0.0, ErrorKind::precondition, "L must be positive");
        require(dt > 0.0, ErrorKind::precondition, "dt must be positive");
        require(burn_in_time >= 0.0, ErrorKind::precondition, "burn-in time must be non-negative");
        require(num_snapshots >= 2, ErrorKind::precondition, "M must be at least 2");
        require(std::isfinite(mu), ErrorKind::precondition, "mu must be finite");
        (void)steps_per_sample();
    }
};

}  // namespace koopeq
