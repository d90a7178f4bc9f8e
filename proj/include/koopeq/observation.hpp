#pragma once

#include "koopeq/error.hpp"
#include "koopeq/grid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace koopeq {

/// Periodic convolution kernels theta. Weights are indexed by grid offset o,
/// i.e. theta(x_o) with x_o = o * dx, wrapping modulo N.
struct DiracKernel {
    friend bool operator==(const DiracKernel&, const DiracKernel&) = default;
};

/// theta(x) = sqrt(alpha/pi) exp(-alpha d(x)^2), d the periodic distance to 0.
struct GaussianKernel {
    double alpha = 1.0;
    friend bool operator==(const GaussianKernel&, const GaussianKernel&) = default;
};

struct CustomKernel {
    std::vector<double> weights;  // length N, weights[o] = theta(x_o)
    friend bool operator==(const CustomKernel&, const CustomKernel&) = default;
};

using Kernel = std::variant<DiracKernel, GaussianKernel, CustomKernel>;

inline bool is_dirac(const Kernel& k) { return std::holds_alternative<DiracKernel>(k); }

/// Offset weights theta(x_o), o = 0..N-1. Empty for the Dirac kernel.
inline std::vector<double> kernel_weights(const Kernel& kernel, std::size_t n, double domain_length) {
    if (const auto* g = std::get_if<GaussianKernel>(&kernel)) {
        require(g->alpha > 0.0 && std::isfinite(g->alpha), ErrorKind::invalid_input,
                "gaussian kernel width must be positive and finite");
        std::vector<double> w(n);
        const double dx = domain_length / static_cast<double>(n);
        const double norm = std::sqrt(g->alpha / std::numbers::pi);
        for (std::size_t o = 0; o < n; ++o) {
            const double d = dx * static_cast<double>(std::min(o, n - o));
            w[o] = norm * std::exp(-g->alpha * d * d);
        }
        return w;
    }
    if (const auto* c = std::get_if<CustomKernel>(&kernel)) {
        require(c->weights.size() == n, ErrorKind::dimension_mismatch, "custom kernel length must equal N");
        for (double v : c->weights)
            require(std::isfinite(v), ErrorKind::invalid_input, "custom kernel weights must be finite");
        return c->weights;
    }
    return {};
}

inline std::size_t wrap_index(long i, std::size_t n) {
    const auto nn = static_cast<long>(n);
    return static_cast<std::size_t>(((i % nn) + nn) % nn);
}

namespace detail {

/// Convolution of one snapshot column with precomputed offset weights. The
/// sum runs over offsets relative to s, so shifting y and s together
/// reproduces the result bit for bit.
inline double convolve_site(std::span<const double> y, const std::vector<double>& weights, double dx,
                            std::size_t s) {
    if (weights.empty()) return y[s];
    const std::size_t n = y.size();
    double acc = 0.0;
    for (std::size_t o = 0; o < n; ++o) acc += weights[o] * y[(s + n - o) % n];
    return dx * acc;
}

}  // namespace detail

/// (y * theta)(x_s) = dx * sum_i y(x_i) theta(x_s - x_i). Dirac kernels return y(x_s).
inline double convolve_observe(const GridField& y, const Kernel& kernel, long s) {
    y.validate();
    require(s >= 0 && static_cast<std::size_t>(s) < y.size(), ErrorKind::index,
            "observation site " + std::to_string(s) + " outside [0, N)");
    const auto w = kernel_weights(kernel, y.size(), y.domain_length());
    return detail::convolve_site(y.values(), w, y.dx(), static_cast<std::size_t>(s));
}

/// Convolution after an element-wise nonlinear pre-transform of the field.
inline double convolve_observe(const GridField& y, const Kernel& kernel, long s,
                               const std::function<double(double)>& pre_transform) {
    if (!pre_transform) return convolve_observe(y, kernel, s);
    std::vector<double> v(y.values().begin(), y.values().end());
    for (double& x : v) x = pre_transform(x);
    return convolve_observe(GridField(std::move(v), y.domain_length()), kernel, s);
}

/// Cyclic grid shift: out(i) = y((i - g) mod N).
inline GridField shift_field(const GridField& y, long g) {
    const std::size_t n = y.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = y[wrap_index(static_cast<long>(i) - g, n)];
    return GridField(std::move(out), y.domain_length());
}

inline Trajectory shift_trajectory(const Trajectory& traj, long g) {
    Trajectory out = traj;
    const std::size_t n = traj.grid_size();
    for (std::size_t i = 0; i < n; ++i)
        out.data.row(static_cast<Eigen::Index>(i)) =
            traj.data.row(static_cast<Eigen::Index>(wrap_index(static_cast<long>(i) - g, n)));
    return out;
}

/// Measurement layout: q_w sites anchor, anchor+stride, ... observed at q_d
/// consecutive times. Entry (j * q_w + i) holds delay j (0 = most recent), site i.
struct ObservationMap {
    Kernel kernel = DiracKernel{};
    std::size_t window_width = 1;
    std::size_t delays = 1;
    long anchor = 0;
    std::size_t stride = 1;
    std::function<double(double)> pre_transform;  // optional, not serialized

    std::size_t dim() const noexcept { return window_width * delays; }

    std::size_t site(std::size_t i, std::size_t n) const {
        return wrap_index(anchor + static_cast<long>(i * stride), n);
    }

    ObservationMap at_anchor(long a) const {
        ObservationMap m = *this;
        m.anchor = a;
        return m;
    }

    void validate(std::size_t n) const {
        require(window_width >= 1, ErrorKind::precondition, "window width q_w must be >= 1");
        require(delays >= 1, ErrorKind::precondition, "delay count q_d must be >= 1");
        require(stride >= 1, ErrorKind::precondition, "stride must be >= 1");
        require(window_width * stride <= n, ErrorKind::precondition,
                "window does not fit the grid: q_w * stride = " + std::to_string(window_width * stride) +
                    " > N = " + std::to_string(n));
        require(anchor >= 0 && static_cast<std::size_t>(anchor) < n, ErrorKind::precondition,
                "anchor must lie in [0, N)");
    }

    static ObservationMap full_state(std::size_t n, std::size_t delays = 1) {
        ObservationMap m;
        m.window_width = n;
        m.delays = delays;
        return m;
    }
};

namespace detail {

/// Applies the pre-transform (if any) to a trajectory's data.
inline Eigen::MatrixXd observed_data(const Trajectory& traj, const ObservationMap& map) {
    if (!map.pre_transform) return traj.data;
    return traj.data.unaryExpr(map.pre_transform);
}

inline void fill_observation(const Eigen::MatrixXd& data, const ObservationMap& map,
                             const std::vector<double>& weights, double dx, std::size_t k,
                             Eigen::Ref<Eigen::VectorXd> out) {
    const std::size_t n = static_cast<std::size_t>(data.rows());
    const std::size_t qw = map.window_width;
    for (std::size_t j = 0; j < map.delays; ++j) {
        const auto col = data.col(static_cast<Eigen::Index>(k - j));
        const std::span<const double> y(col.data(), n);
        for (std::size_t i = 0; i < qw; ++i)
            out(static_cast<Eigen::Index>(j * qw + i)) = convolve_site(y, weights, dx, map.site(i, n));
    }
}

}  // namespace detail

/// Delay-window measurement vector for snapshot k.
inline Eigen::VectorXd window_delay_observe(const Trajectory& traj, const ObservationMap& map, std::size_t k) {
    const std::size_t n = traj.grid_size();
    map.validate(n);
    require(k < traj.num_snapshots(), ErrorKind::index, "snapshot index out of range");
    require(k + 1 >= map.delays, ErrorKind::precondition,
            "insufficient history: need " + std::to_string(map.delays) + " snapshots up to index " +
                std::to_string(k));
    const auto w = kernel_weights(map.kernel, n, traj.domain_length);
    const Eigen::MatrixXd data = detail::observed_data(traj, map);
    Eigen::VectorXd out(static_cast<Eigen::Index>(map.dim()));
    detail::fill_observation(data, map, w, traj.domain_length / static_cast<double>(n), k, out);
    return out;
}

/// Paired one-step measurement matrices. `inputs` is non-empty only for
/// datasets that carry neighbour control inputs.
struct EmbeddedDataset {
    Eigen::MatrixXd inputs;         // Z, q x m
    Eigen::MatrixXd outputs;        // Z', q x m
    Eigen::MatrixXd control;        // U, (2 q_d) x m, optional
    Eigen::MatrixXd control_next;   // U at the successor time, optional
    ObservationMap source_map;
    double tau = 1.0;
    std::vector<long> anchors;      // anchor of each column block, in order

    std::size_t pairs() const noexcept { return static_cast<std::size_t>(inputs.cols()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(inputs.rows()); }
};

inline std::size_t available_pairs(const Trajectory& traj, std::size_t delays) {
    return traj.num_snapshots() > delays ? traj.num_snapshots() - delays : 0;
}

/// Z column j observes time (q_d - 1 + j), Z' column j observes time (q_d + j).
inline EmbeddedDataset build_dataset(const Trajectory& traj, const ObservationMap& map) {
    const std::size_t n = traj.grid_size();
    map.validate(n);
    const std::size_t m = available_pairs(traj, map.delays);
    require(m >= 1, ErrorKind::precondition,
            "trajectory too short: " + std::to_string(traj.num_snapshots()) + " snapshots for q_d=" +
                std::to_string(map.delays));
    const auto w = kernel_weights(map.kernel, n, traj.domain_length);
    const double dx = traj.domain_length / static_cast<double>(n);
    const Eigen::MatrixXd data = detail::observed_data(traj, map);
    const auto q = static_cast<Eigen::Index>(map.dim());

    // Every snapshot from q_d-1 on is observed once; Z and Z' are overlapping views.
    Eigen::MatrixXd all(q, static_cast<Eigen::Index>(m + 1));
    for (std::size_t c = 0; c <= m; ++c) detail::fill_observation(data, map, w, dx, map.delays - 1 + c, all.col(c));

    EmbeddedDataset ds;
    ds.inputs = all.leftCols(static_cast<Eigen::Index>(m));
    ds.outputs = all.rightCols(static_cast<Eigen::Index>(m));
    ds.source_map = map;
    ds.tau = traj.tau;
    ds.anchors = {map.anchor};
    return ds;
}

/// Concatenates datasets along columns (same map shape required).
inline EmbeddedDataset concat_datasets(const std::vector<EmbeddedDataset>& parts) {
    require(!parts.empty(), ErrorKind::empty_data, "nothing to concatenate");
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        require(p.inputs.rows() == parts.front().inputs.rows() && p.control.rows() == parts.front().control.rows(),
                ErrorKind::dimension_mismatch, "datasets disagree on dimension");
        total += p.inputs.cols();
    }
    EmbeddedDataset out;
    out.inputs.resize(parts.front().inputs.rows(), total);
    out.outputs.resize(parts.front().outputs.rows(), total);
    out.control.resize(parts.front().control.rows(), total);
    out.control_next.resize(parts.front().control_next.rows(), total);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.inputs.middleCols(at, p.inputs.cols()) = p.inputs;
        out.outputs.middleCols(at, p.outputs.cols()) = p.outputs;
        if (out.control.rows() > 0) {
            out.control.middleCols(at, p.control.cols()) = p.control;
            out.control_next.middleCols(at, p.control_next.cols()) = p.control_next;
        }
        at += p.inputs.cols();
        out.anchors.insert(out.anchors.end(), p.anchors.begin(), p.anchors.end());
    }
    out.source_map = parts.front().source_map;
    out.tau = parts.front().tau;
    return out;
}

/// Datasets for every anchor 0..N-1, concatenated anchor-major.
inline EmbeddedDataset build_pooled_dataset(const Trajectory& traj, const ObservationMap& map) {
    std::vector<EmbeddedDataset> parts;
    parts.reserve(traj.grid_size());
    for (std::size_t a = 0; a < traj.grid_size(); ++a) parts.push_back(build_dataset(traj, map.at_anchor(static_cast<long>(a))));
    return concat_datasets(parts);
}

/// Dataset with neighbour inputs: the q_d delayed point values of the sites
/// immediately left (anchor - 1) and right (anchor + q_w) of a stride-1 window.
inline EmbeddedDataset build_control_dataset(const Trajectory& traj, const ObservationMap& map) {
    require(map.stride == 1, ErrorKind::precondition, "neighbour coupling requires a stride-1 window");
    EmbeddedDataset ds = build_dataset(traj, map);
    const std::size_t n = traj.grid_size();
    const std::size_t m = ds.pairs();
    const std::size_t qd = map.delays;
    const std::size_t left = wrap_index(map.anchor - 1, n);
    const std::size_t right = wrap_index(map.anchor + static_cast<long>(map.window_width), n);
    const Eigen::MatrixXd data = detail::observed_data(traj, map);
    ds.control.resize(static_cast<Eigen::Index>(2 * qd), static_cast<Eigen::Index>(m));
    ds.control_next.resize(static_cast<Eigen::Index>(2 * qd), static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < m; ++c) {
        const std::size_t k = qd - 1 + c;
        for (std::size_t j = 0; j < qd; ++j) {
            const auto r = static_cast<Eigen::Index>(j);
            const auto cc = static_cast<Eigen::Index>(c);
            ds.control(r, cc) = data(static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(k - j));
            ds.control(r + static_cast<Eigen::Index>(qd), cc) =
                data(static_cast<Eigen::Index>(right), static_cast<Eigen::Index>(k - j));
            ds.control_next(r, cc) = data(static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(k + 1 - j));
            ds.control_next(r + static_cast<Eigen::Index>(qd), cc) =
                data(static_cast<Eigen::Index>(right), static_cast<Eigen::Index>(k + 1 - j));
        }
    }
    return ds;
}

inline EmbeddedDataset build_pooled_control_dataset(const Trajectory& traj, const ObservationMap& map) {
    std::vector<EmbeddedDataset> parts;
    parts.reserve(traj.grid_size());
    for (std::size_t a = 0; a < traj.grid_size(); ++a)
        parts.push_back(build_control_dataset(traj, map.at_anchor(static_cast<long>(a))));
    return concat_datasets(parts);
}

/// dx * sum_i y(x_i) exp(-i (2 pi k / L) x_i).
inline std::complex<double> fourier_observe(const GridField& y, long k) {
    y.validate();
    const auto half = static_cast<long>(y.size() / 2);
    require(k > -half && k < half, ErrorKind::index, "Fourier index must satisfy |k| < N/2");
    const double omega = 2.0 * std::numbers::pi * static_cast<double>(k) / y.domain_length();
    std::complex<double> acc(0.0);
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * std::polar(1.0, -omega * y.x(i));
    return y.dx() * acc;
}

/// Smallest integer strictly greater than 2 (1 + sigma) d.
inline long min_embedding_dim(double d, double sigma) {
    require(std::isfinite(d) && std::isfinite(sigma) && d >= 0.0 && sigma >= 0.0, ErrorKind::invalid_input,
            "d and sigma must be finite and non-negative");
    return static_cast<long>(std::floor(2.0 * (1.0 + sigma) * d)) + 1;
}

/// `count` scales from `largest` down to `smallest`, evenly spaced in log.
inline std::vector<double> log_spaced_scales(double largest, double smallest, std::size_t count) {
    require(count >= 2 && largest > smallest && smallest > 0.0, ErrorKind::precondition, "invalid scale range");
    std::vector<double> eps(count);
    const double a = std::log(largest);
    const double b = std::log(smallest);
    for (std::size_t i = 0; i < count; ++i)
        eps[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    return eps;
}

/// Number of axis-aligned boxes of side eps occupied by the points.
inline std::size_t occupied_boxes(const std::vector<std::vector<double>>& points, double eps) {
    std::set<std::vector<long long>> boxes;
    std::vector<long long> key;
    for (const auto& p : points) {
        key.resize(p.size());
        for (std::size_t d = 0; d < p.size(); ++d) key[d] = static_cast<long long>(std::floor(p[d] / eps));
        boxes.insert(key);
    }
    return boxes.size();
}

/// Least-squares slope of log N(eps) against -log eps over the given scales.
inline double box_counting_dim(const std::vector<std::vector<double>>& points, const std::vector<double>& eps_grid) {
    require(points.size() >= 10, ErrorKind::precondition, "box counting needs at least 10 points");
    require(eps_grid.size() >= 2, ErrorKind::precondition, "box counting needs at least two scales");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        require(eps_grid[i] > 0.0 && std::isfinite(eps_grid[i]), ErrorKind::precondition, "scales must be positive");
        if (i > 0) require(eps_grid[i] < eps_grid[i - 1], ErrorKind::precondition, "scales must strictly decrease");
    }
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        require(p.size() == dim, ErrorKind::dimension_mismatch, "points must share one dimension");
        for (double v : p) require(std::isfinite(v), ErrorKind::invalid_input, "points must be finite");
    }

    const auto s = static_cast<double>(eps_grid.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (double eps : eps_grid) {
        const double x = -std::log(eps);
        const double y = std::log(static_cast<double>(occupied_boxes(points, eps)));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (s * sxy - sx * sy) / (s * sxx - sx * sx);
}

}  // namespace koopeq
