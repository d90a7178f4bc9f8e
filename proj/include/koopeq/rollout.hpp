#pragma once

#include "koopeq/error.hpp"
#include "koopeq/grid.hpp"
#include "koopeq/koopman.hpp"
#include "koopeq/observation.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace koopeq {

enum class RolloutMode { plain, project_then_lift, dmdc };

inline const char* to_string(RolloutMode m) {
    switch (m) {
    case RolloutMode::plain: return "plain";
    case RolloutMode::project_then_lift: return "project_then_lift";
    case RolloutMode::dmdc: return "dmdc";
    }
    return "?";
}

inline RolloutMode rollout_mode_from_string(const std::string& s) {
    if (s == "plain") return RolloutMode::plain;
    if (s == "project_then_lift") return RolloutMode::project_then_lift;
    if (s == "dmdc") return RolloutMode::dmdc;
    throw Error(ErrorKind::config, "unknown rollout mode '" + s + "'");
}

/// Predicted snapshots (first = the current state) and, when the divergence
/// guard tripped, the step at which it did.
struct RolloutResult {
    Trajectory predicted;
    std::optional<std::size_t> diverged_at;
};

namespace detail {

/// Most-recent-first grid history, one column vector per delay.
using History = std::deque<Eigen::VectorXd>;

inline History initial_history(const Trajectory& history, std::size_t delays) {
    require(history.num_snapshots() >= delays, ErrorKind::precondition,
            "rollout needs " + std::to_string(delays) + " history snapshots, got " +
                std::to_string(history.num_snapshots()));
    History h;
    const std::size_t last = history.num_snapshots() - 1;
    for (std::size_t j = 0; j < delays; ++j) h.push_back(history.data.col(static_cast<Eigen::Index>(last - j)));
    return h;
}

inline Eigen::VectorXd window_from_history(const History& h, const ObservationMap& map, long anchor) {
    const auto n = static_cast<std::size_t>(h.front().size());
    const std::size_t qw = map.window_width;
    Eigen::VectorXd w(static_cast<Eigen::Index>(qw * map.delays));
    for (std::size_t j = 0; j < map.delays; ++j)
        for (std::size_t i = 0; i < qw; ++i)
            w(static_cast<Eigen::Index>(j * qw + i)) =
                h[j](static_cast<Eigen::Index>(wrap_index(anchor + static_cast<long>(i * map.stride), n)));
    return w;
}

inline Eigen::VectorXd point_delays(const History& h, std::size_t site, std::size_t delays) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(delays));
    for (std::size_t j = 0; j < delays; ++j) u(static_cast<Eigen::Index>(j)) = h[j](static_cast<Eigen::Index>(site));
    return u;
}

inline bool within_guard(const Eigen::VectorXd& y) {
    return y.allFinite() && (y.size() == 0 || y.cwiseAbs().maxCoeff() <= kDivergenceThreshold);
}

inline void require_point_map(const ObservationMap& map) {
    require(is_dirac(map.kernel) && !map.pre_transform, ErrorKind::precondition,
            "rollout reconstructs grid values and therefore needs point (Dirac) observations");
}

class Recorder {
public:
    Recorder(const Trajectory& history, double tau, std::size_t n_steps)
        : out_(static_cast<Eigen::Index>(history.grid_size()), static_cast<Eigen::Index>(n_steps + 1)) {
        meta_ = history;
        meta_.data.resize(0, 0);
        meta_.tau = tau;
        out_.col(0) = history.data.col(static_cast<Eigen::Index>(history.num_snapshots() - 1));
    }

    void record(std::size_t step, const Eigen::VectorXd& y) { out_.col(static_cast<Eigen::Index>(step)) = y; }

    RolloutResult finish(std::size_t steps_done, std::optional<std::size_t> diverged) {
        RolloutResult r;
        r.predicted = meta_;
        r.predicted.data = out_.leftCols(static_cast<Eigen::Index>(steps_done + 1));
        r.diverged_at = diverged;
        return r;
    }

private:
    Eigen::MatrixXd out_;
    Trajectory meta_;
};

inline RolloutResult rollout_plain(const KoopmanModel& model, const Trajectory& history, std::size_t n_steps) {
    const std::size_t n = history.grid_size();
    const ObservationMap& map = model.obs_map;
    const std::size_t qw = map.window_width;
    require(map.stride == 1, ErrorKind::precondition, "plain rollout requires stride-1 windows");
    require(n % qw == 0, ErrorKind::precondition, "plain rollout requires q_w to divide N");
    const std::size_t blocks = n / qw;
    const KoopmanModel tiled =
        model.kind == ModelKind::local ? tile_global(model, n) : model;
    require(static_cast<std::size_t>(tiled.K.rows()) == blocks * tiled.block_dim(), ErrorKind::dimension_mismatch,
            "model size does not match the grid");

    const History h = initial_history(history, map.delays);
    const auto l = static_cast<Eigen::Index>(tiled.block_dim());
    Eigen::VectorXd psi(l * static_cast<Eigen::Index>(blocks));
    for (std::size_t b = 0; b < blocks; ++b) {
        const long a = map.anchor + static_cast<long>(b * qw);
        psi.segment(static_cast<Eigen::Index>(b) * l, l) = tiled.dictionary.lift(window_from_history(h, map, a));
    }

    Recorder rec(history, model.tau, n_steps);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t step = 1; step <= n_steps; ++step) {
        psi = tiled.K * psi;
        for (std::size_t b = 0; b < blocks; ++b) {
            const Eigen::VectorXd z = tiled.dictionary.project(psi.segment(static_cast<Eigen::Index>(b) * l, l));
            const long a = map.anchor + static_cast<long>(b * qw);
            for (std::size_t i = 0; i < qw; ++i)
                y(static_cast<Eigen::Index>(wrap_index(a + static_cast<long>(i), n))) = z(static_cast<Eigen::Index>(i));
        }
        if (!within_guard(y)) return rec.finish(step - 1, step);
        rec.record(step, y);
    }
    return rec.finish(n_steps, std::nullopt);
}

inline RolloutResult rollout_project_then_lift(const KoopmanModel& model, const Trajectory& history,
                                               std::size_t n_steps) {
    const std::size_t n = history.grid_size();
    const ObservationMap& map = model.obs_map;
    const Eigen::MatrixXd k = model.block();
    History h = initial_history(history, map.delays);
    Recorder rec(history, model.tau, n_steps);
    Eigen::VectorXd sum(static_cast<Eigen::Index>(n));
    Eigen::VectorXd count(static_cast<Eigen::Index>(n));
    for (std::size_t step = 1; step <= n_steps; ++step) {
        sum.setZero();
        count.setZero();
        for (std::size_t a = 0; a < n; ++a) {
            const Eigen::VectorXd psi = k * model.dictionary.lift(window_from_history(h, map, static_cast<long>(a)));
            const Eigen::VectorXd z = model.dictionary.project(psi);
            for (std::size_t i = 0; i < map.window_width; ++i) {
                const auto s = static_cast<Eigen::Index>(map.at_anchor(static_cast<long>(a)).site(i, n));
                sum(s) += z(static_cast<Eigen::Index>(i));
                count(s) += 1.0;
            }
        }
        const Eigen::VectorXd y = sum.cwiseQuotient(count);
        if (!within_guard(y)) return rec.finish(step - 1, step);
        rec.record(step, y);
        h.pop_back();
        h.push_front(y);
    }
    return rec.finish(n_steps, std::nullopt);
}

inline RolloutResult rollout_dmdc(const CoupledLocalModel& model, const Trajectory& history, std::size_t n_steps) {
    const std::size_t n = history.grid_size();
    const ObservationMap& map = model.obs_map;
    const std::size_t qw = map.window_width;
    const std::size_t qd = map.delays;
    require(map.stride == 1, ErrorKind::precondition, "coupled rollout requires stride-1 windows");
    require(n % qw == 0, ErrorKind::precondition, "coupled rollout requires q_w to divide N");
    History h = initial_history(history, qd);
    Recorder rec(history, model.tau, n_steps);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t step = 1; step <= n_steps; ++step) {
        // Synchronous update: all windows read the previous step's state.
        for (std::size_t b = 0; b < n / qw; ++b) {
            const long a = map.anchor + static_cast<long>(b * qw);
            const Eigen::VectorXd z = window_from_history(h, map, a);
            const Eigen::VectorXd ul = point_delays(h, wrap_index(a - 1, n), qd);
            const Eigen::VectorXd ur = point_delays(h, wrap_index(a + static_cast<long>(qw), n), qd);
            const Eigen::VectorXd psi = model.K_hat * model.dictionary.lift(z) + model.B_l * ul + model.B_r * ur;
            const Eigen::VectorXd zn = model.dictionary.project(psi);
            for (std::size_t i = 0; i < qw; ++i)
                y(static_cast<Eigen::Index>(wrap_index(a + static_cast<long>(i), n))) = zn(static_cast<Eigen::Index>(i));
        }
        if (!within_guard(y)) return rec.finish(step - 1, step);
        rec.record(step, y);
        h.pop_back();
        h.push_front(y);
    }
    return rec.finish(n_steps, std::nullopt);
}

}  // namespace detail

/// Rollout that stops at the divergence guard instead of throwing.
inline RolloutResult try_predict_rollout(const KoopmanModel& model, const Trajectory& history, std::size_t n_steps,
                                         RolloutMode mode) {
    require(mode != RolloutMode::dmdc, ErrorKind::precondition, "dmdc rollout needs a coupled local model");
    require(history.grid_size() == model.grid_size || model.grid_size == 0, ErrorKind::dimension_mismatch,
            "history grid size " + std::to_string(history.grid_size()) + " does not match model grid size " +
                std::to_string(model.grid_size));
    detail::require_point_map(model.obs_map);
    model.obs_map.validate(history.grid_size());
    if (mode == RolloutMode::plain) return detail::rollout_plain(model, history, n_steps);
    return detail::rollout_project_then_lift(model, history, n_steps);
}

inline RolloutResult try_predict_rollout(const CoupledLocalModel& model, const Trajectory& history,
                                         std::size_t n_steps, RolloutMode mode) {
    require(mode == RolloutMode::dmdc, ErrorKind::precondition, "coupled local models only support dmdc rollout");
    require(history.grid_size() == model.grid_size || model.grid_size == 0, ErrorKind::dimension_mismatch,
            "history grid size does not match model grid size");
    detail::require_point_map(model.obs_map);
    model.obs_map.validate(history.grid_size());
    return detail::rollout_dmdc(model, history, n_steps);
}

namespace detail {

inline Trajectory unwrap(RolloutResult r) {
    if (r.diverged_at)
        throw DivergenceError("rollout diverged at step " + std::to_string(*r.diverged_at),
                              static_cast<double>(*r.diverged_at));
    return std::move(r.predicted);
}

}  // namespace detail

/// Rolls the model forward n_steps from the last snapshot(s) of `history`.
/// Returns n_steps + 1 snapshots; throws DivergenceError on a guard trip.
inline Trajectory predict_rollout(const KoopmanModel& model, const Trajectory& history, std::size_t n_steps,
                                  RolloutMode mode) {
    return detail::unwrap(try_predict_rollout(model, history, n_steps, mode));
}

inline Trajectory predict_rollout(const CoupledLocalModel& model, const Trajectory& history, std::size_t n_steps,
                                  RolloutMode mode = RolloutMode::dmdc) {
    return detail::unwrap(try_predict_rollout(model, history, n_steps, mode));
}

}  // namespace koopeq
