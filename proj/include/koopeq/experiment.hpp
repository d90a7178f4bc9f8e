#pragma once

#include "koopeq/analysis.hpp"
#include "koopeq/config.hpp"
#include "koopeq/io.hpp"
#include "koopeq/koopman.hpp"
#include "koopeq/observation.hpp"
#include "koopeq/rollout.hpp"
#include "koopeq/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace koopeq {

/// Boundary statistic ratio above which a tiled rollout counts as decoherent.
inline constexpr double kDecoherenceFactor = 5.0;

inline Trajectory obtain_trajectory(const ExperimentConfig& cfg) {
    if (!cfg.input_trajectory.empty()) return load_trajectory(cfg.input_trajectory);
    return integrate_ks(cfg.sim);
}

inline std::size_t model_delays(const AnyModel& m) {
    return std::visit([](const auto& x) { return x.obs_map.delays; }, m);
}

/// Fits the model the config asks for on a training trajectory.
inline AnyModel fit_configured(const ExperimentConfig& cfg, const Trajectory& train) {
    const std::size_t n = train.grid_size();
    const Dictionary dict = cfg.dictionary(1);
    switch (cfg.fit.model) {
    case ModelKind::global: return fit_global(train, dict, cfg.obs.delays, cfg.fit.rcond);
    case ModelKind::local: return fit_local(train, cfg.obs.map(), dict, cfg.fit.pool_shifts, cfg.fit.rcond);
    case ModelKind::tiled:
        return tile_global(fit_local(train, cfg.obs.map(), dict, cfg.fit.pool_shifts, cfg.fit.rcond), n);
    case ModelKind::dmdc: return fit_dmdc_local(train, cfg.obs.map(), dict, cfg.fit.pool_shifts, cfg.fit.rcond);
    }
    throw Error(ErrorKind::config, "unsupported model kind");
}

/// Held-out one-step pairs matching the model's observation map.
inline double test_one_step_error(const AnyModel& model, const Trajectory& test, bool pool_shifts) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, CoupledLocalModel>) {
                return one_step_error(m, pool_shifts ? build_pooled_control_dataset(test, m.obs_map)
                                                     : build_control_dataset(test, m.obs_map));
            } else {
                const bool pooled = pool_shifts && m.kind != ModelKind::global;
                return one_step_error(m, pooled ? build_pooled_dataset(test, m.obs_map) : build_dataset(test, m.obs_map));
            }
        },
        model);
}

inline Spectrum model_spectrum(const AnyModel& m) {
    return std::visit([](const auto& x) { return spectrum(x); }, m);
}

/// The per-window spectrum (first block for tiled models, K_hat for DMDc).
inline Spectrum block_spectrum(const AnyModel& m) {
    if (const auto* k = std::get_if<KoopmanModel>(&m)) return spectrum_of(k->block(), k->kind);
    return model_spectrum(m);
}

inline void check_compatible(const AnyModel& model, const Trajectory& traj) {
    std::visit(
        [&](const auto& m) {
            require(m.grid_size == 0 || m.grid_size == traj.grid_size(), ErrorKind::dimension_mismatch,
                    "model/trajectory mismatch in N: model has " + std::to_string(m.grid_size) + ", trajectory has " +
                        std::to_string(traj.grid_size()));
            require(std::abs(m.tau - traj.tau) <= 1e-12 * std::max(1.0, std::abs(traj.tau)),
                    ErrorKind::dimension_mismatch,
                    "model/trajectory mismatch in tau: model has " + format_double(m.tau) + ", trajectory has " +
                        format_double(traj.tau));
            require(traj.num_snapshots() > m.obs_map.delays, ErrorKind::dimension_mismatch,
                    "model/trajectory mismatch in q_d: trajectory has only " + std::to_string(traj.num_snapshots()) +
                        " snapshots for q_d=" + std::to_string(m.obs_map.delays));
        },
        model);
}

struct PredictionRun {
    RolloutResult rollout;
    Trajectory truth;        // reference snapshots aligned with the prediction (index 0 = start state)
    ErrorReport report;
    std::size_t start_snapshot = 0;  // index of the start state in the full trajectory
    std::optional<double> decoherence;
};

/// Rolls out from the first admissible held-out state and scores it against
/// the reference trajectory (as far as the reference extends).
inline PredictionRun run_prediction(const AnyModel& model, const TrainTestSplit& split, std::size_t n_steps,
                                    RolloutMode mode) {
    const std::size_t qd = model_delays(model);
    PredictionRun run;
    const Trajectory history = split.test.slice(0, qd);
    run.start_snapshot = split.test_first_snapshot + qd - 1;
    run.rollout = std::visit([&](const auto& m) { return try_predict_rollout(m, history, n_steps, mode); }, model);
    const std::size_t avail = split.test.num_snapshots() - (qd - 1);
    const std::size_t len = std::min(avail, run.rollout.predicted.num_snapshots());
    run.truth = split.test.slice(qd - 1, std::min(avail, n_steps + 1));
    run.report = rollout_error(run.truth.slice(0, len), run.rollout.predicted.slice(0, len));
    if (run.rollout.diverged_at) run.report.diverged_at = run.rollout.diverged_at;
    const ObservationMap& map = std::visit([](const auto& m) -> const ObservationMap& { return m.obs_map; }, model);
    const std::size_t n = split.test.grid_size();
    const std::size_t qw = map.window_width;
    if (mode == RolloutMode::plain && qw < n && n % qw == 0 && len >= 1)
        run.decoherence = decoherence_ratio(run.truth.slice(0, len), run.rollout.predicted.slice(0, len), qw, map.anchor);
    return run;
}

struct SweepRow {
    std::size_t window_width = 0;
    std::size_t delays = 0;
    double one_step_error = 0.0;
    bool ok = false;
    ErrorKind failure = ErrorKind::invalid_input;
    std::string message;
};

/// One-step error of the configured model family for every (q_w, q_d)
/// combination; rows come back in (q_d outer, q_w inner) order regardless of
/// how many threads evaluate them.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const Trajectory& traj, unsigned threads = 0) {
    std::vector<std::size_t> qws = cfg.sweep.window_widths, qds = cfg.sweep.delays;
    if (qws.empty()) qws = {cfg.obs.window_width};
    if (qds.empty()) qds = {cfg.obs.delays};
    require(!qws.empty() && !qds.empty(), ErrorKind::config, "sweep list is empty");
    std::vector<SweepRow> rows;
    for (std::size_t qd : qds)
        for (std::size_t qw : qws) rows.push_back({qw, qd, 0.0, false, ErrorKind::invalid_input, ""});

    auto evaluate = [&](SweepRow& row) {
        try {
            ExperimentConfig c = cfg;
            c.obs.window_width = row.window_width;
            c.obs.delays = row.delays;
            const TrainTestSplit split = split_train_test(traj, row.delays, c.fit.train_fraction);
            const AnyModel model = fit_configured(c, split.train);
            row.one_step_error = test_one_step_error(model, split.test, c.fit.pool_shifts);
            row.ok = std::isfinite(row.one_step_error);
            if (!row.ok) {
                row.failure = ErrorKind::divergence;
                row.message = "non-finite one-step error";
            }
        } catch (const Error& e) {
            row.failure = e.kind();
            row.message = e.what();
        } catch (const std::exception& e) {
            row.message = e.what();
        }
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(rows.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) evaluate(rows[i]);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

inline std::map<std::string, std::string> config_echo(const ExperimentConfig& cfg) {
    return {{"q_w", std::to_string(cfg.fit.model == ModelKind::global ? cfg.sim.n : cfg.obs.window_width)},
            {"q_d", std::to_string(cfg.obs.delays)},
            {"mu", format_double(cfg.sim.mu)},
            {"mode", to_string(cfg.rollout.mode)},
            {"model", to_string(cfg.fit.model)},
            {"dict", std::string(to_string(cfg.dict.kind)) + "/" + std::to_string(cfg.dict.degree)}};
}

}  // namespace koopeq
