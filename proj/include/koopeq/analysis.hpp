#pragma once

#include "koopeq/error.hpp"
#include "koopeq/grid.hpp"
#include "koopeq/koopman.hpp"
#include "koopeq/observation.hpp"
#include "koopeq/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace koopeq {

inline constexpr double kTrainFraction = 0.8;

/// Chronological split of the snapshot pairs of a trajectory: the first
/// `train_pairs` pairs go to training, the remainder to testing. The two
/// sub-trajectories overlap by q_d snapshots so that no pair is lost.
struct TrainTestSplit {
    Trajectory train;
    Trajectory test;
    std::size_t train_pairs = 0;
    std::size_t test_pairs = 0;
    std::size_t test_first_snapshot = 0;  // index in the source trajectory
};

inline TrainTestSplit split_train_test(const Trajectory& traj, std::size_t delays,
                                       double train_fraction = kTrainFraction) {
    const std::size_t pairs = available_pairs(traj, delays);
    require(pairs >= 2, ErrorKind::precondition, "need at least two snapshot pairs to split");
    require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::precondition, "train fraction must lie in (0, 1)");
    TrainTestSplit s;
    s.train_pairs = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(pairs))), 1, pairs - 1);
    s.test_pairs = pairs - s.train_pairs;
    s.train = traj.slice(0, s.train_pairs + delays);
    s.test_first_snapshot = s.train_pairs;
    s.test = traj.slice(s.test_first_snapshot, traj.num_snapshots() - s.test_first_snapshot);
    return s;
}

namespace detail {

inline double mean_relative_error(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < truth.cols(); ++c) {
        const double ref = truth.col(c).norm();
        const double err = (predicted.col(c) - truth.col(c)).norm();
        acc += ref > 0.0 ? err / ref : err;
    }
    return acc / static_cast<double>(truth.cols());
}

}  // namespace detail

/// Mean over test pairs of ||project(K lift(z)) - z'|| / ||z'||.
inline double one_step_error(const KoopmanModel& model, const EmbeddedDataset& test) {
    require(test.pairs() >= 1, ErrorKind::empty_data, "one-step error needs a non-empty test set");
    const Eigen::MatrixXd k = model.block();
    const Eigen::MatrixXd pred = model.dictionary.project_columns(k * model.dictionary.lift_columns(test.inputs));
    return detail::mean_relative_error(pred, test.outputs);
}

inline double one_step_error(const CoupledLocalModel& model, const EmbeddedDataset& test) {
    require(test.pairs() >= 1, ErrorKind::empty_data, "one-step error needs a non-empty test set");
    require(test.control.rows() == model.B_l.cols() + model.B_r.cols(), ErrorKind::dimension_mismatch,
            "test set does not carry matching neighbour inputs");
    const Eigen::Index qd = model.B_l.cols();
    const Eigen::MatrixXd psi = model.K_hat * model.dictionary.lift_columns(test.inputs) +
                                model.B_l * test.control.topRows(qd) + model.B_r * test.control.bottomRows(qd);
    return detail::mean_relative_error(model.dictionary.project_columns(psi), test.outputs);
}

struct ErrorReport {
    std::vector<double> step_errors;  // relative L2 per step, step 0 = initial state
    std::optional<std::size_t> first_exceeding_one;
    std::optional<std::size_t> diverged_at;
    double one_step_error = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, std::string> config;

    double max_error() const {
        return step_errors.empty() ? 0.0 : *std::max_element(step_errors.begin(), step_errors.end());
    }
    double mean_error() const {
        if (step_errors.empty()) return 0.0;
        double s = 0.0;
        for (double e : step_errors) s += e;
        return s / static_cast<double>(step_errors.size());
    }
};

/// Per-step ||pred - truth|| / ||truth||. A prediction that is shorter than the
/// truth, or turns non-finite, is treated as diverged and the report truncated.
inline ErrorReport rollout_error(const Trajectory& truth, const Trajectory& pred) {
    require(truth.grid_size() == pred.grid_size(), ErrorKind::dimension_mismatch,
            "grid sizes differ: " + std::to_string(truth.grid_size()) + " vs " + std::to_string(pred.grid_size()));
    require(pred.num_snapshots() <= truth.num_snapshots(), ErrorKind::dimension_mismatch,
            "prediction is longer than the reference trajectory");
    ErrorReport r;
    const std::size_t steps = pred.num_snapshots();
    if (steps < truth.num_snapshots()) r.diverged_at = steps;
    for (std::size_t k = 0; k < steps; ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        if (!pred.data.col(c).allFinite()) {
            r.diverged_at = k;
            break;
        }
        const double ref = truth.data.col(c).norm();
        const double err = (pred.data.col(c) - truth.data.col(c)).norm();
        const double rel = ref > 0.0 ? err / ref : err;
        r.step_errors.push_back(rel);
        if (rel > 1.0 && !r.first_exceeding_one) r.first_exceeding_one = k;
    }
    return r;
}

/// Phase advance per sampling interval (radians, signed, in (-pi, pi]) of the
/// dominant nonzero Fourier mode, estimated from the averaged lag-one product.
struct WaveFrequency {
    double phase_per_step = 0.0;
    long mode = 0;

    /// Angular frequency in radians per unit time.
    double angular_frequency(double tau) const { return phase_per_step / tau; }
};

inline WaveFrequency traveling_wave_frequency(const Trajectory& traj) {
    require(traj.num_snapshots() >= 2, ErrorKind::precondition, "frequency needs at least two snapshots");
    const std::size_t n = traj.grid_size();
    std::vector<Spectrum1d> spec;
    spec.reserve(traj.num_snapshots());
    for (std::size_t k = 0; k < traj.num_snapshots(); ++k) spec.push_back(detail::forward(traj.snapshot(k).values()));

    std::size_t best = 1;
    double best_amp = -1.0;
    for (std::size_t j = 1; j < n / 2; ++j) {
        double amp = 0.0;
        for (const auto& s : spec) amp += std::abs(s[j]);
        if (amp > best_amp) {
            best_amp = amp;
            best = j;
        }
    }
    best_amp /= static_cast<double>(spec.size() * n);
    require(best_amp >= 1e-8, ErrorKind::degenerate_data, "dominant mode amplitude too small; frequency undefined");
    std::complex<double> lag(0.0);
    for (std::size_t k = 0; k + 1 < spec.size(); ++k) lag += spec[k + 1][best] * std::conj(spec[k][best]);
    return {std::arg(lag), static_cast<long>(best)};
}

struct SpectrumComparison {
    Spectrum global;
    Spectrum local;
    double leading_hausdorff = 0.0;
    struct Match {
        std::size_t local_index;
        std::size_t global_index;
        double distance;
    };
    std::vector<Match> matches;
};

/// Greedy nearest matching of the k leading local eigenvalues to distinct
/// global eigenvalues; the largest matched distance is reported.
inline SpectrumComparison compare_spectra(const Spectrum& global, const Spectrum& local, std::size_t k) {
    require(k >= 1, ErrorKind::precondition, "comparison needs k >= 1");
    require(k <= std::min(global.size(), local.size()), ErrorKind::precondition,
            "k exceeds the size of one of the spectra");
    SpectrumComparison out{global, local, 0.0, {}};
    std::vector<bool> used(global.size(), false);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < global.size(); ++g) {
            if (used[g]) continue;
            const double d = std::abs(local[i] - global[g]);
            if (d < best) {
                best = d;
                arg = g;
            }
        }
        used[arg] = true;
        out.matches.push_back({i, arg, best});
        out.leading_hausdorff = std::max(out.leading_hausdorff, best);
    }
    return out;
}

/// Multiset distance: maximum distance under greedy nearest matching of every
/// eigenvalue of `a` to a distinct eigenvalue of `b` (sizes must agree).
inline double spectrum_match_distance(const Spectrum& a, const Spectrum& b) {
    require(a.size() == b.size(), ErrorKind::dimension_mismatch, "spectra differ in size");
    if (a.size() == 0) return 0.0;
    return compare_spectra(b, a, a.size()).leading_hausdorff;
}

/// Mean kink |d_b - (d_{b-1} + d_{b+1}) / 2| at the q_w-tile boundaries b,
/// with d_i = y_i - y_{i-1}, divided by the mean RMS amplitude of the field.
/// Smooth fields give small values; independently evolving tiles that drift
/// apart develop kinks at their edges. Averaged over all snapshots.
inline double boundary_jump_statistic(const Trajectory& traj, std::size_t window_width, long anchor = 0) {
    const std::size_t n = traj.grid_size();
    require(window_width >= 1 && n % window_width == 0 && window_width < n, ErrorKind::precondition,
            "boundary statistic needs 1 <= q_w < N with q_w dividing N");
    require(traj.num_snapshots() >= 1, ErrorKind::empty_data, "boundary statistic needs snapshots");
    double kink = 0.0, amp = 0.0;
    std::size_t nk = 0;
    for (std::size_t k = 0; k < traj.num_snapshots(); ++k) {
        const auto col = traj.data.col(static_cast<Eigen::Index>(k));
        auto d = [&](long i) {
            return col(static_cast<Eigen::Index>(wrap_index(i, n))) - col(static_cast<Eigen::Index>(wrap_index(i - 1, n)));
        };
        amp += col.norm() / std::sqrt(static_cast<double>(n));
        for (std::size_t b = 0; b < n; b += window_width) {
            const long i = anchor + static_cast<long>(b);
            kink += std::abs(d(i) - 0.5 * (d(i - 1) + d(i + 1)));
            ++nk;
        }
    }
    kink /= static_cast<double>(nk);
    amp /= static_cast<double>(traj.num_snapshots());
    return amp > 0.0 ? kink / amp : (kink > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
}

/// Boundary statistic of a prediction relative to that of the reference
/// trajectory over the same snapshots. Values well above one signal
/// decoherence between tiles.
inline double decoherence_ratio(const Trajectory& truth, const Trajectory& pred, std::size_t window_width,
                                long anchor = 0) {
    const std::size_t s = std::min(truth.num_snapshots(), pred.num_snapshots());
    require(s >= 1, ErrorKind::empty_data, "decoherence ratio needs snapshots");
    const double ref = boundary_jump_statistic(truth.slice(0, s), window_width, anchor);
    const double val = boundary_jump_statistic(pred.slice(0, s), window_width, anchor);
    require(ref > 0.0, ErrorKind::degenerate_data, "reference trajectory has no boundary structure");
    return val / ref;
}

}  // namespace koopeq
