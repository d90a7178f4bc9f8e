#pragma once

#include "koopeq/dictionary.hpp"
#include "koopeq/error.hpp"
#include "koopeq/grid.hpp"
#include "koopeq/lstsq.hpp"
#include "koopeq/observation.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

namespace koopeq {

enum class ModelKind { global, local, tiled, dmdc };

inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::global: return "global";
    case ModelKind::local: return "local";
    case ModelKind::tiled: return "tiled";
    case ModelKind::dmdc: return "dmdc";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "global") return ModelKind::global;
    if (s == "local") return ModelKind::local;
    if (s == "tiled") return ModelKind::tiled;
    if (s == "dmdc") return ModelKind::dmdc;
    throw Error(ErrorKind::config, "unknown model kind '" + s + "'");
}

/// A fitted Koopman matrix together with how its coordinates were measured.
/// For tiled models K is block diagonal and `dictionary`/`obs_map` describe one block.
struct KoopmanModel {
    Eigen::MatrixXd K;
    Dictionary dictionary;
    ObservationMap obs_map;
    double tau = 1.0;
    ModelKind kind = ModelKind::global;
    double rcond = kDefaultRcond;
    std::size_t grid_size = 0;

    std::size_t block_dim() const noexcept { return dictionary.lifted_dim(); }
    std::size_t num_blocks() const noexcept {
        return kind == ModelKind::tiled ? static_cast<std::size_t>(K.rows()) / block_dim() : 1;
    }

    /// The per-window matrix: K itself, or the first diagonal block when tiled.
    Eigen::MatrixXd block() const {
        const auto l = static_cast<Eigen::Index>(block_dim());
        return kind == ModelKind::tiled ? Eigen::MatrixXd(K.topLeftCorner(l, l)) : K;
    }
};

/// Local matrix with neighbour inputs:
/// Psi(z') ~ K_hat Psi(z) + B_l u_left + B_r u_right.
struct CoupledLocalModel {
    Eigen::MatrixXd K_hat;
    Eigen::MatrixXd B_l;
    Eigen::MatrixXd B_r;
    Dictionary dictionary;
    ObservationMap obs_map;
    double tau = 1.0;
    double rcond = kDefaultRcond;
    std::size_t grid_size = 0;
};

/// Minimum-norm solution of min_K sum ||Psi(z'_i) - K Psi(z_i)||^2.
inline Eigen::MatrixXd edmd_fit(const Eigen::MatrixXd& z, const Eigen::MatrixXd& z_next, const Dictionary& dict,
                                double rcond = kDefaultRcond) {
    require(z.cols() >= 1, ErrorKind::empty_data, "EDMD needs at least one snapshot pair");
    require(z.rows() == z_next.rows() && z.cols() == z_next.cols(), ErrorKind::dimension_mismatch,
            "Z and Z' must have the same shape");
    const Eigen::MatrixXd x = dict.lift_columns(z);
    const Eigen::MatrixXd y = dict.lift_columns(z_next);
    require(x.cwiseAbs().maxCoeff() > 0.0, ErrorKind::degenerate_data, "lifted data is identically zero");
    return solve_min_norm(x, y, rcond).coefficients;
}

/// Column-wise residual Psi(Z') - K Psi(Z).
inline Eigen::MatrixXd edmd_residual(const Eigen::MatrixXd& K, const Eigen::MatrixXd& z, const Eigen::MatrixXd& z_next,
                                     const Dictionary& dict) {
    return dict.lift_columns(z_next) - K * dict.lift_columns(z);
}

inline KoopmanModel fit_from_dataset(const EmbeddedDataset& ds, const Dictionary& dict, ModelKind kind,
                                     std::size_t grid_size, double rcond = kDefaultRcond) {
    KoopmanModel model;
    model.dictionary = dict.with_input_dim(ds.dim());
    model.K = edmd_fit(ds.inputs, ds.outputs, model.dictionary, rcond);
    model.obs_map = ds.source_map;
    model.tau = ds.tau;
    model.kind = kind;
    model.rcond = rcond;
    model.grid_size = grid_size;
    return model;
}

/// DMD/EDMD on the full-state observable (optionally delay embedded).
inline KoopmanModel fit_global(const Trajectory& traj, const Dictionary& dict, std::size_t delays = 1,
                               double rcond = kDefaultRcond) {
    const auto map = ObservationMap::full_state(traj.grid_size(), delays);
    return fit_from_dataset(build_dataset(traj, map), dict, ModelKind::global, traj.grid_size(), rcond);
}

/// Local model on a q_w-site window. With `pool_shifts`, windows at every
/// anchor contribute to one shared regression.
inline KoopmanModel fit_local(const Trajectory& traj, const ObservationMap& map, const Dictionary& dict, bool pool_shifts,
                              double rcond = kDefaultRcond) {
    map.validate(traj.grid_size());
    const EmbeddedDataset ds = pool_shifts ? build_pooled_dataset(traj, map) : build_dataset(traj, map);
    KoopmanModel model = fit_from_dataset(ds, dict, ModelKind::local, traj.grid_size(), rcond);
    model.obs_map = map;
    return model;
}

/// Block-diagonal global matrix with N / q_w copies of the local block.
inline KoopmanModel tile_global(const KoopmanModel& local, std::size_t n) {
    require(local.kind == ModelKind::local, ErrorKind::precondition, "tile_global expects a local model");
    const std::size_t qw = local.obs_map.window_width;
    require(local.obs_map.stride == 1, ErrorKind::precondition, "tiling requires stride-1 windows");
    require(qw >= 1 && n % qw == 0, ErrorKind::precondition,
            "window width " + std::to_string(qw) + " does not divide N = " + std::to_string(n));
    const std::size_t blocks = n / qw;
    const auto l = static_cast<Eigen::Index>(local.block_dim());
    KoopmanModel tiled = local;
    tiled.kind = ModelKind::tiled;
    tiled.grid_size = n;
    tiled.K = Eigen::MatrixXd::Zero(l * static_cast<Eigen::Index>(blocks), l * static_cast<Eigen::Index>(blocks));
    for (std::size_t b = 0; b < blocks; ++b) tiled.K.block(static_cast<Eigen::Index>(b) * l, static_cast<Eigen::Index>(b) * l, l, l) = local.K;
    return tiled;
}

/// Regression over [Psi(z); u_left; u_right], split into K_hat, B_l, B_r.
inline CoupledLocalModel fit_dmdc_from_dataset(const EmbeddedDataset& ds, const Dictionary& dict, std::size_t grid_size,
                                               double rcond = kDefaultRcond) {
    require(ds.control.rows() > 0, ErrorKind::precondition, "dataset carries no neighbour inputs");
    CoupledLocalModel model;
    model.dictionary = dict.with_input_dim(ds.dim());
    const Eigen::MatrixXd psi = model.dictionary.lift_columns(ds.inputs);
    const Eigen::MatrixXd psi_next = model.dictionary.lift_columns(ds.outputs);
    Eigen::MatrixXd regressor(psi.rows() + ds.control.rows(), psi.cols());
    regressor << psi, ds.control;
    const Eigen::MatrixXd g = solve_min_norm(regressor, psi_next, rcond).coefficients;
    const Eigen::Index l = psi.rows();
    const Eigen::Index qd = ds.control.rows() / 2;
    model.K_hat = g.leftCols(l);
    model.B_l = g.middleCols(l, qd);
    model.B_r = g.rightCols(qd);
    model.obs_map = ds.source_map;
    model.tau = ds.tau;
    model.rcond = rcond;
    model.grid_size = grid_size;
    return model;
}

inline CoupledLocalModel fit_dmdc_local(const Trajectory& traj, const ObservationMap& map, const Dictionary& dict,
                                        bool pool_shifts, double rcond = kDefaultRcond) {
    map.validate(traj.grid_size());
    const EmbeddedDataset ds = pool_shifts ? build_pooled_control_dataset(traj, map) : build_control_dataset(traj, map);
    CoupledLocalModel model = fit_dmdc_from_dataset(ds, dict, traj.grid_size(), rcond);
    model.obs_map = map;
    return model;
}

/// Eigenvalues ordered by descending modulus, ties by descending argument.
struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;
    ModelKind source = ModelKind::global;

    std::size_t size() const noexcept { return eigenvalues.size(); }
    const std::complex<double>& operator[](std::size_t i) const { return eigenvalues[i]; }
};

/// Moduli closer than this count as equal for ordering purposes.
inline constexpr double kModulusTieResolution = 1e-10;

inline void sort_spectrum(std::vector<std::complex<double>>& ev) {
    auto key = [](const std::complex<double>& z) { return std::llround(std::abs(z) / kModulusTieResolution); };
    std::sort(ev.begin(), ev.end(), [&](const auto& a, const auto& b) {
        const auto ka = key(a);
        const auto kb = key(b);
        if (ka != kb) return ka > kb;
        return std::arg(a) > std::arg(b);
    });
}

inline Spectrum spectrum_of(const Eigen::MatrixXd& k, ModelKind source) {
    require(k.rows() == k.cols(), ErrorKind::dimension_mismatch, "spectrum needs a square matrix");
    require(k.allFinite(), ErrorKind::invalid_input, "matrix has non-finite entries");
    Spectrum s;
    s.source = source;
    if (k.size() == 0) return s;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(k, false);
    require(solver.info() == Eigen::Success, ErrorKind::degenerate_data, "eigenvalue iteration did not converge");
    const auto& ev = solver.eigenvalues();
    s.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    sort_spectrum(s.eigenvalues);
    return s;
}

inline Spectrum spectrum(const KoopmanModel& model) { return spectrum_of(model.K, model.kind); }
inline Spectrum spectrum(const CoupledLocalModel& model) { return spectrum_of(model.K_hat, ModelKind::dmdc); }

}  // namespace koopeq
