#pragma once

#include "koopeq/error.hpp"
#include "koopeq/grid.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace koopeq {

using cplx = std::complex<double>;
using Spectrum1d = std::vector<cplx>;

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
    // Eigen's FFT caches plans internally; one engine per thread keeps calls reentrant.
    thread_local Eigen::FFT<double> engine;
    return engine;
}

/// Unnormalized DFT: Y_k = sum_j y_j e^{-2 pi i jk / n}.
inline Spectrum1d forward(std::span<const double> y) {
    Spectrum1d in(y.begin(), y.end());
    Spectrum1d out(y.size());
    fft_engine().fwd(out.data(), in.data(), static_cast<Eigen::Index>(y.size()));
    return out;
}

inline Spectrum1d forward(const Spectrum1d& y) {
    Spectrum1d out(y.size());
    fft_engine().fwd(out.data(), y.data(), static_cast<Eigen::Index>(y.size()));
    return out;
}

/// Inverse of `forward` (includes the 1/n factor).
inline Spectrum1d inverse(const Spectrum1d& spec) {
    Spectrum1d out(spec.size());
    fft_engine().inv(out.data(), spec.data(), static_cast<Eigen::Index>(spec.size()));
    return out;
}

inline std::vector<double> inverse_real(const Spectrum1d& spec) {
    const Spectrum1d c = inverse(spec);
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
    return out;
}

/// Signed integer mode index for DFT slot j: 0..n/2 then -(n/2-1)..-1.
inline long mode_index(std::size_t j, std::size_t n) {
    const auto jj = static_cast<long>(j);
    const auto nn = static_cast<long>(n);
    return jj <= nn / 2 ? jj : jj - nn;
}

}  // namespace detail

/// Angular wavenumbers 2*pi*k/L in DFT slot order. The Nyquist slot carries +n/2.
inline std::vector<double> wavenumbers(std::size_t n, double domain_length) {
    std::vector<double> k(n);
    const double base = 2.0 * std::numbers::pi / domain_length;
    for (std::size_t j = 0; j < n; ++j) k[j] = base * static_cast<double>(detail::mode_index(j, n));
    return k;
}

/// Spectral derivative of the given order. The Nyquist mode is dropped for odd
/// orders so that the result stays real.
inline GridField spectral_derivative(const GridField& y, int order) {
    y.validate();
    require(order >= 0, ErrorKind::invalid_input, "derivative order must be non-negative");
    const std::size_t n = y.size();
    const auto k = wavenumbers(n, y.domain_length());
    Spectrum1d spec = detail::forward(y.values());
    const cplx ik_unit(0.0, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (order % 2 == 1 && j == n / 2) {
            spec[j] = 0.0;
            continue;
        }
        spec[j] *= std::pow(ik_unit * k[j], order);
    }
    return GridField(detail::inverse_real(spec), y.domain_length());
}

namespace detail {

/// Fourier coefficients of -(mu/2) d/dx (y^2), with the product formed on a
/// 3/2-padded grid so that no aliasing enters the retained modes.
inline Spectrum1d ks_nonlinear(const Spectrum1d& y_hat, const std::vector<double>& k, double mu) {
    const std::size_t n = y_hat.size();
    const std::size_t m = 3 * n / 2;
    Spectrum1d padded(m, cplx(0.0));
    for (std::size_t j = 0; j < n / 2; ++j) padded[j] = y_hat[j];
    for (std::size_t j = n / 2 + 1; j < n; ++j) padded[m - n + j] = y_hat[j];
    Spectrum1d fine = inverse(padded);
    const double up = static_cast<double>(m) / static_cast<double>(n);
    for (auto& v : fine) {
        const double r = v.real() * up;
        v = r * r;
    }
    Spectrum1d sq = forward(fine);
    const double down = static_cast<double>(n) / static_cast<double>(m);
    Spectrum1d out(n, cplx(0.0));
    const cplx i_unit(0.0, 1.0);
    for (std::size_t j = 0; j < n / 2; ++j) out[j] = sq[j] * down;
    for (std::size_t j = n / 2 + 1; j < n; ++j) out[j] = sq[m - n + j] * down;
    for (std::size_t j = 0; j < n; ++j) out[j] *= -0.5 * mu * i_unit * k[j];
    out[n / 2] = 0.0;
    return out;
}

/// Linear symbol of y_t = -4 y_xxxx - mu y_xx.
inline std::vector<double> ks_linear_symbol(const std::vector<double>& k, double mu) {
    std::vector<double> lin(k.size());
    for (std::size_t j = 0; j < k.size(); ++j) {
        const double k2 = k[j] * k[j];
        lin[j] = -4.0 * k2 * k2 + mu * k2;
    }
    return lin;
}

}  // namespace detail

/// Right-hand side of y_t = -4 y_xxxx - mu (y_xx + y y_x) on the periodic grid.
inline GridField ks_rhs(const GridField& y, double mu) {
    y.validate();
    require(std::isfinite(mu), ErrorKind::invalid_input, "mu must be finite");
    const std::size_t n = y.size();
    const auto k = wavenumbers(n, y.domain_length());
    const auto lin = detail::ks_linear_symbol(k, mu);
    const Spectrum1d y_hat = detail::forward(y.values());
    Spectrum1d rhs = detail::ks_nonlinear(y_hat, k, mu);
    for (std::size_t j = 0; j < n; ++j) rhs[j] += lin[j] * y_hat[j];
    return GridField(detail::inverse_real(rhs), y.domain_length());
}

/// Exact periodic solution of y_t + c y_x = 0 after time t, via a phase shift of
/// every Fourier mode. The Nyquist mode keeps only its real (cosine) part.
inline GridField advect_exact(const GridField& y0, double c, double t) {
    y0.validate();
    require(std::isfinite(c) && std::isfinite(t), ErrorKind::invalid_input, "c and t must be finite");
    const std::size_t n = y0.size();
    const auto k = wavenumbers(n, y0.domain_length());
    Spectrum1d spec = detail::forward(y0.values());
    for (std::size_t j = 0; j < n; ++j) {
        const double phase = -k[j] * c * t;
        if (j == n / 2)
            spec[j] *= std::cos(phase);
        else
            spec[j] *= std::polar(1.0, phase);
    }
    return GridField(detail::inverse_real(spec), y0.domain_length());
}

/// Uniform double in [0, 1) from the top 53 bits; portable across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Sum of cosines over modes 1..4 with amplitudes in [-0.6, 0.6] and random phases.
inline GridField random_smooth_field(std::size_t n, double domain_length, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double amp[4];
    double phase[4];
    for (int m = 0; m < 4; ++m) {
        amp[m] = -0.6 + 1.2 * uniform01(rng);
        phase[m] = 2.0 * std::numbers::pi * uniform01(rng);
    }
    const double base = 2.0 * std::numbers::pi / domain_length;
    return GridField::sample(n, domain_length, [&](double x) {
        double v = 0.0;
        for (int m = 0; m < 4; ++m) v += amp[m] * std::cos(base * (m + 1) * x + phase[m]);
        return v;
    });
}

inline GridField named_profile(const std::string& name, std::size_t n, double domain_length) {
    const double base = 2.0 * std::numbers::pi / domain_length;
    if (name == "zero") return GridField::zeros(n, domain_length);
    if (name == "sin") return GridField::sample(n, domain_length, [&](double x) { return std::sin(base * x); });
    if (name == "cos") return GridField::sample(n, domain_length, [&](double x) { return std::cos(base * x); });
    throw Error(ErrorKind::config, "unknown initial profile '" + name + "'");
}

inline GridField initial_field(const SimConfig& cfg) {
    if (cfg.initial_condition == InitialCondition::random_smooth)
        return random_smooth_field(cfg.n, cfg.domain_length, cfg.seed);
    return named_profile(cfg.profile, cfg.n, cfg.domain_length);
}

/// Fourth-order exponential time differencing (Cox-Matthews) for the KS equation
/// with contour-integral evaluation of the phi-functions.
class EtdRk4Stepper {
public:
    EtdRk4Stepper(std::size_t n, double domain_length, double mu, double dt)
        : n_(n), mu_(mu), k_(wavenumbers(n, domain_length)) {
        const auto lin = detail::ks_linear_symbol(k_, mu);
        e_.resize(n);
        e2_.resize(n);
        q_.resize(n);
        f1_.resize(n);
        f2_.resize(n);
        f3_.resize(n);
        constexpr int kContourPoints = 32;
        for (std::size_t j = 0; j < n; ++j) {
            const double hl = dt * lin[j];
            e_[j] = std::exp(hl);
            e2_[j] = std::exp(hl / 2.0);
            cplx q(0.0), a(0.0), b(0.0), c(0.0);
            for (int r = 0; r < kContourPoints; ++r) {
                const cplx z = hl + std::polar(1.0, std::numbers::pi * (r + 0.5) / kContourPoints);
                const cplx ez = std::exp(z);
                const cplx z3 = z * z * z;
                q += (std::exp(z / 2.0) - 1.0) / z;
                a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                b += (2.0 + z + ez * (-2.0 + z)) / z3;
                c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            q_[j] = dt * (q / double(kContourPoints)).real();
            f1_[j] = dt * (a / double(kContourPoints)).real();
            f2_[j] = dt * (b / double(kContourPoints)).real();
            f3_[j] = dt * (c / double(kContourPoints)).real();
        }
    }

    /// Advances spectral state v by one step in place.
    void step(Spectrum1d& v) const {
        const Spectrum1d nv = detail::ks_nonlinear(v, k_, mu_);
        Spectrum1d a(n_), b(n_), c(n_);
        for (std::size_t j = 0; j < n_; ++j) a[j] = e2_[j] * v[j] + q_[j] * nv[j];
        const Spectrum1d na = detail::ks_nonlinear(a, k_, mu_);
        for (std::size_t j = 0; j < n_; ++j) b[j] = e2_[j] * v[j] + q_[j] * na[j];
        const Spectrum1d nb = detail::ks_nonlinear(b, k_, mu_);
        for (std::size_t j = 0; j < n_; ++j) c[j] = e2_[j] * a[j] + q_[j] * (2.0 * nb[j] - nv[j]);
        const Spectrum1d nc = detail::ks_nonlinear(c, k_, mu_);
        for (std::size_t j = 0; j < n_; ++j)
            v[j] = e_[j] * v[j] + nv[j] * f1_[j] + 2.0 * (na[j] + nb[j]) * f2_[j] + nc[j] * f3_[j];
        enforce_real(v);
    }

    /// Projects onto Hermitian-symmetric spectra. Without this, roundoff in the
    /// imaginary part of the field grows at the linear rate of the unstable
    /// modes, since the nonlinear term only ever sees the real part.
    static void enforce_real(Spectrum1d& v) {
        const std::size_t n = v.size();
        v[0] = v[0].real();
        for (std::size_t j = 1; j < n / 2; ++j) {
            const cplx avg = 0.5 * (v[j] + std::conj(v[n - j]));
            v[j] = avg;
            v[n - j] = std::conj(avg);
        }
        v[n / 2] = 0.0;
    }

private:
    std::size_t n_;
    double mu_;
    std::vector<double> k_;
    std::vector<double> e_, e2_, q_, f1_, f2_, f3_;
};

/// Integrates the KS equation from `y0`, discards `burn_in_steps` integrator
/// steps and then stores `num_snapshots + 1` samples, `steps_per_sample` apart.
inline Trajectory integrate_ks_from(const GridField& y0, double mu, double dt, long steps_per_sample,
                                    long burn_in_steps, std::size_t num_snapshots) {
    y0.validate();
    require(steps_per_sample >= 1 && burn_in_steps >= 0, ErrorKind::precondition, "invalid step counts");
    const std::size_t n = y0.size();
    const EtdRk4Stepper stepper(n, y0.domain_length(), mu, dt);
    Spectrum1d v = detail::forward(y0.values());
    // The Nyquist mode is not evolved consistently by a real-valued scheme.
    v[n / 2] = 0.0;

    long steps_taken = 0;
    auto advance = [&](long count) {
        for (long s = 0; s < count; ++s) {
            stepper.step(v);
            ++steps_taken;
            for (const cplx& c : v) {
                if (!std::isfinite(c.real()) || !std::isfinite(c.imag()) ||
                    std::abs(c) > kDivergenceThreshold * static_cast<double>(n)) {
                    const double t = dt * static_cast<double>(steps_taken);
                    throw DivergenceError("KS integration blew up at t=" + std::to_string(t), t);
                }
            }
        }
    };

    advance(burn_in_steps);
    Trajectory traj;
    traj.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(num_snapshots + 1));
    traj.domain_length = y0.domain_length();
    traj.tau = dt * static_cast<double>(steps_per_sample);
    traj.mu = mu;
    traj.dt = dt;
    traj.burn_in_steps = burn_in_steps;
    for (std::size_t s = 0; s <= num_snapshots; ++s) {
        if (s > 0) advance(steps_per_sample);
        const auto y = detail::inverse_real(v);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(y[i]) || std::abs(y[i]) > kDivergenceThreshold) {
                const double t = dt * static_cast<double>(steps_taken);
                throw DivergenceError("KS integration blew up at t=" + std::to_string(t), t);
            }
            traj.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = y[i];
        }
    }
    return traj;
}

inline Trajectory integrate_ks(const SimConfig& cfg) {
    cfg.validate();
    return integrate_ks_from(initial_field(cfg), cfg.mu, cfg.dt, cfg.steps_per_sample(), cfg.burn_in_steps(),
                             cfg.num_snapshots);
}

/// Samples the exact advection solution at times k * tau, k = 0..num_snapshots-1.
inline Trajectory advection_trajectory(const GridField& y0, double c, double tau, std::size_t num_snapshots) {
    std::vector<GridField> snaps;
    snaps.reserve(num_snapshots);
    for (std::size_t k = 0; k < num_snapshots; ++k) snaps.push_back(advect_exact(y0, c, tau * static_cast<double>(k)));
    return Trajectory::from_snapshots(snaps, tau);
}

}  // namespace koopeq
