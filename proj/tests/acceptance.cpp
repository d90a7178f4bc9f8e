// Acceptance run: one PASS/FAIL line per criterion. Exits 1 if any fails.

#include "koopeq/config.hpp"
#include "koopeq/experiment.hpp"
#include "koopeq/io.hpp"
#include "koopeq/manifest.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

using namespace koopeq;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = nd(rng);
    return m;
}

GridField random_field(std::size_t n, std::uint64_t seed, double l = kTwoPi) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v) x = nd(rng);
    return GridField(std::move(v), l);
}

std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(4) << v;
    return s.str();
}

ExperimentConfig preset(const std::string& name) {
    return load_config(fs::path(KOOPEQ_SOURCE_DIR) / "configs" / (name + ".json"));
}

// 1. DMD recovers a known stable linear map.
Outcome exact_recovery() {
    Eigen::MatrixXd a = random_matrix(8, 8, 2024);
    a *= 0.9 / a.eigenvalues().cwiseAbs().maxCoeff();
    // five trajectories of 20 steps from random initial states
    Eigen::MatrixXd z(8, 100), zn(8, 100);
    for (int r = 0; r < 5; ++r) {
        Eigen::VectorXd y = random_matrix(8, 1, 100 + static_cast<std::uint64_t>(r));
        for (int k = 0; k < 20; ++k) {
            z.col(r * 20 + k) = y;
            y = a * y;
            zn.col(r * 20 + k) = y;
        }
    }
    const double err = (edmd_fit(z, zn, Dictionary::identity(8)) - a).cwiseAbs().maxCoeff();
    return {err <= 1e-8, "max |K - A| = " + num(err)};
}

// 2. Global DMD of exact advection.
Outcome advection_spectrum() {
    const std::size_t n = 32;
    const double c = 1.0, tau = kTwoPi / static_cast<double>(n);
    const Trajectory t = advection_trajectory(random_field(n, 7), c, tau, 200);
    const KoopmanModel model = fit_global(t.slice(0, 100), Dictionary::identity(n));
    const Spectrum s = spectrum(model);
    double mod_err = 0.0;
    for (const auto& ev : s.eigenvalues) mod_err = std::max(mod_err, std::abs(std::abs(ev) - 1.0));
    Spectrum expect;
    for (long k = -static_cast<long>(n) / 2 + 1; k <= static_cast<long>(n) / 2; ++k)
        expect.eigenvalues.push_back(std::polar(1.0, -static_cast<double>(k) * c * tau));
    sort_spectrum(expect.eigenvalues);
    const double arg_err = spectrum_match_distance(s, expect);  // unit modulus: distance ~ angle
    const Trajectory pred = predict_rollout(model, t.slice(99, 1), 100, RolloutMode::plain);
    const double roll = rollout_error(t.slice(99, 101), pred).max_error();
    return {mod_err <= 1e-6 && arg_err <= 1e-6 && roll < 1e-6,
            "modulus err " + num(mod_err) + ", phase err " + num(arg_err) + ", rollout err " + num(roll)};
}

// 3. Discrete equivariance identities.
Outcome equivariance_suite() {
    double conv = 0.0, phase = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const GridField y = random_field(32, 5000 + seed);
        const std::vector<Kernel> kernels{DiracKernel{}, GaussianKernel{2.0}, CustomKernel{random_field(32, seed).vector()}};
        for (long g = 0; g < 32; ++g) {
            const GridField sy = shift_field(y, g);
            for (const auto& k : kernels) {
                const auto w = kernel_weights(k, 32, kTwoPi);
                for (long s = 0; s < 32; ++s) {
                    const double lhs = detail::convolve_site(sy.values(), w, y.dx(), static_cast<std::size_t>(s));
                    const double rhs = detail::convolve_site(y.values(), w, y.dx(), wrap_index(s - g, 32));
                    conv = std::max(conv, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
                }
            }
            for (long k = -15; k < 16; ++k) {
                const auto lhs = fourier_observe(sy, k);
                const auto rhs = std::polar(1.0, -kTwoPi * static_cast<double>(k) / kTwoPi * static_cast<double>(g) * y.dx()) *
                                 fourier_observe(y, k);
                phase = std::max(phase, std::abs(lhs - rhs));
            }
        }
    }
    return {conv <= 1e-12 && phase <= 1e-10, "convolution err " + num(conv) + ", phase-law err " + num(phase)};
}

// 4. Similar matrices share their spectrum.
Outcome conjugacy() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Eigen::MatrixXd a = random_matrix(6, 6, 300 + seed);
        const Eigen::MatrixXd t = random_matrix(6, 6, 400 + seed);
        const double d = spectrum_match_distance(spectrum_of(a, ModelKind::global),
                                                 spectrum_of(t * a * t.inverse(), ModelKind::global));
        worst = std::max(worst, d);
    }
    return {worst <= 1e-8, "worst multiset distance " + num(worst)};
}

// 5. KS mu = 15 reproduction.
Outcome ks_mu15() {
    const ExperimentConfig g = preset("mu15_global");
    const Trajectory traj = integrate_ks(g.sim);
    std::ostringstream d;
    bool ok = true;

    // (a) leading eigenvalue against the traveling-wave frequency
    const TrainTestSplit split = split_train_test(traj, 1, g.fit.train_fraction);
    const KoopmanModel global = fit_global(split.train, g.dictionary(1));
    const Spectrum s = spectrum(global);
    const double modulus = std::abs(s[0]);
    const WaveFrequency wave = traveling_wave_frequency(traj);
    const double rel = std::abs(std::abs(std::arg(s[0])) - std::abs(wave.phase_per_step)) / std::abs(wave.phase_per_step);
    const bool a = modulus >= 0.98 && modulus <= 1.001 && rel <= 0.05;
    d << "(a) " << (a ? "ok" : "FAIL") << " |lambda|=" << std::setprecision(10) << modulus << std::setprecision(4)
      << " arg mismatch " << num(100 * rel) << "%; ";
    ok &= a;

    // (b) one-step error over window widths
    const ExperimentConfig sw = preset("mu15_sweep");
    const auto rows = run_sweep(sw, traj);
    bool mono = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        mono &= rows[i].ok;
        if (i > 0) mono &= rows[i].one_step_error <= rows[i - 1].one_step_error;
    }
    double e1 = 0.0, e4 = 0.0;
    for (const auto& r : rows) {
        if (r.window_width == 1) e1 = r.one_step_error;
        if (r.window_width == 4) e4 = r.one_step_error;
    }
    const bool b = mono && e4 < 0.25 * e1;
    d << "(b) " << (b ? "ok" : "FAIL") << " errors";
    for (const auto& r : rows) d << ' ' << num(r.one_step_error);
    d << (mono ? "" : " (not non-increasing)") << ", e4/e1=" << num(e4 / e1) << "; ";
    ok &= b;

    // (c) tile decoherence
    d << "(c) ";
    bool c = true;
    for (const auto& [name, expect] : {std::pair{"mu15_tiled_q4", true}, {"mu15_tiled_q8", true}, {"mu15_tiled_q16", false}}) {
        const ExperimentConfig cfg = preset(name);
        const AnyModel model = fit_configured(cfg, split.train);
        const PredictionRun pr = run_prediction(model, split, cfg.rollout.n_steps, cfg.rollout.mode);
        const double ratio = pr.decoherence.value_or(std::numeric_limits<double>::quiet_NaN());
        c &= (ratio >= kDecoherenceFactor) == expect;
        d << "q" << cfg.obs.window_width << "=" << num(ratio) << ' ';
    }
    d << (c ? "ok" : "FAIL");
    ok &= c;
    return {ok, d.str()};
}

// 6. DMDc with q_w = 1 on mu = 15.
Outcome ks_mu15_dmdc() {
    const ExperimentConfig cfg = preset("mu15_dmdc_q1");
    const Trajectory traj = integrate_ks(cfg.sim);
    const TrainTestSplit split = split_train_test(traj, cfg.obs.delays, cfg.fit.train_fraction);
    const AnyModel model = fit_configured(cfg, split.train);
    const PredictionRun pr = run_prediction(model, split, cfg.rollout.n_steps, RolloutMode::dmdc);
    const bool bounded = !pr.rollout.diverged_at;
    const double err = pr.report.max_error();
    std::string d = "max rollout error " + num(err) + " over " + std::to_string(pr.report.step_errors.size() - 1) + " steps";
    if (!bounded) d += ", diverged at step " + std::to_string(*pr.rollout.diverged_at);
    return {bounded && err < 0.1, d};
}

// 7. mu = 18 with 50 delays.
Outcome ks_mu18() {
    const ExperimentConfig sw = preset("mu18_sweep");
    const Trajectory traj = integrate_ks(sw.sim);
    std::ostringstream d;
    bool ok = true;
    const auto rows = run_sweep(sw, traj);
    bool dec = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        dec &= rows[i].ok;
        if (i > 0) dec &= rows[i].one_step_error < rows[i - 1].one_step_error;
    }
    d << "one-step errors";
    for (const auto& r : rows) d << ' ' << num(r.one_step_error);
    d << (dec ? " decreasing" : " NOT decreasing") << "; ";
    ok &= dec;
    for (const char* name : {"mu18_tiled_q8", "mu18_dmdc_q1"}) {
        const ExperimentConfig cfg = preset(name);
        const TrainTestSplit split = split_train_test(traj, cfg.obs.delays, cfg.fit.train_fraction);
        const AnyModel model = fit_configured(cfg, split.train);
        const PredictionRun pr = run_prediction(model, split, cfg.rollout.n_steps, cfg.rollout.mode);
        const bool bounded = !pr.rollout.diverged_at && pr.rollout.predicted.num_snapshots() == cfg.rollout.n_steps + 1;
        d << name << (bounded ? " bounded" : " diverged at step " + std::to_string(pr.rollout.diverged_at.value_or(0)))
          << "; ";
        ok &= bounded;
    }
    return {ok, d.str()};
}

// 8. Embedding utilities.
Outcome embedding() {
    struct Case {
        double d, sigma;
        long q;
    };
    const Case table[] = {{0.0, 0.0, 1}, {0.5, 0.0, 2}, {1.0, 0.0, 3}, {1.0, 0.5, 4}, {2.0, 0.0, 5},
                          {2.06, 0.0, 5}, {2.3, 0.1, 6}, {3.0, 1.0, 13}, {0.25, 0.0, 1}, {10.0, 0.25, 26}};
    bool table_ok = true;
    for (const auto& c : table) table_ok &= min_embedding_dim(c.d, c.sigma) == c.q;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> line, square;
    for (int i = 0; i < 10000; ++i) {
        const double s = u(rng);
        line.push_back({s, 0.5 * s + 0.1, -0.3 * s});
        square.push_back({u(rng), u(rng)});
    }
    const double d1 = box_counting_dim(line, log_spaced_scales(0.1, 0.001, 8));
    const double d2 = box_counting_dim(square, log_spaced_scales(0.2, 0.02, 8));
    const bool ok = table_ok && std::abs(d1 - 1.0) <= 0.1 && std::abs(d2 - 2.0) <= 0.2;
    return {ok, std::string("table ") + (table_ok ? "ok" : "MISMATCH") + ", line " + num(d1) + ", square " + num(d2)};
}

// 9. Serialization, determinism and manifests.
Outcome infrastructure() {
    const fs::path dir = fs::temp_directory_path() / "koopeq_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto same = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() &&
               (a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
    };
    ExperimentConfig cfg = preset("mu15_tiled_q8");
    cfg.sim.num_snapshots = 200;
    const Trajectory traj = integrate_ks(cfg.sim);
    ObservationMap m = cfg.obs.map();
    m.delays = 2;
    const EmbeddedDataset ds = build_pooled_control_dataset(traj, m);
    const AnyModel tiled = fit_configured(cfg, traj);
    const CoupledLocalModel coupled = fit_dmdc_local(traj, m, Dictionary::identity(1), true);

    save(traj, dir / "t.bin");
    save(ds, dir / "d.bin");
    save(std::get<KoopmanModel>(tiled), dir / "m.bin");
    save(coupled, dir / "c.bin");
    const Trajectory t2 = load_trajectory(dir / "t.bin");
    const EmbeddedDataset d2 = load_dataset(dir / "d.bin");
    const KoopmanModel m2 = load_model(dir / "m.bin");
    const CoupledLocalModel c2 = load_coupled_model(dir / "c.bin");
    const bool roundtrip = same(t2.data, traj.data) && same(d2.inputs, ds.inputs) && same(d2.outputs, ds.outputs) &&
                           same(d2.control, ds.control) && same(m2.K, std::get<KoopmanModel>(tiled).K) &&
                           same(c2.K_hat, coupled.K_hat) && same(c2.B_l, coupled.B_l) && same(c2.B_r, coupled.B_r);

    auto csv_bytes = [&](std::uint64_t seed) {
        ExperimentConfig c = cfg;
        c.sim.seed = seed;
        const Trajectory t = integrate_ks(c.sim);
        std::ostringstream out;
        write_spectrum_csv(out, model_spectrum(fit_configured(c, t)));
        const TrainTestSplit split = split_train_test(t, 1);
        write_error_csv(out, run_prediction(fit_configured(c, split.train), split, 20, RolloutMode::plain).report);
        return out.str();
    };
    const bool deterministic = csv_bytes(3) == csv_bytes(3) && csv_bytes(3) != csv_bytes(4);

    RunManifest manifest;
    manifest.command = "acceptance";
    manifest.config_hash = config_hash(cfg);
    for (const char* f : {"t.bin", "d.bin", "m.bin", "c.bin"}) manifest.add(dir, dir / f);
    manifest.save(dir / "manifest.json");
    const auto loaded = RunManifest::load(dir / "manifest.json");
    bool manifests = loaded.verify(dir).empty() && loaded.files.size() == 4;
    {
        std::ofstream(dir / "m.bin", std::ios::app) << 'x';
    }
    manifests &= loaded.verify(dir) == std::vector<std::string>{"m.bin"};
    fs::remove_all(dir);
    return {roundtrip && deterministic && manifests, std::string("binary round-trips ") + (roundtrip ? "ok" : "FAIL") +
                                                         ", byte-identical CSVs " + (deterministic ? "ok" : "FAIL") +
                                                         ", manifest checks " + (manifests ? "ok" : "FAIL")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {1, "exact recovery of a linear map", 1.0, exact_recovery},
        {2, "advection spectrum and rollout", 5.0, advection_spectrum},
        {3, "discrete equivariance identities", 5.0, equivariance_suite},
        {4, "spectral conjugacy", 5.0, conjugacy},
        {5, "KS mu=15 global/local/tiled", 300.0, ks_mu15},
        {6, "KS mu=15 DMDc q_w=1", 60.0, ks_mu15_dmdc},
        {7, "KS mu=18 with 50 delays", 600.0, ks_mu18},
        {8, "embedding utilities", 30.0, embedding},
        {9, "serialization, determinism, manifests", 60.0, infrastructure},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
                  << std::fixed << std::setprecision(2) << secs << " s / " << c.budget_s << " s"
                  << (in_time ? "" : ", over budget") << "]" << std::defaultfloat << std::endl;
    }
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << 9 - failed << "/9" << std::endl;
    return failed ? 1 : 0;
}
