// Command-line driver: simulate, train, predict, spectrum, sweep.

#include "koopeq/config.hpp"
#include "koopeq/experiment.hpp"
#include "koopeq/image.hpp"
#include "koopeq/io.hpp"
#include "koopeq/manifest.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace koopeq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;
constexpr int kExitOther = 1;

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::divergence: return kExitDivergence;
    case ErrorKind::io: return kExitIo;
    default: return kExitConfig;  // configuration values violate a precondition
    }
}

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

/// Output directory plus the manifest that lists everything written there.
class Run {
public:
    Run(const std::string& command, const ExperimentConfig& cfg) : dir_(cfg.output_dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        require(!ec && fs::is_directory(dir_), ErrorKind::io, "cannot create output directory '" + dir_.string() + "'");
        manifest_.command = command;
        manifest_.config_hash = config_hash(cfg);
        manifest_.seed = cfg.sim.seed;
        manifest_.extra["config"] = to_json(cfg);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }
    void add(const fs::path& p) { manifest_.add(dir_, p); }
    nlohmann::json& extra() { return manifest_.extra; }

    void finish() { manifest_.save(dir_ / "manifest.json"); }

private:
    fs::path dir_;
    RunManifest manifest_;
};

ExperimentConfig resolve(const Options& o) {
    ExperimentConfig cfg = load_config(o.config);
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.seed) cfg.sim.seed = *o.seed;
    return cfg;
}

void save_trajectory(Run& run, const Trajectory& t, const std::string& stem) {
    for (const char* ext : {".txt", ".bin"}) {
        const auto p = run.path(stem + ext);
        save(t, p);
        run.add(p);
    }
}

void save_heatmap(Run& run, const ExperimentConfig& cfg, const Eigen::MatrixXd& data, const std::string& name) {
    if (!cfg.write_png || data.cols() == 0) return;
    Eigen::Index cols = data.cols();
    if (cfg.plot.max_snapshots > 0) cols = std::min<Eigen::Index>(cols, static_cast<Eigen::Index>(cfg.plot.max_snapshots));
    const auto p = run.path(name);
    write_png(heatmap(data.leftCols(cols)), p);
    run.add(p);
}

template <class Fn>
void write_csv(Run& run, const std::string& name, Fn&& fn) {
    const auto p = run.path(name);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + p.string() + "' for writing");
    fn(out);
    out.flush();
    require(static_cast<bool>(out), ErrorKind::io, "write to '" + p.string() + "' failed");
    run.add(p);
}

void write_json(Run& run, const std::string& name, const nlohmann::json& j) {
    const auto p = run.path(name);
    std::ofstream out(p, std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + p.string() + "' for writing");
    out << j.dump(2) << '\n';
    out.flush();
    require(static_cast<bool>(out), ErrorKind::io, "write to '" + p.string() + "' failed");
    run.add(p);
}

void save_model(Run& run, const AnyModel& model) {
    for (const char* ext : {".txt", ".bin"}) {
        const auto p = run.path(std::string("model") + ext);
        std::visit([&](const auto& m) { save(m, p); }, model);
        run.add(p);
    }
}

nlohmann::json split_json(const TrainTestSplit& s) {
    return {{"train_snapshots", {0, s.train.num_snapshots()}},
            {"test_snapshots", {s.test_first_snapshot, s.test_first_snapshot + s.test.num_snapshots()}},
            {"train_pairs", s.train_pairs},
            {"test_pairs", s.test_pairs}};
}

AnyModel model_for(const ExperimentConfig& cfg, const TrainTestSplit& split, const Trajectory& traj) {
    if (cfg.input_model.empty()) return fit_configured(cfg, split.train);
    AnyModel m = load_any_model(cfg.input_model);
    check_compatible(m, traj);
    return m;
}

int cmd_simulate(const Options& o) {
    const ExperimentConfig cfg = resolve(o);
    Run run("simulate", cfg);
    const Trajectory traj = integrate_ks(cfg.sim);
    save_trajectory(run, traj, "trajectory");
    save_heatmap(run, cfg, traj.data, "trajectory.png");
    run.finish();
    std::cout << "simulated " << traj.num_snapshots() << " snapshots on N=" << traj.grid_size() << " -> "
              << cfg.output_dir << '\n';
    return kExitOk;
}

int cmd_train(const Options& o) {
    const ExperimentConfig cfg = resolve(o);
    Run run("train", cfg);
    const Trajectory traj = obtain_trajectory(cfg);
    const TrainTestSplit split = split_train_test(traj, cfg.obs.delays, cfg.fit.train_fraction);
    const AnyModel model = fit_configured(cfg, split.train);
    save_model(run, model);
    const Spectrum spec = model_spectrum(model);
    if (cfg.write_csv) write_csv(run, "spectrum.csv", [&](std::ostream& out) { write_spectrum_csv(out, spec); });
    const double err = test_one_step_error(model, split.test, cfg.fit.pool_shifts);
    run.extra()["split"] = split_json(split);
    run.extra()["one_step_error"] = detail::json_number(err);
    write_json(run, "metrics.json",
               {{"one_step_error", detail::json_number(err)},
                {"leading_modulus", spec.size() ? std::abs(spec[0]) : 0.0},
                {"split", split_json(split)},
                {"config", config_echo(cfg)}});
    run.finish();
    std::cout << "trained " << to_string(cfg.fit.model) << " model, one-step error " << format_double(err) << '\n';
    return kExitOk;
}

int cmd_predict(const Options& o) {
    const ExperimentConfig cfg = resolve(o);
    Run run("predict", cfg);
    const Trajectory traj = obtain_trajectory(cfg);
    const AnyModel probe = cfg.input_model.empty() ? AnyModel{} : load_any_model(cfg.input_model);
    const std::size_t qd = cfg.input_model.empty() ? cfg.obs.delays : model_delays(probe);
    const TrainTestSplit split = split_train_test(traj, qd, cfg.fit.train_fraction);
    const AnyModel model = model_for(cfg, split, traj);
    const RolloutMode mode = std::holds_alternative<CoupledLocalModel>(model) ? RolloutMode::dmdc : cfg.rollout.mode;
    PredictionRun pr = run_prediction(model, split, cfg.rollout.n_steps, mode);
    pr.report.one_step_error = test_one_step_error(model, split.test, cfg.fit.pool_shifts);
    pr.report.config = config_echo(cfg);
    pr.report.config["mode"] = to_string(mode);
    if (pr.decoherence) {
        pr.report.config["decoherence_ratio"] = format_double(*pr.decoherence);
        pr.report.config["decoherent"] = *pr.decoherence >= kDecoherenceFactor ? "true" : "false";
    }

    save_trajectory(run, pr.rollout.predicted, "prediction");
    if (cfg.write_csv)
        for (const auto& p : export_report(pr.report, run.path("error"))) run.add(p);

    // Heatmaps: truth and prediction share a window with `plot.history` truth
    // snapshots before the start state.
    const std::size_t hist = std::min(cfg.plot.history, pr.start_snapshot);
    const std::size_t len = std::min(pr.truth.num_snapshots(), pr.rollout.predicted.num_snapshots());
    const Eigen::MatrixXd before = traj.data.middleCols(static_cast<Eigen::Index>(pr.start_snapshot - hist),
                                                       static_cast<Eigen::Index>(hist));
    Eigen::MatrixXd truth(traj.data.rows(), static_cast<Eigen::Index>(hist + pr.truth.num_snapshots()));
    truth << before, pr.truth.data;
    Eigen::MatrixXd pred(traj.data.rows(), static_cast<Eigen::Index>(hist + pr.rollout.predicted.num_snapshots()));
    pred << before, pr.rollout.predicted.data;
    save_heatmap(run, cfg, truth, "truth.png");
    save_heatmap(run, cfg, pred, "prediction.png");
    if (len > 0)
        save_heatmap(run, cfg,
                     (pr.rollout.predicted.data.leftCols(static_cast<Eigen::Index>(len)) -
                      pr.truth.data.leftCols(static_cast<Eigen::Index>(len)))
                         .cwiseAbs(),
                     "abs_difference.png");
    if (cfg.write_png && !pr.report.step_errors.empty()) {
        const auto p = run.path("error.png");
        write_png(line_plot({pr.report.step_errors}), p);
        run.add(p);
    }
    run.extra()["split"] = split_json(split);
    run.extra()["start_snapshot"] = pr.start_snapshot;
    run.extra()["diverged_at"] = detail::json_optional(pr.rollout.diverged_at);
    run.finish();

    std::cout << "rollout " << to_string(mode) << ": " << pr.rollout.predicted.num_snapshots() - 1 << " steps, max error "
              << format_double(pr.report.max_error());
    if (pr.decoherence) std::cout << ", decoherence ratio " << format_double(*pr.decoherence);
    std::cout << '\n';
    if (pr.rollout.diverged_at) {
        std::cerr << "error: rollout diverged at step " << *pr.rollout.diverged_at << '\n';
        return kExitDivergence;
    }
    return kExitOk;
}

int cmd_spectrum(const Options& o) {
    const ExperimentConfig cfg = resolve(o);
    Run run("spectrum", cfg);
    const Trajectory traj = obtain_trajectory(cfg);
    const TrainTestSplit split = split_train_test(traj, cfg.obs.delays, cfg.fit.train_fraction);
    const AnyModel model = model_for(cfg, split, traj);
    const Spectrum spec = model_spectrum(model);
    if (cfg.write_csv) write_csv(run, "spectrum.csv", [&](std::ostream& out) { write_spectrum_csv(out, spec); });

    std::vector<std::complex<double>> reference;
    const bool is_global =
        std::holds_alternative<KoopmanModel>(model) && std::get<KoopmanModel>(model).kind == ModelKind::global;
    if (!is_global) {
        const Spectrum global = spectrum(fit_global(split.train, cfg.dictionary(1), model_delays(model), cfg.fit.rcond));
        const Spectrum local = block_spectrum(model);
        const std::size_t k = std::min({cfg.spectrum_k, global.size(), local.size()});
        const SpectrumComparison cmp = compare_spectra(global, local, k);
        if (cfg.write_csv)
            for (const auto& p : export_comparison(cmp, run.path("comparison"), config_echo(cfg))) run.add(p);
        if (cfg.write_csv)
            write_csv(run, "global_spectrum.csv", [&](std::ostream& out) { write_spectrum_csv(out, global); });
        reference = global.eigenvalues;
        run.extra()["leading_hausdorff"] = detail::json_number(cmp.leading_hausdorff);
        std::cout << "leading distance to global spectrum (k=" << k << "): " << format_double(cmp.leading_hausdorff)
                  << '\n';
    }
    if (cfg.write_png) {
        const auto p = run.path("spectrum.png");
        write_png(spectrum_plot(spec.eigenvalues, reference), p);
        run.add(p);
    }
    run.finish();
    if (spec.size()) std::cout << "leading eigenvalue modulus " << format_double(std::abs(spec[0])) << '\n';
    return kExitOk;
}

int cmd_sweep(const Options& o) {
    const ExperimentConfig cfg = resolve(o);
    require(!cfg.sweep.window_widths.empty() || !cfg.sweep.delays.empty(), ErrorKind::config,
            "sweep needs sweep.q_w and/or sweep.q_d");
    Run run("sweep", cfg);
    const Trajectory traj = obtain_trajectory(cfg);
    const auto rows = run_sweep(cfg, traj);
    write_csv(run, "sweep.csv", [&](std::ostream& out) {
        CsvWriter w(out);
        w.row({"q_w", "q_d", "one_step_error", "status", "message"});
        for (const auto& r : rows)
            w.row({std::to_string(r.window_width), std::to_string(r.delays),
                   r.ok ? format_double(r.one_step_error) : "", r.ok ? "ok" : to_string(r.failure), r.message});
    });
    if (cfg.write_png) {
        std::vector<double> x, y;
        for (const auto& r : rows)
            if (r.ok) {
                x.push_back(static_cast<double>(r.window_width));
                y.push_back(r.one_step_error);
            }
        if (!y.empty()) {
            const auto p = run.path("sweep.png");
            write_png(line_plot({y}, true, 600, 300, x), p);
            run.add(p);
        }
    }
    run.finish();
    std::size_t ok = 0;
    for (const auto& r : rows) {
        std::cout << "q_w=" << r.window_width << " q_d=" << r.delays << " : "
                  << (r.ok ? format_double(r.one_step_error) : "failed (" + r.message + ")") << '\n';
        ok += r.ok;
    }
    if (ok == 0) {
        std::cerr << "error: every sweep configuration failed\n";
        return exit_code(rows.front().failure);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman operator experiments on the Kuramoto-Sivashinsky equation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    Options opts;
    std::uint64_t seed = 0;
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const Options&);
    };
    const Sub subs[] = {{"simulate", "integrate the PDE and write the trajectory", cmd_simulate},
                        {"train", "fit a model and write it with its spectrum", cmd_train},
                        {"predict", "roll a model forward from a held-out state", cmd_predict},
                        {"spectrum", "eigenvalues of a model, compared with the global fit", cmd_spectrum},
                        {"sweep", "one-step error over window widths and delays", cmd_sweep}};
    int (*chosen)(const Options&) = nullptr;
    for (const auto& s : subs) {
        CLI::App* sc = app.add_subcommand(s.name, s.help);
        sc->add_option("--config", opts.config, "experiment config (JSON)")->required();
        sc->add_option("--out", opts.out, "output directory (overrides output_dir)");
        sc->add_option("--seed", seed, "random seed (overrides sim.seed)");
        sc->callback([&opts, &seed, &chosen, sc, fn = s.fn] {
            if (sc->count("--seed")) opts.seed = seed;
            chosen = fn;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }
    try {
        return chosen(opts);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: io: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitOther;
    }
}
