#pragma once

#include "koopeq/analysis.hpp"
#include "koopeq/dictionary.hpp"
#include "koopeq/error.hpp"
#include "koopeq/grid.hpp"
#include "koopeq/koopman.hpp"
#include "koopeq/manifest.hpp"
#include "koopeq/observation.hpp"
#include "koopeq/rollout.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace koopeq {

inline constexpr int kConfigSchemaVersion = 1;

struct ObsParams {
    std::string kernel = "dirac";  // dirac | gaussian | custom
    double alpha = 1.0;
    std::vector<double> weights;
    std::size_t window_width = 1;
    std::size_t delays = 1;
    long anchor = 0;
    std::size_t stride = 1;

    ObservationMap map() const {
        ObservationMap m;
        if (kernel == "gaussian")
            m.kernel = GaussianKernel{alpha};
        else if (kernel == "custom")
            m.kernel = CustomKernel{weights};
        m.window_width = window_width;
        m.delays = delays;
        m.anchor = anchor;
        m.stride = stride;
        return m;
    }
};

struct DictParams {
    DictionaryKind kind = DictionaryKind::identity;
    int degree = 1;
};

struct FitParams {
    ModelKind model = ModelKind::global;
    bool pool_shifts = true;
    double rcond = kDefaultRcond;
    double train_fraction = kTrainFraction;
};

struct RolloutParams {
    std::size_t n_steps = 100;
    RolloutMode mode = RolloutMode::plain;
};

struct SweepParams {
    std::vector<std::size_t> window_widths;
    std::vector<std::size_t> delays;
};

struct PlotParams {
    std::size_t history = 20;        // truth snapshots shown before a rollout starts
    std::size_t max_snapshots = 0;   // cap on heatmap width, 0 = all
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    std::string name = "experiment";
    SimConfig sim;
    ObsParams obs;
    DictParams dict;
    FitParams fit;
    RolloutParams rollout;
    SweepParams sweep;
    std::size_t spectrum_k = 6;
    PlotParams plot;
    bool write_csv = true;
    bool write_png = true;
    std::string output_dir = "out";
    std::string input_trajectory;  // optional: reuse a saved trajectory
    std::string input_model;       // optional: reuse a saved model

    Dictionary dictionary(std::size_t input_dim) const { return {dict.kind, input_dim, dict.degree}; }
};

namespace detail {

using json = nlohmann::json;

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    require(j.is_object(), ErrorKind::config, where + " must be a JSON object");
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        require(ok.count(k) == 1, ErrorKind::config, "unknown key '" + k + "' in " + where);
}

template <class T>
inline void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorKind::config, where + "." + key + " has the wrong type");
    }
}

inline std::size_t read_size(const json& j, const char* key, std::size_t fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    require(v.is_number_integer() && v.get<long long>() >= 0, ErrorKind::config,
            where + "." + key + " must be a non-negative integer");
    return v.get<std::size_t>();
}

}  // namespace detail

/// Cross-field checks that only need the config itself.
inline void validate(const ExperimentConfig& c) {
    require(c.schema_version == kConfigSchemaVersion, ErrorKind::config,
            "unsupported schema_version " + std::to_string(c.schema_version));
    try {
        c.sim.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::config, std::string("sim: ") + e.what());
    }
    require(c.sim.num_snapshots <= 1000000, ErrorKind::config, "sim.num_snapshots is unreasonably large");
    require(c.obs.kernel == "dirac" || c.obs.kernel == "gaussian" || c.obs.kernel == "custom", ErrorKind::config,
            "obs.kernel must be dirac, gaussian or custom");
    require(c.obs.window_width >= 1 && c.obs.delays >= 1 && c.obs.stride >= 1, ErrorKind::config,
            "obs.q_w, obs.q_d and obs.stride must be >= 1");
    require(c.dict.degree >= 1 && c.dict.degree <= 6, ErrorKind::config, "dict.degree must lie in [1, 6]");
    require(c.fit.rcond >= 0.0 && c.fit.rcond < 1.0, ErrorKind::config, "fit.rcond must lie in [0, 1)");
    require(c.fit.train_fraction > 0.0 && c.fit.train_fraction < 1.0, ErrorKind::config,
            "fit.train_fraction must lie in (0, 1)");
    require((c.fit.model == ModelKind::dmdc) == (c.rollout.mode == RolloutMode::dmdc), ErrorKind::config,
            "rollout.mode dmdc goes with fit.model dmdc and only with it");
    require(c.spectrum_k >= 1, ErrorKind::config, "spectrum.k must be >= 1");
    for (std::size_t q : c.sweep.window_widths) require(q >= 1, ErrorKind::config, "sweep.q_w entries must be >= 1");
    for (std::size_t q : c.sweep.delays) require(q >= 1, ErrorKind::config, "sweep.q_d entries must be >= 1");
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::allow_keys;
    using detail::read;
    using detail::read_size;
    ExperimentConfig c;
    allow_keys(j, "config",
               {"schema_version", "name", "sim", "obs", "dict", "fit", "rollout", "sweep", "spectrum", "plot", "formats",
                "output_dir", "inputs"});
    require(j.contains("schema_version"), ErrorKind::config, "config lacks schema_version");
    read(j, "schema_version", c.schema_version, "config");
    read(j, "name", c.name, "config");
    read(j, "output_dir", c.output_dir, "config");

    if (j.contains("sim")) {
        const auto& s = j["sim"];
        allow_keys(s, "sim", {"n", "L", "mu", "dt", "tau", "burn_in_time", "num_snapshots", "seed", "initial_condition", "profile"});
        c.sim.n = read_size(s, "n", c.sim.n, "sim");
        read(s, "L", c.sim.domain_length, "sim");
        read(s, "mu", c.sim.mu, "sim");
        read(s, "dt", c.sim.dt, "sim");
        read(s, "tau", c.sim.tau, "sim");
        read(s, "burn_in_time", c.sim.burn_in_time, "sim");
        c.sim.num_snapshots = read_size(s, "num_snapshots", c.sim.num_snapshots, "sim");
        c.sim.seed = read_size(s, "seed", c.sim.seed, "sim");
        std::string ic = "random_smooth";
        read(s, "initial_condition", ic, "sim");
        require(ic == "random_smooth" || ic == "named_profile", ErrorKind::config,
                "sim.initial_condition must be random_smooth or named_profile");
        c.sim.initial_condition = ic == "random_smooth" ? InitialCondition::random_smooth : InitialCondition::named_profile;
        read(s, "profile", c.sim.profile, "sim");
        require(c.sim.profile == "zero" || c.sim.profile == "sin" || c.sim.profile == "cos", ErrorKind::config,
                "sim.profile must be zero, sin or cos");
    }
    if (j.contains("obs")) {
        const auto& o = j["obs"];
        allow_keys(o, "obs", {"kernel", "alpha", "weights", "q_w", "q_d", "anchor", "stride"});
        read(o, "kernel", c.obs.kernel, "obs");
        read(o, "alpha", c.obs.alpha, "obs");
        read(o, "weights", c.obs.weights, "obs");
        c.obs.window_width = read_size(o, "q_w", c.obs.window_width, "obs");
        c.obs.delays = read_size(o, "q_d", c.obs.delays, "obs");
        read(o, "anchor", c.obs.anchor, "obs");
        c.obs.stride = read_size(o, "stride", c.obs.stride, "obs");
    }
    if (j.contains("dict")) {
        const auto& d = j["dict"];
        allow_keys(d, "dict", {"kind", "degree"});
        std::string kind = to_string(c.dict.kind);
        read(d, "kind", kind, "dict");
        c.dict.kind = dictionary_kind_from_string(kind);
        read(d, "degree", c.dict.degree, "dict");
    }
    if (j.contains("fit")) {
        const auto& f = j["fit"];
        allow_keys(f, "fit", {"model", "pool_shifts", "rcond", "train_fraction"});
        std::string model = to_string(c.fit.model);
        read(f, "model", model, "fit");
        c.fit.model = model_kind_from_string(model);
        read(f, "pool_shifts", c.fit.pool_shifts, "fit");
        read(f, "rcond", c.fit.rcond, "fit");
        read(f, "train_fraction", c.fit.train_fraction, "fit");
    }
    if (c.fit.model == ModelKind::dmdc) c.rollout.mode = RolloutMode::dmdc;
    if (j.contains("rollout")) {
        const auto& r = j["rollout"];
        allow_keys(r, "rollout", {"n_steps", "mode"});
        c.rollout.n_steps = read_size(r, "n_steps", c.rollout.n_steps, "rollout");
        std::string mode = to_string(c.rollout.mode);
        read(r, "mode", mode, "rollout");
        c.rollout.mode = rollout_mode_from_string(mode);
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        allow_keys(s, "sweep", {"q_w", "q_d"});
        read(s, "q_w", c.sweep.window_widths, "sweep");
        read(s, "q_d", c.sweep.delays, "sweep");
    }
    if (j.contains("spectrum")) {
        allow_keys(j["spectrum"], "spectrum", {"k"});
        c.spectrum_k = read_size(j["spectrum"], "k", c.spectrum_k, "spectrum");
    }
    if (j.contains("plot")) {
        allow_keys(j["plot"], "plot", {"history", "max_snapshots"});
        c.plot.history = read_size(j["plot"], "history", c.plot.history, "plot");
        c.plot.max_snapshots = read_size(j["plot"], "max_snapshots", c.plot.max_snapshots, "plot");
    }
    if (j.contains("formats")) {
        allow_keys(j["formats"], "formats", {"csv", "png"});
        read(j["formats"], "csv", c.write_csv, "formats");
        read(j["formats"], "png", c.write_png, "formats");
    }
    if (j.contains("inputs")) {
        allow_keys(j["inputs"], "inputs", {"trajectory", "model"});
        read(j["inputs"], "trajectory", c.input_trajectory, "inputs");
        read(j["inputs"], "model", c.input_model, "inputs");
    }
    validate(c);
    return c;
}

/// Relative input paths are resolved against the config file's directory.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), ErrorKind::config, "config file '" + path.string() + "' does not exist");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::config, "config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    ExperimentConfig c = parse_config(j);
    const auto base = path.parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    resolve(c.input_trajectory);
    resolve(c.input_model);
    return c;
}

/// Canonical JSON of the resolved config (defaults filled in). The output
/// directory is left out so that the same experiment hashes identically
/// wherever it is written.
inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["schema_version"] = c.schema_version;
    j["name"] = c.name;
    j["sim"] = {{"n", c.sim.n},
                {"L", c.sim.domain_length},
                {"mu", c.sim.mu},
                {"dt", c.sim.dt},
                {"tau", c.sim.tau},
                {"burn_in_time", c.sim.burn_in_time},
                {"num_snapshots", c.sim.num_snapshots},
                {"seed", c.sim.seed},
                {"initial_condition",
                 c.sim.initial_condition == InitialCondition::random_smooth ? "random_smooth" : "named_profile"},
                {"profile", c.sim.profile}};
    j["obs"] = {{"kernel", c.obs.kernel}, {"alpha", c.obs.alpha}, {"weights", c.obs.weights},
                {"q_w", c.obs.window_width}, {"q_d", c.obs.delays}, {"anchor", c.obs.anchor},
                {"stride", c.obs.stride}};
    j["dict"] = {{"kind", to_string(c.dict.kind)}, {"degree", c.dict.degree}};
    j["fit"] = {{"model", to_string(c.fit.model)}, {"pool_shifts", c.fit.pool_shifts}, {"rcond", c.fit.rcond},
                {"train_fraction", c.fit.train_fraction}};
    j["rollout"] = {{"n_steps", c.rollout.n_steps}, {"mode", to_string(c.rollout.mode)}};
    j["sweep"] = {{"q_w", c.sweep.window_widths}, {"q_d", c.sweep.delays}};
    j["spectrum"] = {{"k", c.spectrum_k}};
    j["plot"] = {{"history", c.plot.history}, {"max_snapshots", c.plot.max_snapshots}};
    j["formats"] = {{"csv", c.write_csv}, {"png", c.write_png}};
    j["inputs"] = {{"trajectory", c.input_trajectory}, {"model", c.input_model}};
    return j;
}

inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(to_json(c).dump()); }

}  // namespace koopeq
