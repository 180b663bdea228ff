// Run configuration: one JSON document with per-command sections. Frequencies
// are given as the /2pi value in Hz (the way they are usually quoted) and
// times in ns; conversion to angular units happens here and nowhere else.
// Unknown keys are rejected with their full field path.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>
#include <kerr/dynamics.hpp>
#include <kerr/errors.hpp>
#include <kerr/measurement.hpp>

namespace kerr {

struct ParamsConfig {
    double kerr_hz = 325e3;
    double kappa_hz = 10e3;
    double chi_hz = 9.4e6;
    double kerr_qubit_hz = 73.4e6;
    double sigma_pulse_hz = 2.6e6;
    double detuning_hz = 5e3;
    double p_e = 0.10;

    SystemParams to_system() const {
        SystemParams p;
        p.K = two_pi * kerr_hz;
        p.kappa = two_pi * kappa_hz;
        p.chi = two_pi * chi_hz;
        p.K_q = two_pi * kerr_qubit_hz;
        p.sigma_pulse = two_pi * sigma_pulse_hz;
        p.detuning = two_pi * detuning_hz;
        p.p_e = p_e;
        return p;
    }
};

struct SpaceConfig {
    int dim = 30;
};

struct StateConfig {
    double beta_re = 2.0;
    double beta_im = 0.0;
    int q = 2;

    cxd beta() const { return {beta_re, beta_im}; }
};

struct GridConfig {
    int rows = 21;
    int cols = 21;
    double re_min = -3.0;
    double re_max = 3.0;
    double im_min = -3.0;
    double im_max = 3.0;

    QGrid to_grid() const { return make_grid(rows, cols, re_min, re_max, im_min, im_max); }
};

struct ReadoutConfig {
    int averages = 1000;     // 0 means infinite averaging (no shot noise)
    double noise_sd = 0.02;  // uncalibrated placeholder for the readout chain
    std::uint64_t seed = 1;

    ReadoutModel to_model(double p_e) const {
        ReadoutModel m;
        m.p_e = p_e;
        m.averages = averages;
        m.readout_noise_sd = noise_sd;
        m.seed = seed;
        return m;
    }
};

struct SimulateConfig {
    std::vector<double> times_ns = {15, 105, 185, 385, 785, 1065, 2810, 3065};
};

struct MeasureConfig {
    double t_ns = -1.0;  // negative selects the half-revival time
    std::vector<int> n_list = default_n_list();
    bool sampled = true;
};

struct ReconstructConfig {
    int basis_dim = 10;
    int max_iters = 2;
    double clip_tol = 1e-6;
    std::string input = "measure_dataset.csv";
};

struct AnalyzeConfig {
    std::vector<double> width_times_ns = {0, 18, 38, 58, 78, 98, 118};
};

struct RunConfig {
    ParamsConfig params;
    SpaceConfig space;
    StateConfig state;
    GridConfig grid;
    ReadoutConfig readout;
    SimulateConfig simulate;
    MeasureConfig measure;
    ReconstructConfig reconstruct;
    AnalyzeConfig analyze;
    std::string out_dir = "out";

    void validate() const;
};

namespace detail {

inline std::string join_path(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void check_keys(const nlohmann::json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw ConfigError((path.empty() ? std::string("config") : path) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key '" + join_path(path, it.key()) + "'");
    }
}

template <class T>
void get_if(const nlohmann::json& j, const std::string& path, const char* name, T& out) {
    if (!j.contains(name)) return;
    try {
        out = j.at(name).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(join_path(path, name) + ": " + e.what());
    }
}

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace detail

inline void RunConfig::validate() const {
    using detail::require;
    require(params.kerr_hz > 0.0, "params.kerr_hz: must be positive");
    require(params.kappa_hz >= 0.0, "params.kappa_hz: must be nonnegative");
    require(params.sigma_pulse_hz >= 0.0, "params.sigma_pulse_hz: must be nonnegative");
    require(params.p_e >= 0.0 && params.p_e < 1.0, "params.p_e: must lie in [0, 1)");
    require(space.dim >= 2, "space.dim: must be at least 2");
    require(state.q >= 2, "state.q: must be at least 2");
    require(grid.rows >= 1 && grid.cols >= 1, "grid.rows/cols: must be at least 1");
    require(grid.re_max >= grid.re_min, "grid.re_max: must be >= grid.re_min");
    require(grid.im_max >= grid.im_min, "grid.im_max: must be >= grid.im_min");
    require(readout.averages >= 0, "readout.averages: must be nonnegative (0 = infinite)");
    require(readout.noise_sd >= 0.0, "readout.noise_sd: must be nonnegative");
    for (double t : simulate.times_ns)
        require(t >= 0.0, "simulate.times_ns: entries must be nonnegative");
    require(!measure.n_list.empty(), "measure.n_list: must not be empty");
    for (int n : measure.n_list)
        require(n >= 0 && n < space.dim, "measure.n_list: entries must lie in [0, space.dim)");
    require(reconstruct.basis_dim >= 2, "reconstruct.basis_dim: must be at least 2");
    require(reconstruct.max_iters >= 1, "reconstruct.max_iters: must be at least 1");
    require(reconstruct.clip_tol >= 0.0, "reconstruct.clip_tol: must be nonnegative");
    require(!reconstruct.input.empty(), "reconstruct.input: must not be empty");
    require(!analyze.width_times_ns.empty(), "analyze.width_times_ns: must not be empty");
    for (double t : analyze.width_times_ns)
        require(t >= 0.0, "analyze.width_times_ns: entries must be nonnegative");
    require(!out_dir.empty(), "out_dir: must not be empty");
}

inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    using detail::check_keys;
    using detail::get_if;

    RunConfig cfg;
    check_keys(j, "",
               {"params", "space", "state", "grid", "readout", "simulate", "measure",
                "reconstruct", "analyze", "out_dir"});
    get_if(j, "", "out_dir", cfg.out_dir);

    if (j.contains("params")) {
        const auto& s = j.at("params");
        check_keys(s, "params",
                   {"kerr_hz", "kappa_hz", "chi_hz", "kerr_qubit_hz", "sigma_pulse_hz",
                    "detuning_hz", "p_e"});
        get_if(s, "params", "kerr_hz", cfg.params.kerr_hz);
        get_if(s, "params", "kappa_hz", cfg.params.kappa_hz);
        get_if(s, "params", "chi_hz", cfg.params.chi_hz);
        get_if(s, "params", "kerr_qubit_hz", cfg.params.kerr_qubit_hz);
        get_if(s, "params", "sigma_pulse_hz", cfg.params.sigma_pulse_hz);
        get_if(s, "params", "detuning_hz", cfg.params.detuning_hz);
        get_if(s, "params", "p_e", cfg.params.p_e);
    }
    if (j.contains("space")) {
        const auto& s = j.at("space");
        check_keys(s, "space", {"dim"});
        get_if(s, "space", "dim", cfg.space.dim);
    }
    if (j.contains("state")) {
        const auto& s = j.at("state");
        check_keys(s, "state", {"beta_re", "beta_im", "q"});
        get_if(s, "state", "beta_re", cfg.state.beta_re);
        get_if(s, "state", "beta_im", cfg.state.beta_im);
        get_if(s, "state", "q", cfg.state.q);
    }
    if (j.contains("grid")) {
        const auto& s = j.at("grid");
        check_keys(s, "grid", {"rows", "cols", "re_min", "re_max", "im_min", "im_max"});
        get_if(s, "grid", "rows", cfg.grid.rows);
        get_if(s, "grid", "cols", cfg.grid.cols);
        get_if(s, "grid", "re_min", cfg.grid.re_min);
        get_if(s, "grid", "re_max", cfg.grid.re_max);
        get_if(s, "grid", "im_min", cfg.grid.im_min);
        get_if(s, "grid", "im_max", cfg.grid.im_max);
    }
    if (j.contains("readout")) {
        const auto& s = j.at("readout");
        check_keys(s, "readout", {"averages", "noise_sd", "seed"});
        get_if(s, "readout", "averages", cfg.readout.averages);
        get_if(s, "readout", "noise_sd", cfg.readout.noise_sd);
        get_if(s, "readout", "seed", cfg.readout.seed);
    }
    if (j.contains("simulate")) {
        const auto& s = j.at("simulate");
        check_keys(s, "simulate", {"times_ns"});
        get_if(s, "simulate", "times_ns", cfg.simulate.times_ns);
    }
    if (j.contains("measure")) {
        const auto& s = j.at("measure");
        check_keys(s, "measure", {"t_ns", "n_list", "sampled"});
        get_if(s, "measure", "t_ns", cfg.measure.t_ns);
        get_if(s, "measure", "n_list", cfg.measure.n_list);
        get_if(s, "measure", "sampled", cfg.measure.sampled);
    }
    if (j.contains("reconstruct")) {
        const auto& s = j.at("reconstruct");
        check_keys(s, "reconstruct", {"basis_dim", "max_iters", "clip_tol", "input"});
        get_if(s, "reconstruct", "basis_dim", cfg.reconstruct.basis_dim);
        get_if(s, "reconstruct", "max_iters", cfg.reconstruct.max_iters);
        get_if(s, "reconstruct", "clip_tol", cfg.reconstruct.clip_tol);
        get_if(s, "reconstruct", "input", cfg.reconstruct.input);
    }
    if (j.contains("analyze")) {
        const auto& s = j.at("analyze");
        check_keys(s, "analyze", {"width_times_ns"});
        get_if(s, "analyze", "width_times_ns", cfg.analyze.width_times_ns);
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
    return {
        {"params",
         {{"kerr_hz", cfg.params.kerr_hz},
          {"kappa_hz", cfg.params.kappa_hz},
          {"chi_hz", cfg.params.chi_hz},
          {"kerr_qubit_hz", cfg.params.kerr_qubit_hz},
          {"sigma_pulse_hz", cfg.params.sigma_pulse_hz},
          {"detuning_hz", cfg.params.detuning_hz},
          {"p_e", cfg.params.p_e}}},
        {"space", {{"dim", cfg.space.dim}}},
        {"state",
         {{"beta_re", cfg.state.beta_re}, {"beta_im", cfg.state.beta_im}, {"q", cfg.state.q}}},
        {"grid",
         {{"rows", cfg.grid.rows},
          {"cols", cfg.grid.cols},
          {"re_min", cfg.grid.re_min},
          {"re_max", cfg.grid.re_max},
          {"im_min", cfg.grid.im_min},
          {"im_max", cfg.grid.im_max}}},
        {"readout",
         {{"averages", cfg.readout.averages},
          {"noise_sd", cfg.readout.noise_sd},
          {"seed", cfg.readout.seed}}},
        {"simulate", {{"times_ns", cfg.simulate.times_ns}}},
        {"measure",
         {{"t_ns", cfg.measure.t_ns},
          {"n_list", cfg.measure.n_list},
          {"sampled", cfg.measure.sampled}}},
        {"reconstruct",
         {{"basis_dim", cfg.reconstruct.basis_dim},
          {"max_iters", cfg.reconstruct.max_iters},
          {"clip_tol", cfg.reconstruct.clip_tol},
          {"input", cfg.reconstruct.input}}},
        {"analyze", {{"width_times_ns", cfg.analyze.width_times_ns}}},
        {"out_dir", cfg.out_dir},
    };
}

inline std::string serialize_config(const RunConfig& cfg) {
    return config_to_json(cfg).dump(2) + "\n";
}

}  // namespace kerr
