// The four batch commands behind the CLI. Each writes its artifacts plus a
// manifest recording the effective config hash, and is deterministic given
// (config, seed).
#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>
#include <kerr/config.hpp>
#include <kerr/dynamics.hpp>
#include <kerr/io.hpp>
#include <kerr/measurement.hpp>
#include <kerr/tomography.hpp>

namespace kerr {

inline constexpr const char* toolkit_version = "0.1.0";

namespace detail {

inline std::string eigen_version() {
    return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
           std::to_string(EIGEN_MINOR_VERSION);
}

inline std::string format_time_ns(double t_ns) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t_ns);
    return buf;
}

struct ArtifactWriter {
    std::filesystem::path dir;
    std::vector<std::string> outputs;

    void write(const std::string& name, const std::string& content) {
        write_text_atomic(dir / name, content);
        if (!std::filesystem::exists(dir / name))
            throw std::runtime_error("failed to write " + (dir / name).string());
        outputs.push_back(name);
    }

    void finish(const std::string& command, const RunConfig& cfg, nlohmann::json extra = {}) {
        nlohmann::json manifest = {
            {"command", command},
            {"config_hash", hex64(fnv1a64(serialize_config(cfg)))},
            {"outputs", outputs},
            {"versions", {{"kerr", toolkit_version}, {"eigen", eigen_version()}}}};
        for (auto& [key, value] : extra.items()) manifest[key] = value;
        write_text_atomic(dir / (command + "_manifest.json"), manifest.dump(2) + "\n");
        outputs.push_back(command + "_manifest.json");
    }
};

inline double measure_time_s(const RunConfig& cfg, const SystemParams& params) {
    if (cfg.measure.t_ns >= 0.0) return cfg.measure.t_ns * 1e-9;
    return 0.5 * revival_time(params.K);
}

}  // namespace detail

// Per-time Q0 grids of the thermal-readout signal model.
inline std::vector<std::string> cmd_simulate(const RunConfig& cfg) {
    cfg.validate();
    const SystemParams params = cfg.params.to_system();
    const FockSpace space = make_space(cfg.space.dim);
    const QGrid grid = cfg.grid.to_grid();
    const DensityMatrix rho0 = pure_density(coherent_state(space, cfg.state.beta()));

    detail::ArtifactWriter out{cfg.out_dir, {}};
    for (double t_ns : cfg.simulate.times_ns) {
        QDataset ds = signal_dataset(space, rho0, params, t_ns * 1e-9, grid, {0});
        out.write("simulate_q0_t" + detail::format_time_ns(t_ns) + "ns.csv", dataset_to_csv(ds));
    }
    out.finish("simulate", cfg);
    return out.outputs;
}

// The tomography record: signal-model Q_n for the configured n list at one
// time, optionally pushed through the sampling model.
inline std::vector<std::string> cmd_measure(const RunConfig& cfg) {
    cfg.validate();
    const SystemParams params = cfg.params.to_system();
    const FockSpace space = make_space(cfg.space.dim);
    const QGrid grid = cfg.grid.to_grid();
    const DensityMatrix rho0 = pure_density(coherent_state(space, cfg.state.beta()));
    const double t = detail::measure_time_s(cfg, params);

    QDataset ds = signal_dataset(space, rho0, params, t, grid, cfg.measure.n_list);
    if (cfg.measure.sampled) ds = sample_dataset(ds, cfg.readout.to_model(params.p_e));

    nlohmann::json sidecar = dataset_sidecar(ds);
    sidecar["t_ns"] = t * 1e9;
    sidecar["params"] = config_to_json(cfg).at("params");
    sidecar["readout"] = config_to_json(cfg).at("readout");

    detail::ArtifactWriter out{cfg.out_dir, {}};
    out.write("measure_dataset.csv", dataset_to_csv(ds));
    out.write("measure_dataset.json", sidecar.dump(2) + "\n");
    out.finish("measure", cfg, {{"rows", int(ds.values.size())}});
    return out.outputs;
}

// Least-squares reconstruction of a stored dataset: density matrix,
// diagnostics, and both Wigner routes.
inline std::vector<std::string> cmd_reconstruct(const RunConfig& cfg) {
    cfg.validate();
    const SystemParams params = cfg.params.to_system();

    std::filesystem::path csv_path = cfg.reconstruct.input;
    if (!std::filesystem::exists(csv_path))
        csv_path = std::filesystem::path(cfg.out_dir) / cfg.reconstruct.input;
    if (!std::filesystem::exists(csv_path))
        throw std::runtime_error("input dataset not found: " + cfg.reconstruct.input);
    std::filesystem::path sidecar_path = csv_path;
    sidecar_path.replace_extension(".json");
    if (!std::filesystem::exists(sidecar_path))
        throw std::runtime_error("dataset sidecar not found: " + sidecar_path.string());

    const std::string csv_text = read_text(csv_path);
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(read_text(sidecar_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("dataset sidecar: " + std::string(e.what()));
    }
    QDataset ds = dataset_from_csv(csv_text, sidecar);

    DesignMatrix design = build_design_matrix(ds.grid, ds.n_list, cfg.reconstruct.basis_dim);
    ReconstructOptions opts;
    opts.max_iters = cfg.reconstruct.max_iters;
    opts.clip_tol = cfg.reconstruct.clip_tol;
    ReconstructionResult rec = reconstruct(ds, design, opts);

    const double t = detail::measure_time_s(cfg, params);
    const double fid = cat_fidelity(rec.rho, cfg.state.beta(), cfg.state.q, t, params.kappa);

    bool contiguous = true;
    for (std::size_t k = 0; k < ds.n_list.size(); ++k)
        if (ds.n_list[k] != int(k)) contiguous = false;

    nlohmann::json diagnostics = {
        {"rows", int(ds.values.size())},
        {"basis_dim", design.basis_dim},
        {"work_dim", design.work_dim},
        {"n_list", ds.n_list},
        {"residual_norm", rec.residual_norm},
        {"clipped_mass", rec.clipped_mass},
        {"iterations", rec.iterations},
        {"converged", rec.converged},
        {"mean_photon", mean_photon(rec.rho)},
        {"cat_fidelity", fid},
        {"beta_re", cfg.state.beta_re},
        {"beta_im", cfg.state.beta_im},
        {"q", cfg.state.q},
        {"t_ns", t * 1e9},
        {"wigner_qn_written", contiguous},
    };

    detail::ArtifactWriter out{cfg.out_dir, {}};
    out.write("rho.json", rho_to_json(rec.rho).dump(2) + "\n");
    out.write("diagnostics.json", diagnostics.dump(2) + "\n");
    out.write("wigner_rho.csv", wigner_to_csv(wigner_from_rho(rec.rho, ds.grid)));
    if (contiguous) out.write("wigner_qn.csv", wigner_to_csv(wigner_from_qn(ds)));
    out.finish("reconstruct", cfg, {{"input_hash", hex64(fnv1a64(csv_text))}});
    return out.outputs;
}

// Headline numbers plus the Q0 width-vs-time curve.
inline std::vector<std::string> cmd_analyze(const RunConfig& cfg) {
    cfg.validate();
    const SystemParams params = cfg.params.to_system();
    const FockSpace space = make_space(cfg.space.dim);
    const double nbar = std::norm(cfg.state.beta());

    nlohmann::json report;
    report["revival_time_ns"] = revival_time(params.K) * 1e9;
    if (nbar > 0.0) report["collapse_time_ns"] = collapse_time(nbar, params.K) * 1e9;
    report["selectivity"] = selectivity(params.chi, params.sigma_pulse);
    report["multiphoton_spacing_hz"] = 0.5 * cfg.params.kerr_hz;
    {
        // drive offsets from the one-photon line, in Hz of the /2pi value
        std::vector<double> offsets;
        for (double w : multiphoton_frequencies(params, 0.0, 5)) offsets.push_back(w / two_pi);
        report["multiphoton_offsets_hz"] = offsets;
    }
    nlohmann::json phases = nlohmann::json::array();
    for (double t_ns : cfg.analyze.width_times_ns)
        phases.push_back({{"t_ns", t_ns},
                          {"kerr_phase_rad", kerr_phase(t_ns * 1e-9, cfg.state.beta(), params.K)}});
    report["kerr_phase"] = phases;

    const DensityMatrix rho0 = pure_density(coherent_state(space, cfg.state.beta()));
    nlohmann::json widths = nlohmann::json::array();
    double best_width = std::numeric_limits<double>::infinity();
    double best_t_ns = 0.0;
    for (double t_ns : cfg.analyze.width_times_ns) {
        DensityMatrix rho = lindblad_evolve(rho0, params, t_ns * 1e-9);
        const cxd field = mean_field(rho);
        DensityMatrix aligned =
            std::abs(field) > 1e-9 ? rotate_frame(rho, -std::arg(field)) : rho;
        const double center = std::abs(field);
        QGrid slice = make_grid(1, 31, center - 1.2, center + 1.2, 0.0, 0.0);
        const double width = q_width(qn_dataset(space, aligned, slice, {0}));
        widths.push_back({{"t_ns", t_ns}, {"q0_width", width}});
        if (width < best_width) {
            best_width = width;
            best_t_ns = t_ns;
        }
    }
    report["q0_width_vs_time"] = widths;
    report["q0_width_min"] = {{"t_ns", best_t_ns}, {"q0_width", best_width}};

    detail::ArtifactWriter out{cfg.out_dir, {}};
    out.write("analysis.json", report.dump(2) + "\n");
    out.finish("analyze", cfg);
    return out.outputs;
}

}  // namespace kerr
