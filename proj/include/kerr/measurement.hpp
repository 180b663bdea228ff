// Emulation of the experimental protocol: generalized Q_n evaluation on a
// grid of analysis displacements, photon-number-selective pi-pulse
// selectivity, the thermal-population readout artifact with control
// subtraction, finite-sample readout noise, and displacement calibration.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <kerr/dynamics.hpp>
#include <kerr/errors.hpp>
#include <kerr/parallel.hpp>
#include <kerr/fock.hpp>

namespace kerr {

inline constexpr double inv_pi = 1.0 / std::numbers::pi;

struct QGrid {
    std::vector<cxd> points;  // index = row * cols + col, Re fastest
    int rows = 0, cols = 0;
    double re_min = 0, re_max = 0, im_min = 0, im_max = 0;
};

inline QGrid make_grid(int rows, int cols, double re_min, double re_max, double im_min,
                       double im_max) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("make_grid: empty grid");
    if (!(re_max >= re_min) || !(im_max >= im_min))
        throw std::invalid_argument("make_grid: inverted range");
    QGrid g{{}, rows, cols, re_min, re_max, im_min, im_max};
    g.points.reserve(std::size_t(rows) * cols);
    const double dre = cols > 1 ? (re_max - re_min) / (cols - 1) : 0.0;
    const double dim = rows > 1 ? (im_max - im_min) / (rows - 1) : 0.0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            g.points.emplace_back(re_min + c * dre, im_min + r * dim);
    return g;
}

// 441 analysis displacements covering the phase-space window of the figures.
inline QGrid default_grid() { return make_grid(21, 21, -3.0, 3.0, -3.0, 3.0); }

inline std::vector<int> default_n_list() { return {0, 1, 2, 3, 4, 5, 6, 7}; }

enum class QKind { ideal, signal, sampled };

struct QDataset {
    QGrid grid;
    std::vector<int> n_list;
    Eigen::MatrixXd values;  // [n_index x point], in units of 1/pi
    QKind kind = QKind::ideal;
    // Per-manifold channels, filled only for kind == signal:
    // values = (1 - p_e) * values_g - p_e * values_e.
    double p_e = 0.0;
    Eigen::MatrixXd values_g, values_e;
};

struct ReadoutModel {
    double p_e = 0.10;
    long averages = 1000;          // shots per point; 0 = infinite-shot sentinel
    double readout_noise_sd = 0.02;  // Gaussian sd in probability units
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Generalized Q functions

inline double ideal_qn(const FockSpace& space, const DensityMatrix& rho, int n, cxd alpha,
                       Guard guard = Guard::enforce) {
    if (n < 0 || n >= space.dim) throw std::invalid_argument("ideal_qn: n out of range");
    if (rho.mat.rows() != space.dim) throw std::invalid_argument("ideal_qn: dim mismatch");
    Operator dm = displacement(space, -alpha, guard);
    cxd val = (dm.row(n) * rho.mat * dm.row(n).adjoint())(0, 0);
    if (std::abs(val.imag()) > 1e-12 * std::max(1.0, std::abs(val.real())))
        throw AnalysisError("ideal_qn: value has a non-negligible imaginary part");
    return inv_pi * val.real();
}

inline QDataset qn_dataset(const FockSpace& space, const DensityMatrix& rho, const QGrid& grid,
                           const std::vector<int>& n_list = default_n_list(),
                           Guard guard = Guard::enforce) {
    if (rho.mat.rows() != space.dim) throw std::invalid_argument("qn_dataset: dim mismatch");
    QDataset ds;
    ds.grid = grid;
    ds.n_list = n_list;
    ds.kind = QKind::ideal;
    ds.values.resize(n_list.size(), grid.points.size());
    parallel_for(int(grid.points.size()), [&](int p) {
        Operator dm = displacement(space, -grid.points[p], guard);
        for (std::size_t k = 0; k < n_list.size(); ++k) {
            cxd val = (dm.row(n_list[k]) * rho.mat * dm.row(n_list[k]).adjoint())(0, 0);
            ds.values(k, p) = inv_pi * val.real();
        }
    });
    return ds;
}

// ---------------------------------------------------------------------------
// Selective pulses

inline double selectivity(double chi, double sigma_pulse) {
    if (chi == 0.0) return 0.0;
    if (sigma_pulse <= 0.0) return 1.0;
    const double r = chi / sigma_pulse;
    return 1.0 - std::exp(-0.5 * r * r);
}

// Probability of exciting the qubit with an m-selective pi pulse, and the
// post-measurement cavity state given the qubit was found excited.
inline std::pair<double, StateVector> selective_pi_projection(const StateVector& psi, int m,
                                                              double pulse_selectivity = 1.0) {
    const int d = int(psi.amp.size());
    if (m < 0 || m >= d) throw std::invalid_argument("selective_pi_projection: m out of range");
    double prob = pulse_selectivity * std::norm(psi.amp(m));
    StateVector projected;
    projected.amp = CVec::Zero(d);
    projected.amp(m) = 1.0;
    return {prob, projected};
}

// ---------------------------------------------------------------------------
// Thermal-population readout artifact

// The thermally excited qubit manifold sees a cavity frame rotated at an
// extra rate chi, so its contribution to the control-subtracted signal enters
// with a minus sign: (1-p_e) Q_n of the ground manifold minus p_e Q_n of the
// rotated one. Pure-state model; both manifolds evolve unitarily.
inline double signal_qn_with_thermal(const FockSpace& space, const StateVector& psi0,
                                     const SystemParams& params, double t, int n, cxd alpha,
                                     Guard guard = Guard::enforce) {
    StateVector ground = kerr_evolve(psi0, params, t);
    StateVector excited = rotate_frame(ground, params.chi * t);
    double qg = ideal_qn(space, pure_density(ground), n, alpha, guard);
    double qe = ideal_qn(space, pure_density(excited), n, alpha, guard);
    return (1.0 - params.p_e) * qg - params.p_e * qe;
}

// Dataset version used by the pipeline: both manifolds evolve under the
// master equation (the excited one with the extra linear chi phase), so the
// artifact and decay are modeled together.
inline QDataset signal_dataset(const FockSpace& space, const DensityMatrix& rho0,
                               const SystemParams& params, double t, const QGrid& grid,
                               const std::vector<int>& n_list = default_n_list(),
                               const EvolveOptions& opts = {}, Guard guard = Guard::enforce) {
    params.validate();
    const int d = space.dim;
    if (rho0.mat.rows() != d) throw std::invalid_argument("signal_dataset: dim mismatch");

    std::vector<double> phi(d), phi_e(d);
    for (int n = 0; n < d; ++n) {
        phi[n] = 0.5 * params.K * double(n) * double(n);
        if (opts.frame == Frame::lab_detuned) phi[n] += params.detuning * n;
        phi_e[n] = phi[n] + params.chi * n;
    }
    // The excited manifold precesses faster by chi*n; shrink its fallback
    // step so the stiffest coherence advances no more per step than under the
    // Kerr phases the default step was calibrated for.
    const double dt_base = revival_time(params.K) / 20000.0;
    const double base_span = 0.5 * params.K * double(d - 1) * double(d - 1);
    auto dt_for = [&](const std::vector<double>& ph) {
        double span = 0.0;
        for (double v : ph) span = std::max(span, std::abs(v));
        return span > base_span ? dt_base * base_span / span : dt_base;
    };
    DensityMatrix rho_g = lindblad_evolve_diag(rho0, phi, params.kappa, t, opts, dt_for(phi));
    DensityMatrix rho_e = lindblad_evolve_diag(rho0, phi_e, params.kappa, t, opts, dt_for(phi_e));

    QDataset g = qn_dataset(space, rho_g, grid, n_list, guard);
    QDataset e = qn_dataset(space, rho_e, grid, n_list, guard);

    QDataset ds;
    ds.grid = grid;
    ds.n_list = n_list;
    ds.kind = QKind::signal;
    ds.p_e = params.p_e;
    ds.values_g = g.values;
    ds.values_e = e.values;
    ds.values = (1.0 - params.p_e) * g.values - params.p_e * e.values;
    return ds;
}

inline double subtract_control(double with_pulse, double without_pulse) {
    return with_pulse - without_pulse;
}

// ---------------------------------------------------------------------------
// Finite-sample readout

namespace detail {

// splitmix64-style mixer: one independent, reproducible stream per
// (seed, n index, grid point), so parallel and serial sweeps agree.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = seed;
    z += 0x9e3779b97f4a7c15ull * (a + 1);
    z += 0xbf58476d1ce4e5b9ull * (b + 1);
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

inline double sample_probability(double p, long averages, std::mt19937_64& eng) {
    p = std::min(1.0, std::max(0.0, p));
    if (averages == 0) return p;  // infinite-shot sentinel
    std::binomial_distribution<long> bin(averages, p);
    return double(bin(eng)) / double(averages);
}

}  // namespace detail

// Per point: convert pi*Q to a probability per manifold, clip to [0,1], draw
// binomial(averages, p)/averages, recombine, add Gaussian readout noise, and
// return to 1/pi units. Deterministic under a fixed model.seed.
inline QDataset sample_dataset(const QDataset& ideal, const ReadoutModel& model) {
    if (ideal.kind == QKind::sampled)
        throw std::invalid_argument("sample_dataset: input is already sampled");
    if (model.averages < 0) throw std::invalid_argument("sample_dataset: negative averages");
    if (!(model.p_e >= 0.0 && model.p_e < 1.0))
        throw std::invalid_argument("sample_dataset: p_e out of range");

    const bool two_channel = ideal.kind == QKind::signal;
    if (two_channel && (ideal.values_g.size() != ideal.values.size() ||
                        ideal.values_e.size() != ideal.values.size()))
        throw std::invalid_argument("sample_dataset: signal dataset lacks per-manifold channels");
    QDataset out;
    out.grid = ideal.grid;
    out.n_list = ideal.n_list;
    out.kind = QKind::sampled;
    out.values.resize(ideal.values.rows(), ideal.values.cols());

    for (Eigen::Index k = 0; k < ideal.values.rows(); ++k) {
        for (Eigen::Index p = 0; p < ideal.values.cols(); ++p) {
            std::mt19937_64 eng(detail::mix_seed(model.seed, std::uint64_t(k), std::uint64_t(p)));
            double value;
            if (two_channel) {
                double xg = detail::sample_probability(std::numbers::pi * ideal.values_g(k, p),
                                                       model.averages, eng);
                double xe = detail::sample_probability(std::numbers::pi * ideal.values_e(k, p),
                                                       model.averages, eng);
                value = (1.0 - model.p_e) * xg - model.p_e * xe;
            } else {
                value = detail::sample_probability(std::numbers::pi * ideal.values(k, p),
                                                   model.averages, eng);
            }
            if (model.readout_noise_sd > 0.0) {
                std::normal_distribution<double> gauss(0.0, model.readout_noise_sd);
                value += gauss(eng);
            }
            out.values(k, p) = value * inv_pi;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Displacement calibration

namespace detail {

inline double poisson_pmf(int n, double lambda) {
    double term = std::exp(-lambda);
    for (int k = 1; k <= n; ++k) term *= lambda / k;
    return term;
}

// Sum of squared residuals of y ~ A * pois(n, (eps/de)^2) with the optimal
// scale A eliminated in closed form.
inline double calibration_ssr(const std::vector<double>& eps, const Eigen::MatrixXd& pn,
                              double de) {
    double sfy = 0.0, sff = 0.0, syy = 0.0;
    for (int n = 0; n < pn.rows(); ++n)
        for (int j = 0; j < pn.cols(); ++j) {
            const double lam = (eps[j] / de) * (eps[j] / de);
            const double f = poisson_pmf(n, lam);
            sfy += f * pn(n, j);
            sff += f * f;
            syy += pn(n, j) * pn(n, j);
        }
    if (sff <= 0.0) return syy;
    const double a = sfy / sff;
    return syy - 2.0 * a * sfy + a * a * sff;
}

}  // namespace detail

// Fits P_n(eps) = A (eps/de)^{2n} e^{-(eps/de)^2} / n! over all (n, eps)
// simultaneously and returns the voltage-to-amplitude scale de, so that
// |alpha| = eps / de.
inline double calibrate_displacement(const std::vector<double>& eps, const Eigen::MatrixXd& pn) {
    if (eps.size() < 2) throw std::invalid_argument("calibrate_displacement: need >= 2 probes");
    if (pn.cols() != Eigen::Index(eps.size()) || pn.rows() < 2)
        throw std::invalid_argument("calibrate_displacement: data shape mismatch");
    for (double e : eps)
        if (!(e >= 0.0)) throw std::invalid_argument("calibrate_displacement: negative probe");

    // Data-driven bracket: the mean photon number at the largest probe gives
    // a first estimate of the scale.
    const double eps_max = *std::max_element(eps.begin(), eps.end());
    if (!(eps_max > 0.0)) throw std::invalid_argument("calibrate_displacement: all probes zero");
    int jmax = int(std::max_element(eps.begin(), eps.end()) - eps.begin());
    double wsum = 0.0, nsum = 0.0;
    for (int n = 0; n < pn.rows(); ++n) {
        wsum += std::max(0.0, pn(n, jmax));
        nsum += n * std::max(0.0, pn(n, jmax));
    }
    if (wsum <= 0.0) throw CalibrationError("calibrate_displacement: no signal in data", 1.0);
    const double lam0 = std::max(0.1, nsum / wsum);
    double lo = eps_max / std::sqrt(lam0) / 4.0, hi = eps_max / std::sqrt(lam0) * 4.0;

    // Coarse log scan, then golden-section refinement.
    double best = lo, best_ssr = std::numeric_limits<double>::infinity();
    const int scan = 200;
    for (int i = 0; i <= scan; ++i) {
        double de = lo * std::pow(hi / lo, double(i) / scan);
        double ssr = detail::calibration_ssr(eps, pn, de);
        if (ssr < best_ssr) {
            best_ssr = ssr;
            best = de;
        }
    }
    double a = best / 1.1, b = best * 1.1;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = detail::calibration_ssr(eps, pn, c), fd = detail::calibration_ssr(eps, pn, d);
    for (int it = 0; it < 200 && (b - a) > 1e-12 * best; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = detail::calibration_ssr(eps, pn, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = detail::calibration_ssr(eps, pn, d);
        }
    }
    double de = 0.5 * (a + b);
    double yy = pn.array().square().sum();
    double ssr = detail::calibration_ssr(eps, pn, de);
    if (yy > 0.0 && ssr > 0.9 * yy)
        throw CalibrationError("calibrate_displacement: fit explains no variance",
                               std::sqrt(ssr / yy));
    return de;
}

}  // namespace kerr
