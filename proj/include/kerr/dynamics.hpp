// Time evolution of the Kerr cavity: exact unitary Kerr evolution, a Lindblad
// master equation with single-photon decay and residual detuning, analytic
// multi-component cat states, and the characteristic-time formulas.
#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <kerr/errors.hpp>
#include <kerr/fock.hpp>

namespace kerr {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// All frequencies are angular (rad/s); times are seconds. Defaults are the
// experimental operating point.
struct SystemParams {
    double K = two_pi * 325e3;            // Kerr shift per photon
    double kappa = two_pi * 10e3;         // single-photon decay rate
    double chi = two_pi * 9.4e6;          // qubit-cavity dispersive shift
    double K_q = two_pi * 73.4e6;         // qubit anharmonicity
    double sigma_pulse = two_pi * 2.6e6;  // spectral width of selective pulse
    double detuning = two_pi * 5e3;       // residual drive-cavity detuning
    double p_e = 0.10;                    // spurious excited-state population

    // Housed for completeness; none of these drive the dynamics.
    std::map<std::string, double> extras = {
        {"omega_q", two_pi * 7850.3e6}, {"omega_m", two_pi * 8256.4e6},
        {"chi_qm", two_pi * 29.5e6},    {"chi_cm", two_pi * 2.45e6},
        {"K_m", two_pi * 3.8e6},
    };

    void validate() const {
        if (!(K > 0.0)) throw std::invalid_argument("SystemParams: K must be positive");
        if (kappa < 0.0) throw std::invalid_argument("SystemParams: kappa must be nonnegative");
        if (!(p_e >= 0.0 && p_e < 1.0))
            throw std::invalid_argument("SystemParams: p_e must lie in [0,1)");
    }
};

enum class Frame { kerr_frame, lab_detuned };

struct EvolveOptions {
    double dt = 0.0;               // step size in s; <= 0 picks T_rev/20000
    double convergence_tol = 1e-6; // halved-step trace-distance bound; <= 0 skips the check
    Frame frame = Frame::kerr_frame;
};

inline double collapse_time(double nbar, double K) {
    if (!(nbar > 0.0) || !(K > 0.0))
        throw std::invalid_argument("collapse_time: nbar and K must be positive");
    return std::numbers::pi / (2.0 * std::sqrt(nbar) * K);
}

inline double revival_time(double K) {
    if (!(K > 0.0)) throw std::invalid_argument("revival_time: K must be positive");
    return two_pi / K;
}

inline double kerr_phase(double t, cxd beta, double K) {
    if (t < 0.0) throw std::invalid_argument("kerr_phase: t must be nonnegative");
    return K * t * (std::norm(beta) + 0.5);
}

// Drive frequencies of the |0> -> |n> n-photon transitions, n = 1..n_max;
// adjacent lines are spaced by K/2.
inline std::vector<double> multiphoton_frequencies(const SystemParams& params, double omega_c,
                                                   int n_max) {
    if (n_max < 1) throw std::invalid_argument("multiphoton_frequencies: n_max must be >= 1");
    std::vector<double> freqs(n_max);
    for (int n = 1; n <= n_max; ++n) freqs[n - 1] = omega_c - 0.5 * (n - 1) * params.K;
    return freqs;
}

inline double kerr_from_dispersive(double chi, double K_q) {
    if (!(K_q > 0.0)) throw std::invalid_argument("kerr_from_dispersive: K_q must be positive");
    return chi * chi / (4.0 * K_q);
}

// Multiplies the |n> amplitude by e^{+i(K/2)n^2 t}; the linear-in-n term of
// the normal-ordered Kerr Hamiltonian is absorbed into the rotating frame.
inline StateVector kerr_evolve(const StateVector& psi0, const SystemParams& params, double t) {
    if (t < 0.0) throw std::invalid_argument("kerr_evolve: t must be nonnegative");
    params.validate();
    StateVector psi = psi0;
    for (int n = 0; n < psi.amp.size(); ++n)
        psi.amp(n) *= std::exp(cxd(0.0, 0.5 * params.K * double(n) * double(n) * t));
    return psi;
}

// Normalized (1/2q) sum_p sum_k e^{ik(k-p)pi/q} |beta e^{ip pi/q}>, the state
// the Kerr evolution produces at t = T_rev/q.
inline StateVector cat_state(const FockSpace& space, cxd beta, int q,
                             Guard guard = Guard::enforce) {
    if (q < 2) throw std::invalid_argument("cat_state: q must be >= 2");
    detail::check_amplitude_guard(std::norm(beta), space.dim, guard, "cat_state");
    CVec amp = CVec::Zero(space.dim);
    for (int p = 0; p < 2 * q; ++p) {
        cxd coeff = 0.0;
        for (int k = 0; k < 2 * q; ++k)
            coeff += std::exp(cxd(0.0, k * (k - p) * std::numbers::pi / q));
        if (std::abs(coeff) < 1e-14) continue;
        cxd component = beta * std::exp(cxd(0.0, p * std::numbers::pi / q));
        amp += coeff * detail::coherent_amplitudes_raw(space.dim, component);
    }
    amp /= (2.0 * q);
    double nrm = amp.norm();
    if (nrm == 0.0) throw std::invalid_argument("cat_state: components cancel to zero");
    StateVector psi;
    psi.amp = amp / nrm;
    return psi;
}

namespace detail {

// Right-hand side of the master equation for a diagonal Hamiltonian with
// phases phi_n (so rho_mn acquires e^{+i(phi_m - phi_n)t}) plus single-photon
// decay at rate kappa. Entrywise:
//   drho_mn/dt = i(phi_m - phi_n) rho_mn
//              + kappa [ sqrt((m+1)(n+1)) rho_{m+1,n+1} - (m+n)/2 rho_mn ]
struct LindbladRhs {
    CMat coef;           // i(phi_m - phi_n) - kappa (m+n)/2
    Eigen::MatrixXd sq;  // sqrt((m+1)(n+1)) for the shifted feed term
    double kappa;

    LindbladRhs(const std::vector<double>& phi, double kappa_) : kappa(kappa_) {
        const int d = int(phi.size());
        coef.resize(d, d);
        for (int m = 0; m < d; ++m)
            for (int n = 0; n < d; ++n)
                coef(m, n) = cxd(-0.5 * kappa * (m + n), phi[m] - phi[n]);
        if (d > 1) {
            sq.resize(d - 1, d - 1);
            for (int m = 0; m + 1 < d; ++m)
                for (int n = 0; n + 1 < d; ++n)
                    sq(m, n) = std::sqrt(double(m + 1) * double(n + 1));
        }
    }

    CMat operator()(const CMat& rho) const {
        CMat out = coef.cwiseProduct(rho);
        const int d = int(rho.rows());
        if (kappa != 0.0 && d > 1)
            out.topLeftCorner(d - 1, d - 1) +=
                kappa * sq.cwiseProduct(rho.bottomRightCorner(d - 1, d - 1));
        return out;
    }
};

// Classic fixed-step RK4 with per-step re-symmetrization.
inline CMat rk4_run(const LindbladRhs& rhs, CMat rho, double t, int steps) {
    const double h = t / steps;
    for (int s = 0; s < steps; ++s) {
        CMat k1 = rhs(rho);
        CMat k2 = rhs(rho + 0.5 * h * k1);
        CMat k3 = rhs(rho + 0.5 * h * k2);
        CMat k4 = rhs(rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        rho = 0.5 * (rho + rho.adjoint().eval());
    }
    return rho;
}

}  // namespace detail

// Integrates drho/dt = i[phi, rho] + kappa D[a](rho) where phi is the diagonal
// phase vector; the building block for both the cavity frame choices and the
// extra qubit-conditioned rotation used by the measurement model.
inline DensityMatrix lindblad_evolve_diag(const DensityMatrix& rho0,
                                          const std::vector<double>& phi, double kappa, double t,
                                          const EvolveOptions& opts, double dt_fallback) {
    const int d = int(rho0.mat.rows());
    if (int(phi.size()) != d)
        throw std::invalid_argument("lindblad_evolve_diag: phase vector size mismatch");
    if (t < 0.0) throw std::invalid_argument("lindblad_evolve_diag: t must be nonnegative");
    DensityMatrix out;
    if (t == 0.0) {
        out.mat = rho0.mat;
        return out;
    }
    double dt = opts.dt > 0.0 ? opts.dt : dt_fallback;
    if (!(dt > 0.0)) throw std::invalid_argument("lindblad_evolve_diag: dt must be positive");
    const int steps = std::max(1, int(std::ceil(t / dt)));

    detail::LindbladRhs rhs(phi, kappa);
    out.mat = detail::rk4_run(rhs, rho0.mat, t, steps);
    if (opts.convergence_tol > 0.0) {
        DensityMatrix fine;
        fine.mat = detail::rk4_run(rhs, rho0.mat, t, 2 * steps);
        double resid = trace_distance(out, fine);
        if (resid > opts.convergence_tol)
            throw IntegrationError("lindblad_evolve: halved-step check failed", resid);
        out.mat = fine.mat;
    }
    return out;
}

inline DensityMatrix lindblad_evolve(const DensityMatrix& rho0, const SystemParams& params,
                                     double t, const EvolveOptions& opts = {}) {
    params.validate();
    const int d = int(rho0.mat.rows());
    std::vector<double> phi(d);
    for (int n = 0; n < d; ++n) {
        phi[n] = 0.5 * params.K * double(n) * double(n);
        if (opts.frame == Frame::lab_detuned) phi[n] += params.detuning * n;
    }
    return lindblad_evolve_diag(rho0, phi, params.kappa, t, opts, revival_time(params.K) / 20000.0);
}

}  // namespace kerr
