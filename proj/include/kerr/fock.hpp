#pragma once

// Truncated Fock-space linear algebra for a single oscillator mode:
// states, ladder operators, displacement, parity, fidelity.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>

#include "kerr/errors.hpp"

namespace kerr {

using cxd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Operator = Eigen::MatrixXcd;

/// Truncated oscillator Hilbert space, levels 0..dim-1. Displacement
/// operators are exponentiated in the enlarged work_dim and then cut
/// back to dim so the truncation error is controlled by the padding.
struct FockSpace {
    int dim;
    int work_dim;
};

/// pad < 0 selects the default padding work_dim = 2*dim.
inline FockSpace make_space(int dim, int pad = -1) {
    if (dim < 2) throw std::invalid_argument("make_space: dim must be >= 2, got " + std::to_string(dim));
    if (pad < 0) pad = dim;
    return FockSpace{dim, dim + pad};
}

struct StateVector {
    CVec amp;
    int dim() const { return static_cast<int>(amp.size()); }
    double norm() const { return amp.norm(); }
};

struct DensityMatrix {
    CMat mat;
    int dim() const { return static_cast<int>(mat.rows()); }
    double trace_real() const { return mat.trace().real(); }
    double hermiticity_error() const { return (mat - mat.adjoint()).cwiseAbs().maxCoeff(); }
    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (mat + mat.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
};

inline DensityMatrix pure_density(const StateVector& psi) {
    return DensityMatrix{psi.amp * psi.amp.adjoint()};
}

inline StateVector fock_state(const FockSpace& space, int n) {
    if (n < 0 || n >= space.dim)
        throw std::invalid_argument("fock_state: n=" + std::to_string(n) + " outside [0," +
                                    std::to_string(space.dim - 1) + "]");
    CVec a = CVec::Zero(space.dim);
    a[n] = 1.0;
    return StateVector{std::move(a)};
}

namespace detail {

// e^{-|b|^2/2} b^n / sqrt(n!), built iteratively, NOT renormalized.
inline CVec coherent_amplitudes_raw(int dim, cxd beta) {
    CVec a(dim);
    a[0] = std::exp(-0.5 * std::norm(beta));
    for (int n = 1; n < dim; ++n) a[n] = a[n - 1] * beta / std::sqrt(double(n));
    return a;
}

inline void check_amplitude_guard(double abs2, int levels, Guard g, const char* who) {
    if (g == Guard::bypass) return;
    if (abs2 > double(levels) / 3.0)
        throw TruncationError(std::string(who) + ": |amplitude|^2 = " + std::to_string(abs2) +
                              " exceeds truncation-safety bound " + std::to_string(levels / 3.0) +
                              " (pass Guard::bypass to override)");
}

}  // namespace detail

inline StateVector coherent_state(const FockSpace& space, cxd beta, Guard guard = Guard::enforce) {
    detail::check_amplitude_guard(std::norm(beta), space.dim, guard, "coherent_state");
    CVec a = detail::coherent_amplitudes_raw(space.dim, beta);
    a /= a.norm();
    return StateVector{std::move(a)};
}

struct Ladder {
    Operator a;
    Operator a_dag;
    Operator n;
};

inline Ladder ladder_operators(const FockSpace& space) {
    const int d = space.dim;
    Operator a = Operator::Zero(d, d);
    for (int k = 1; k < d; ++k) a(k - 1, k) = std::sqrt(double(k));
    Operator n = Operator::Zero(d, d);
    for (int k = 0; k < d; ++k) n(k, k) = double(k);
    return Ladder{a, a.adjoint(), std::move(n)};
}

/// exp(alpha a^dag - alpha^* a) built at work_dim, cut to dim x dim.
/// The generator is skew-Hermitian, so the work_dim exponential is
/// exactly unitary; unitarity of the returned block depends on padding.
inline Operator displacement(const FockSpace& space, cxd alpha, Guard guard = Guard::enforce) {
    detail::check_amplitude_guard(std::norm(alpha), space.work_dim, guard, "displacement");
    if (alpha == cxd(0.0, 0.0)) return Operator::Identity(space.dim, space.dim);

    const int w = space.work_dim;
    // Hermitian H = i * (alpha a^dag - alpha^* a); exp(generator) = exp(-iH).
    CMat h = CMat::Zero(w, w);
    const cxd i_unit(0.0, 1.0);
    for (int k = 1; k < w; ++k) {
        h(k, k - 1) = i_unit * alpha * std::sqrt(double(k));
        h(k - 1, k) = std::conj(h(k, k - 1));
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    CVec phases(w);
    for (int k = 0; k < w; ++k) phases[k] = std::exp(cxd(0.0, -es.eigenvalues()[k]));
    CMat full = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    return full.topLeftCorner(space.dim, space.dim);
}

/// Diagonal photon-number parity, entries (-1)^n.
inline Operator parity(const FockSpace& space) {
    Operator p = Operator::Zero(space.dim, space.dim);
    for (int k = 0; k < space.dim; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    return p;
}

inline cxd overlap(const StateVector& psi, const StateVector& phi) {
    if (psi.dim() != phi.dim())
        throw std::invalid_argument("overlap: dimension mismatch " + std::to_string(psi.dim()) +
                                    " vs " + std::to_string(phi.dim()));
    return psi.amp.dot(phi.amp);  // Eigen dot conjugates the left argument
}

/// <psi|rho|psi>, real by Hermiticity; the imaginary part is discarded.
inline double fidelity(const StateVector& psi, const DensityMatrix& rho) {
    if (psi.dim() != rho.dim())
        throw std::invalid_argument("fidelity: dimension mismatch " + std::to_string(psi.dim()) +
                                    " vs " + std::to_string(rho.dim()));
    const cxd v = psi.amp.adjoint() * rho.mat * psi.amp;
    return v.real();
}

inline double mean_photon(const StateVector& psi) {
    double s = 0.0;
    for (int n = 0; n < psi.dim(); ++n) s += n * std::norm(psi.amp[n]);
    return s;
}

inline double mean_photon(const DensityMatrix& rho) {
    double s = 0.0;
    for (int n = 0; n < rho.dim(); ++n) s += n * rho.mat(n, n).real();
    return s;
}

/// <a> of rho.
inline cxd mean_field(const DensityMatrix& rho) {
    cxd s = 0.0;
    for (int n = 0; n + 1 < rho.dim(); ++n) s += std::sqrt(double(n + 1)) * rho.mat(n + 1, n);
    return s;
}

inline double expectation(const Operator& op, const StateVector& psi) {
    const cxd v = psi.amp.adjoint() * op * psi.amp;
    return v.real();
}

/// Trace distance (1/2)||r1 - r2||_1 via the spectrum of the Hermitian difference.
inline double trace_distance(const DensityMatrix& r1, const DensityMatrix& r2) {
    if (r1.dim() != r2.dim()) throw std::invalid_argument("trace_distance: dimension mismatch");
    CMat d = r1.mat - r2.mat;
    d = 0.5 * (d + d.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

/// rho -> exp(i theta n) rho exp(-i theta n); rotates <a> by theta.
inline DensityMatrix rotate_frame(const DensityMatrix& rho, double theta) {
    const int d = rho.dim();
    CVec ph(d);
    for (int n = 0; n < d; ++n) ph[n] = std::exp(cxd(0.0, theta * n));
    return DensityMatrix{ph.asDiagonal() * rho.mat * ph.conjugate().asDiagonal()};
}

inline StateVector rotate_frame(const StateVector& psi, double theta) {
    CVec a(psi.dim());
    for (int n = 0; n < psi.dim(); ++n) a[n] = psi.amp[n] * std::exp(cxd(0.0, theta * n));
    return StateVector{std::move(a)};
}

}  // namespace kerr
