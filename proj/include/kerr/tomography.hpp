// Density-matrix reconstruction from Q_n datasets by linear least squares
// over a Hermitian trace-one parameterization, with projection onto the PSD
// cone; Wigner functions by operator evaluation and by the alternating
// Q_n sum; Gaussian width and cat-fidelity analysis.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <kerr/dynamics.hpp>
#include <kerr/errors.hpp>
#include <kerr/fock.hpp>
#include <kerr/measurement.hpp>
#include <kerr/parallel.hpp>

namespace kerr {

namespace detail {

inline double max_grid_abs2(const QGrid& grid) {
    double m = 0.0;
    for (cxd a : grid.points) m = std::max(m, std::norm(a));
    return m;
}

// Working dimension large enough that every matrix element <n|D(-a)|i> used
// by the regression is converged: factorial suppression needs roughly three
// levels per unit of |alpha|^2.
inline int auto_work_dim(const QGrid& grid, int basis_dim) {
    int by_alpha = int(std::ceil(3.0 * max_grid_abs2(grid)));
    return std::max(2 * std::max(basis_dim, 16), by_alpha);
}

// Least-squares row for the real observation u rho u^H, over the
// parameterization (d-1 leading diagonals, then re/im of the upper
// triangle); returns the constant |u_{d-1}|^2 that the trace-one
// substitution moves to the right-hand side.
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

inline double fill_design_row(RowRef out, const CVec& u) {
    const int d = int(u.size());
    const double last = std::norm(u(d - 1));
    int col = 0;
    for (int i = 0; i < d - 1; ++i) out(col++) = std::norm(u(i)) - last;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const cxd w = u(i) * std::conj(u(j));
            out(col++) = 2.0 * w.real();
            out(col++) = -2.0 * w.imag();
        }
    return last;
}

inline Eigen::VectorXd pack_hermitian(const CMat& rho) {
    const int d = int(rho.rows());
    Eigen::VectorXd x(d * d - 1);
    int col = 0;
    for (int i = 0; i < d - 1; ++i) x(col++) = rho(i, i).real();
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            x(col++) = rho(i, j).real();
            x(col++) = rho(i, j).imag();
        }
    return x;
}

inline CMat unpack_hermitian(const Eigen::VectorXd& x, int d) {
    CMat rho = CMat::Zero(d, d);
    int col = 0;
    double tr = 0.0;
    for (int i = 0; i < d - 1; ++i) {
        rho(i, i) = x(col++);
        tr += rho(i, i).real();
    }
    rho(d - 1, d - 1) = 1.0 - tr;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            cxd v(x(col), x(col + 1));
            col += 2;
            rho(i, j) = v;
            rho(j, i) = std::conj(v);
        }
    return rho;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Design matrix

// Rows are indexed by (n, grid point); the row acting on rho gives
// <n|D(-a)rho D(a)|n> = u rho u^H with u the n-th row of the displacement
// truncated to the reconstruction basis. Stored both as kets (for fast
// re-evaluation) and as the flattened real least-squares matrix.
struct DesignMatrix {
    QGrid grid;
    std::vector<int> n_list;
    int basis_dim = 0;
    int work_dim = 0;
    std::vector<CVec> kets;    // row index = n_index * n_points + point
    Eigen::MatrixXd A;         // rows x (basis_dim^2 - 1)
    Eigen::VectorXd rhs_base;  // per-row trace-substitution constant
};

inline DesignMatrix build_design_matrix(const QGrid& grid, const std::vector<int>& n_list,
                                        int basis_dim, int work_dim = 0,
                                        Guard guard = Guard::enforce) {
    if (basis_dim < 2) throw std::invalid_argument("build_design_matrix: basis_dim too small");
    if (work_dim <= 0) work_dim = detail::auto_work_dim(grid, basis_dim);
    if (basis_dim > work_dim / 2)
        throw std::invalid_argument("build_design_matrix: basis_dim exceeds work_dim/2");
    int max_n = 0;
    for (int n : n_list) {
        if (n < 0 || n >= work_dim / 2)
            throw std::invalid_argument("build_design_matrix: n outside working space");
        max_n = std::max(max_n, n);
    }

    DesignMatrix dm;
    dm.grid = grid;
    dm.n_list = n_list;
    dm.basis_dim = basis_dim;
    dm.work_dim = work_dim;

    const int n_points = int(grid.points.size());
    const int rows = int(n_list.size()) * n_points;
    dm.kets.resize(rows);
    dm.A.resize(rows, basis_dim * basis_dim - 1);
    dm.rhs_base.resize(rows);

    // Measured photon numbers may exceed the reconstruction basis; keep the
    // truncated block tall enough to expose every requested row.
    const int op_dim = std::max(basis_dim, max_n + 1);
    FockSpace space = make_space(op_dim, work_dim - op_dim);
    parallel_for(n_points, [&](int p) {
        Operator d = displacement(space, -grid.points[p], guard);
        for (std::size_t k = 0; k < n_list.size(); ++k) {
            const int row = int(k) * n_points + p;
            dm.kets[row] = d.row(n_list[k]).head(basis_dim).transpose();
            dm.rhs_base(row) = detail::fill_design_row(dm.A.row(row), dm.kets[row]);
        }
    });
    return dm;
}

// ---------------------------------------------------------------------------
// Reconstruction

struct ReconstructOptions {
    int max_iters = 2;       // least-squares solves, including the first
    double clip_tol = 1e-6;  // acceptable clipped mass without a re-solve
    int work_dim = 0;        // 0 = choose from the grid
    Guard guard = Guard::enforce;
};

struct ReconstructionResult {
    DensityMatrix rho;      // physical: Hermitian, trace 1, PSD
    DensityMatrix rho_ls;   // raw least-squares solution before projection
    double residual_norm = 0.0;
    double clipped_mass = 0.0;
    int iterations = 0;
    bool converged = true;
};

namespace detail {

// Eigenvalue clipping onto the PSD cone; returns the removed negative mass.
inline double project_psd(CMat& rho) {
    Eigen::SelfAdjointEigenSolver<CMat> es(rho);
    Eigen::VectorXd ev = es.eigenvalues();
    double removed = 0.0, kept = 0.0;
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) < 0.0) {
            removed += -ev(i);
            ev(i) = 0.0;
        }
        kept += ev(i);
    }
    if (kept <= 0.0) throw ReconstructionError("projection removed all mass");
    ev /= kept;
    rho = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    rho = 0.5 * (rho + rho.adjoint().eval());
    return removed;
}

}  // namespace detail

inline ReconstructionResult reconstruct(const QDataset& dataset, const DesignMatrix& design,
                                        const ReconstructOptions& opts = {}) {
    const int n_points = int(design.grid.points.size());
    const int rows = int(design.n_list.size()) * n_points;
    if (dataset.n_list != design.n_list ||
        dataset.grid.points.size() != design.grid.points.size() ||
        dataset.values.rows() != Eigen::Index(design.n_list.size()) ||
        dataset.values.cols() != n_points)
        throw std::invalid_argument("reconstruct: dataset does not match the design matrix");
    const int d = design.basis_dim;
    const int n_params = d * d - 1;
    if (rows < n_params)
        throw ReconstructionError("reconstruct: " + std::to_string(rows) + " rows cannot fix " +
                                  std::to_string(n_params) + " parameters");

    Eigen::VectorXd b(rows);
    for (std::size_t k = 0; k < design.n_list.size(); ++k)
        for (int p = 0; p < n_points; ++p) {
            const int row = int(k) * n_points + p;
            b(row) = std::numbers::pi * dataset.values(k, p) - design.rhs_base(row);
        }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.A);
    if (qr.rank() < n_params)
        throw ReconstructionError("reconstruct: design matrix rank " +
                                  std::to_string(qr.rank()) + " leaves a " +
                                  std::to_string(n_params - qr.rank()) +
                                  "-dimensional unconstrained subspace");

    ReconstructionResult res;
    res.rho_ls.mat = detail::unpack_hermitian(qr.solve(b), d);
    res.iterations = 1;

    CMat work = res.rho_ls.mat;
    for (;;) {
        CMat projected = work;
        double removed = detail::project_psd(projected);
        res.clipped_mass += removed;
        res.rho.mat = projected;
        if (removed <= opts.clip_tol) {
            res.converged = true;
            break;
        }
        if (res.iterations >= opts.max_iters) {
            res.converged = false;
            break;
        }

        // Re-solve restricted to the positive support of the projection.
        Eigen::SelfAdjointEigenSolver<CMat> es(work);
        std::vector<int> keep;
        for (int i = 0; i < d; ++i)
            if (es.eigenvalues()(i) > 0.0) keep.push_back(i);
        const int r = int(keep.size());
        if (r == 0 || r * r - 1 > rows) {
            res.converged = false;
            break;
        }
        CMat basis(d, r);
        for (int i = 0; i < r; ++i) basis.col(i) = es.eigenvectors().col(keep[i]);
        if (r == 1) {
            work = basis * basis.adjoint();
            ++res.iterations;
            continue;
        }
        Eigen::MatrixXd a_red(rows, r * r - 1);
        Eigen::VectorXd b_red(rows);
        for (int row = 0; row < rows; ++row) {
            // value = u^T rho conj(u) with rho = V sigma V^H, so the reduced
            // ket is V^T u (no conjugation).
            CVec psi = basis.transpose() * design.kets[row];
            b_red(row) = b(row) + design.rhs_base(row) - detail::fill_design_row(a_red.row(row), psi);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_red(a_red);
        if (qr_red.rank() < r * r - 1) {
            res.converged = false;
            break;
        }
        work = basis * detail::unpack_hermitian(qr_red.solve(b_red), r) * basis.adjoint();
        ++res.iterations;
    }

    res.residual_norm = (design.A * detail::pack_hermitian(res.rho.mat) - b).norm();
    return res;
}

inline ReconstructionResult reconstruct(const QDataset& dataset, int basis_dim = 10,
                                        const ReconstructOptions& opts = {}) {
    DesignMatrix design = build_design_matrix(dataset.grid, dataset.n_list, basis_dim,
                                              opts.work_dim, opts.guard);
    return reconstruct(dataset, design, opts);
}

// ---------------------------------------------------------------------------
// Wigner functions

struct WignerGrid {
    QGrid grid;
    Eigen::VectorXd values;
    std::vector<char> tail_flag;  // filled by the alternating-sum route
};

// W(a) = (2/pi) Tr[D(-a) rho D(a) P], evaluated in a working space where the
// displacement is exactly unitary, so |W| <= 2/pi holds pointwise.
inline WignerGrid wigner_from_rho(const DensityMatrix& rho, const QGrid& grid, int work_dim = 0,
                                  Guard guard = Guard::enforce) {
    const int d = int(rho.mat.rows());
    if (work_dim <= 0)
        work_dim = std::max(2 * d, int(std::ceil(3.0 * detail::max_grid_abs2(grid))));
    if (work_dim < d) throw std::invalid_argument("wigner_from_rho: work_dim below state dim");
    FockSpace space = make_space(work_dim, 0);

    WignerGrid w;
    w.grid = grid;
    w.values.resize(grid.points.size());
    parallel_for(int(grid.points.size()), [&](int p) {
        Operator dm = displacement(space, -grid.points[p], guard);
        double val = 0.0;
        for (int n = 0; n < work_dim; ++n) {
            const auto row = dm.row(n).head(d);
            const double term = (row * rho.mat * row.adjoint())(0, 0).real();
            val += (n % 2 == 0) ? term : -term;
        }
        w.values(p) = (2.0 / std::numbers::pi) * val;
    });
    return w;
}

// W(a) = 2 sum_n (-1)^n Q_n(a); truncation bias is flagged wherever the
// measured completeness sum strays from 1/pi.
inline WignerGrid wigner_from_qn(const QDataset& dataset,
                                 double tail_tol = 1e-3 / std::numbers::pi) {
    for (std::size_t k = 0; k < dataset.n_list.size(); ++k)
        if (dataset.n_list[k] != int(k))
            throw std::invalid_argument("wigner_from_qn: n_list must be contiguous from 0");

    WignerGrid w;
    w.grid = dataset.grid;
    w.values.resize(dataset.values.cols());
    w.tail_flag.assign(dataset.values.cols(), 0);
    for (Eigen::Index p = 0; p < dataset.values.cols(); ++p) {
        double alt = 0.0, sum = 0.0;
        for (Eigen::Index k = 0; k < dataset.values.rows(); ++k) {
            alt += (k % 2 == 0 ? 1.0 : -1.0) * dataset.values(k, p);
            sum += dataset.values(k, p);
        }
        w.values(p) = 2.0 * alt;
        w.tail_flag[p] = std::abs(sum - 1.0 / std::numbers::pi) > tail_tol ? 1 : 0;
    }
    return w;
}

// ---------------------------------------------------------------------------
// Gaussian width of a Q slice

namespace detail {

// Least-squares fit of A e^{-(x-x0)^2/(2 s^2)} + c by Levenberg-Marquardt;
// returns (A, x0, s, c). The offset absorbs thermal-artifact baselines.
inline Eigen::Vector4d gauss_peak_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const int m = int(x.size());
    if (m < 7 || y.size() != x.size())
        throw std::invalid_argument("q_width_fit: need at least 7 points");

    int imax = 0;
    for (int i = 1; i < m; ++i)
        if (y[i] > y[imax]) imax = i;
    double c = *std::min_element(y.begin(), y.end());
    double amp = y[imax] - c;
    if (!(amp > 0.0)) throw AnalysisError("q_width_fit: slice has no peak");
    double x0 = x[imax];
    double span = std::abs(x.back() - x.front());
    double s = span / 6.0;
    // half-width estimate
    for (int i = imax; i < m; ++i)
        if (y[i] - c < 0.5 * amp) {
            s = std::max(1e-3 * span, (x[i] - x0) / 1.1774);
            break;
        }

    Eigen::Vector4d p(amp, x0, s, c);
    double lambda = 1e-3;
    double prev_ssr = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        Eigen::MatrixXd jac(m, 4);
        Eigen::VectorXd resid(m);
        for (int i = 0; i < m; ++i) {
            const double dx = x[i] - p(1);
            const double e = std::exp(-0.5 * dx * dx / (p(2) * p(2)));
            resid(i) = y[i] - (p(0) * e + p(3));
            jac(i, 0) = e;
            jac(i, 1) = p(0) * e * dx / (p(2) * p(2));
            jac(i, 2) = p(0) * e * dx * dx / (p(2) * p(2) * p(2));
            jac(i, 3) = 1.0;
        }
        const double ssr = resid.squaredNorm();
        Eigen::Matrix4d h = jac.transpose() * jac;
        Eigen::Matrix4d damped = h + lambda * Eigen::Matrix4d(h.diagonal().asDiagonal());
        Eigen::Vector4d step = damped.ldlt().solve(jac.transpose() * resid);
        if (!step.allFinite()) throw AnalysisError("q_width_fit: singular normal equations");
        Eigen::Vector4d trial = p + step;
        // evaluate trial
        double trial_ssr = 0.0;
        for (int i = 0; i < m; ++i) {
            const double dx = x[i] - trial(1);
            const double e = std::exp(-0.5 * dx * dx / (trial(2) * trial(2)));
            const double r = y[i] - (trial(0) * e + trial(3));
            trial_ssr += r * r;
        }
        if (trial_ssr <= ssr && trial.allFinite() && trial(2) != 0.0) {
            p = trial;
            lambda = std::max(1e-12, lambda * 0.3);
            if (std::abs(prev_ssr - trial_ssr) <= 1e-14 * (1.0 + trial_ssr) &&
                step.cwiseAbs().maxCoeff() < 1e-10 * (1.0 + p.cwiseAbs().maxCoeff())) {
                converged = true;
                break;
            }
            prev_ssr = trial_ssr;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    // Accept slow-but-steady convergence: the width checks below catch real failures.
    (void)converged;
    return p;
}

}  // namespace detail

inline double q_width_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const Eigen::Vector4d p = detail::gauss_peak_fit(x, y);
    const double width = 2.0 * p(2) * p(2);
    if (!std::isfinite(width) || width <= 0.0)
        throw AnalysisError("q_width_fit: fit did not converge");
    return width;
}

// Fits the constant-Im row of the grid passing through the dataset maximum.
inline double q_width(const QDataset& dataset, int n_index = 0) {
    if (n_index < 0 || n_index >= dataset.values.rows())
        throw std::invalid_argument("q_width: n_index out of range");
    if (dataset.grid.cols < 7)
        throw std::invalid_argument("q_width: slice needs at least 7 points");
    Eigen::Index imax;
    dataset.values.row(n_index).maxCoeff(&imax);
    const int row = int(imax) / dataset.grid.cols;
    std::vector<double> xs(dataset.grid.cols), ys(dataset.grid.cols);
    for (int c = 0; c < dataset.grid.cols; ++c) {
        const int p = row * dataset.grid.cols + c;
        xs[c] = dataset.grid.points[p].real();
        ys[c] = dataset.values(n_index, p);
    }
    return q_width_fit(xs, ys);
}

// ---------------------------------------------------------------------------
// Cat fidelity

// Fidelity against the ideal q-component cat with decayed amplitude
// beta0 e^{-kappa t/2}, maximized over the discrete component alignments
// (rotations by multiples of pi/q); fidelity itself ignores global phase.
inline double cat_fidelity(const DensityMatrix& rho, cxd beta0, int q, double t, double kappa) {
    if (t < 0.0) throw std::invalid_argument("cat_fidelity: t must be nonnegative");
    const int d = int(rho.mat.rows());
    FockSpace space = make_space(d);
    const cxd beta = beta0 * std::exp(-0.5 * kappa * t);
    StateVector cat = cat_state(space, beta, q, Guard::bypass);
    double best = 0.0;
    for (int r = 0; r < 2 * q; ++r) {
        StateVector rotated = rotate_frame(cat, r * std::numbers::pi / q);
        best = std::max(best, fidelity(rotated, rho));
    }
    return best;
}

}  // namespace kerr
