#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <kerr/measurement.hpp>

using namespace kerr;

namespace {

constexpr double kPi = std::numbers::pi;

// Oracle: Q_n of the vacuum from the analytic matrix element
// |<n|D(-a)|0>|^2 = e^{-|a|^2} |a|^{2n} / n!.
double oracle_vacuum_qn(int n, cxd alpha) {
    double a2 = std::norm(alpha);
    double v = std::exp(-a2) / kPi;
    for (int k = 1; k <= n; ++k) v *= a2 / k;
    return v;
}

DensityMatrix random_mixed_state(const FockSpace& s, std::mt19937_64& rng, int components = 3) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DensityMatrix rho;
    rho.mat = CMat::Zero(s.dim, s.dim);
    double wsum = 0.0;
    for (int c = 0; c < components; ++c) {
        CVec amp(s.dim);
        for (int i = 0; i < s.dim; ++i) amp(i) = cxd(u(rng), u(rng));
        amp.normalize();
        double w = 0.5 + 0.5 * std::abs(u(rng));
        rho.mat += w * (amp * amp.adjoint());
        wsum += w;
    }
    rho.mat /= wsum;
    return rho;
}

}  // namespace

TEST_CASE("grid construction") {
    QGrid g = default_grid();
    REQUIRE(g.points.size() == 441);
    CHECK(g.rows == 21);
    CHECK(g.cols == 21);
    CHECK(g.points.front() == cxd(-3.0, -3.0));
    CHECK(g.points.back() == cxd(3.0, 3.0));
    // Re varies fastest
    CHECK(g.points[1] == cxd(-2.7, -3.0));
    CHECK_THROWS_AS(make_grid(0, 5, -1, 1, -1, 1), std::invalid_argument);
}

TEST_CASE("ideal_qn of the vacuum matches the analytic forms") {
    FockSpace s = make_space(20);
    DensityMatrix vac = pure_density(fock_state(s, 0));

    for (cxd alpha : {cxd(0.0, 0.0), cxd(1.2, -0.4), cxd(-0.5, 2.0)}) {
        CHECK(ideal_qn(s, vac, 0, alpha) == Catch::Approx(oracle_vacuum_qn(0, alpha)).margin(1e-10));
        CHECK(ideal_qn(s, vac, 1, alpha) == Catch::Approx(oracle_vacuum_qn(1, alpha)).margin(1e-10));
        CHECK(ideal_qn(s, vac, 4, alpha) == Catch::Approx(oracle_vacuum_qn(4, alpha)).margin(1e-10));
    }

    SECTION("argument validation") {
        CHECK_THROWS_AS(ideal_qn(s, vac, 20, 0.5), std::invalid_argument);
        FockSpace other = make_space(10);
        CHECK_THROWS_AS(ideal_qn(other, vac, 0, 0.5), std::invalid_argument);
    }

    SECTION("non-Hermitian input is rejected") {
        DensityMatrix bad;
        bad.mat = CMat::Zero(s.dim, s.dim);
        bad.mat(0, 1) = cxd(0.3, 0.1);  // no conjugate partner
        CHECK_THROWS_AS(ideal_qn(s, bad, 0, cxd(0.5, 0.0)), AnalysisError);
    }
}

TEST_CASE("completeness: Q_n sums to 1/pi for random states") {
    // An exactly unitary displacement (pad = 0) makes sum_n Q_n = Tr(rho)/pi
    // an identity for every alpha, including the far grid corners.
    FockSpace s = make_space(15, 0);
    QGrid grid = default_grid();
    std::mt19937_64 rng(20260825);

    for (int trial = 0; trial < 5; ++trial) {
        DensityMatrix rho = random_mixed_state(s, rng);
        double worst = 0.0;
        for (cxd alpha : grid.points) {
            double sum = 0.0;
            for (int n = 0; n < s.dim; ++n) sum += ideal_qn(s, rho, n, alpha, Guard::bypass);
            worst = std::max(worst, std::abs(sum - 1.0 / kPi));
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("qn_dataset on coherent states") {
    FockSpace s = make_space(30);
    QGrid grid = default_grid();

    SECTION("vacuum peaks at the origin with value 1/pi") {
        QDataset ds = qn_dataset(s, pure_density(fock_state(s, 0)), grid, {0});
        Eigen::Index imax;
        ds.values.row(0).maxCoeff(&imax);
        CHECK(grid.points[imax] == cxd(0.0, 0.0));
        CHECK(ds.values(0, imax) == Catch::Approx(1.0 / kPi).margin(1e-12));
        CHECK(ds.values.minCoeff() > -1e-12);
        CHECK(ds.values.maxCoeff() < 1.0 / kPi + 1e-12);
    }

    SECTION("coherent Q0 peaks near alpha = beta") {
        QDataset ds = qn_dataset(s, pure_density(coherent_state(s, cxd(2.0, 0.0))), grid, {0});
        Eigen::Index imax;
        ds.values.row(0).maxCoeff(&imax);
        CHECK(std::abs(grid.points[imax] - cxd(2.0, 0.0)) < 0.3);
    }

    SECTION("Q0 integrates to one over the grid") {
        QDataset ds = qn_dataset(s, pure_density(coherent_state(s, cxd(1.0, 0.0))), grid, {0});
        const double d_re = 6.0 / 20.0, d_im = 6.0 / 20.0;
        CHECK(ds.values.row(0).sum() * d_re * d_im == Catch::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("pulse selectivity") {
    const double chi = two_pi * 9.4e6, sigma = two_pi * 2.6e6;
    CHECK(selectivity(chi, sigma) == Catch::Approx(0.99855).margin(5e-5));
    CHECK(selectivity(chi, sigma) > 0.99);
    CHECK(selectivity(chi, 0.0) == 1.0);
    CHECK(selectivity(0.0, sigma) == 0.0);
}

TEST_CASE("selective pi-pulse projection") {
    FockSpace s = make_space(30);
    StateVector beta2 = coherent_state(s, 2.0);

    auto [prob, projected] = selective_pi_projection(beta2, 4);
    CHECK(prob == Catch::Approx(std::exp(-4.0) * 256.0 / 24.0).epsilon(1e-6));  // 0.1954
    CHECK(std::abs(projected.amp(4)) == 1.0);

    auto [p_self, proj_self] = selective_pi_projection(fock_state(s, 3), 3, 0.99855);
    CHECK(p_self == Catch::Approx(0.99855));
    auto [p_other, proj_other] = selective_pi_projection(fock_state(s, 2), 3);
    CHECK(p_other == 0.0);
    CHECK_THROWS_AS(selective_pi_projection(beta2, 30), std::invalid_argument);
}

TEST_CASE("thermal artifact signal") {
    FockSpace s = make_space(30);
    SystemParams params;
    StateVector beta2 = coherent_state(s, 2.0);

    SECTION("p_e = 0 reduces to the ideal Q of the evolved state") {
        SystemParams p0 = params;
        p0.p_e = 0.0;
        double sig = signal_qn_with_thermal(s, beta2, p0, 100e-9, 0, cxd(1.0, 1.0));
        StateVector evolved = kerr_evolve(beta2, p0, 100e-9);
        CHECK(sig == Catch::Approx(ideal_qn(s, pure_density(evolved), 0, cxd(1.0, 1.0))).margin(1e-14));
    }

    SECTION("vacuum gives (1 - 2 p_e) times the vacuum Gaussian") {
        StateVector vac = fock_state(s, 0);
        for (cxd alpha : {cxd(0.0, 0.0), cxd(0.8, -0.6)}) {
            double sig = signal_qn_with_thermal(s, vac, params, 50e-9, 0, alpha);
            CHECK(sig == Catch::Approx((1.0 - 2.0 * params.p_e) * oracle_vacuum_qn(0, alpha))
                             .margin(1e-10));
        }
    }

    SECTION("short-time grid shows the negative artifact") {
        QGrid grid = make_grid(11, 11, -3.0, 3.0, -3.0, 3.0);
        double min_val = 1.0;
        for (cxd alpha : grid.points)
            min_val = std::min(min_val, signal_qn_with_thermal(s, beta2, params, 15e-9, 0, alpha));
        CHECK(min_val < 0.0);
    }

    SECTION("linear in p_e") {
        cxd alpha(1.5, 0.5);
        SystemParams pa = params, pb = params, pc = params;
        pa.p_e = 0.0;
        pb.p_e = 0.05;
        pc.p_e = 0.10;
        double qa = signal_qn_with_thermal(s, beta2, pa, 15e-9, 0, alpha);
        double qb = signal_qn_with_thermal(s, beta2, pb, 15e-9, 0, alpha);
        double qc = signal_qn_with_thermal(s, beta2, pc, 15e-9, 0, alpha);
        CHECK(qb == Catch::Approx(0.5 * (qa + qc)).margin(1e-12));
    }
}

TEST_CASE("signal_dataset carries both manifolds") {
    FockSpace s = make_space(20);
    SystemParams params;
    QGrid grid = make_grid(5, 5, -2.0, 2.0, -2.0, 2.0);
    DensityMatrix rho0 = pure_density(coherent_state(s, 1.0));

    QDataset ds = signal_dataset(s, rho0, params, 15e-9, grid, {0, 1});
    REQUIRE(ds.kind == QKind::signal);
    CHECK(ds.p_e == params.p_e);
    CHECK(ds.values_g.rows() == 2);
    CHECK(((1.0 - params.p_e) * ds.values_g - params.p_e * ds.values_e - ds.values)
              .cwiseAbs()
              .maxCoeff() < 1e-15);
    // both channels are genuine Q functions
    CHECK(ds.values_g.minCoeff() > -1e-12);
    CHECK(ds.values_e.minCoeff() > -1e-12);
}

TEST_CASE("control subtraction") {
    CHECK(subtract_control(0.7, 0.2) == Catch::Approx(0.5));
    CHECK(subtract_control(0.31, 0.31) == 0.0);
    // a cavity-only offset injected into both channels cancels exactly
    const double qubit_term = 0.237, cavity_offset = 0.118;
    CHECK(subtract_control(qubit_term + cavity_offset, cavity_offset) ==
          Catch::Approx(qubit_term).margin(1e-15));
}

TEST_CASE("sample_dataset") {
    FockSpace s = make_space(20);
    QGrid grid = make_grid(5, 5, -1.5, 1.5, -1.5, 1.5);
    QDataset ideal = qn_dataset(s, pure_density(fock_state(s, 0)), grid, {0, 1});

    SECTION("infinite-shot sentinel with zero noise is a passthrough") {
        ReadoutModel model;
        model.averages = 0;
        model.readout_noise_sd = 0.0;
        QDataset out = sample_dataset(ideal, model);
        CHECK((out.values - ideal.values).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(out.kind == QKind::sampled);
    }

    SECTION("fixed seed is deterministic, different seed differs") {
        ReadoutModel model;
        model.seed = 42;
        QDataset a = sample_dataset(ideal, model);
        QDataset b = sample_dataset(ideal, model);
        CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
        model.seed = 43;
        QDataset c = sample_dataset(ideal, model);
        CHECK((a.values - c.values).cwiseAbs().maxCoeff() > 0.0);
    }

    SECTION("sampling is unbiased") {
        ReadoutModel model;
        model.readout_noise_sd = 0.0;
        model.averages = 1000;
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(ideal.values.rows(), ideal.values.cols());
        const int n_seeds = 100;
        for (int seed = 0; seed < n_seeds; ++seed) {
            model.seed = seed;
            mean += sample_dataset(ideal, model).values;
        }
        mean /= n_seeds;
        for (Eigen::Index k = 0; k < ideal.values.rows(); ++k)
            for (Eigen::Index p = 0; p < ideal.values.cols(); ++p) {
                double prob = kPi * ideal.values(k, p);
                double se = std::sqrt(prob * (1.0 - prob) / model.averages / n_seeds) / kPi;
                CHECK(std::abs(mean(k, p) - ideal.values(k, p)) <= 3.0 * se + 1e-12);
            }
    }

    SECTION("per-point scatter follows the binomial law") {
        FockSpace wide = make_space(30);  // default grid corners need work_dim >= 54
        QDataset vac = qn_dataset(wide, pure_density(fock_state(wide, 0)), default_grid(), {0});
        ReadoutModel model;
        model.readout_noise_sd = 0.0;
        model.averages = 1000;
        model.seed = 7;
        QDataset out = sample_dataset(vac, model);
        double chi2 = 0.0;
        int count = 0;
        for (Eigen::Index p = 0; p < vac.values.cols(); ++p) {
            double prob = kPi * vac.values(0, p);
            // need a few expected counts on both sides for the normal scaling
            if (prob * model.averages < 5.0 || (1.0 - prob) * model.averages < 5.0) continue;
            double sd = std::sqrt(prob * (1.0 - prob) / model.averages) / kPi;
            double z = (out.values(0, p) - vac.values(0, p)) / sd;
            chi2 += z * z;
            ++count;
        }
        REQUIRE(count > 50);
        CHECK(chi2 / count == Catch::Approx(1.0).margin(0.5));
    }

    SECTION("signal datasets are sampled per manifold and recombined") {
        SystemParams params;
        QDataset sig = signal_dataset(s, pure_density(coherent_state(s, 1.0)), params, 15e-9,
                                      grid, {0});
        ReadoutModel model;
        model.averages = 0;
        model.readout_noise_sd = 0.0;
        model.p_e = params.p_e;
        QDataset out = sample_dataset(sig, model);
        CHECK((out.values - sig.values).cwiseAbs().maxCoeff() < 1e-15);

        QDataset resampled = sample_dataset(sig, ReadoutModel{});
        CHECK_THROWS_AS(sample_dataset(resampled, ReadoutModel{}), std::invalid_argument);
    }
}

TEST_CASE("displacement calibration") {
    const double de_true = 0.5;
    std::vector<double> eps;
    for (int j = 0; j < 13; ++j) eps.push_back(0.05 + 0.1 * j);
    Eigen::MatrixXd pn(8, eps.size());
    for (int n = 0; n < 8; ++n)
        for (std::size_t j = 0; j < eps.size(); ++j) {
            double lam = (eps[j] / de_true) * (eps[j] / de_true);
            double v = std::exp(-lam);
            for (int k = 1; k <= n; ++k) v *= lam / k;
            pn(n, j) = v;
        }

    SECTION("noiseless round trip") {
        CHECK(calibrate_displacement(eps, pn) == Catch::Approx(de_true).margin(1e-6));
    }

    SECTION("scale covariance") {
        std::vector<double> eps2 = eps;
        for (double& e : eps2) e *= 2.0;
        CHECK(calibrate_displacement(eps2, pn) ==
              Catch::Approx(2.0 * calibrate_displacement(eps, pn)).epsilon(1e-9));
    }

    SECTION("binomial noise keeps the estimate within 2%") {
        for (int seed = 0; seed < 20; ++seed) {
            std::mt19937_64 rng(1000 + seed);
            Eigen::MatrixXd noisy = pn;
            for (int n = 0; n < noisy.rows(); ++n)
                for (int j = 0; j < noisy.cols(); ++j) {
                    std::binomial_distribution<long> bin(1000, pn(n, j));
                    noisy(n, j) = double(bin(rng)) / 1000.0;
                }
            CHECK(calibrate_displacement(eps, noisy) == Catch::Approx(de_true).epsilon(0.02));
        }
    }

    SECTION("degenerate input is rejected") {
        CHECK_THROWS_AS(calibrate_displacement({0.5}, pn.leftCols(1)), std::invalid_argument);
        Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(8, eps.size());
        CHECK_THROWS_AS(calibrate_displacement(eps, zeros), CalibrationError);
    }
}
