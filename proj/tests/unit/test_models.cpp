#include "gedmd/errors.hpp"
#include "gedmd/models.hpp"
#include "gedmd/sampling.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gedmd;

namespace {

VectorXd vec(std::initializer_list<double> v)
{
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out(i++) = x;
    return out;
}

}  // namespace

TEST(Models, DoubleWellDriftAndDiffusion)
{
    const SdeModel m = double_well();
    const VectorXd x = vec({0.7, -0.4});
    EXPECT_NEAR(m.drift(x)(0), 4 * 0.7 - 4 * std::pow(0.7, 3), 1e-14);
    EXPECT_NEAR(m.drift(x)(1), 0.8, 1e-14);
    const MatrixXd a = m.diffusion_matrix(x);
    EXPECT_NEAR(a(0, 0), 0.49 + 0.49, 1e-14);
    EXPECT_NEAR(a(0, 1), 0.5 * 0.7, 1e-14);
    EXPECT_NEAR(a(1, 1), 0.25, 1e-14);
}

TEST(Models, PotentialGradientsMatchFiniteDifferences)
{
    for (const SdeModel& m : {double_well(), lemon_slice(4, 1.0), gradient_system()}) {
        for (const VectorXd& x : {vec({0.7, -0.4}), vec({-0.9, 0.3}), vec({0.2, 1.1})}) {
            const VectorXd fd = oracle::fd_gradient(m.potential, x, 1e-6);
            EXPECT_LT((m.potential_gradient(x) - fd).norm(), 1e-6 * (1.0 + fd.norm())) << m.name;
            EXPECT_LT((m.drift(x) + m.potential_gradient(x)).norm(), 1e-12) << m.name;
        }
    }
}

TEST(Models, DuffingNoiseInducedDrift)
{
    const double alpha = -1.1, beta = 1.1, eps = 0.05;
    const SdeModel m = duffing(alpha, beta, eps);
    const VectorXd x = vec({0.8, -0.6});
    // c = eps^2 (Db) b with Db = [[0, 1], [-alpha - 3 beta x1^2, 0]].
    const double j21 = -alpha - 3 * beta * x(0) * x(0);
    const VectorXd b = m.drift(x);
    const VectorXd expected = eps * eps * vec({b(1), j21 * b(0)});
    EXPECT_LT((noise_induced_drift(m, x) - expected).norm(), 1e-8);
    const SdeModel ito = stratonovich_to_ito(m);
    EXPECT_FALSE(ito.stratonovich);
    EXPECT_LT((ito.drift(x) - b - 0.5 * expected).norm(), 1e-8);
    EXPECT_THROW(stratonovich_to_ito(ito), InputError);
}

TEST(Models, AnalyticOuGeneratorEntries)
{
    const double alpha = 1.0, beta = 4.0;
    const MatrixXd L = analytic_ou_generator(alpha, beta, 10);
    ASSERT_EQ(L.rows(), 11);
    // L x^k = -alpha k x^k + k (k - 1) / beta x^(k - 2).
    for (int k = 0; k <= 10; ++k)
        for (int i = 0; i <= 10; ++i) {
            double expected = 0.0;
            if (i == k)
                expected = -alpha * k;
            if (i == k - 2)
                expected = k * (k - 1) / beta;
            EXPECT_DOUBLE_EQ(L(i, k), expected);
        }
}

TEST(Models, EulerMaruyamaIsSeedReproducible)
{
    const SdeModel m = double_well();
    const MatrixXd a = integrate_em(m, vec({0.1, 0.2}), 1e-3, 500, 42);
    const MatrixXd b = integrate_em(m, vec({0.1, 0.2}), 1e-3, 500, 42);
    const MatrixXd c = integrate_em(m, vec({0.1, 0.2}), 1e-3, 500, 43);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a.rows(), 501);
}

TEST(Models, EulerMaruyamaReproducesOuStatistics)
{
    // Stationary OU: mean u, variance 1 / (alpha beta).
    const double alpha = 1.0, beta = 2.0, u = 0.5;
    const MatrixXd traj = integrate_em(ornstein_uhlenbeck(alpha, beta, u), vec({u}), 0.01, 400000, 5);
    const VectorXd x = traj.col(0).tail(390000);
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    EXPECT_NEAR(mean, u, 0.03);
    EXPECT_NEAR(var, 1.0 / (alpha * beta), 0.03);
}

TEST(Models, Rk4IsFourthOrder)
{
    // x1' = gamma x1 has the exact solution x1(0) exp(gamma t).
    const SdeModel m = quadratic_system(-0.8, -0.7);
    const double exact = std::exp(-0.8);
    const double e1 = std::abs(integrate_rk4(m, vec({1.0, 0.0}), 0.1, 10)(10, 0) - exact);
    const double e2 = std::abs(integrate_rk4(m, vec({1.0, 0.0}), 0.05, 20)(20, 0) - exact);
    EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.2);
}

TEST(Models, IntegrationReportsBlowUp)
{
    SdeModel m;
    m.name = "blow_up";
    m.dimension = 1;
    m.drift = [](const VectorXd& x) { return VectorXd(x.array().square()); };
    try {
        integrate_rk4(m, vec({1.0}), 0.05, 1000);
        FAIL() << "expected IntegrationError";
    } catch (const IntegrationError& e) {
        EXPECT_GT(e.step(), 0);
        EXPECT_LT(e.step(), 1000);
    }
}

TEST(Sampling, CentralDifferencesAreExactForQuadratics)
{
    MatrixXd traj(6, 1);
    for (int k = 0; k < 6; ++k)
        traj(k, 0) = 3.0 * (0.1 * k) * (0.1 * k) - 0.1 * k;
    const SampleSet s = central_differences(traj, 0.1);
    ASSERT_EQ(s.samples(), 4);
    for (int l = 0; l < 4; ++l)
        EXPECT_NEAR(s.drift(l, 0), 6.0 * 0.1 * (l + 1) - 1.0, 1e-12);
}

TEST(Sampling, KramersMoyalFirstOrderEstimates)
{
    MatrixXd traj(3, 2);
    traj << 0, 0, 0.2, -0.1, 0.5, 0.1;
    const SampleSet s = kramers_moyal(traj, 0.1);
    ASSERT_EQ(s.samples(), 2);
    EXPECT_NEAR(s.drift(0, 0), 2.0, 1e-12);
    EXPECT_NEAR(s.drift(0, 1), -1.0, 1e-12);
    EXPECT_NEAR(s.diffusion_entry(0, 0, 1), 0.2 * -0.1 / 0.1, 1e-12);
    EXPECT_NEAR(s.diffusion_entry(1, 1, 1), 0.04 / 0.1, 1e-12);
    EXPECT_NO_THROW(s.validate());
}

TEST(Sampling, ExactSamplesCarryModelValues)
{
    const SdeModel m = double_well();
    const MatrixXd x = sample_uniform({{-2, 2}, {-1, 1}}, 50, 3);
    const SampleSet s = exact_samples(m, x);
    EXPECT_NO_THROW(s.validate());
    for (int l = 0; l < 50; ++l) {
        const VectorXd p = x.row(l).transpose();
        EXPECT_EQ(s.drift.row(l).transpose(), m.drift(p));
        EXPECT_EQ(s.diffusion_at(l), m.diffusion_matrix(p));
    }
    EXPECT_FALSE(exact_samples(m, x, false).has_diffusion());
}

TEST(Sampling, UniformSamplesStayInBoxAndAreSeeded)
{
    const MatrixXd x = sample_uniform({{-2, 2}, {0, 1}}, 1000, 9);
    EXPECT_GE(x.col(0).minCoeff(), -2.0);
    EXPECT_LE(x.col(0).maxCoeff(), 2.0);
    EXPECT_GE(x.col(1).minCoeff(), 0.0);
    EXPECT_LE(x.col(1).maxCoeff(), 1.0);
    EXPECT_EQ(x, sample_uniform({{-2, 2}, {0, 1}}, 1000, 9));
    EXPECT_NEAR(x.col(0).mean(), 0.0, 0.1);
}

TEST(Sampling, NoiseIsSeededAndSymmetric)
{
    const MatrixXd x = sample_uniform({{-2, 2}, {-1, 1}}, 200, 3);
    SampleSet a = exact_samples(double_well(), x);
    SampleSet b = a;
    add_drift_noise(a, 0.1, 5);
    add_drift_noise(b, 0.1, 5);
    add_diffusion_noise(a, 0.1, 6);
    add_diffusion_noise(b, 0.1, 6);
    EXPECT_EQ(a.drift, b.drift);
    EXPECT_EQ(a.diffusion, b.diffusion);
    for (int l = 0; l < a.samples(); ++l)
        EXPECT_EQ(a.diffusion_entry(l, 0, 1), a.diffusion_entry(l, 1, 0));
    const SampleSet clean = exact_samples(double_well(), x);
    const double sd = std::sqrt((a.drift - clean.drift).squaredNorm() / (2.0 * a.samples()));
    EXPECT_NEAR(sd, 0.1, 0.01);
}

TEST(Sampling, ValidateRejectsBadSets)
{
    SampleSet s = exact_samples(double_well(), sample_uniform({{-2, 2}, {-1, 1}}, 10, 3));
    SampleSet nan = s;
    nan.drift(3, 1) = std::nan("");
    EXPECT_THROW(nan.validate(), InputError);
    SampleSet asym = s;
    asym.diffusion(2, 1) += 1.0;
    EXPECT_THROW(asym.validate(), InputError);
    SampleSet shape = s;
    shape.drift.conservativeResize(9, 2);
    EXPECT_THROW(shape.validate(), InputError);
}

TEST(Sampling, LemonSliceSamplerMatchesRadialMarginal)
{
    const MatrixXd x = sample_lemon_slice(4, 1.0, 200000, 11);
    const VectorXd r2 = x.rowwise().squaredNorm();
    const double a_hat = 2.0 * r2.cwiseInverse().mean();
    EXPECT_NEAR(a_hat, oracle::lemon_slice_angle_diffusion(1.0), 0.01);
    // The angle marginal exp(-F(phi)) is even.
    VectorXd phi(x.rows());
    for (Eigen::Index l = 0; l < x.rows(); ++l)
        phi(l) = std::atan2(x(l, 1), x(l, 0));
    EXPECT_NEAR(phi.mean(), 0.0, 0.02);
}
