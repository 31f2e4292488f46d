#include "gedmd/errors.hpp"
#include "gedmd/generator.hpp"
#include "gedmd/models.hpp"
#include "gedmd/sampling.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace gedmd;

namespace {

SampleSet ou_samples(int m, std::uint64_t seed)
{
    return exact_samples(ornstein_uhlenbeck(1.0, 4.0), sample_uniform({{-2, 2}}, m, seed));
}

double min_eigenvalue(const MatrixXd& sym)
{
    return Eigen::SelfAdjointEigenSolver<MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

TEST(Generator, OuMatchesAnalyticGenerator)
{
    const Dictionary dict = Dictionary::monomials(1, 10);
    const GeneratorEstimate est = gedmd_stochastic(dict, ou_samples(100, 1));
    const MatrixXd ref = analytic_ou_generator(1.0, 4.0, 10);
    EXPECT_LT((est.L() - ref).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(est.rank, 11);
    EXPECT_EQ(est.samples, 100u);
    EXPECT_TRUE(est.warnings.empty());
}

TEST(Generator, EmpiricalMatricesMatchDirectSums)
{
    const Dictionary dict = Dictionary::monomials(2, 3);
    const SampleSet s = exact_samples(double_well(), sample_uniform({{-2, 2}, {-1, 1}}, 300, 2));
    const GeneratorData data = generator_data(dict, s, GeneratorKind::stochastic, 64);
    const GeneratorEstimate est = gedmd_stochastic(dict, s);
    const MatrixXd G = data.psi * data.psi.transpose() / 300.0;
    const MatrixXd A = data.dpsi * data.psi.transpose() / 300.0;
    EXPECT_LT((est.G_hat - G).norm(), 1e-12 * G.norm());
    EXPECT_LT((est.A_hat - A).norm(), 1e-12 * A.norm());
    EXPECT_LT((est.M - A * G.inverse()).norm(), 1e-7 * est.M.norm());
    EXPECT_LT((perron_frobenius_estimate(est) - A.transpose() * G.inverse()).norm(), 1e-7 * est.M.norm());
}

TEST(Generator, GeneratorImageOfMonomialsIsAnalytic)
{
    // L x^2 = 2 x b + a for a scalar SDE; L x = b.
    const Dictionary dict = Dictionary::monomials(1, 2);
    const SampleSet s = ou_samples(5, 4);
    const GeneratorData data = generator_data(dict, s, GeneratorKind::stochastic);
    for (int l = 0; l < 5; ++l) {
        const double x = s.points(l, 0), b = s.drift(l, 0), a = s.diffusion(l, 0);
        EXPECT_DOUBLE_EQ(data.dpsi(0, l), 0.0);
        EXPECT_NEAR(data.dpsi(1, l), b, 1e-14);
        EXPECT_NEAR(data.dpsi(2, l), 2 * x * b + a, 1e-13);
    }
}

TEST(Generator, StochasticReducesToDeterministicWithoutNoise)
{
    const Dictionary dict = Dictionary::monomials(2, 4);
    SampleSet s = exact_samples(quadratic_system(-0.8, -0.7), sample_uniform({{-2, 2}, {-2, 2}}, 400, 5));
    s.diffusion = MatrixXd::Zero(400, 4);
    const GeneratorEstimate det = gedmd_deterministic(dict, s);
    const GeneratorEstimate sto = gedmd_stochastic(dict, s);
    EXPECT_LT((det.M - sto.M).norm(), 1e-12 * det.M.norm());
}

TEST(Generator, ReversibleEstimatorMatchesGradientForm)
{
    // 1D monomials: A_ij = -1/2 mean(i x^(i-1) a j x^(j-1)) with a = 2 / beta.
    const Dictionary dict = Dictionary::monomials(1, 4);
    const SampleSet s = ou_samples(500, 6);
    const GeneratorEstimate est = gedmd_reversible(dict, s);
    MatrixXd A = MatrixXd::Zero(5, 5);
    for (int l = 0; l < 500; ++l) {
        const double x = s.points(l, 0);
        for (int i = 1; i <= 4; ++i)
            for (int j = 1; j <= 4; ++j)
                A(i, j) += -0.5 * (i * std::pow(x, i - 1)) * 0.5 * (j * std::pow(x, j - 1)) / 500.0;
    }
    EXPECT_LT((est.A_hat - A).norm(), 1e-12 * A.norm());
}

TEST(Generator, ChunkSizeDoesNotChangeTheEstimate)
{
    const Dictionary dict = Dictionary::monomials(2, 4);
    const SampleSet s = exact_samples(double_well(), sample_uniform({{-2, 2}, {-1, 1}}, 3001, 8));
    const GeneratorEstimate a = gedmd_stochastic(dict, s, {1e-10, 7});
    const GeneratorEstimate b = gedmd_stochastic(dict, s, {1e-10, 1024});
    EXPECT_LT((a.G_hat - b.G_hat).norm(), 1e-12 * a.G_hat.norm());
    EXPECT_LT((a.M - b.M).norm(), 1e-9 * a.M.norm());
    // Repeating a run is bit-identical.
    EXPECT_EQ(gedmd_stochastic(dict, s, {1e-10, 1024}).M, b.M);
}

TEST(Generator, EstimateFromDataRecoversExactLinearMap)
{
    const Dictionary dict = Dictionary::monomials(2, 2);
    const MatrixXd psi = dict.values(sample_uniform({{-1, 1}, {-1, 1}}, 50, 3));
    MatrixXd M = MatrixXd::Zero(6, 6);
    M(1, 1) = -0.5;
    M(2, 4) = 0.3;
    M(5, 0) = 1.0;
    const GeneratorEstimate est = estimate_from_data(psi, M * psi);
    EXPECT_LT((est.M - M).norm(), 1e-10);
}

TEST(Generator, RankDeficiencyIsReported)
{
    // Two points cannot resolve six functions.
    const Dictionary dict = Dictionary::monomials(2, 2);
    const SampleSet s = exact_samples(double_well(), sample_uniform({{-2, 2}, {-1, 1}}, 2, 3));
    const GeneratorEstimate est = gedmd_stochastic(dict, s);
    EXPECT_LE(est.rank, 2);
    EXPECT_FALSE(est.warnings.empty());
}

TEST(Generator, StochasticEstimatorNeedsDiffusion)
{
    const SampleSet s = exact_samples(double_well(), sample_uniform({{-2, 2}, {-1, 1}}, 20, 3), false);
    EXPECT_THROW(gedmd_stochastic(Dictionary::monomials(2, 2), s), InputError);
    EXPECT_THROW(gedmd_reversible(Dictionary::monomials(2, 2), s), InputError);
}

TEST(Generator, EdmdLogRecoversLinearFlowGenerator)
{
    // x' = -x: monomials span an invariant subspace with L x^k = -k x^k.
    const Dictionary dict = Dictionary::monomials(1, 3);
    const MatrixXd x = sample_uniform({{-1, 1}}, 40, 2);
    const double tau = 0.1;
    const MatrixXd y = x * std::exp(-tau);
    const MatrixXd L = edmd_with_log(x, y, dict, tau).transpose();
    for (int k = 0; k <= 3; ++k)
        EXPECT_NEAR(L(k, k), -k, 1e-8);
    EXPECT_LT((L - MatrixXd(L.diagonal().asDiagonal())).norm(), 1e-8);
}

TEST(Generator, JsonRoundTripOfMatrices)
{
    const GeneratorEstimate est = gedmd_stochastic(Dictionary::monomials(1, 3), ou_samples(30, 1));
    const nlohmann::json j = est.to_json();
    EXPECT_EQ(matrix_from_json(j.at("M")), est.M);
    EXPECT_EQ(j.at("rank").get<int>(), est.rank);
    EXPECT_THROW(matrix_from_json(nlohmann::json::array({{1, 2}, {3}})), InputError);
}

TEST(Generator, EmpiricalGramConvergesToExactMoments)
{
    const Dictionary dict = Dictionary::monomials(1, 4);
    const MatrixXd G = oracle::uniform_monomial_gram(-2, 2, 4);
    const GeneratorEstimate small = gedmd_stochastic(dict, ou_samples(100, 3));
    const GeneratorEstimate large = gedmd_stochastic(dict, ou_samples(100000, 3));
    EXPECT_LT((large.G_hat - G).norm(), (small.G_hat - G).norm());
    EXPECT_LT((large.G_hat - G).norm() / G.norm(), 0.02);
}

// Property: every empirical Gram matrix is symmetric positive semidefinite.
TEST(GeneratorProperty, GramMatricesArePsd)
{
    const std::vector<Dictionary> dicts = {
        Dictionary::monomials(2, 5),
        Dictionary::gaussian_grid({{-2, 2}, {-1, 1}}, {4, 3}, 0.5),
        Dictionary::legendre(6, {{-2, 2}, {-1, 1}}),
    };
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        for (const Dictionary& dict : dicts) {
            const int m = 5 + static_cast<int>(seed) * 40;
            const SampleSet s = exact_samples(double_well(), sample_uniform({{-2, 2}, {-1, 1}}, m, seed));
            const GeneratorEstimate est = gedmd_stochastic(dict, s);
            EXPECT_EQ(est.G_hat, est.G_hat.transpose());
            EXPECT_GE(min_eigenvalue(est.G_hat), -1e-12 * est.G_hat.norm()) << to_string(dict.kind()) << " m=" << m;
        }
}

// Property: the reversible A is symmetric negative semidefinite for any sample.
TEST(GeneratorProperty, ReversibleMatrixIsNegativeSemidefinite)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SampleSet s = exact_samples(lemon_slice(4, 1.0), sample_lemon_slice(4, 1.0, 200, seed));
        const GeneratorEstimate est = gedmd_reversible(Dictionary::monomials(2, 4), s);
        EXPECT_LT((est.A_hat - est.A_hat.transpose()).norm(), 1e-12 * est.A_hat.norm());
        EXPECT_LE(-min_eigenvalue(-est.A_hat), 1e-12 * est.A_hat.norm());
    }
}
