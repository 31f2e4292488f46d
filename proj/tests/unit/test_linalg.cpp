#include "gedmd/errors.hpp"
#include "gedmd/linalg.hpp"
#include "gedmd/rng.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <random>

using namespace gedmd;

namespace {

MatrixXd random_matrix(int rows, int cols, std::uint64_t seed)
{
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal;
    MatrixXd a(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            a(i, j) = normal(rng);
    return a;
}

}  // namespace

TEST(Linalg, PinvSatisfiesPenroseConditions)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        // Rank-deficient 6 x 9 matrix.
        const MatrixXd a = random_matrix(6, 3, seed) * random_matrix(3, 9, seed + 100);
        int rank = 0;
        const MatrixXd p = pinv(a, 1e-10, &rank);
        EXPECT_EQ(rank, 3);
        EXPECT_LT((a * p * a - a).norm(), 1e-9 * a.norm());
        EXPECT_LT((p * a * p - p).norm(), 1e-9 * p.norm());
        EXPECT_LT((a * p - (a * p).transpose()).norm(), 1e-9);
        EXPECT_LT((p * a - (p * a).transpose()).norm(), 1e-9);
    }
}

TEST(Linalg, ScaledSvdSolvesLeastSquares)
{
    const MatrixXd psi = random_matrix(5, 40, 7);
    const MatrixXd y = random_matrix(3, 40, 8);
    const ScaledSvd svd = scaled_svd(psi, 1e-12);
    const MatrixXd x = svd.solve_right(y);
    const MatrixXd normal = y * psi.transpose() * (psi * psi.transpose()).inverse();
    EXPECT_LT((x - normal).norm(), 1e-10);
    const MatrixXd gram = psi * psi.transpose() / 40.0;
    EXPECT_LT((svd.gram_pinv() - gram.inverse()).norm(), 1e-9 * gram.inverse().norm());
}

TEST(Linalg, ExpmMatchesDiagonalization)
{
    const MatrixXd s = random_matrix(5, 5, 3);
    const MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    const MatrixXd ref = es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
                         es.eigenvectors().transpose();
    EXPECT_LT((expm(sym) - ref).norm(), 1e-10 * ref.norm());
    EXPECT_LT((expm(MatrixXd::Zero(4, 4)) - MatrixXd::Identity(4, 4)).norm(), 1e-15);
}

TEST(Linalg, PrincipalLogInvertsExpm)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MatrixXd a = 0.3 * random_matrix(4, 4, seed);
        EXPECT_LT((principal_log(expm(a)) - a).norm(), 1e-9);
    }
}

TEST(Linalg, PrincipalLogRejectsNegativeRealEigenvalues)
{
    MatrixXd a = MatrixXd::Identity(2, 2);
    a(1, 1) = -0.5;
    EXPECT_THROW(principal_log(a), NumericalError);
}

TEST(Linalg, NnlsSatisfiesKktConditions)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const MatrixXd a = random_matrix(30, 8, seed);
        const VectorXd b = random_matrix(30, 1, seed + 50).col(0);
        const VectorXd x = nnls(a, b);
        const VectorXd grad = a.transpose() * (a * x - b);
        for (int i = 0; i < 8; ++i) {
            EXPECT_GE(x(i), 0.0);
            if (x(i) > 1e-12)
                EXPECT_NEAR(grad(i), 0.0, 1e-9);
            else
                EXPECT_GE(grad(i), -1e-9);
        }
    }
}

TEST(Linalg, NnlsReturnsUnconstrainedSolutionWhenFeasible)
{
    const MatrixXd a = random_matrix(20, 4, 11);
    const VectorXd x_true = VectorXd::LinSpaced(4, 1.0, 2.0);
    EXPECT_LT((nnls(a, a * x_true) - x_true).norm(), 1e-10);
}

TEST(Linalg, ChunkedOuterMeanIsIndependentOfChunkSize)
{
    const MatrixXd f = random_matrix(6, 1001, 21);
    const MatrixXd g = random_matrix(6, 1001, 22);
    const MatrixXd direct = f * g.transpose() / 1001.0;
    const MatrixXd ref = chunked_outer_mean(f, g, 1024);
    for (std::size_t chunk : {1u, 7u, 64u, 5000u}) {
        const MatrixXd c = chunked_outer_mean(f, g, chunk);
        EXPECT_LT((c - direct).norm(), 1e-12 * direct.norm());
    }
    // Same chunk size gives bit-identical results.
    EXPECT_EQ(chunked_outer_mean(f, g, 1024), ref);
}

TEST(Linalg, ParallelForVisitsEveryIndexOnce)
{
    std::vector<std::atomic<int>> hits(997);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, 4);
    for (const auto& h : hits)
        EXPECT_EQ(h.load(), 1);
}

TEST(Linalg, GaussLegendreIsExactForHighDegreePolynomials)
{
    const QuadratureRule rule = gauss_legendre(8);
    EXPECT_NEAR(rule.weights.sum(), 2.0, 1e-14);
    for (int k = 0; k <= 15; ++k) {
        const double exact = k % 2 == 1 ? 0.0 : 2.0 / (k + 1);
        EXPECT_NEAR((rule.nodes.array().pow(k) * rule.weights.array()).sum(), exact, 1e-13) << k;
    }
}

TEST(Linalg, ClipPsdProducesNearestPsdMatrix)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MatrixXd s = random_matrix(5, 5, seed);
        const MatrixXd sym = 0.5 * (s + s.transpose());
        const MatrixXd c = clip_psd(sym);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
        const MatrixXd l = psd_cholesky(c);
        EXPECT_LT((l * l.transpose() - c).norm(), 1e-9);
        EXPECT_LT((l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix()).norm(), 1e-15);
    }
}
