#include "gedmd/linalg.hpp"

#include "gedmd/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <thread>

namespace gedmd {

ScaledSvd scaled_svd(const MatrixXd& psi, double cutoff)
{
    const auto n = psi.rows();
    const auto m = psi.cols();
    if (n == 0 || m == 0)
        throw InputError("scaled_svd: empty data matrix");

    ScaledSvd out;
    out.samples = static_cast<std::size_t>(m);
    out.cutoff = cutoff;
    out.full_rank = static_cast<int>(std::min(n, m));
    out.scale.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double rms = std::sqrt(psi.row(i).squaredNorm() / static_cast<double>(m));
        out.scale(i) = rms > 0.0 ? 1.0 / rms : 1.0;
    }

    // Factor (D Psi)^T, which is tall for the usual m >> n case.
    const MatrixXd scaled_t = (out.scale.asDiagonal() * psi).transpose();
    Eigen::BDCSVD<MatrixXd> svd(scaled_t, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& s = svd.singularValues();
    int r = 0;
    const double smax = s.size() > 0 ? s(0) : 0.0;
    while (r < s.size() && s(r) > cutoff * smax && s(r) > 0.0)
        ++r;
    out.sigma = s.head(r);
    out.left = svd.matrixV().leftCols(r);
    out.right = svd.matrixU().leftCols(r);
    return out;
}

MatrixXd ScaledSvd::solve_right(const MatrixXd& targets) const
{
    if (targets.cols() != right.rows())
        throw InputError("solve_right: target sample count does not match the factorization");
    // Y Psi^+ = Y (D^-1 Ps)^+ = (Y Ps^+) D with Ps = D Psi = left S right^T
    const MatrixXd proj = targets * right;  // k x r
    MatrixXd x = proj * sigma.cwiseInverse().asDiagonal() * left.transpose();
    return x * scale.asDiagonal();
}

MatrixXd ScaledSvd::gram_pinv() const
{
    // G = D^-1 Gs D^-1 with Gs = left S^2 left^T / m
    const VectorXd inv2 = sigma.cwiseAbs2().cwiseInverse() * static_cast<double>(samples);
    MatrixXd gs = left * inv2.asDiagonal() * left.transpose();
    return scale.asDiagonal() * gs * scale.asDiagonal();
}

MatrixXd pinv(const MatrixXd& a, double cutoff, int* rank)
{
    Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    VectorXd inv = VectorXd::Zero(s.size());
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff * smax && s(i) > 0.0) {
            inv(i) = 1.0 / s(i);
            ++r;
        }
    }
    if (rank)
        *rank = r;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatrixXd principal_log(const MatrixXd& a)
{
    if (a.rows() != a.cols())
        throw InputError("principal_log: matrix must be square");
    Eigen::EigenSolver<MatrixXd> es(a, false);
    if (es.info() != Eigen::Success)
        throw NumericalError("principal_log: eigenvalue computation failed");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const auto lambda = es.eigenvalues()(i);
        if (lambda.real() <= 0.0 && std::abs(lambda.imag()) <= 1e-14 * scale)
            throw NumericalError("principal_log: eigenvalue on the closed negative real axis, "
                                 "principal logarithm undefined");
    }
    MatrixXd out = a.log();
    if (!out.allFinite())
        throw NumericalError("principal_log: non-finite result");
    return out;
}

MatrixXd expm(const MatrixXd& a)
{
    return a.exp();
}

VectorXd nnls(const MatrixXd& a, const VectorXd& b, int max_iterations)
{
    const auto n = a.cols();
    if (a.rows() != b.size())
        throw InputError("nnls: dimension mismatch");
    if (max_iterations <= 0)
        max_iterations = static_cast<int>(30 * n + 100);

    VectorXd x = VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff()) *
                       static_cast<double>(std::max<Eigen::Index>(a.rows(), n));

    auto solve_passive = [&](const std::vector<Eigen::Index>& idx) {
        MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k)
            sub.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
        VectorXd z_sub = sub.colPivHouseholderQr().solve(b);
        VectorXd z = VectorXd::Zero(n);
        for (std::size_t k = 0; k < idx.size(); ++k)
            z(idx[k]) = z_sub(static_cast<Eigen::Index>(k));
        return z;
    };

    int iterations = 0;
    while (true) {
        VectorXd w = a.transpose() * (b - a * x);
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        }
        if (best < 0)
            break;
        passive[static_cast<std::size_t>(best)] = true;

        while (true) {
            if (++iterations > max_iterations)
                throw OptimizationError("nnls: iteration limit reached");
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)])
                    idx.push_back(j);
            VectorXd z = solve_passive(idx);
            bool feasible = true;
            for (auto j : idx)
                if (z(j) <= 0.0)
                    feasible = false;
            if (feasible) {
                x = z;
                break;
            }
            double step = 1.0;
            for (auto j : idx) {
                if (z(j) <= 0.0) {
                    const double denom = x(j) - z(j);
                    if (denom > 0.0)
                        step = std::min(step, x(j) / denom);
                }
            }
            x += step * (z - x);
            for (auto j : idx) {
                if (x(j) <= 1e-15) {
                    x(j) = 0.0;
                    passive[static_cast<std::size_t>(j)] = false;
                }
            }
        }
    }
    return x;
}

MatrixXd tree_reduce(std::vector<MatrixXd> parts)
{
    if (parts.empty())
        throw InputError("tree_reduce: nothing to reduce");
    while (parts.size() > 1) {
        std::vector<MatrixXd> next;
        next.reserve((parts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < parts.size(); i += 2)
            next.push_back(parts[i] + parts[i + 1]);
        if (parts.size() % 2 == 1)
            next.push_back(std::move(parts.back()));
        parts = std::move(next);
    }
    return std::move(parts.front());
}

MatrixXd chunked_outer_mean(const MatrixXd& left, const MatrixXd& right, std::size_t chunk_size)
{
    if (left.cols() != right.cols())
        throw InputError("chunked_outer_mean: sample counts differ");
    const auto m = static_cast<std::size_t>(left.cols());
    if (m == 0)
        throw InputError("chunked_outer_mean: no samples");
    chunk_size = std::max<std::size_t>(chunk_size, 1);
    const std::size_t chunks = (m + chunk_size - 1) / chunk_size;
    std::vector<MatrixXd> parts(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        const auto start = static_cast<Eigen::Index>(c * chunk_size);
        const auto len = static_cast<Eigen::Index>(std::min(chunk_size, m - c * chunk_size));
        parts[c] = left.middleCols(start, len) * right.middleCols(start, len).transpose();
    });
    return tree_reduce(std::move(parts)) / static_cast<double>(m);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, unsigned threads)
{
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += threads)
                fn(i);
        });
    }
    for (auto& th : pool)
        th.join();
}

MatrixXd clip_psd(const MatrixXd& a)
{
    const MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    const VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

MatrixXd psd_cholesky(const MatrixXd& a)
{
    const auto n = a.rows();
    MatrixXd l = MatrixXd::Zero(n, n);
    const double tiny = 1e-14 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (d <= tiny)
            continue;  // zero pivot: column stays zero
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < n; ++i)
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
    return l;
}

QuadratureRule gauss_legendre(int n)
{
    if (n < 1)
        throw InputError("gauss_legendre: need at least one node");
    MatrixXd jacobi = MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(jacobi);
    QuadratureRule rule;
    rule.nodes = es.eigenvalues();
    rule.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    return rule;
}

}  // namespace gedmd
