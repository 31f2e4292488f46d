#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace gedmd {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Thin SVD of a row-scaled data matrix D*Psi (Psi is n x m, one column per sample).
///
/// Rows are scaled to unit RMS before factorizing, which keeps monomial
/// dictionaries with wildly different magnitudes well conditioned. The
/// factorization is truncated at `cutoff * s_max`.
struct ScaledSvd {
    VectorXd scale;   ///< D, length n (1 / RMS of each row, 1 for zero rows)
    MatrixXd left;    ///< n x r, left singular vectors of D*Psi
    VectorXd sigma;   ///< r retained singular values
    MatrixXd right;   ///< m x r, right singular vectors of D*Psi
    std::size_t samples = 0;
    int full_rank = 0;  ///< min(n, m)
    double cutoff = 0.0;

    int rank() const { return static_cast<int>(sigma.size()); }

    /// Least-squares solution X minimizing ||Y - X*Psi||_F, i.e. Y * Psi^+.
    MatrixXd solve_right(const MatrixXd& targets) const;

    /// Pseudoinverse of the Gram matrix Psi*Psi^T / m.
    MatrixXd gram_pinv() const;
};

ScaledSvd scaled_svd(const MatrixXd& psi, double cutoff);

/// Moore-Penrose pseudoinverse by SVD with relative cutoff.
MatrixXd pinv(const MatrixXd& a, double cutoff = 1e-10, int* rank = nullptr);

/// Principal matrix logarithm of a real matrix. Throws NumericalError when an
/// eigenvalue lies on the closed negative real axis.
MatrixXd principal_log(const MatrixXd& a);

MatrixXd expm(const MatrixXd& a);

/// Nonnegative least squares min ||A x - b||, x >= 0 (Lawson-Hanson active set).
VectorXd nnls(const MatrixXd& a, const VectorXd& b, int max_iterations = 0);

/// Symmetric n x n Gram/cross products accumulated over column chunks of fixed
/// size and reduced pairwise in a fixed order, so the result does not depend on
/// how chunks are scheduled. Returns (1/m) sum_l f(l) g(l)^T for columns l.
MatrixXd chunked_outer_mean(const MatrixXd& left, const MatrixXd& right, std::size_t chunk_size);

/// Pairwise fixed-order reduction of partial sums.
MatrixXd tree_reduce(std::vector<MatrixXd> parts);

/// Run fn(i) for i in [0, count) on up to `threads` workers. Work is
/// partitioned statically so results written to distinct slots are
/// deterministic.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, unsigned threads = 0);

/// n-point Gauss-Legendre rule on [-1, 1] (Golub-Welsch).
struct QuadratureRule {
    VectorXd nodes;
    VectorXd weights;
};
QuadratureRule gauss_legendre(int n);

/// Symmetric projection onto the PSD cone by clipping eigenvalues at zero.
MatrixXd clip_psd(const MatrixXd& a);

/// Lower-triangular factor of a positive semidefinite matrix (zero pivots are
/// skipped), so that l * l^T reproduces `a`.
MatrixXd psd_cholesky(const MatrixXd& a);

}  // namespace gedmd
