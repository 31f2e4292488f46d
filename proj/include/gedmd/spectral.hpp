#pragma once

#include "gedmd/dictionary.hpp"
#include "gedmd/generator.hpp"

#include <string>
#include <vector>

namespace gedmd {

/// Eigenpairs of L = M^T. Column l of `eigenvectors` holds xi_l with
/// phi_l(x) = xi_l^T psi(x).
///
/// Order: descending real part, then ascending imaginary part, then
/// lexicographic eigenvector order. Each eigenvector is scaled so that its
/// largest-magnitude entry equals 1.
struct SpectralDecomposition {
    VectorXcd eigenvalues;
    MatrixXcd eigenvectors;
    VectorXd timescales;  ///< |1 / Re lambda|, infinity for Re lambda = 0
    double max_residual = 0.0;  ///< max_l |L xi_l - lambda_l xi_l| / |xi_l|
    std::vector<std::string> warnings;

    int size() const { return static_cast<int>(eigenvalues.size()); }
};

SpectralDecomposition decompose(const MatrixXd& L);
SpectralDecomposition decompose(const GeneratorEstimate& est);

/// phi_l(x_k), m x n.
MatrixXcd eigenfunction_values(const SpectralDecomposition& dec, const Dictionary& dict, const MatrixXd& points);

/// Rescales eigenvector l so that its entry at `index` equals 1.
VectorXcd normalized_at(const SpectralDecomposition& dec, int l, int index);

struct ModeDecomposition {
    MatrixXcd modes;  ///< d x n, column l is v_l
    std::vector<int> active;  ///< indices with |v_l| > mode_tol
    std::vector<std::string> warnings;
};

/// V = B^T Xi^{-T}; a pseudoinverse is used (with a warning) when Xi is singular.
ModeDecomposition koopman_modes(const SpectralDecomposition& dec, const MatrixXd& selector, double mode_tol = 1e-8);

/// b(x) ~ sum_l lambda_l phi_l(x) v_l, m x d.
MatrixXd reconstruct_drift(const SpectralDecomposition& dec, const ModeDecomposition& modes, const Dictionary& dict,
                           const MatrixXd& points);

/// Orthonormal basis of the eigenspace with |lambda| < zero_tol after the
/// constant function is removed. Each vector is rescaled so that its
/// largest-magnitude entry is 1. A negative `zero_tol` means
/// 1e-6 * spectral radius.
std::vector<VectorXd> conserved_quantities(const SpectralDecomposition& dec, std::optional<int> constant_index,
                                           double zero_tol = -1.0);

/// Number of eigenvalues with |lambda| < zero_tol (same default as above).
int zero_multiplicity(const SpectralDecomposition& dec, double zero_tol = -1.0);

double spectral_radius(const SpectralDecomposition& dec);

}  // namespace gedmd
