#pragma once

#include "gedmd/dictionary.hpp"
#include "gedmd/generator.hpp"

#include "json.hpp"

#include <string>
#include <utility>
#include <vector>

namespace gedmd {

/// Coefficients of L g for g = B^T psi, one column per state dimension (n x d).
MatrixXd identify_drift(const GeneratorEstimate& est, const MatrixXd& selector);
MatrixXd identify_drift(const MatrixXd& L, const MatrixXd& selector);

/// Column of the upper-triangle pair (i, j), i <= j, in diffusion coefficient matrices.
int triangle_index(int i, int j, int d);

/// a_ij = L(x_i x_j) - b_i x_j - b_j x_i in psi-coefficients, n x d(d+1)/2.
///
/// Every product is re-expanded in the dictionary by least squares on
/// `points`; a relative residual above `closure_tol` raises ClosureError.
MatrixXd identify_diffusion(const MatrixXd& L, const Dictionary& dict, const MatrixXd& points,
                            const MatrixXd& drift_coeffs, double closure_tol = 1e-6);
MatrixXd identify_diffusion(const GeneratorEstimate& est, const Dictionary& dict, const MatrixXd& points,
                            const MatrixXd& drift_coeffs, double closure_tol = 1e-6);

/// Least-squares problem design * X ~ targets with design m x n, targets m x k.
struct FitProblem {
    MatrixXd design;
    MatrixXd targets;
    double svd_cutoff = 1e-10;
};

/// design = psi^T, targets = dpsi^T; the unthresholded solution is L = M^T.
FitProblem generator_fit_problem(const GeneratorData& data, double svd_cutoff = 1e-10);

struct ThresholdResult {
    MatrixXd coefficients;  ///< n x k
    std::vector<std::pair<int, int>> history;  ///< (iteration, surviving coefficients)
    std::vector<std::string> warnings;
};

/// Sequential thresholded least squares: zero |c| < delta, refit each target
/// on its surviving support, repeat.
ThresholdResult hard_threshold(const FitProblem& problem, double delta, int iterations = 10);

/// Thresholds a-coefficients by refitting their values at `points`.
ThresholdResult threshold_diffusion(const MatrixXd& diffusion_coeffs, const Dictionary& dict, const MatrixXd& points,
                                    double delta, int iterations = 10);

/// a(x) from upper-triangle coefficients, d x d.
MatrixXd evaluate_diffusion(const MatrixXd& diffusion_coeffs, const Dictionary& dict, const VectorXd& x);

/// Lower-triangular factors of the clipped a(x_l) at each point.
/// Throws IdentificationQualityError when min eig a < -1e-6 trace a.
std::vector<MatrixXd> diffusion_factor(const MatrixXd& diffusion_coeffs, const Dictionary& dict,
                                       const MatrixXd& points);

struct IdentifiedModel {
    MatrixXd drift_coeffs;
    MatrixXd diffusion_coeffs;
    std::vector<std::pair<int, int>> threshold_history;
    double train_rms = 0.0;
    double validation_rms = 0.0;
    std::vector<std::string> warnings;

    /// Per-function term lists (index, term, coefficient) with |c| > drop_below.
    nlohmann::json to_json(const Dictionary& dict, double drop_below = 0.0) const;
};

/// Mean absolute coefficient difference.
double coefficient_error(const MatrixXd& estimated, const MatrixXd& truth);

}  // namespace gedmd
