#pragma once

#include "gedmd/dictionary.hpp"
#include "gedmd/sampling.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace gedmd {

struct GeneratorOptions {
    double svd_cutoff = 1e-10;  ///< relative to the largest singular value
    std::size_t chunk = 1024;   ///< samples per accumulation chunk
};

/// Empirical matrices and the generator matrix M = A G^+ (so that L = M^T).
struct GeneratorEstimate {
    MatrixXd A_hat;
    MatrixXd G_hat;
    MatrixXd M;
    MatrixXd adjoint_M;
    int rank = 0;
    double svd_cutoff = 0.0;
    std::size_t samples = 0;
    nlohmann::json dictionary;
    std::vector<std::string> warnings;

    int size() const { return static_cast<int>(M.rows()); }
    MatrixXd L() const { return M.transpose(); }
    nlohmann::json to_json() const;
};

/// Values and generator images dpsi_k(x_l) for every sample, both n x m.
struct GeneratorData {
    MatrixXd psi;
    MatrixXd dpsi;
};

/// dpsi_k = b . grad psi_k
MatrixXd dpsi_deterministic(const EvaluationBlock& block, const SampleSet& sample);
/// dpsi_k = b . grad psi_k + 1/2 a : hess psi_k
MatrixXd dpsi_stochastic(const EvaluationBlock& block, const SampleSet& sample);

enum class GeneratorKind { deterministic, stochastic };

/// Evaluates the dictionary in chunks so that derivative tensors never exist
/// for all samples at once.
GeneratorData generator_data(const Dictionary& dict, const SampleSet& sample, GeneratorKind kind,
                             std::size_t chunk = 1024);

/// Least-squares fit of dpsi ~ M psi from raw data matrices.
GeneratorEstimate estimate_from_data(const MatrixXd& psi, const MatrixXd& dpsi, const GeneratorOptions& options = {});

GeneratorEstimate gedmd_deterministic(const EvaluationBlock& block, const SampleSet& sample,
                                      const GeneratorOptions& options = {});
GeneratorEstimate gedmd_deterministic(const Dictionary& dict, const SampleSet& sample,
                                      const GeneratorOptions& options = {});

GeneratorEstimate gedmd_stochastic(const EvaluationBlock& block, const SampleSet& sample,
                                   const GeneratorOptions& options = {});
GeneratorEstimate gedmd_stochastic(const Dictionary& dict, const SampleSet& sample,
                                   const GeneratorOptions& options = {});

/// A = -1/(2m) sum_l grad Psi(x_l) a(x_l) grad Psi(x_l)^T. Needs only first
/// derivatives; valid for reversible dynamics sampled from the invariant measure.
GeneratorEstimate gedmd_reversible(const EvaluationBlock& block, const SampleSet& sample,
                                   const GeneratorOptions& options = {});
GeneratorEstimate gedmd_reversible(const Dictionary& dict, const SampleSet& sample,
                                   const GeneratorOptions& options = {});

/// M* = A^T G^+.
MatrixXd perron_frobenius_estimate(const GeneratorEstimate& est);

/// K = Psi_Y Psi_X^+ in the same orientation as M.
MatrixXd edmd(const MatrixXd& psi_x, const MatrixXd& psi_y, double svd_cutoff = 1e-10);

/// (1 / tau) log(K) with the principal branch.
MatrixXd edmd_with_log(const MatrixXd& points, const MatrixXd& lagged_points, const Dictionary& dict, double tau,
                       double svd_cutoff = 1e-10);

nlohmann::json matrix_to_json(const MatrixXd& a);
MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace gedmd
