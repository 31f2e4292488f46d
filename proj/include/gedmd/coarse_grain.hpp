#pragma once

#include "gedmd/dictionary.hpp"
#include "gedmd/generator.hpp"
#include "gedmd/sampling.hpp"

#include "json.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gedmd {

/// Reaction coordinate z = xi(x) with its Jacobian (d x p, column q is
/// grad xi_q) and Hessians (p matrices, d x d).
struct CoarseGrainMap {
    std::string name;
    int full_dim = 0;
    int reduced_dim = 0;
    std::function<VectorXd(const VectorXd&)> map;
    std::function<MatrixXd(const VectorXd&)> jacobian;
    std::function<std::vector<MatrixXd>(const VectorXd&)> hessians;

    static CoarseGrainMap identity(int d);
    /// z = P x with P of shape p x d.
    static CoarseGrainMap linear(const MatrixXd& P);
    /// z = atan2(x2, x1).
    static CoarseGrainMap polar_angle();

    MatrixXd apply(const MatrixXd& points) const;
};

/// Samples of the reduced process: z_l, the projected drift
/// grad xi^T b + 1/2 (a : H_q)_q and diffusion grad xi^T a grad xi.
SampleSet project_samples(const CoarseGrainMap& map, const SampleSet& sample);

/// dpsi~_k at every sample, n x m.
MatrixXd coarse_dpsi(const CoarseGrainMap& map, const Dictionary& reduced_dict, const SampleSet& sample);

GeneratorEstimate coarse_gedmd(const CoarseGrainMap& map, const Dictionary& reduced_dict, const SampleSet& sample,
                               const GeneratorOptions& options = {});
GeneratorEstimate coarse_gedmd_reversible(const CoarseGrainMap& map, const Dictionary& reduced_dict,
                                          const SampleSet& sample, const GeneratorOptions& options = {});

/// Local mean force f = -beta grad V . G + div G with G = grad xi (grad xi^T grad xi)^{-1}.
struct LocalMeanForce {
    MatrixXd z;      ///< kept samples, m' x p
    MatrixXd force;  ///< m' x p
    int excluded = 0;
};

LocalMeanForce local_mean_force(const CoarseGrainMap& map, const MatrixXd& points, const VectorField& potential_gradient,
                                double beta = 1.0);

/// Result of force matching. For p = 1 `coefficients` (n x 1) define the
/// fitted gradient field g(z) = c^T psi(z) ~ -dF/dz. For p >= 2 they define
/// F(z) = c^T psi(z) directly (least-squares curl-free fit).
struct ForceMatchResult {
    VectorXd coefficients;
    int reduced_dim = 1;
    int excluded = 0;
    double train_rms = 0.0;
    std::vector<std::string> warnings;
};

ForceMatchResult force_matching(const LocalMeanForce& data, const Dictionary& basis, double svd_cutoff = 1e-12);
ForceMatchResult force_matching(const SampleSet& sample, const VectorField& potential_gradient,
                                const CoarseGrainMap& map, const Dictionary& basis, double beta = 1.0);

/// F on a uniform grid by cumulative trapezoid of -g, anchored at F(grid(0)) = 0.
VectorXd integrate_potential(const ForceMatchResult& fit, const Dictionary& basis, const VectorXd& grid);

/// Parameter matrices A_q(i, j) = -1/2 mean_l grad psi_i(z_l) chi_q(z_l) grad psi_j(z_l).
std::vector<MatrixXd> diffusion_design(const Dictionary& reduced_dict, const MatrixXd& z,
                                       const Dictionary& diffusion_basis, std::size_t chunk = 1024);

struct DiffusionFit {
    VectorXd theta;
    double residual = 0.0;  ///< Frobenius norm of A_hat - A(theta)
};

/// argmin ||A_hat - sum_q theta_q A_q||_F, with theta >= 0 when `positivity` is set.
DiffusionFit fit_diffusion(const MatrixXd& A_hat, const Dictionary& reduced_dict, const MatrixXd& z,
                           const Dictionary& diffusion_basis, bool positivity);

/// Generator matrix M = A(theta) G^+ of the fitted diffusion model.
MatrixXd model_generator(const DiffusionFit& fit, const std::vector<MatrixXd>& design, const MatrixXd& G_hat,
                         double svd_cutoff = 1e-10);

/// One-dimensional reduced model assembled from force matching and diffusion fitting.
struct ReducedModel {
    Dictionary force_basis;
    VectorXd force_coeffs;
    Dictionary diffusion_basis;
    VectorXd theta;
    MatrixXd galerkin_A;
    MatrixXd galerkin_G;

    double force(double z) const;        ///< g(z) ~ -F'(z)
    double diffusion(double z) const;    ///< a(z)
    double diffusion_slope(double z) const;
    /// b = -1/2 a F' + 1/2 a'
    double drift(double z) const;
    VectorXd drift(const VectorXd& z) const;

    nlohmann::json to_json() const;
};

ReducedModel drift_from_potential(const Dictionary& force_basis, const VectorXd& force_coeffs,
                                  const Dictionary& diffusion_basis, const VectorXd& theta);

/// K-fold cross-validation over a bandwidth grid. `loss(bandwidth, train,
/// validation)` returns the validation RMS; the minimizing bandwidth is returned
/// together with the per-bandwidth mean losses.
struct BandwidthSelection {
    double best = 0.0;
    std::vector<double> mean_loss;
};

BandwidthSelection select_bandwidth(
    const std::vector<double>& bandwidths, int samples, int folds, std::uint64_t seed,
    const std::function<double(double, const std::vector<int>&, const std::vector<int>&)>& loss);

/// Cross-validated force-matching loss for a periodic Gaussian basis.
double force_matching_cv_loss(const LocalMeanForce& data, const VectorXd& centers, double period, double bandwidth,
                              const std::vector<int>& train, const std::vector<int>& validation);

/// Cross-validated diffusion loss for a periodic Gaussian basis: folds are
/// evaluated against the reversible A_hat of the held-out samples.
double diffusion_cv_loss(const Dictionary& reduced_dict, const SampleSet& reduced, const VectorXd& centers,
                         double period, double bandwidth, const std::vector<int>& train,
                         const std::vector<int>& validation);

}  // namespace gedmd
