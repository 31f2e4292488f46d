#pragma once

#include "gedmd/linalg.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gedmd {

using VectorField = std::function<VectorXd(const VectorXd&)>;
using MatrixField = std::function<MatrixXd(const VectorXd&)>;
using ScalarField = std::function<double(const VectorXd&)>;

/// dX = b(X) dt + sigma(X) dW with sigma of shape d x s. s = 0 is an ODE.
struct SdeModel {
    std::string name;
    int dimension = 1;
    int noise_dim = 0;
    VectorField drift;
    MatrixField diffusion;  ///< sigma(x), d x s
    ScalarField potential;  ///< optional
    VectorField potential_gradient;  ///< optional
    std::optional<double> inverse_temperature;
    bool reversible = false;
    bool stratonovich = false;
    /// Optional analytic Jacobian of sigma: entry j is d sigma / d x_j (d x s).
    std::function<std::vector<MatrixXd>(const VectorXd&)> diffusion_jacobian;

    bool deterministic() const { return noise_dim == 0; }
    MatrixXd sigma(const VectorXd& x) const;
    /// a(x) = sigma sigma^T
    MatrixXd diffusion_matrix(const VectorXd& x) const;
};

/// dX = -alpha (X - u) dt + sqrt(2 / beta) dW in one dimension.
SdeModel ornstein_uhlenbeck(double alpha, double beta, double u = 0.0);

/// x1' = gamma x1, x2' = delta (x2 - x1^2).
SdeModel quadratic_system(double gamma, double delta);

/// b = -grad((x1^2 - 1)^2 + x2^2), sigma = [[0.7, x1], [0, 0.5]].
SdeModel double_well();

/// Stratonovich Duffing oscillator with sigma = eps * b (one noise channel).
SdeModel duffing(double alpha, double beta, double eps);

/// Overdamped Langevin dynamics in V(r, phi) = cos(k phi) + sec(phi / 2) + 10 (r - 1)^2 + 1 / r.
SdeModel lemon_slice(int k, double beta);

/// Deterministic gradient flow x' = -grad V for a tilted, coupled double well
/// without symmetries.
SdeModel gradient_system();

/// Seeded Euler-Maruyama; returns (steps + 1) x d.
MatrixXd integrate_em(const SdeModel& model, const VectorXd& x0, double dt, long steps, std::uint64_t seed);

/// Classical RK4 for the drift only; returns (steps + 1) x d.
MatrixXd integrate_rk4(const SdeModel& model, const VectorXd& x0, double dt, long steps);

/// Noise-induced drift c_i = sum_jk d sigma_ik / d x_j sigma_jk.
VectorXd noise_induced_drift(const SdeModel& model, const VectorXd& x, double fd_step = 1e-6);

/// Ito form of a Stratonovich model: drift b + c / 2.
SdeModel stratonovich_to_ito(const SdeModel& model, double fd_step = 1e-6);

/// Generator matrix of the 1D OU process on monomials 1, x, ..., x^max_degree.
/// Column k holds the coefficients of L x^k.
MatrixXd analytic_ou_generator(double alpha, double beta, int max_degree);

}  // namespace gedmd
