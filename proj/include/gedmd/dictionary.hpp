#pragma once

#include "gedmd/linalg.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gedmd {

struct Interval {
    double lo = -1.0;
    double hi = 1.0;
};

/// Basis values and derivatives at a set of points.
///
/// `values` is n x m (one column per point). `gradients[k]` holds the partial
/// derivative with respect to x_k, also n x m. `hessians[j * d + k]` holds the
/// second derivative d^2/(dx_j dx_k) and is empty unless requested.
struct EvaluationBlock {
    MatrixXd values;
    std::vector<MatrixXd> gradients;
    std::vector<MatrixXd> hessians;

    int size() const { return static_cast<int>(values.rows()); }
    int samples() const { return static_cast<int>(values.cols()); }
    int dimension() const { return static_cast<int>(gradients.size()); }
    bool has_hessians() const { return !hessians.empty(); }
    const MatrixXd& gradient(int k) const { return gradients[static_cast<std::size_t>(k)]; }
    const MatrixXd& hessian(int j, int k) const
    {
        return hessians[static_cast<std::size_t>(j * dimension() + k)];
    }
};

/// Ordered set of scalar basis functions with analytic first and second
/// derivatives. Immutable after construction; evaluation is const and
/// thread-safe.
class Dictionary {
public:
    enum class Kind { monomials, gaussians, periodic_gaussians, legendre };

    /// All monomials of total degree <= max_degree in graded lexicographic
    /// order: 1, x1, ..., xd, x1^2, x1 x2, ...
    static Dictionary monomials(int dimension, int max_degree);

    /// exp(-|x - c|^2 / (2 bandwidth^2)), one function per row of `centers`.
    static Dictionary gaussians(MatrixXd centers, double bandwidth);

    /// Gaussians on a regular grid of box midpoints, `per_dim` cells per axis.
    static Dictionary gaussian_grid(const std::vector<Interval>& box, const std::vector<int>& per_dim,
                                    double bandwidth);

    /// One-dimensional Gaussians of the distance to the nearest periodic image
    /// of each center.
    static Dictionary periodic_gaussians(VectorXd centers, double bandwidth, double period);

    /// Tensor Legendre polynomials of total degree <= max_degree with each
    /// coordinate mapped affinely onto [-1, 1].
    static Dictionary legendre(int max_degree, std::vector<Interval> domain);

    Kind kind() const { return kind_; }
    int dimension() const { return dim_; }
    int size() const { return size_; }

    /// `points` is m x d (one row per point).
    EvaluationBlock evaluate(const MatrixXd& points, bool with_hessians) const;

    /// Values only, n x m.
    MatrixXd values(const MatrixXd& points) const;

    /// Selector B (n x d) with g(x) = B^T psi(x) = x.
    MatrixXd full_state_selector() const;

    /// Index of the constant function, if the dictionary contains one.
    std::optional<int> constant_index() const;

    /// Human-readable name of basis function i (e.g. "x1^2*x2").
    std::string term_name(int i) const;

    /// Multi-index of basis function i for polynomial kinds.
    const std::vector<int>& exponents(int i) const { return exponents_[static_cast<std::size_t>(i)]; }

    nlohmann::json to_json() const;
    static Dictionary from_json(const nlohmann::json& spec);

    double bandwidth() const { return bandwidth_; }
    double period() const { return period_; }
    const MatrixXd& centers() const { return centers_; }
    const std::vector<Interval>& domain() const { return domain_; }
    int max_degree() const { return max_degree_; }

private:
    Dictionary() = default;

    void evaluate_monomials(const MatrixXd& points, EvaluationBlock& out, bool hess) const;
    void evaluate_gaussians(const MatrixXd& points, EvaluationBlock& out, bool hess) const;
    void evaluate_periodic(const MatrixXd& points, EvaluationBlock& out, bool hess) const;
    void evaluate_legendre(const MatrixXd& points, EvaluationBlock& out, bool hess) const;

    Kind kind_ = Kind::monomials;
    int dim_ = 0;
    int size_ = 0;
    int max_degree_ = 0;
    double bandwidth_ = 0.0;
    double period_ = 0.0;
    MatrixXd centers_;                       // gaussians: n x d, periodic: n x 1
    std::vector<Interval> domain_;           // legendre
    std::vector<std::vector<int>> exponents_;  // monomials / legendre
};

/// Graded lexicographic multi-indices of total degree <= max_degree.
std::vector<std::vector<int>> graded_lex_exponents(int dimension, int max_degree);

const char* to_string(Dictionary::Kind kind);

}  // namespace gedmd
