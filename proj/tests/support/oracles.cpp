#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gedmd::oracle {

double uniform_moment(double lo, double hi, int k)
{
    return (std::pow(hi, k + 1) - std::pow(lo, k + 1)) / ((k + 1) * (hi - lo));
}

MatrixXd uniform_monomial_gram(double lo, double hi, int degree)
{
    MatrixXd g(degree + 1, degree + 1);
    for (int i = 0; i <= degree; ++i)
        for (int j = 0; j <= degree; ++j)
            g(i, j) = uniform_moment(lo, hi, i + j);
    return g;
}

VectorXd polynomial(const Dictionary& dict, const std::vector<std::pair<std::vector<int>, double>>& terms)
{
    VectorXd c = VectorXd::Zero(dict.size());
    for (const auto& [exps, value] : terms) {
        bool found = false;
        for (int i = 0; i < dict.size(); ++i)
            if (dict.exponents(i) == exps) {
                c(i) += value;
                found = true;
            }
        if (!found)
            throw std::invalid_argument("polynomial: term outside the dictionary");
    }
    return c;
}

double lemon_slice_angle_diffusion(double beta)
{
    // Radial marginal r exp(-beta (10 (r - 1)^2 + 1 / r)) by the composite Simpson rule.
    const int n = 200000;
    const double lo = 1e-3, hi = 4.0;
    const double h = (hi - lo) / n;
    double mass = 0.0, inv_r2 = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double r = lo + i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const double rho = r * std::exp(-beta * (10.0 * (r - 1.0) * (r - 1.0) + 1.0 / r));
        mass += w * rho;
        inv_r2 += w * rho / (r * r);
    }
    return 2.0 / beta * inv_r2 / mass;
}

double lemon_slice_free_energy(int k, double phi)
{
    return std::cos(k * phi) + 1.0 / std::cos(0.5 * phi);
}

VectorXd lemon_slice_fv_eigenvalues(int k, double beta, int cells, int count, double cap)
{
    const double pi = std::numbers::pi;
    const double h = 2.0 * pi / cells;
    std::vector<double> F;
    for (int i = 0; i < cells; ++i) {
        const double f = lemon_slice_free_energy(k, -pi + (i + 0.5) * h);
        if (f < cap)
            F.push_back(f);
    }
    // Rates Q_{i,i+1} = D / h^2 exp(-beta (F_{i+1} - F_i) / 2) with D = a / 2.
    // Symmetrized by the invariant measure they give the tridiagonal
    // S_{i,i+1} = D / h^2 and S_ii = -(sum of outgoing rates).
    const double D = 0.5 * lemon_slice_angle_diffusion(beta);
    const auto n = static_cast<Eigen::Index>(F.size());
    VectorXd diag = VectorXd::Zero(n);
    VectorXd off = VectorXd::Constant(n - 1, D / (h * h));
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double dF = F[static_cast<std::size_t>(i + 1)] - F[static_cast<std::size_t>(i)];
        diag(i) -= D / (h * h) * std::exp(-0.5 * beta * dF);
        diag(i + 1) -= D / (h * h) * std::exp(0.5 * beta * dF);
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver;
    solver.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    VectorXd ev = solver.eigenvalues().reverse();
    return ev.head(count);
}

MatrixXd fd_gradient(const Dictionary& dict, const VectorXd& x, double step)
{
    const int d = dict.dimension();
    MatrixXd out(dict.size(), d);
    for (int k = 0; k < d; ++k) {
        MatrixXd pts(2, d);
        pts.row(0) = x.transpose();
        pts.row(1) = x.transpose();
        pts(0, k) += step;
        pts(1, k) -= step;
        const MatrixXd v = dict.values(pts);
        out.col(k) = (v.col(0) - v.col(1)) / (2.0 * step);
    }
    return out;
}

VectorXd fd_hessian(const Dictionary& dict, const VectorXd& x, int j, int k, double step)
{
    const int d = dict.dimension();
    if (j == k) {
        MatrixXd pts(3, d);
        for (int r = 0; r < 3; ++r)
            pts.row(r) = x.transpose();
        pts(0, j) += step;
        pts(2, j) -= step;
        const MatrixXd v = dict.values(pts);
        return (v.col(0) - 2.0 * v.col(1) + v.col(2)) / (step * step);
    }
    MatrixXd pts(4, d);
    for (int r = 0; r < 4; ++r)
        pts.row(r) = x.transpose();
    pts(0, j) += step;
    pts(0, k) += step;
    pts(1, j) += step;
    pts(1, k) -= step;
    pts(2, j) -= step;
    pts(2, k) += step;
    pts(3, j) -= step;
    pts(3, k) -= step;
    const MatrixXd v = dict.values(pts);
    return (v.col(0) - v.col(1) - v.col(2) + v.col(3)) / (4.0 * step * step);
}

double relative_difference(double a, double b, double floor)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x, double step)
{
    VectorXd g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        VectorXd p = x, m = x;
        p(k) += step;
        m(k) -= step;
        g(k) = (f(p) - f(m)) / (2.0 * step);
    }
    return g;
}

}  // namespace gedmd::oracle
