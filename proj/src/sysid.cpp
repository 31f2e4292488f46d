#include "gedmd/sysid.hpp"

#include "gedmd/errors.hpp"

#include <cmath>
#include <sstream>

namespace gedmd {

MatrixXd identify_drift(const MatrixXd& L, const MatrixXd& selector)
{
    if (L.cols() != selector.rows())
        throw InputError("identify_drift: selector does not match the generator size");
    return L * selector;
}

MatrixXd identify_drift(const GeneratorEstimate& est, const MatrixXd& selector)
{
    return identify_drift(est.L(), selector);
}

int triangle_index(int i, int j, int d)
{
    if (i > j)
        std::swap(i, j);
    return i * d - i * (i - 1) / 2 + (j - i);
}

namespace {

VectorXd expand(const ScaledSvd& svd, const MatrixXd& psi, const VectorXd& target, double tol, const std::string& what)
{
    const MatrixXd coeffs_row = svd.solve_right(target.transpose());
    const VectorXd coeffs = coeffs_row.transpose();
    const VectorXd fitted = psi.transpose() * coeffs;
    const double scale = target.norm();
    const double residual = (fitted - target).norm();
    if (residual > tol * std::max(scale, 1e-300) && residual > 0.0) {
        std::ostringstream msg;
        msg << "identify_diffusion: " << what << " is not in the span of the dictionary (relative residual "
            << residual / std::max(scale, 1e-300) << "); use a larger dictionary";
        throw ClosureError(msg.str());
    }
    return coeffs;
}

}  // namespace

MatrixXd identify_diffusion(const MatrixXd& L, const Dictionary& dict, const MatrixXd& points,
                            const MatrixXd& drift_coeffs, double closure_tol)
{
    const int d = dict.dimension();
    const int n = dict.size();
    if (L.rows() != n || drift_coeffs.rows() != n || drift_coeffs.cols() != d)
        throw InputError("identify_diffusion: shapes do not match the dictionary");
    const MatrixXd psi = dict.values(points);
    const ScaledSvd svd = scaled_svd(psi, 1e-12);
    const MatrixXd drift_values = psi.transpose() * drift_coeffs;  // m x d
    MatrixXd out(n, d * (d + 1) / 2);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            const std::string pair = "x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1);
            const VectorXd prod = points.col(i).cwiseProduct(points.col(j));
            const VectorXd p = expand(svd, psi, prod, closure_tol, "product " + pair);
            const VectorXd bi_xj = drift_values.col(i).cwiseProduct(points.col(j));
            const VectorXd bj_xi = drift_values.col(j).cwiseProduct(points.col(i));
            const VectorXd q1 = expand(svd, psi, bi_xj, closure_tol, "b" + std::to_string(i + 1) + "*x" + std::to_string(j + 1));
            const VectorXd q2 = expand(svd, psi, bj_xi, closure_tol, "b" + std::to_string(j + 1) + "*x" + std::to_string(i + 1));
            out.col(triangle_index(i, j, d)) = L * p - q1 - q2;
        }
    }
    return out;
}

MatrixXd identify_diffusion(const GeneratorEstimate& est, const Dictionary& dict, const MatrixXd& points,
                            const MatrixXd& drift_coeffs, double closure_tol)
{
    return identify_diffusion(est.L(), dict, points, drift_coeffs, closure_tol);
}

FitProblem generator_fit_problem(const GeneratorData& data, double svd_cutoff)
{
    FitProblem p;
    p.design = data.psi.transpose();
    p.targets = data.dpsi.transpose();
    p.svd_cutoff = svd_cutoff;
    return p;
}

namespace {

VectorXd solve_support(const FitProblem& problem, const std::vector<int>& support, Eigen::Index target)
{
    const auto n = problem.design.cols();
    VectorXd out = VectorXd::Zero(n);
    if (support.empty())
        return out;
    MatrixXd sub(static_cast<Eigen::Index>(support.size()), problem.design.rows());
    for (std::size_t s = 0; s < support.size(); ++s)
        sub.row(static_cast<Eigen::Index>(s)) = problem.design.col(support[s]).transpose();
    const ScaledSvd svd = scaled_svd(sub, problem.svd_cutoff);
    const MatrixXd c = svd.solve_right(problem.targets.col(target).transpose());
    for (std::size_t s = 0; s < support.size(); ++s)
        out(support[s]) = c(0, static_cast<Eigen::Index>(s));
    return out;
}

}  // namespace

ThresholdResult hard_threshold(const FitProblem& problem, double delta, int iterations)
{
    if (delta < 0.0)
        throw InputError("hard_threshold: delta must be nonnegative");
    if (problem.design.rows() != problem.targets.rows())
        throw InputError("hard_threshold: design and targets have different sample counts");
    const auto n = problem.design.cols();
    const auto k = problem.targets.cols();
    ThresholdResult result;
    // Full-support solve shares the code path of the generator estimate.
    const ScaledSvd full = scaled_svd(MatrixXd(problem.design.transpose()), problem.svd_cutoff);
    result.coefficients = full.solve_right(MatrixXd(problem.targets.transpose())).transpose();
    result.history.emplace_back(0, static_cast<int>(n * k));
    if (delta == 0.0)
        return result;
    for (int it = 1; it <= iterations; ++it) {
        int surviving = 0;
        for (Eigen::Index t = 0; t < k; ++t) {
            std::vector<int> support;
            for (Eigen::Index i = 0; i < n; ++i)
                if (std::abs(result.coefficients(i, t)) >= delta)
                    support.push_back(static_cast<int>(i));
            surviving += static_cast<int>(support.size());
            result.coefficients.col(t) = solve_support(problem, support, t);
        }
        result.history.emplace_back(it, surviving);
        if (surviving == 0) {
            result.warnings.push_back("hard_threshold: every coefficient fell below the threshold; zero model returned");
            break;
        }
    }
    return result;
}

ThresholdResult threshold_diffusion(const MatrixXd& diffusion_coeffs, const Dictionary& dict, const MatrixXd& points,
                                    double delta, int iterations)
{
    FitProblem p;
    p.design = dict.values(points).transpose();
    p.targets = p.design * diffusion_coeffs;
    return hard_threshold(p, delta, iterations);
}

MatrixXd evaluate_diffusion(const MatrixXd& diffusion_coeffs, const Dictionary& dict, const VectorXd& x)
{
    const int d = dict.dimension();
    const VectorXd psi = dict.values(x.transpose()).col(0);
    MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j)
            a(i, j) = a(j, i) = diffusion_coeffs.col(triangle_index(i, j, d)).dot(psi);
    return a;
}

std::vector<MatrixXd> diffusion_factor(const MatrixXd& diffusion_coeffs, const Dictionary& dict,
                                       const MatrixXd& points)
{
    std::vector<MatrixXd> out;
    out.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index l = 0; l < points.rows(); ++l) {
        const MatrixXd a = evaluate_diffusion(diffusion_coeffs, dict, points.row(l).transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
        const double trace = std::abs(a.trace());
        if (es.eigenvalues()(0) < -1e-6 * trace) {
            std::ostringstream msg;
            msg << "diffusion_factor: identified diffusion is indefinite at sample " << l << " (min eigenvalue "
                << es.eigenvalues()(0) << ", trace " << a.trace() << ")";
            throw IdentificationQualityError(msg.str());
        }
        out.push_back(psd_cholesky(clip_psd(a)));
    }
    return out;
}

nlohmann::json IdentifiedModel::to_json(const Dictionary& dict, double drop_below) const
{
    auto terms_of = [&](const VectorXd& c) {
        auto arr = nlohmann::json::array();
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            if (std::abs(c(i)) <= drop_below)
                continue;
            arr.push_back({{"index", i}, {"term", dict.term_name(static_cast<int>(i))}, {"coefficient", c(i)}});
        }
        return arr;
    };
    const int d = dict.dimension();
    nlohmann::json j;
    j["dictionary"] = dict.to_json();
    auto drift = nlohmann::json::array();
    for (Eigen::Index k = 0; k < drift_coeffs.cols(); ++k)
        drift.push_back({{"function", "b" + std::to_string(k + 1)}, {"terms", terms_of(drift_coeffs.col(k))}});
    j["drift"] = drift;
    auto diffusion = nlohmann::json::array();
    if (diffusion_coeffs.size() > 0) {
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b)
                diffusion.push_back({{"function", "a" + std::to_string(a + 1) + std::to_string(b + 1)},
                                     {"terms", terms_of(diffusion_coeffs.col(triangle_index(a, b, d)))}});
    }
    j["diffusion"] = diffusion;
    auto hist = nlohmann::json::array();
    for (const auto& [it, count] : threshold_history)
        hist.push_back({it, count});
    j["threshold_history"] = hist;
    j["train_rms"] = train_rms;
    j["validation_rms"] = validation_rms;
    j["warnings"] = warnings;
    return j;
}

double coefficient_error(const MatrixXd& estimated, const MatrixXd& truth)
{
    if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols())
        throw InputError("coefficient_error: shapes differ");
    return (estimated - truth).cwiseAbs().mean();
}

}  // namespace gedmd
