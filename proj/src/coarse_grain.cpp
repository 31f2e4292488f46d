#include "gedmd/coarse_grain.hpp"

#include "gedmd/errors.hpp"
#include "gedmd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gedmd {

CoarseGrainMap CoarseGrainMap::identity(int d)
{
    CoarseGrainMap m;
    m.name = "identity";
    m.full_dim = d;
    m.reduced_dim = d;
    m.map = [](const VectorXd& x) { return x; };
    m.jacobian = [d](const VectorXd&) { return MatrixXd(MatrixXd::Identity(d, d)); };
    m.hessians = [d](const VectorXd&) {
        return std::vector<MatrixXd>(static_cast<std::size_t>(d), MatrixXd::Zero(d, d));
    };
    return m;
}

CoarseGrainMap CoarseGrainMap::linear(const MatrixXd& P)
{
    CoarseGrainMap m;
    m.name = "linear";
    m.full_dim = static_cast<int>(P.cols());
    m.reduced_dim = static_cast<int>(P.rows());
    const int d = m.full_dim;
    const int p = m.reduced_dim;
    m.map = [P](const VectorXd& x) { return VectorXd(P * x); };
    m.jacobian = [P](const VectorXd&) { return MatrixXd(P.transpose()); };
    m.hessians = [d, p](const VectorXd&) {
        return std::vector<MatrixXd>(static_cast<std::size_t>(p), MatrixXd::Zero(d, d));
    };
    return m;
}

CoarseGrainMap CoarseGrainMap::polar_angle()
{
    CoarseGrainMap m;
    m.name = "polar_angle";
    m.full_dim = 2;
    m.reduced_dim = 1;
    m.map = [](const VectorXd& x) { return VectorXd::Constant(1, std::atan2(x(1), x(0))); };
    m.jacobian = [](const VectorXd& x) {
        const double r2 = x(0) * x(0) + x(1) * x(1);
        MatrixXd j(2, 1);
        j << -x(1) / r2, x(0) / r2;
        return j;
    };
    m.hessians = [](const VectorXd& x) {
        const double r2 = x(0) * x(0) + x(1) * x(1);
        const double r4 = r2 * r2;
        MatrixXd h(2, 2);
        h << 2.0 * x(0) * x(1) / r4, (x(1) * x(1) - x(0) * x(0)) / r4, (x(1) * x(1) - x(0) * x(0)) / r4,
            -2.0 * x(0) * x(1) / r4;
        return std::vector<MatrixXd>{h};
    };
    return m;
}

MatrixXd CoarseGrainMap::apply(const MatrixXd& points) const
{
    if (points.cols() != full_dim)
        throw InputError("coarse-grain map: points have the wrong dimension");
    MatrixXd z(points.rows(), reduced_dim);
    for (Eigen::Index l = 0; l < points.rows(); ++l)
        z.row(l) = map(points.row(l).transpose()).transpose();
    return z;
}

SampleSet project_samples(const CoarseGrainMap& map, const SampleSet& sample)
{
    if (sample.dimension() != map.full_dim)
        throw InputError("coarse-grain: sample dimension does not match the map");
    if (!sample.has_diffusion())
        throw InputError("coarse-grain: diffusion samples are required");
    const int p = map.reduced_dim;
    const auto m = sample.points.rows();
    SampleSet out;
    out.points.resize(m, p);
    out.drift.resize(m, p);
    out.diffusion.resize(m, p * p);
    out.source = sample.source;
    out.lag = sample.lag;
    out.replicas = sample.replicas;
    out.measure_note = "image of " + sample.measure_note + " under " + map.name;
    for (Eigen::Index l = 0; l < m; ++l) {
        const VectorXd x = sample.points.row(l).transpose();
        const MatrixXd a = sample.diffusion_at(static_cast<int>(l));
        const MatrixXd jac = map.jacobian(x);
        const auto hess = map.hessians(x);
        out.points.row(l) = map.map(x).transpose();
        VectorXd bz = jac.transpose() * sample.drift.row(l).transpose();
        for (int q = 0; q < p; ++q)
            bz(q) += 0.5 * (a.cwiseProduct(hess[static_cast<std::size_t>(q)])).sum();
        out.drift.row(l) = bz.transpose();
        const MatrixXd az = jac.transpose() * a * jac;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                out.diffusion(l, i * p + j) = az(i, j);
    }
    return out;
}

MatrixXd coarse_dpsi(const CoarseGrainMap& map, const Dictionary& reduced_dict, const SampleSet& sample)
{
    if (reduced_dict.dimension() != map.reduced_dim)
        throw InputError("coarse_dpsi: reduced dictionary dimension does not match the map");
    const SampleSet reduced = project_samples(map, sample);
    const EvaluationBlock block = reduced_dict.evaluate(reduced.points, true);
    return dpsi_stochastic(block, reduced);
}

GeneratorEstimate coarse_gedmd(const CoarseGrainMap& map, const Dictionary& reduced_dict, const SampleSet& sample,
                               const GeneratorOptions& options)
{
    if (reduced_dict.dimension() != map.reduced_dim)
        throw InputError("coarse_gedmd: reduced dictionary dimension does not match the map");
    return gedmd_stochastic(reduced_dict, project_samples(map, sample), options);
}

GeneratorEstimate coarse_gedmd_reversible(const CoarseGrainMap& map, const Dictionary& reduced_dict,
                                          const SampleSet& sample, const GeneratorOptions& options)
{
    if (reduced_dict.dimension() != map.reduced_dim)
        throw InputError("coarse_gedmd_reversible: reduced dictionary dimension does not match the map");
    return gedmd_reversible(reduced_dict, project_samples(map, sample), options);
}

namespace {

MatrixXd mean_force_frame(const MatrixXd& jac, bool& ok)
{
    const MatrixXd gram = jac.transpose() * jac;
    Eigen::JacobiSVD<MatrixXd> svd(gram);
    const auto& s = svd.singularValues();
    ok = s(s.size() - 1) > 1e-12 * s(0) && s(0) > 0.0 && jac.allFinite();
    if (!ok)
        return MatrixXd();
    return jac * gram.inverse();
}

}  // namespace

LocalMeanForce local_mean_force(const CoarseGrainMap& map, const MatrixXd& points, const VectorField& potential_gradient,
                                double beta)
{
    const int d = map.full_dim;
    const int p = map.reduced_dim;
    const double h = 1e-5;
    std::vector<Eigen::Index> kept;
    MatrixXd force(points.rows(), p);
    LocalMeanForce out;
    for (Eigen::Index l = 0; l < points.rows(); ++l) {
        const VectorXd x = points.row(l).transpose();
        bool ok = false;
        const MatrixXd g = mean_force_frame(map.jacobian(x), ok);
        if (!ok) {
            ++out.excluded;
            continue;
        }
        VectorXd div = VectorXd::Zero(p);
        for (int j = 0; j < d; ++j) {
            VectorXd xp = x, xm = x;
            const double step = h * std::max(1.0, std::abs(x(j)));
            xp(j) += step;
            xm(j) -= step;
            bool okp = false, okm = false;
            const MatrixXd gp = mean_force_frame(map.jacobian(xp), okp);
            const MatrixXd gm = mean_force_frame(map.jacobian(xm), okm);
            if (!okp || !okm) {
                ok = false;
                break;
            }
            div += ((gp.row(j) - gm.row(j)) / (2.0 * step)).transpose();
        }
        if (!ok) {
            ++out.excluded;
            continue;
        }
        const VectorXd f = -beta * g.transpose() * potential_gradient(x) + div;
        force.row(static_cast<Eigen::Index>(kept.size())) = f.transpose();
        kept.push_back(l);
    }
    const auto m = static_cast<Eigen::Index>(kept.size());
    out.force = force.topRows(m);
    out.z.resize(m, p);
    for (Eigen::Index i = 0; i < m; ++i)
        out.z.row(i) = map.map(points.row(kept[static_cast<std::size_t>(i)]).transpose()).transpose();
    return out;
}

ForceMatchResult force_matching(const LocalMeanForce& data, const Dictionary& basis, double svd_cutoff)
{
    const int p = static_cast<int>(data.z.cols());
    if (basis.dimension() != p)
        throw InputError("force_matching: basis dimension does not match the reduced coordinate");
    if (data.z.rows() < 1)
        throw InputError("force_matching: no usable samples");
    ForceMatchResult out;
    out.reduced_dim = p;
    out.excluded = data.excluded;
    if (data.excluded > 0)
        out.warnings.push_back(std::to_string(data.excluded) +
                               " samples excluded because the coarse-graining Jacobian is rank deficient");
    if (p == 1) {
        const MatrixXd psi = basis.values(data.z);
        const ScaledSvd svd = scaled_svd(psi, svd_cutoff);
        out.coefficients = svd.solve_right(data.force.transpose()).transpose();
        const VectorXd fitted = psi.transpose() * out.coefficients;
        out.train_rms = std::sqrt((fitted - data.force.col(0)).squaredNorm() / static_cast<double>(fitted.size()));
        return out;
    }
    // Fit F = c^T psi so that -grad F matches the force in every component.
    const EvaluationBlock block = basis.evaluate(data.z, false);
    const auto m = data.z.rows();
    MatrixXd stacked(basis.size(), m * p);
    VectorXd target(m * p);
    for (int q = 0; q < p; ++q) {
        stacked.middleCols(q * m, m) = -block.gradient(q);
        target.segment(q * m, m) = data.force.col(q);
    }
    const ScaledSvd svd = scaled_svd(stacked, svd_cutoff);
    out.coefficients = svd.solve_right(target.transpose()).transpose();
    const VectorXd fitted = stacked.transpose() * out.coefficients;
    out.train_rms = std::sqrt((fitted - target).squaredNorm() / static_cast<double>(target.size()));
    return out;
}

ForceMatchResult force_matching(const SampleSet& sample, const VectorField& potential_gradient,
                                const CoarseGrainMap& map, const Dictionary& basis, double beta)
{
    return force_matching(local_mean_force(map, sample.points, potential_gradient, beta), basis);
}

VectorXd integrate_potential(const ForceMatchResult& fit, const Dictionary& basis, const VectorXd& grid)
{
    if (fit.reduced_dim != 1)
        throw InputError("integrate_potential: only one-dimensional gradient fits are integrated");
    const VectorXd g = basis.values(MatrixXd(grid)).transpose() * fit.coefficients;
    VectorXd f = VectorXd::Zero(grid.size());
    for (Eigen::Index i = 1; i < grid.size(); ++i)
        f(i) = f(i - 1) - 0.5 * (g(i) + g(i - 1)) * (grid(i) - grid(i - 1));
    return f;
}

std::vector<MatrixXd> diffusion_design(const Dictionary& reduced_dict, const MatrixXd& z,
                                       const Dictionary& diffusion_basis, std::size_t chunk)
{
    const int p = reduced_dict.dimension();
    if (diffusion_basis.dimension() != p || z.cols() != p)
        throw InputError("diffusion_design: dimensions do not match");
    const EvaluationBlock block = reduced_dict.evaluate(z, false);
    const MatrixXd chi = diffusion_basis.values(z);  // Q x m
    std::vector<MatrixXd> out;
    for (int q = 0; q < diffusion_basis.size(); ++q) {
        MatrixXd a = MatrixXd::Zero(reduced_dict.size(), reduced_dict.size());
        for (int k = 0; k < p; ++k) {
            const MatrixXd weighted = block.gradient(k) * chi.row(q).transpose().asDiagonal();
            a += chunked_outer_mean(weighted, block.gradient(k), chunk);
        }
        a *= -0.5;
        out.push_back(0.5 * (a + a.transpose()));
    }
    return out;
}

namespace {

DiffusionFit solve_diffusion(const MatrixXd& A_hat, const std::vector<MatrixXd>& design, bool positivity)
{
    const auto n2 = A_hat.size();
    MatrixXd lhs(n2, static_cast<Eigen::Index>(design.size()));
    for (std::size_t q = 0; q < design.size(); ++q)
        lhs.col(static_cast<Eigen::Index>(q)) = design[q].reshaped();
    const VectorXd rhs = A_hat.reshaped();
    DiffusionFit fit;
    fit.theta = positivity ? nnls(lhs, rhs) : pinv(lhs, 1e-12) * rhs;
    fit.residual = (lhs * fit.theta - rhs).norm();
    return fit;
}

}  // namespace

DiffusionFit fit_diffusion(const MatrixXd& A_hat, const Dictionary& reduced_dict, const MatrixXd& z,
                           const Dictionary& diffusion_basis, bool positivity)
{
    if (A_hat.rows() != reduced_dict.size() || A_hat.cols() != reduced_dict.size())
        throw InputError("fit_diffusion: A_hat does not match the reduced dictionary");
    return solve_diffusion(A_hat, diffusion_design(reduced_dict, z, diffusion_basis), positivity);
}

MatrixXd model_generator(const DiffusionFit& fit, const std::vector<MatrixXd>& design, const MatrixXd& G_hat,
                         double svd_cutoff)
{
    MatrixXd a = MatrixXd::Zero(G_hat.rows(), G_hat.cols());
    for (std::size_t q = 0; q < design.size(); ++q)
        a += fit.theta(static_cast<Eigen::Index>(q)) * design[q];
    return a * pinv(G_hat, svd_cutoff);
}

double ReducedModel::force(double z) const
{
    return force_basis.values(MatrixXd::Constant(1, 1, z)).col(0).dot(force_coeffs);
}

double ReducedModel::diffusion(double z) const
{
    return diffusion_basis.values(MatrixXd::Constant(1, 1, z)).col(0).dot(theta);
}

double ReducedModel::diffusion_slope(double z) const
{
    return diffusion_basis.evaluate(MatrixXd::Constant(1, 1, z), false).gradient(0).col(0).dot(theta);
}

double ReducedModel::drift(double z) const
{
    // g ~ -F', so -1/2 a F' = 1/2 a g
    return 0.5 * diffusion(z) * force(z) + 0.5 * diffusion_slope(z);
}

VectorXd ReducedModel::drift(const VectorXd& z) const
{
    const MatrixXd zm = z;
    const VectorXd g = force_basis.values(zm).transpose() * force_coeffs;
    const EvaluationBlock chi = diffusion_basis.evaluate(zm, false);
    const VectorXd a = chi.values.transpose() * theta;
    const VectorXd da = chi.gradient(0).transpose() * theta;
    return 0.5 * a.cwiseProduct(g) + 0.5 * da;
}

nlohmann::json ReducedModel::to_json() const
{
    nlohmann::json j;
    j["force_basis"] = force_basis.to_json();
    j["force_coefficients"] = std::vector<double>(force_coeffs.data(), force_coeffs.data() + force_coeffs.size());
    j["diffusion_basis"] = diffusion_basis.to_json();
    j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    if (galerkin_A.size() > 0) {
        j["galerkin_A"] = matrix_to_json(galerkin_A);
        j["galerkin_G"] = matrix_to_json(galerkin_G);
    }
    return j;
}

ReducedModel drift_from_potential(const Dictionary& force_basis, const VectorXd& force_coeffs,
                                  const Dictionary& diffusion_basis, const VectorXd& theta)
{
    if (force_basis.dimension() != 1 || diffusion_basis.dimension() != 1)
        throw InputError("drift_from_potential: one-dimensional bases required");
    if (force_coeffs.size() != force_basis.size() || theta.size() != diffusion_basis.size())
        throw InputError("drift_from_potential: coefficient sizes do not match the bases");
    return ReducedModel{force_basis, force_coeffs, diffusion_basis, theta, {}, {}};
}

BandwidthSelection select_bandwidth(
    const std::vector<double>& bandwidths, int samples, int folds, std::uint64_t seed,
    const std::function<double(double, const std::vector<int>&, const std::vector<int>&)>& loss)
{
    if (bandwidths.empty())
        throw InputError("select_bandwidth: empty bandwidth grid");
    if (folds < 2 || samples < folds)
        throw InputError("select_bandwidth: need at least two folds and one sample per fold");
    std::vector<int> perm(static_cast<std::size_t>(samples));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = make_rng(seed, 7);
    std::shuffle(perm.begin(), perm.end(), rng);
    BandwidthSelection out;
    double best_loss = std::numeric_limits<double>::infinity();
    for (double bw : bandwidths) {
        double total = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<int> train, validation;
            for (int i = 0; i < samples; ++i)
                (i % folds == f ? validation : train).push_back(perm[static_cast<std::size_t>(i)]);
            std::sort(train.begin(), train.end());
            std::sort(validation.begin(), validation.end());
            total += loss(bw, train, validation);
        }
        const double mean = total / folds;
        out.mean_loss.push_back(mean);
        if (mean < best_loss) {
            best_loss = mean;
            out.best = bw;
        }
    }
    return out;
}

namespace {

MatrixXd rows_of(const MatrixXd& a, const std::vector<int>& idx)
{
    MatrixXd out(static_cast<Eigen::Index>(idx.size()), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = a.row(idx[i]);
    return out;
}

}  // namespace

double force_matching_cv_loss(const LocalMeanForce& data, const VectorXd& centers, double period, double bandwidth,
                              const std::vector<int>& train, const std::vector<int>& validation)
{
    const Dictionary basis = Dictionary::periodic_gaussians(centers, bandwidth, period);
    LocalMeanForce fold{rows_of(data.z, train), rows_of(data.force, train), 0};
    const ForceMatchResult fit = force_matching(fold, basis);
    const MatrixXd zv = rows_of(data.z, validation);
    const VectorXd pred = basis.values(zv).transpose() * fit.coefficients;
    const VectorXd truth = rows_of(data.force, validation).col(0);
    return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

double diffusion_cv_loss(const Dictionary& reduced_dict, const SampleSet& reduced, const VectorXd& centers,
                         double period, double bandwidth, const std::vector<int>& train,
                         const std::vector<int>& validation)
{
    const Dictionary basis = Dictionary::periodic_gaussians(centers, bandwidth, period);
    auto subset = [&](const std::vector<int>& idx) {
        SampleSet s;
        s.points = rows_of(reduced.points, idx);
        s.drift = rows_of(reduced.drift, idx);
        s.diffusion = rows_of(reduced.diffusion, idx);
        return s;
    };
    const SampleSet tr = subset(train);
    const SampleSet va = subset(validation);
    const GeneratorEstimate est_tr = gedmd_reversible(reduced_dict, tr);
    const DiffusionFit fit = fit_diffusion(est_tr.A_hat, reduced_dict, tr.points, basis, true);
    const GeneratorEstimate est_va = gedmd_reversible(reduced_dict, va);
    const auto design_va = diffusion_design(reduced_dict, va.points, basis);
    MatrixXd a = MatrixXd::Zero(reduced_dict.size(), reduced_dict.size());
    for (std::size_t q = 0; q < design_va.size(); ++q)
        a += fit.theta(static_cast<Eigen::Index>(q)) * design_va[q];
    return (a - est_va.A_hat).norm() / static_cast<double>(reduced_dict.size());
}

}  // namespace gedmd
