#include "gedmd/sampling.hpp"

#include "gedmd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace gedmd {

const char* to_string(SampleSource source)
{
    switch (source) {
    case SampleSource::exact:
        return "exact";
    case SampleSource::trajectory_pairs:
        return "trajectory_pairs";
    case SampleSource::spawned_bursts:
        return "spawned_bursts";
    }
    return "unknown";
}

MatrixXd SampleSet::diffusion_at(int l) const
{
    const int d = dimension();
    MatrixXd a(d, d);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            a(j, k) = diffusion(l, j * d + k);
    return a;
}

void SampleSet::validate() const
{
    if (points.rows() < 1)
        throw InputError("sample set: no points");
    if (drift.rows() != points.rows() || drift.cols() != points.cols())
        throw InputError("sample set: drift samples do not match the points");
    if (!points.allFinite() || !drift.allFinite())
        throw InputError("sample set: non-finite entries");
    if (!has_diffusion())
        return;
    const int d = dimension();
    if (diffusion.rows() != points.rows() || diffusion.cols() != d * d)
        throw InputError("sample set: diffusion samples must be m x d^2");
    if (!diffusion.allFinite())
        throw InputError("sample set: non-finite diffusion entries");
    for (int l = 0; l < samples(); ++l) {
        const MatrixXd a = diffusion_at(l);
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
        if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw InputError("sample set: diffusion slice " + std::to_string(l) + " is not symmetric");
        if (d > 0) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
            if (es.eigenvalues()(0) < -1e-10)
                throw InputError("sample set: diffusion slice " + std::to_string(l) + " is indefinite");
        }
    }
}

MatrixXd sample_uniform(const std::vector<Interval>& box, int m, std::uint64_t seed)
{
    if (box.empty() || m < 1)
        throw InputError("sample_uniform: need a box and m >= 1");
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MatrixXd x(m, static_cast<Eigen::Index>(box.size()));
    for (int l = 0; l < m; ++l)
        for (std::size_t k = 0; k < box.size(); ++k)
            x(l, static_cast<Eigen::Index>(k)) = box[k].lo + (box[k].hi - box[k].lo) * unit(rng);
    return x;
}

SampleSet exact_samples(const SdeModel& model, const MatrixXd& points, bool with_diffusion, std::string measure_note)
{
    if (points.cols() != model.dimension)
        throw InputError("exact_samples: points do not match the model dimension");
    const auto m = points.rows();
    const int d = model.dimension;
    SampleSet s;
    s.points = points;
    s.drift.resize(m, d);
    s.source = SampleSource::exact;
    s.measure_note = std::move(measure_note);
    if (with_diffusion)
        s.diffusion.resize(m, d * d);
    for (Eigen::Index l = 0; l < m; ++l) {
        const VectorXd x = points.row(l).transpose();
        s.drift.row(l) = model.drift(x).transpose();
        if (with_diffusion) {
            const MatrixXd a = model.diffusion_matrix(x);
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    s.diffusion(l, j * d + k) = a(j, k);
        }
    }
    return s;
}

SampleSet kramers_moyal(const MatrixXd& trajectory, double lag)
{
    if (trajectory.rows() < 2)
        throw InputError("kramers_moyal: trajectory needs at least two points");
    if (!(lag > 0.0))
        throw InputError("kramers_moyal: lag must be positive");
    const auto m = trajectory.rows() - 1;
    const auto d = trajectory.cols();
    SampleSet s;
    s.points = trajectory.topRows(m);
    const MatrixXd inc = trajectory.bottomRows(m) - trajectory.topRows(m);
    s.drift = inc / lag;
    s.diffusion.resize(m, d * d);
    for (Eigen::Index l = 0; l < m; ++l)
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index k = 0; k < d; ++k)
                s.diffusion(l, j * d + k) = inc(l, j) * inc(l, k) / lag;
    s.source = SampleSource::trajectory_pairs;
    s.lag = lag;
    s.measure_note = "trajectory points";
    return s;
}

SampleSet central_differences(const MatrixXd& trajectory, double dt)
{
    if (trajectory.rows() < 3)
        throw InputError("central_differences: trajectory needs at least three points");
    if (!(dt > 0.0))
        throw InputError("central_differences: dt must be positive");
    const auto m = trajectory.rows() - 2;
    SampleSet s;
    s.points = trajectory.middleRows(1, m);
    s.drift = (trajectory.bottomRows(m) - trajectory.topRows(m)) / (2.0 * dt);
    s.source = SampleSource::trajectory_pairs;
    s.lag = dt;
    s.measure_note = "interior trajectory points";
    return s;
}

void add_drift_noise(SampleSet& set, double stddev, std::uint64_t seed)
{
    if (stddev < 0.0)
        throw InputError("add_drift_noise: negative standard deviation");
    if (stddev == 0.0)
        return;
    Rng rng = make_rng(seed, 1);
    std::normal_distribution<double> normal(0.0, stddev);
    for (Eigen::Index l = 0; l < set.drift.rows(); ++l)
        for (Eigen::Index k = 0; k < set.drift.cols(); ++k)
            set.drift(l, k) += normal(rng);
}

void add_diffusion_noise(SampleSet& set, double stddev, std::uint64_t seed)
{
    if (stddev < 0.0)
        throw InputError("add_diffusion_noise: negative standard deviation");
    if (stddev == 0.0 || !set.has_diffusion())
        return;
    const int d = set.dimension();
    Rng rng = make_rng(seed, 2);
    std::normal_distribution<double> normal(0.0, stddev);
    for (Eigen::Index l = 0; l < set.diffusion.rows(); ++l)
        for (int j = 0; j < d; ++j)
            for (int k = j; k < d; ++k) {
                const double e = normal(rng);
                set.diffusion(l, j * d + k) += e;
                if (k != j)
                    set.diffusion(l, k * d + j) += e;
            }
}

InverseCdfSampler::InverseCdfSampler(const std::function<double(double)>& log_density, Interval range,
                                     int grid_points)
{
    if (grid_points < 2 || !(range.hi > range.lo))
        throw InputError("InverseCdfSampler: need a nonempty range and at least two grid points");
    grid_ = VectorXd::LinSpaced(grid_points, range.lo, range.hi);
    VectorXd logp(grid_points);
    for (int i = 0; i < grid_points; ++i)
        logp(i) = log_density(grid_(i));
    double top = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_points; ++i)
        if (std::isfinite(logp(i)))
            top = std::max(top, logp(i));
    if (!std::isfinite(top))
        throw InputError("InverseCdfSampler: density vanishes on the grid");
    VectorXd p(grid_points);
    for (int i = 0; i < grid_points; ++i)
        p(i) = std::isfinite(logp(i)) ? std::exp(logp(i) - top) : 0.0;
    cdf_ = VectorXd::Zero(grid_points);
    for (int i = 1; i < grid_points; ++i)
        cdf_(i) = cdf_(i - 1) + 0.5 * (p(i) + p(i - 1)) * (grid_(i) - grid_(i - 1));
    cdf_ /= cdf_(grid_points - 1);
}

double InverseCdfSampler::operator()(Rng& rng) const
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    const auto* begin = cdf_.data();
    const auto* end = begin + cdf_.size();
    const auto* it = std::upper_bound(begin, end, u);
    Eigen::Index hi = std::clamp<Eigen::Index>(it - begin, 1, cdf_.size() - 1);
    const Eigen::Index lo = hi - 1;
    const double span = cdf_(hi) - cdf_(lo);
    const double w = span > 0.0 ? (u - cdf_(lo)) / span : 0.5;
    return grid_(lo) + w * (grid_(hi) - grid_(lo));
}

MatrixXd sample_lemon_slice(int k, double beta, int m, std::uint64_t seed)
{
    if (m < 1)
        throw InputError("sample_lemon_slice: m must be positive");
    const double kk = static_cast<double>(k);
    InverseCdfSampler radius(
        [beta](double r) { return std::log(r) - beta * (10.0 * (r - 1.0) * (r - 1.0) + 1.0 / r); }, {0.05, 3.0},
        20001);
    const double edge = std::numbers::pi * (1.0 - 1e-9);
    InverseCdfSampler angle(
        [beta, kk](double phi) { return -beta * (std::cos(kk * phi) + 1.0 / std::cos(0.5 * phi)); }, {-edge, edge},
        200001);
    Rng rng = make_rng(seed);
    MatrixXd x(m, 2);
    for (int l = 0; l < m; ++l) {
        const double r = radius(rng);
        const double phi = angle(rng);
        x(l, 0) = r * std::cos(phi);
        x(l, 1) = r * std::sin(phi);
    }
    return x;
}

}  // namespace gedmd
