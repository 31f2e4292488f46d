#include "gedmd/control.hpp"

#include "gedmd/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>

namespace gedmd {

const MatrixXd& PropagatorCache::get(int index, const MatrixXd& M, double dt)
{
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_pair(index, dt);
    auto it = cache_.find(key);
    if (it == cache_.end())
        it = cache_.emplace(key, expm(MatrixXd(M * dt))).first;
    return it->second;
}

const MatrixXd& SurrogateFamily::propagator(int index, double dt) const
{
    return cache->get(index, matrices[static_cast<std::size_t>(index)], dt);
}

SurrogateFamily fit_surrogates(const std::vector<double>& inputs, const std::vector<GeneratorEstimate>& estimates,
                               const MatrixXd& readout)
{
    if (inputs.empty() || inputs.size() != estimates.size())
        throw InputError("fit_surrogates: need one estimate per input");
    SurrogateFamily family;
    family.inputs = inputs;
    const auto n = estimates.front().M.rows();
    for (const auto& est : estimates) {
        if (est.M.rows() != n)
            throw InputError("fit_surrogates: surrogates must share the dictionary size");
        family.matrices.push_back(est.M);
    }
    if (readout.cols() != n)
        throw InputError("fit_surrogates: readout does not match the dictionary size");
    family.readout = readout;
    family.dictionary = estimates.front().dictionary;
    return family;
}

SurrogateFamily fit_surrogates(const Dictionary& dict, const std::vector<double>& inputs,
                               const std::vector<SampleSet>& data, GeneratorKind kind, const MatrixXd& readout,
                               const GeneratorOptions& options)
{
    if (inputs.size() != data.size())
        throw InputError("fit_surrogates: need one sample set per input");
    std::vector<GeneratorEstimate> estimates;
    for (const auto& set : data)
        estimates.push_back(kind == GeneratorKind::stochastic ? gedmd_stochastic(dict, set, options)
                                                              : gedmd_deterministic(dict, set, options));
    return fit_surrogates(inputs, estimates, readout);
}

MatrixXd predict(const MatrixXd& M, const VectorXd& z0, double T, double dt)
{
    if (!(dt > 0.0))
        throw InputError("predict: dt must be positive");
    if (z0.size() != M.rows())
        throw InputError("predict: initial state does not match the surrogate");
    const auto steps = static_cast<Eigen::Index>(std::llround(T / dt));
    const MatrixXd P = expm(MatrixXd(M * dt));
    MatrixXd out(steps + 1, z0.size());
    VectorXd z = z0;
    out.row(0) = z.transpose();
    for (Eigen::Index k = 1; k <= steps; ++k) {
        z = P * z;
        out.row(k) = z.transpose();
    }
    return out;
}

MatrixXd predict(const SurrogateFamily& family, int index, const VectorXd& z0, double T, double dt)
{
    if (!(dt > 0.0))
        throw InputError("predict: dt must be positive");
    const MatrixXd& P = family.propagator(index, dt);
    const auto steps = static_cast<Eigen::Index>(std::llround(T / dt));
    MatrixXd out(steps + 1, z0.size());
    VectorXd z = z0;
    out.row(0) = z.transpose();
    for (Eigen::Index k = 1; k <= steps; ++k) {
        z = P * z;
        out.row(k) = z.transpose();
    }
    return out;
}

OuPlant::OuPlant(double alpha, double beta, double x0, double dt, std::uint64_t seed)
    : alpha_(alpha), noise_(std::sqrt(2.0 / beta)), dt_(dt), x_(VectorXd::Constant(1, x0)), rng_(make_rng(seed))
{
    if (!(dt > 0.0) || !(beta > 0.0))
        throw ConfigError("OuPlant: dt and beta must be positive");
}

MatrixXd OuPlant::advance(double u, double duration, std::vector<double>* times)
{
    const auto full = static_cast<long>(std::floor(duration / dt_ + 1e-9));
    const double rest = duration - static_cast<double>(full) * dt_;
    const bool partial = rest > 1e-12 * dt_;
    MatrixXd out(full + (partial ? 1 : 0), 1);
    auto step = [&](double h, Eigen::Index row) {
        x_(0) += -alpha_ * (x_(0) - u) * h + noise_ * std::sqrt(h) * normal_(rng_);
        t_ += h;
        out(row, 0) = x_(0);
        if (times)
            times->push_back(t_);
    };
    for (long k = 0; k < full; ++k)
        step(dt_, k);
    if (partial)
        step(rest, full);
    return out;
}

namespace {

void check_problem(const MpcProblem& problem, const SurrogateFamily& family)
{
    if (problem.horizon < 1 || problem.horizon > 6)
        throw ConfigError("mpc.horizon: must be between 1 and 6 (exhaustive search over n_c^q sequences)");
    if (!(problem.h > 0.0) || problem.substeps < 1)
        throw ConfigError("mpc.h and mpc.substeps must be positive");
    if (!(problem.te > problem.t0))
        throw ConfigError("mpc: empty horizon");
    if (family.count() < 1)
        throw ConfigError("mpc: surrogate family is empty");
    if (!problem.reference)
        throw ConfigError("mpc.reference: missing");
}

struct SearchContext {
    const SurrogateFamily& family;
    const MpcProblem& problem;
    std::vector<std::vector<MatrixXd>> rows;  // [input][substep] readout rows C exp(M s)
    std::vector<VectorXd> refs;               // [segment * substeps + s]
    double weight;
    OpenLoopSolution best;
    std::vector<int> current;
};

void search(SearchContext& ctx, const VectorXd& z, int depth, double cost)
{
    if (cost >= ctx.best.cost)
        return;
    if (depth == ctx.problem.horizon) {
        ctx.best.cost = cost;
        ctx.best.sequence = ctx.current;
        return;
    }
    const int s_count = ctx.problem.substeps;
    for (int i = 0; i < ctx.family.count(); ++i) {
        double c = cost;
        const double u = ctx.family.inputs[static_cast<std::size_t>(i)];
        for (int s = 0; s < s_count; ++s) {
            const VectorXd y = ctx.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] * z;
            c += ctx.weight *
                 ((y - ctx.refs[static_cast<std::size_t>(depth * s_count + s)]).squaredNorm() + ctx.problem.alpha * u * u);
        }
        if (c >= ctx.best.cost)
            continue;
        ctx.current.push_back(i);
        search(ctx, ctx.family.propagator(i, ctx.problem.h) * z, depth + 1, c);
        ctx.current.pop_back();
    }
}

}  // namespace

OpenLoopSolution best_sequence(const SurrogateFamily& family, const VectorXd& z0, double t, const MpcProblem& problem)
{
    check_problem(problem, family);
    const double sub = problem.h / problem.substeps;
    SearchContext ctx{family, problem, {}, {}, sub, {}, {}};
    for (int i = 0; i < family.count(); ++i) {
        std::vector<MatrixXd> r;
        for (int s = 1; s <= problem.substeps; ++s)
            r.push_back(family.readout * family.propagator(i, sub * s));
        ctx.rows.push_back(std::move(r));
    }
    for (int k = 0; k < problem.horizon; ++k)
        for (int s = 1; s <= problem.substeps; ++s)
            ctx.refs.push_back(problem.reference(t + k * problem.h + s * sub));
    ctx.best.cost = std::numeric_limits<double>::infinity();
    search(ctx, z0, 0, 0.0);
    return ctx.best;
}

MpcResult mpc(const MpcProblem& problem, const SurrogateFamily& family, const Dictionary& dict, Plant& plant)
{
    check_problem(problem, family);
    if (dict.size() != family.size())
        throw ConfigError("mpc: dictionary does not match the surrogates");
    MpcResult out;
    const auto loops = static_cast<long>(std::llround((problem.te - problem.t0) / problem.h));
    std::vector<VectorXd> readouts;
    auto observe = [&](const MatrixXd& states) {
        return MatrixXd(family.readout * dict.values(states));
    };
    out.times.push_back(plant.time());
    readouts.push_back(observe(plant.state().transpose()).col(0));
    MatrixXd window;
    for (long k = 0; k < loops; ++k) {
        const double t = problem.t0 + static_cast<double>(k) * problem.h;
        VectorXd z0;
        if (problem.average_window && window.rows() > 0)
            z0 = dict.values(window).rowwise().mean();
        else
            z0 = dict.values(plant.state().transpose()).col(0);
        const OpenLoopSolution sol = best_sequence(family, z0, t, problem);
        const double u = family.inputs[static_cast<std::size_t>(sol.sequence.front())];
        out.input_times.push_back(t);
        out.inputs.push_back(u);
        out.stage_cost.push_back(sol.cost);
        std::vector<double> times;
        window = plant.advance(u, problem.h, &times);
        const MatrixXd y = observe(window);
        for (std::size_t i = 0; i < times.size(); ++i) {
            out.times.push_back(times[i]);
            readouts.push_back(y.col(static_cast<Eigen::Index>(i)));
        }
    }
    out.readout.resize(static_cast<Eigen::Index>(readouts.size()), family.readout.rows());
    for (std::size_t i = 0; i < readouts.size(); ++i)
        out.readout.row(static_cast<Eigen::Index>(i)) = readouts[i].transpose();
    return out;
}

MonteCarloTrace mpc_monte_carlo(const MpcProblem& problem, const SurrogateFamily& family, const Dictionary& dict,
                                const PlantFactory& make_plant, int replicas)
{
    if (replicas < 1)
        throw ConfigError("mpc.replicas: must be positive");
    MonteCarloTrace out;
    out.replicas = replicas;
    const int batch = 32;
    for (int start = 0; start < replicas; start += batch) {
        const int count = std::min(batch, replicas - start);
        std::vector<MpcResult> runs(static_cast<std::size_t>(count));
        parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
            auto plant = make_plant(start + static_cast<int>(i));
            runs[i] = mpc(problem, family, dict, *plant);
        });
        for (const auto& r : runs) {
            const auto inputs = Eigen::Map<const VectorXd>(r.inputs.data(), static_cast<Eigen::Index>(r.inputs.size()));
            const auto costs =
                Eigen::Map<const VectorXd>(r.stage_cost.data(), static_cast<Eigen::Index>(r.stage_cost.size()));
            if (out.times.empty()) {
                out.times = r.times;
                out.input_times = r.input_times;
                out.mean_readout = MatrixXd::Zero(r.readout.rows(), r.readout.cols());
                out.mean_input = VectorXd::Zero(inputs.size());
                out.mean_stage_cost = VectorXd::Zero(costs.size());
            }
            if (r.readout.rows() != out.mean_readout.rows())
                throw NumericalError("mpc_monte_carlo: replicas produced different sample grids");
            out.mean_readout += r.readout;
            out.mean_input += inputs;
            out.mean_stage_cost += costs;
        }
    }
    out.mean_readout /= replicas;
    out.mean_input /= replicas;
    out.mean_stage_cost /= replicas;
    return out;
}

namespace {

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 8> kNodes{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                       -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                       0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kWeights{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                         0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                         0.2223810344533745, 0.1012285362903763};

}  // namespace

int active_input(const VectorXd& taus, int inputs, double t)
{
    int j = 0;
    while (j < taus.size() && t >= taus(j))
        ++j;
    return j % inputs;
}

SwitchingCost switching_cost(const SurrogateFamily& family, const SwitchingProblem& problem, const VectorXd& taus,
                             bool with_gradient)
{
    const int nc = family.count();
    const auto p = taus.size();
    if (nc < 1)
        throw ConfigError("switching: surrogate family is empty");
    if (problem.z0.size() != family.size())
        throw InputError("switching: z0 does not match the surrogates");
    for (Eigen::Index j = 0; j < p; ++j) {
        const double prev = j == 0 ? problem.t0 : taus(j - 1);
        if (taus(j) < prev - 1e-12 || taus(j) > problem.te + 1e-12)
            throw InputError("switching: schedule is not monotone within the horizon");
    }
    const auto segments = static_cast<std::size_t>(p + 1);
    const MatrixXd& C = family.readout;
    std::vector<VectorXd> starts(segments + 1);
    std::vector<std::array<MatrixXd, 8>> node_exp(segments);
    std::vector<std::array<VectorXd, 8>> node_grad(segments);
    std::vector<MatrixXd> seg_exp(segments);
    SwitchingCost out;
    starts[0] = problem.z0;
    for (std::size_t j = 0; j < segments; ++j) {
        const double s = j == 0 ? problem.t0 : taus(static_cast<Eigen::Index>(j - 1));
        const double e = j + 1 == segments ? problem.te : taus(static_cast<Eigen::Index>(j));
        const double len = std::max(0.0, e - s);
        const int i = static_cast<int>(j % static_cast<std::size_t>(nc));
        const MatrixXd& M = family.matrices[static_cast<std::size_t>(i)];
        const double u = family.inputs[static_cast<std::size_t>(i)];
        for (std::size_t g = 0; g < 8; ++g) {
            const double offset = 0.5 * (kNodes[g] + 1.0) * len;
            node_exp[j][g] = expm(MatrixXd(M * offset));
            const VectorXd z = node_exp[j][g] * starts[j];
            const VectorXd resid = C * z - problem.reference(s + offset);
            const double w = 0.5 * len * kWeights[g];
            out.value += w * (resid.squaredNorm() + problem.alpha * u * u);
            if (with_gradient)
                node_grad[j][g] = w * 2.0 * (C.transpose() * resid);
        }
        seg_exp[j] = expm(MatrixXd(M * len));
        starts[j + 1] = seg_exp[j] * starts[j];
    }
    if (!with_gradient)
        return out;
    out.gradient = VectorXd::Zero(p);
    VectorXd lambda = VectorXd::Zero(family.size());
    for (std::size_t j = segments; j-- > 0;) {
        VectorXd next = seg_exp[j].transpose() * lambda;
        for (std::size_t g = 0; g < 8; ++g)
            next += node_exp[j][g].transpose() * node_grad[j][g];
        lambda = next;  // costate at the start of segment j
        if (j == 0)
            break;
        const int cur = static_cast<int>(j % static_cast<std::size_t>(nc));
        const int prev = static_cast<int>((j - 1) % static_cast<std::size_t>(nc));
        const MatrixXd& Mc = family.matrices[static_cast<std::size_t>(cur)];
        const MatrixXd& Mp = family.matrices[static_cast<std::size_t>(prev)];
        const double uc = family.inputs[static_cast<std::size_t>(cur)];
        const double up = family.inputs[static_cast<std::size_t>(prev)];
        const VectorXd& z = starts[j];
        out.gradient(static_cast<Eigen::Index>(j - 1)) =
            lambda.dot((Mp - Mc) * z) + problem.alpha * (up * up - uc * uc);
    }
    return out;
}

VectorXd project_schedule(const VectorXd& taus, double t0, double te)
{
    // Pool adjacent violators for the nearest nondecreasing sequence.
    std::vector<double> value;
    std::vector<int> weight;
    for (Eigen::Index i = 0; i < taus.size(); ++i) {
        value.push_back(taus(i));
        weight.push_back(1);
        while (value.size() > 1 && value[value.size() - 2] > value.back()) {
            const double v = (value[value.size() - 2] * weight[weight.size() - 2] + value.back() * weight.back()) /
                             (weight[weight.size() - 2] + weight.back());
            const int w = weight[weight.size() - 2] + weight.back();
            value.pop_back();
            weight.pop_back();
            value.back() = v;
            weight.back() = w;
        }
    }
    VectorXd out(taus.size());
    Eigen::Index k = 0;
    for (std::size_t b = 0; b < value.size(); ++b)
        for (int w = 0; w < weight[b]; ++w)
            out(k++) = std::clamp(value[b], t0, te);
    return out;
}

SwitchingResult switching_time_optimize(const SurrogateFamily& family, const SwitchingProblem& problem,
                                        const VectorXd& initial, int max_iterations, double tol)
{
    if (initial.size() < 1)
        throw ConfigError("switching.p: at least one switch is required");
    SwitchingResult res;
    VectorXd x = project_schedule(initial, problem.t0, problem.te);
    SwitchingCost f = switching_cost(family, problem, x);
    res.cost_history.push_back(f.value);
    const std::size_t memory = 10;
    std::deque<VectorXd> s_hist, y_hist;
    const double typical = (problem.te - problem.t0) / static_cast<double>(x.size() + 1);

    auto projected_step = [&](const VectorXd& g) {
        return (project_schedule(x - g, problem.t0, problem.te) - x).cwiseAbs().maxCoeff();
    };

    int it = 0;
    for (; it < max_iterations; ++it) {
        if (projected_step(f.gradient) < tol) {
            res.converged = true;
            break;
        }
        VectorXd d;
        bool steepest = s_hist.empty();
        if (!steepest) {
            // L-BFGS two-loop recursion
            VectorXd q = f.gradient;
            std::vector<double> alpha(s_hist.size());
            for (std::size_t k = s_hist.size(); k-- > 0;) {
                const double rho = 1.0 / y_hist[k].dot(s_hist[k]);
                alpha[k] = rho * s_hist[k].dot(q);
                q -= alpha[k] * y_hist[k];
            }
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
            for (std::size_t k = 0; k < s_hist.size(); ++k) {
                const double rho = 1.0 / y_hist[k].dot(s_hist[k]);
                const double beta = rho * y_hist[k].dot(q);
                q += s_hist[k] * (alpha[k] - beta);
            }
            d = -q;
            if (d.dot(f.gradient) >= 0.0)
                steepest = true;
        }
        if (steepest) {
            const double gmax = f.gradient.cwiseAbs().maxCoeff();
            d = -f.gradient * (gmax > 0.0 ? 0.1 * typical / gmax : 0.0);
        }
        bool accepted = false;
        double step = 1.0;
        VectorXd x_new;
        SwitchingCost f_new;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = project_schedule(x + step * d, problem.t0, problem.te);
            f_new = switching_cost(family, problem, x_new);
            if (f_new.value <= f.value + 1e-4 * f.gradient.dot(x_new - x) && f_new.value < f.value) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!s_hist.empty()) {
                s_hist.clear();
                y_hist.clear();
                continue;
            }
            res.warnings.push_back("switching_time_optimize: line search stalled; returning the best schedule found");
            break;
        }
        const VectorXd s = x_new - x;
        const VectorXd y = f_new.gradient - f.gradient;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            if (s_hist.size() > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        x = x_new;
        f = f_new;
        res.cost_history.push_back(f.value);
    }
    res.iterations = it;
    if (!res.converged && it >= max_iterations)
        res.warnings.push_back("switching_time_optimize: no convergence after " + std::to_string(max_iterations) +
                               " iterations; returning the best schedule found");
    res.taus = x;
    res.cost = f.value;
    return res;
}

MatrixXd simulate_schedule(const SurrogateFamily& family, const VectorXd& z0, const VectorXd& taus, double t0,
                           const std::vector<double>& times)
{
    MatrixXd out(static_cast<Eigen::Index>(times.size()), family.readout.rows());
    const int nc = family.count();
    VectorXd z = z0;  // state at the start of segment j
    double s = t0;
    Eigen::Index j = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        if (t < s - 1e-12)
            throw InputError("simulate_schedule: times must be nondecreasing and start at t0");
        while (j < taus.size() && taus(j) <= t) {
            const auto& M = family.matrices[static_cast<std::size_t>(j % nc)];
            z = expm(MatrixXd(M * (taus(j) - s))) * z;
            s = taus(j);
            ++j;
        }
        const auto& M = family.matrices[static_cast<std::size_t>(j % nc)];
        out.row(static_cast<Eigen::Index>(k)) = (family.readout * (expm(MatrixXd(M * (t - s))) * z)).transpose();
    }
    return out;
}

MatrixXd run_schedule(Plant& plant, const SurrogateFamily& family, const Dictionary& dict, const VectorXd& taus,
                      const std::vector<double>& times)
{
    const int nc = family.count();
    MatrixXd states(static_cast<Eigen::Index>(times.size()), plant.dimension());
    Eigen::Index j = 0;  // switches already passed
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < plant.time() - 1e-12)
            throw InputError("run_schedule: sample times must be nondecreasing and start at the plant time");
        while (plant.time() < times[k] - 1e-12) {
            while (j < taus.size() && taus(j) <= plant.time() + 1e-12)
                ++j;
            const double stop = j < taus.size() ? std::min(taus(j), times[k]) : times[k];
            plant.advance(family.inputs[static_cast<std::size_t>(j % nc)], stop - plant.time());
        }
        states.row(static_cast<Eigen::Index>(k)) = plant.state().transpose();
    }
    return (family.readout * dict.values(states)).transpose();
}

MatrixXd schedule_monte_carlo(const SurrogateFamily& family, const Dictionary& dict, const VectorXd& taus,
                              const std::vector<double>& times, const PlantFactory& make_plant, int replicas)
{
    if (replicas < 1)
        throw ConfigError("switching.replicas: must be positive");
    MatrixXd mean = MatrixXd::Zero(static_cast<Eigen::Index>(times.size()), family.readout.rows());
    const int batch = 32;
    for (int start = 0; start < replicas; start += batch) {
        const int count = std::min(batch, replicas - start);
        std::vector<MatrixXd> runs(static_cast<std::size_t>(count));
        parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
            auto plant = make_plant(start + static_cast<int>(i));
            runs[i] = run_schedule(*plant, family, dict, taus, times);
        });
        for (const auto& r : runs)
            mean += r;
    }
    return mean / replicas;
}

}  // namespace gedmd
