#include "gedmd/control.hpp"
#include "gedmd/errors.hpp"
#include "gedmd/sampling.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace gedmd;

namespace {

const Dictionary& ou_dict()
{
    static const Dictionary d = Dictionary::monomials(1, 12);
    return d;
}

SurrogateFamily ou_family(const std::vector<double>& inputs, double alpha = 1.0, double beta = 2.0)
{
    std::vector<SampleSet> data;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        data.push_back(exact_samples(ornstein_uhlenbeck(alpha, beta, inputs[i]), sample_uniform({{-6, 6}}, 2000, 20 + i)));
    return fit_surrogates(ou_dict(), inputs, data, GeneratorKind::stochastic, ou_dict().full_state_selector().transpose());
}

VectorXd psi_at(double x)
{
    return ou_dict().values(MatrixXd::Constant(1, 1, x)).col(0);
}

MpcProblem constant_problem(double value)
{
    MpcProblem p;
    p.te = 1.0;
    p.h = 0.1;
    p.horizon = 3;
    p.substeps = 5;
    p.reference = [value](double) { return VectorXd::Constant(1, value); };
    return p;
}

}  // namespace

TEST(Predict, ZeroGeneratorKeepsStateConstant)
{
    const VectorXd z0 = VectorXd::LinSpaced(4, 1, 4);
    const MatrixXd z = predict(MatrixXd::Zero(4, 4), z0, 1.0, 0.1);
    ASSERT_EQ(z.rows(), 11);
    for (int k = 0; k < z.rows(); ++k)
        EXPECT_EQ(z.row(k).transpose(), z0);
}

TEST(Predict, DiagonalGeneratorDecaysExponentially)
{
    const VectorXd rates = VectorXd::LinSpaced(3, -0.5, -2.0);
    const MatrixXd z = predict(MatrixXd(rates.asDiagonal()), VectorXd::Ones(3), 2.0, 0.25);
    for (int k = 0; k < z.rows(); ++k)
        for (int i = 0; i < 3; ++i)
            EXPECT_NEAR(z(k, i), std::exp(rates(i) * 0.25 * k), 1e-13);
}

TEST(Predict, IsLinearInTheInitialState)
{
    MatrixXd M(3, 3);
    M << -1, 0.3, 0, 0.2, -0.5, 0.1, 0, -0.4, -0.2;
    const VectorXd a = VectorXd::LinSpaced(3, 1, 2), b = VectorXd::LinSpaced(3, -1, 0.5);
    const MatrixXd za = predict(M, a, 1.0, 0.1), zb = predict(M, b, 1.0, 0.1), zc = predict(M, 2 * a - 3 * b, 1.0, 0.1);
    EXPECT_LT((zc - 2 * za + 3 * zb).norm(), 1e-12);
}

TEST(Surrogates, OuMeanMatchesAnalyticMean)
{
    const std::vector<double> inputs = {-5.0, 5.0};
    const SurrogateFamily family = ou_family(inputs);
    for (int i = 0; i < 2; ++i) {
        const MatrixXd z = predict(family, i, psi_at(0.3), 3.0, 0.01);
        for (int k = 0; k < z.rows(); ++k) {
            const double u = inputs[static_cast<std::size_t>(i)];
            const double mean = u + (0.3 - u) * std::exp(-0.01 * k);
            EXPECT_NEAR((family.readout * z.row(k).transpose())(0), mean, 1e-3);
        }
    }
}

TEST(Surrogates, InputIndependentDataGiveIdenticalSurrogates)
{
    const SampleSet s = exact_samples(ornstein_uhlenbeck(1.0, 2.0), sample_uniform({{-3, 3}}, 300, 1));
    const Dictionary dict = Dictionary::monomials(1, 4);
    const SurrogateFamily family = fit_surrogates(dict, {-1.0, 1.0}, {s, s}, GeneratorKind::stochastic,
                                                  dict.full_state_selector().transpose());
    EXPECT_EQ(family.matrices[0], family.matrices[1]);
}

TEST(Surrogates, PropagatorCacheReturnsMatrixExponential)
{
    const SurrogateFamily family = ou_family({0.0});
    const MatrixXd& p = family.propagator(0, 0.05);
    EXPECT_LT((p - expm(family.matrices[0] * 0.05)).norm(), 1e-12 * p.norm());
    EXPECT_EQ(&p, &family.propagator(0, 0.05));
}

TEST(Mpc, HorizonAboveSixIsRejected)
{
    const SurrogateFamily family = ou_family({-1.0, 1.0});
    MpcProblem p = constant_problem(0.0);
    p.horizon = 7;
    EXPECT_THROW(best_sequence(family, psi_at(0.0), 0.0, p), ConfigError);
    p.horizon = 0;
    EXPECT_THROW(best_sequence(family, psi_at(0.0), 0.0, p), ConfigError);
}

TEST(Mpc, PicksInputWhoseEquilibriumMatchesTheReference)
{
    const SurrogateFamily family = ou_family({-1.0, 0.0, 1.0});
    const OpenLoopSolution sol = best_sequence(family, psi_at(0.0), 0.0, constant_problem(0.0));
    EXPECT_EQ(sol.sequence, (std::vector<int>{1, 1, 1}));
    EXPECT_LT(sol.cost, 1e-10);
}

TEST(Mpc, OpenLoopCostMatchesDirectQuadrature)
{
    const SurrogateFamily family = ou_family({-2.0, 2.0});
    const MpcProblem p = constant_problem(0.7);
    const OpenLoopSolution sol = best_sequence(family, psi_at(-0.4), 0.0, p);
    // Recompute the cost of the returned sequence with the analytic OU mean.
    double x = -0.4, cost = 0.0;
    const double sub = p.h / p.substeps;
    for (int idx : sol.sequence) {
        const double u = family.inputs[static_cast<std::size_t>(idx)];
        for (int s = 1; s <= p.substeps; ++s) {
            const double y = u + (x - u) * std::exp(-s * sub);
            cost += sub * (y - 0.7) * (y - 0.7);
        }
        x = u + (x - u) * std::exp(-p.h);
    }
    EXPECT_NEAR(sol.cost, cost, 1e-6);
}

// Property: adding inputs can only lower the optimal open-loop cost.
TEST(MpcProperty, EnlargingTheInputSetNeverIncreasesCost)
{
    const SurrogateFamily small = ou_family({-5.0, 5.0});
    const SurrogateFamily large = ou_family({-5.0, 0.0, 5.0});
    for (double x0 : {-2.0, -0.5, 0.0, 1.3, 2.5})
        for (double r : {-2.0, 0.3, 2.0}) {
            MpcProblem p = constant_problem(r);
            p.alpha = 0.01;
            const double cs = best_sequence(small, psi_at(x0), 0.0, p).cost;
            const double cl = best_sequence(large, psi_at(x0), 0.0, p).cost;
            EXPECT_LE(cl, cs + 1e-12) << x0 << " " << r;
        }
}

TEST(Mpc, ClosedLoopOuTracksPiecewiseConstantReference)
{
    const SurrogateFamily family = ou_family({-5.0, 5.0});
    MpcProblem p;
    p.te = 10.0;
    p.h = 0.05;
    p.horizon = 3;
    p.substeps = 5;
    p.average_window = true;
    p.reference = [](double t) { return VectorXd::Constant(1, t < 5.0 ? 2.0 : -2.0); };
    const MonteCarloTrace trace =
        mpc_monte_carlo(p, family, ou_dict(), [](int r) { return std::make_unique<OuPlant>(1.0, 2.0, 0.0, 1e-3, 500 + r); }, 40);
    EXPECT_EQ(trace.replicas, 40);
    double upper = 0.0, lower = 0.0;
    int nu = 0, nl = 0;
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        const double t = trace.times[k];
        if (t > 3.0 && t < 5.0) {
            upper += trace.mean_readout(static_cast<Eigen::Index>(k), 0);
            ++nu;
        } else if (t > 8.0) {
            lower += trace.mean_readout(static_cast<Eigen::Index>(k), 0);
            ++nl;
        }
    }
    EXPECT_LT(std::abs(upper / nu - 2.0), 0.2);
    EXPECT_LT(std::abs(lower / nl + 2.0), 0.2);
}

TEST(Mpc, MonteCarloIsReproducibleAndOrderIndependent)
{
    const SurrogateFamily family = ou_family({-5.0, 5.0});
    MpcProblem p = constant_problem(1.0);
    p.te = 0.5;
    p.h = 0.05;
    p.average_window = true;
    auto factory = [](int r) { return std::make_unique<OuPlant>(1.0, 2.0, 0.0, 1e-3, 900 + r); };
    const MonteCarloTrace a = mpc_monte_carlo(p, family, ou_dict(), factory, 5);
    const MonteCarloTrace b = mpc_monte_carlo(p, family, ou_dict(), factory, 5);
    EXPECT_EQ(a.mean_readout, b.mean_readout);
    MatrixXd sum = MatrixXd::Zero(a.mean_readout.rows(), 1);
    for (int r = 0; r < 5; ++r) {
        auto plant = factory(r);
        sum += mpc(p, family, ou_dict(), *plant).readout;
    }
    EXPECT_LT((sum / 5.0 - a.mean_readout).norm(), 1e-12);
}

TEST(Switching, ActiveInputCyclesThroughSegments)
{
    VectorXd taus(3);
    taus << 1.0, 2.0, 3.0;
    EXPECT_EQ(active_input(taus, 2, 0.5), 0);
    EXPECT_EQ(active_input(taus, 2, 1.5), 1);
    EXPECT_EQ(active_input(taus, 2, 2.5), 0);
    EXPECT_EQ(active_input(taus, 2, 3.5), 1);
}

TEST(Switching, ProjectionIsFeasibleAndIdempotent)
{
    VectorXd taus(5);
    taus << 3.0, 1.0, 2.0, -1.0, 12.0;
    const VectorXd p = project_schedule(taus, 0.0, 10.0);
    for (int i = 0; i < 5; ++i) {
        EXPECT_GE(p(i), 0.0);
        EXPECT_LE(p(i), 10.0);
        if (i > 0)
            EXPECT_LE(p(i - 1), p(i));
    }
    EXPECT_EQ(project_schedule(p, 0.0, 10.0), p);
    VectorXd feasible(3);
    feasible << 0.5, 0.5, 7.0;
    EXPECT_EQ(project_schedule(feasible, 0.0, 10.0), feasible);
}

TEST(Switching, SingleInputScheduleEqualsPrediction)
{
    const SurrogateFamily family = ou_family({1.5});
    VectorXd taus(2);
    taus << 0.7, 1.3;
    std::vector<double> times;
    for (int k = 0; k <= 20; ++k)
        times.push_back(0.1 * k);
    const MatrixXd y = simulate_schedule(family, psi_at(-1.0), taus, 0.0, times);
    const MatrixXd z = predict(family, 0, psi_at(-1.0), 2.0, 0.1);
    for (int k = 0; k <= 20; ++k)
        EXPECT_NEAR(y(k, 0), (family.readout * z.row(k).transpose())(0), 1e-9);
}

// Property: the costate gradient agrees with central differences.
TEST(SwitchingProperty, GradientMatchesFiniteDifferences)
{
    const SurrogateFamily family = ou_family({-5.0, 5.0});
    SwitchingProblem p;
    p.te = 4.0;
    p.alpha = 0.01;
    p.z0 = psi_at(-1.0);
    p.reference = [](double t) { return VectorXd::Constant(1, std::tanh(t - 2.0)); };
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        VectorXd taus = sample_uniform({{0.2, 3.8}}, 8, seed).col(0);
        std::sort(taus.begin(), taus.end());
        const SwitchingCost c = switching_cost(family, p, taus);
        for (int i = 0; i < taus.size(); ++i) {
            const double h = 1e-6;
            VectorXd tp = taus, tm = taus;
            tp(i) += h;
            tm(i) -= h;
            const double fd = (switching_cost(family, p, tp, false).value - switching_cost(family, p, tm, false).value) / (2 * h);
            EXPECT_LT(oracle::relative_difference(c.gradient(i), fd, 1e-3), 1e-5) << "seed " << seed << " tau " << i;
        }
    }
}

TEST(Switching, BoundaryOptimumPushesSwitchToEnd)
{
    // Starting at the equilibrium of input 0 with that value as reference, the
    // best schedule never switches.
    const SurrogateFamily family = ou_family({2.0, -2.0});
    SwitchingProblem p;
    p.te = 3.0;
    p.z0 = psi_at(2.0);
    p.reference = [](double) { return VectorXd::Constant(1, 2.0); };
    VectorXd initial(1);
    initial << 1.5;
    const SwitchingResult res = switching_time_optimize(family, p, initial);
    EXPECT_NEAR(res.taus(0), 3.0, 1e-6);
    EXPECT_LT(res.cost, 1e-8);
    for (std::size_t i = 1; i < res.cost_history.size(); ++i)
        EXPECT_LE(res.cost_history[i], res.cost_history[i - 1] + 1e-12);
}

TEST(Switching, OptimizationLowersTheCost)
{
    const SurrogateFamily family = ou_family({-5.0, 5.0});
    SwitchingProblem p;
    p.te = 5.0;
    p.z0 = psi_at(-1.0);
    p.reference = [](double t) { return VectorXd::Constant(1, std::tanh(t - 2.5)); };
    const VectorXd initial = VectorXd::LinSpaced(12, 0.0, 5.0).segment(1, 10);
    const double before = switching_cost(family, p, initial, false).value;
    const SwitchingResult res = switching_time_optimize(family, p, initial, 100);
    EXPECT_LT(res.cost, before);
    EXPECT_EQ(project_schedule(res.taus, 0.0, 5.0), res.taus);
}

TEST(Switching, ScheduleOnNearlyDeterministicPlantFollowsSurrogate)
{
    const SurrogateFamily family = ou_family({-5.0, 5.0}, 1.0, 1e8);
    VectorXd taus(3);
    taus << 0.5, 1.0, 1.8;
    std::vector<double> times;
    for (int k = 0; k <= 25; ++k)
        times.push_back(0.1 * k);
    OuPlant plant(1.0, 1e8, 0.0, 1e-4, 3);
    const MatrixXd y = run_schedule(plant, family, ou_dict(), taus, times);
    const MatrixXd s = simulate_schedule(family, psi_at(0.0), taus, 0.0, times);
    EXPECT_LT((y - s).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(Burgers, ChiIsPeriodicAndCentered)
{
    BurgersConfig cfg;
    const VectorXd chi = burgers_chi(cfg);
    Eigen::Index peak = 0;
    chi.maxCoeff(&peak);
    EXPECT_EQ(peak, cfg.grid / 2);
    // Nodes 12 - k and 13 + k lie symmetrically about the center 0.5.
    for (int k = 0; k < 12; ++k)
        EXPECT_NEAR(chi(12 - k), chi(13 + k), 1e-12);
    EXPECT_GT(chi.minCoeff(), 0.0);
    EXPECT_NEAR(chi.maxCoeff(), std::exp(-0.5 * 0.02 * 0.02 / (0.125 * 0.125)), 1e-12);
}

TEST(Burgers, ConstantStateIsStationaryWithoutInput)
{
    BurgersConfig cfg;
    const MatrixXd traj = burgers_simulate(cfg, VectorXd::Constant(cfg.grid, 0.3), 0.0, 0.5);
    EXPECT_LT((traj.bottomRows(1).transpose() - VectorXd::Constant(cfg.grid, 0.3)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Burgers, EnergyIsNonIncreasingWithoutInput)
{
    BurgersConfig cfg;
    cfg.nu = 0.02;
    const MatrixXd traj = burgers_simulate(cfg, burgers_initial(cfg, 0.2, 0.5), 0.0, 1.0);
    double previous = traj.row(0).squaredNorm();
    for (int k = 1; k < traj.rows(); ++k) {
        const double e = traj.row(k).squaredNorm();
        EXPECT_LE(e, previous + 1e-12) << k;
        previous = e;
    }
    EXPECT_LT(previous, traj.row(0).squaredNorm());
}

TEST(Burgers, InviscidAdvectionConservesEnergySemiDiscretely)
{
    BurgersConfig cfg;
    cfg.nu = 0.0;
    const VectorXd y = burgers_initial(cfg, 0.1, 0.4);
    const VectorXd f = burgers_rhs(cfg, burgers_chi(cfg), y, 0.0);
    EXPECT_NEAR(y.dot(f), 0.0, 1e-12);
}

TEST(Burgers, GridRefinementChangesTheSolutionLittle)
{
    BurgersConfig coarse;
    coarse.nu = 0.05;
    BurgersConfig fine = coarse;
    fine.grid = 101;
    fine.dt = 1e-4;
    const double T = 0.5;
    const MatrixXd a = burgers_simulate(coarse, burgers_initial(coarse, 0.2, 0.3), 0.1, T);
    const MatrixXd b = burgers_simulate(fine, burgers_initial(fine, 0.2, 0.3), 0.1, T);
    // Sample the fine solution at the coarse nodes by periodic linear interpolation.
    VectorXd fine_at_coarse(coarse.grid);
    for (int i = 0; i < coarse.grid; ++i) {
        const double pos = static_cast<double>(i) * fine.grid / coarse.grid;
        const int j = static_cast<int>(std::floor(pos));
        const double w = pos - j;
        fine_at_coarse(i) = (1 - w) * b(b.rows() - 1, j % fine.grid) + w * b(b.rows() - 1, (j + 1) % fine.grid);
    }
    const VectorXd end = a.bottomRows(1).transpose();
    EXPECT_LT((end - fine_at_coarse).norm() / fine_at_coarse.norm(), 0.05);
}

TEST(Burgers, StabilityViolationIsAConfigError)
{
    BurgersConfig cfg;
    cfg.dt = 0.1;
    EXPECT_THROW(check_burgers_stability(cfg, 1.0), ConfigError);
    EXPECT_THROW(BurgersPlant(cfg, burgers_initial(cfg, 0.2, 0.1)), ConfigError);
    cfg.dt = 1e-3;
    EXPECT_NO_THROW(check_burgers_stability(cfg, 1.0));
}

TEST(Burgers, PlantAdvanceMatchesSimulation)
{
    BurgersConfig cfg;
    const VectorXd y0 = burgers_initial(cfg, 0.2, 0.1);
    BurgersPlant plant(cfg, y0);
    std::vector<double> times;
    const MatrixXd visited = plant.advance(0.05, 0.0105, &times);
    ASSERT_EQ(visited.rows(), 11);  // ten full steps and one partial
    EXPECT_NEAR(times.back(), 0.0105, 1e-15);
    const MatrixXd ref = burgers_simulate(cfg, y0, 0.05, 0.01);
    EXPECT_LT((visited.row(9) - ref.row(10)).norm(), 1e-15);
}

TEST(Burgers, TrainingDataAreSeeded)
{
    BurgersConfig cfg;
    const auto a = burgers_training_data(cfg, {0.0, 0.1}, 2, 0.05, 5, 17);
    const auto b = burgers_training_data(cfg, {0.0, 0.1}, 2, 0.05, 5, 17);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[1].points, b[1].points);
    EXPECT_EQ(a[1].drift, b[1].drift);
    EXPECT_EQ(a[0].dimension(), cfg.grid);
}
