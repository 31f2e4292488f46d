#pragma once

#include "gedmd/dictionary.hpp"
#include "gedmd/generator.hpp"
#include "gedmd/models.hpp"
#include "gedmd/rng.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

namespace gedmd {

/// Thread-safe cache of exp(M_i * dt) keyed by (input index, dt).
class PropagatorCache {
public:
    const MatrixXd& get(int index, const MatrixXd& M, double dt);

private:
    std::mutex mutex_;
    std::map<std::pair<int, double>, MatrixXd> cache_;
};

/// Per-input linear surrogates z' = M_u z on z = psi(x) with a readout y = C z.
struct SurrogateFamily {
    std::vector<double> inputs;
    std::vector<MatrixXd> matrices;
    MatrixXd readout;  ///< r x n
    nlohmann::json dictionary;
    std::shared_ptr<PropagatorCache> cache = std::make_shared<PropagatorCache>();

    int size() const { return matrices.empty() ? 0 : static_cast<int>(matrices.front().rows()); }
    int count() const { return static_cast<int>(inputs.size()); }
    const MatrixXd& propagator(int index, double dt) const;
};

SurrogateFamily fit_surrogates(const std::vector<double>& inputs, const std::vector<GeneratorEstimate>& estimates,
                               const MatrixXd& readout);

/// Fits one generator per input from its own sample set.
SurrogateFamily fit_surrogates(const Dictionary& dict, const std::vector<double>& inputs,
                               const std::vector<SampleSet>& data, GeneratorKind kind, const MatrixXd& readout,
                               const GeneratorOptions& options = {});

/// z(k dt) for k = 0..steps, one row per time.
MatrixXd predict(const MatrixXd& M, const VectorXd& z0, double T, double dt);
MatrixXd predict(const SurrogateFamily& family, int index, const VectorXd& z0, double T, double dt);

/// Ground-truth system driven by a scalar input.
class Plant {
public:
    virtual ~Plant() = default;
    virtual int dimension() const = 0;
    virtual double time() const = 0;
    virtual const VectorXd& state() const = 0;
    virtual bool stochastic() const = 0;
    /// Holds u for `duration` and returns the states visited after each
    /// internal step (one row per step) with their times.
    virtual MatrixXd advance(double u, double duration, std::vector<double>* times = nullptr) = 0;
};

/// Controlled OU process integrated by Euler-Maruyama.
class OuPlant final : public Plant {
public:
    OuPlant(double alpha, double beta, double x0, double dt, std::uint64_t seed);
    int dimension() const override { return 1; }
    double time() const override { return t_; }
    const VectorXd& state() const override { return x_; }
    bool stochastic() const override { return true; }
    MatrixXd advance(double u, double duration, std::vector<double>* times = nullptr) override;

private:
    double alpha_;
    double noise_;
    double dt_;
    double t_ = 0.0;
    VectorXd x_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

struct BurgersConfig {
    int grid = 25;
    double length = 1.0;
    double nu = 0.01;
    double dt = 1e-3;
    double chi_amplitude = 1.0;
    double chi_width = 1.0 / 8.0;  ///< standard deviation as a fraction of the length
};

/// Shape function of the distributed control on the periodic grid.
VectorXd burgers_chi(const BurgersConfig& cfg);

/// nu y_xx - (y y_x) + u chi with central differences; the advection term uses
/// the skew-symmetric split so that sum(y^2) is conserved by the inviscid part.
VectorXd burgers_rhs(const BurgersConfig& cfg, const VectorXd& chi, const VectorXd& y, double u);

/// Throws ConfigError when dt exceeds the RK4 stability bound for max|y|.
void check_burgers_stability(const BurgersConfig& cfg, double max_abs_state);

/// Grid values of a smooth periodic initial profile mean + amp sin(2 pi x / L).
VectorXd burgers_initial(const BurgersConfig& cfg, double mean, double amplitude);

class BurgersPlant final : public Plant {
public:
    BurgersPlant(BurgersConfig cfg, VectorXd y0);
    int dimension() const override { return cfg_.grid; }
    double time() const override { return t_; }
    const VectorXd& state() const override { return y_; }
    bool stochastic() const override { return false; }
    MatrixXd advance(double u, double duration, std::vector<double>* times = nullptr) override;
    const BurgersConfig& config() const { return cfg_; }

private:
    void step(double u, double dt);

    BurgersConfig cfg_;
    VectorXd chi_;
    VectorXd y_;
    double t_ = 0.0;
};

/// RK4 trajectory of the uncontrolled or constant-input Burgers system; rows are states.
MatrixXd burgers_simulate(const BurgersConfig& cfg, const VectorXd& y0, double u, double T);

/// Training data for each input from trajectories with random initial states
/// (Fourier coefficients decaying like 1/k^2 on every resolved mode);
/// derivatives from central differences of the simulated states.
std::vector<SampleSet> burgers_training_data(const BurgersConfig& cfg, const std::vector<double>& inputs,
                                             int trajectories, double duration, int stride, std::uint64_t seed);

struct MpcProblem {
    double t0 = 0.0;
    double te = 1.0;
    double h = 0.05;   ///< input hold time and plant step per loop
    int horizon = 3;   ///< q, prediction horizon in multiples of h
    int substeps = 5;  ///< cost samples per h
    double alpha = 0.0;
    std::function<VectorXd(double)> reference;
    bool average_window = false;  ///< z0 from psi averaged over the last h
};

struct MpcResult {
    std::vector<double> times;       ///< plant sample times
    MatrixXd readout;                ///< C psi(x) at the plant sample times
    std::vector<double> input_times;
    std::vector<double> inputs;
    std::vector<double> stage_cost;  ///< open-loop optimum at each loop
};

/// Exhaustive search over all input sequences of length `horizon`.
struct OpenLoopSolution {
    std::vector<int> sequence;
    double cost = 0.0;
};

OpenLoopSolution best_sequence(const SurrogateFamily& family, const VectorXd& z0, double t, const MpcProblem& problem);

MpcResult mpc(const MpcProblem& problem, const SurrogateFamily& family, const Dictionary& dict, Plant& plant);

using PlantFactory = std::function<std::unique_ptr<Plant>(int replica)>;

/// Mean over independent closed-loop runs. Replicas run concurrently and are
/// summed in replica order, so the result does not depend on scheduling.
struct MonteCarloTrace {
    std::vector<double> times;
    MatrixXd mean_readout;
    std::vector<double> input_times;
    VectorXd mean_input;
    VectorXd mean_stage_cost;
    int replicas = 0;
};

MonteCarloTrace mpc_monte_carlo(const MpcProblem& problem, const SurrogateFamily& family, const Dictionary& dict,
                                const PlantFactory& make_plant, int replicas);

/// Fixed cyclic sequence: segment j uses input j mod n_c. Switch times tau_1..tau_p.
struct SwitchingProblem {
    double t0 = 0.0;
    double te = 1.0;
    double alpha = 0.0;
    VectorXd z0;
    std::function<VectorXd(double)> reference;
};

struct SwitchingCost {
    double value = 0.0;
    VectorXd gradient;
};

/// J = int ||C z - r||^2 + alpha u^2 dt by 8-point Gauss-Legendre per segment;
/// gradient by a backward costate sweep.
SwitchingCost switching_cost(const SurrogateFamily& family, const SwitchingProblem& problem, const VectorXd& taus,
                             bool with_gradient = true);

/// Isotonic regression (pool adjacent violators) followed by clamping to [t0, te].
VectorXd project_schedule(const VectorXd& taus, double t0, double te);

struct SwitchingResult {
    VectorXd taus;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> cost_history;
    std::vector<std::string> warnings;
};

SwitchingResult switching_time_optimize(const SurrogateFamily& family, const SwitchingProblem& problem,
                                        const VectorXd& initial, int max_iterations = 300, double tol = 1e-9);

/// Index of the input active at time t.
int active_input(const VectorXd& taus, int inputs, double t);

/// Readout of the surrogate under a schedule at nondecreasing times >= t0.
MatrixXd simulate_schedule(const SurrogateFamily& family, const VectorXd& z0, const VectorXd& taus, double t0,
                           const std::vector<double>& times);

/// Drives a plant with the cyclic schedule and returns C psi(x) at `times`
/// (nondecreasing, starting at or after the plant time).
MatrixXd run_schedule(Plant& plant, const SurrogateFamily& family, const Dictionary& dict, const VectorXd& taus,
                      const std::vector<double>& times);

/// Mean of run_schedule over independent plants.
MatrixXd schedule_monte_carlo(const SurrogateFamily& family, const Dictionary& dict, const VectorXd& taus,
                              const std::vector<double>& times, const PlantFactory& make_plant, int replicas);

}  // namespace gedmd
