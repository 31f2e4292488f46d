#include "gedmd/control.hpp"

#include "gedmd/errors.hpp"
#include "gedmd/rng.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace gedmd {

namespace {

double spacing(const BurgersConfig& cfg)
{
    return cfg.length / cfg.grid;
}

void check_config(const BurgersConfig& cfg)
{
    if (cfg.grid < 3)
        throw ConfigError("burgers.grid: need at least 3 nodes");
    if (!(cfg.length > 0.0) || !(cfg.dt > 0.0) || cfg.nu < 0.0 || !(cfg.chi_width > 0.0))
        throw ConfigError("burgers: length, dt and chi_width must be positive and nu nonnegative");
}

VectorXd rk4_step(const BurgersConfig& cfg, const VectorXd& chi, const VectorXd& y, double u, double dt)
{
    const VectorXd k1 = burgers_rhs(cfg, chi, y, u);
    const VectorXd k2 = burgers_rhs(cfg, chi, y + 0.5 * dt * k1, u);
    const VectorXd k3 = burgers_rhs(cfg, chi, y + 0.5 * dt * k2, u);
    const VectorXd k4 = burgers_rhs(cfg, chi, y + dt * k3, u);
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

VectorXd burgers_chi(const BurgersConfig& cfg)
{
    check_config(cfg);
    const double h = spacing(cfg);
    const double center = 0.5 * cfg.length;
    const double sigma = cfg.chi_width * cfg.length;
    VectorXd chi(cfg.grid);
    for (int i = 0; i < cfg.grid; ++i) {
        double dist = std::fabs(i * h - center);
        dist = std::min(dist, cfg.length - dist);
        chi(i) = cfg.chi_amplitude * std::exp(-0.5 * dist * dist / (sigma * sigma));
    }
    return chi;
}

VectorXd burgers_rhs(const BurgersConfig& cfg, const VectorXd& chi, const VectorXd& y, double u)
{
    const int n = cfg.grid;
    if (y.size() != n || chi.size() != n)
        throw InputError("burgers_rhs: state does not match the grid");
    const double h = spacing(cfg);
    VectorXd out(n);
    for (int i = 0; i < n; ++i) {
        const double l = y((i + n - 1) % n);
        const double r = y((i + 1) % n);
        const double c = y(i);
        const double advection = ((r * r - l * l) + c * (r - l)) / (6.0 * h);
        out(i) = cfg.nu * (r - 2.0 * c + l) / (h * h) - advection + u * chi(i);
    }
    return out;
}

void check_burgers_stability(const BurgersConfig& cfg, double max_abs_state)
{
    check_config(cfg);
    const double h = spacing(cfg);
    const double bound = cfg.dt * (4.0 * cfg.nu / (h * h) + max_abs_state / h);
    if (bound > 2.5)
        throw ConfigError("burgers.dt: " + std::to_string(cfg.dt) + " violates the RK4 stability bound (" +
                          std::to_string(bound) + " > 2.5)");
}

VectorXd burgers_initial(const BurgersConfig& cfg, double mean, double amplitude)
{
    check_config(cfg);
    const double h = spacing(cfg);
    VectorXd y(cfg.grid);
    for (int i = 0; i < cfg.grid; ++i)
        y(i) = mean + amplitude * std::sin(2.0 * std::numbers::pi * i * h / cfg.length);
    return y;
}

BurgersPlant::BurgersPlant(BurgersConfig cfg, VectorXd y0) : cfg_(cfg), chi_(burgers_chi(cfg)), y_(std::move(y0))
{
    if (y_.size() != cfg_.grid)
        throw ConfigError("burgers: initial state does not match the grid");
    check_burgers_stability(cfg_, y_.cwiseAbs().maxCoeff());
}

void BurgersPlant::step(double u, double dt)
{
    y_ = rk4_step(cfg_, chi_, y_, u, dt);
    if (!y_.allFinite())
        throw IntegrationError("burgers: state became non-finite", static_cast<long>(std::llround(t_ / cfg_.dt)));
    t_ += dt;
}

MatrixXd BurgersPlant::advance(double u, double duration, std::vector<double>* times)
{
    check_burgers_stability(cfg_, y_.cwiseAbs().maxCoeff());
    const auto full = static_cast<long>(std::floor(duration / cfg_.dt + 1e-9));
    const double rest = duration - static_cast<double>(full) * cfg_.dt;
    const bool partial = rest > 1e-12 * cfg_.dt;
    MatrixXd out(full + (partial ? 1 : 0), cfg_.grid);
    for (long k = 0; k < out.rows(); ++k) {
        step(u, k < full ? cfg_.dt : rest);
        out.row(k) = y_.transpose();
        if (times)
            times->push_back(t_);
    }
    return out;
}

MatrixXd burgers_simulate(const BurgersConfig& cfg, const VectorXd& y0, double u, double T)
{
    BurgersPlant plant(cfg, y0);
    const MatrixXd visited = plant.advance(u, T);
    MatrixXd out(visited.rows() + 1, cfg.grid);
    out.row(0) = y0.transpose();
    out.bottomRows(visited.rows()) = visited;
    return out;
}

std::vector<SampleSet> burgers_training_data(const BurgersConfig& cfg, const std::vector<double>& inputs,
                                             int trajectories, double duration, int stride, std::uint64_t seed)
{
    if (trajectories < 1 || stride < 1 || !(duration > 0.0))
        throw ConfigError("burgers training: trajectories, stride and duration must be positive");
    const double h = spacing(cfg);
    std::vector<SampleSet> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Rng rng = make_rng(seed, i);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<MatrixXd> pieces;
        std::vector<MatrixXd> drifts;
        for (int r = 0; r < trajectories; ++r) {
            VectorXd y0 = VectorXd::Constant(cfg.grid, 0.5 * normal(rng));
            for (int k = 1; 2 * k <= cfg.grid; ++k) {
                const double a = 0.3 * normal(rng) / (k * k);
                const double b = 0.3 * normal(rng) / (k * k);
                for (int j = 0; j < cfg.grid; ++j) {
                    const double phase = 2.0 * std::numbers::pi * k * j * h / cfg.length;
                    y0(j) += a * std::sin(phase) + b * std::cos(phase);
                }
            }
            const MatrixXd traj = burgers_simulate(cfg, y0, inputs[i], duration);
            const auto kept = (traj.rows() - 1) / stride + 1;
            MatrixXd sub(kept, cfg.grid);
            for (Eigen::Index k = 0; k < kept; ++k)
                sub.row(k) = traj.row(k * stride);
            const SampleSet piece = central_differences(sub, stride * cfg.dt);
            pieces.push_back(piece.points);
            drifts.push_back(piece.drift);
        }
        Eigen::Index rows = 0;
        for (const auto& p : pieces)
            rows += p.rows();
        SampleSet set;
        set.points.resize(rows, cfg.grid);
        set.drift.resize(rows, cfg.grid);
        Eigen::Index at = 0;
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            set.points.middleRows(at, pieces[p].rows()) = pieces[p];
            set.drift.middleRows(at, drifts[p].rows()) = drifts[p];
            at += pieces[p].rows();
        }
        set.source = SampleSource::trajectory_pairs;
        set.lag = stride * cfg.dt;
        set.measure_note = "burgers trajectories with random smooth initial states";
        out.push_back(std::move(set));
    }
    return out;
}

}  // namespace gedmd
