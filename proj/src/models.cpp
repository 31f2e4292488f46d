#include "gedmd/models.hpp"

#include "gedmd/errors.hpp"
#include "gedmd/rng.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace gedmd {

MatrixXd SdeModel::sigma(const VectorXd& x) const
{
    if (noise_dim == 0 || !diffusion)
        return MatrixXd::Zero(dimension, 0);
    return diffusion(x);
}

MatrixXd SdeModel::diffusion_matrix(const VectorXd& x) const
{
    if (noise_dim == 0 || !diffusion)
        return MatrixXd::Zero(dimension, dimension);
    const MatrixXd s = diffusion(x);
    return s * s.transpose();
}

SdeModel ornstein_uhlenbeck(double alpha, double beta, double u)
{
    if (!(beta > 0.0))
        throw InputError("ornstein_uhlenbeck: beta must be positive");
    SdeModel m;
    m.name = "ornstein_uhlenbeck";
    m.dimension = 1;
    m.noise_dim = 1;
    m.drift = [alpha, u](const VectorXd& x) { return VectorXd::Constant(1, -alpha * (x(0) - u)); };
    const double s = std::sqrt(2.0 / beta);
    m.diffusion = [s](const VectorXd&) { return MatrixXd::Constant(1, 1, s); };
    m.potential = [alpha, u](const VectorXd& x) { return 0.5 * alpha * (x(0) - u) * (x(0) - u); };
    m.potential_gradient = [alpha, u](const VectorXd& x) { return VectorXd::Constant(1, alpha * (x(0) - u)); };
    m.inverse_temperature = beta;
    m.reversible = true;
    return m;
}

SdeModel quadratic_system(double gamma, double delta)
{
    SdeModel m;
    m.name = "quadratic_system";
    m.dimension = 2;
    m.noise_dim = 0;
    m.drift = [gamma, delta](const VectorXd& x) {
        VectorXd b(2);
        b << gamma * x(0), delta * (x(1) - x(0) * x(0));
        return b;
    };
    return m;
}

SdeModel double_well()
{
    SdeModel m;
    m.name = "double_well";
    m.dimension = 2;
    m.noise_dim = 2;
    m.drift = [](const VectorXd& x) {
        VectorXd b(2);
        b << 4.0 * x(0) - 4.0 * x(0) * x(0) * x(0), -2.0 * x(1);
        return b;
    };
    m.diffusion = [](const VectorXd& x) {
        MatrixXd s(2, 2);
        s << 0.7, x(0), 0.0, 0.5;
        return s;
    };
    m.diffusion_jacobian = [](const VectorXd&) {
        std::vector<MatrixXd> jac(2, MatrixXd::Zero(2, 2));
        jac[0](0, 1) = 1.0;
        return jac;
    };
    m.potential = [](const VectorXd& x) {
        const double q = x(0) * x(0) - 1.0;
        return q * q + x(1) * x(1);
    };
    m.potential_gradient = [](const VectorXd& x) {
        VectorXd g(2);
        g << 4.0 * x(0) * x(0) * x(0) - 4.0 * x(0), 2.0 * x(1);
        return g;
    };
    return m;
}

SdeModel duffing(double alpha, double beta, double eps)
{
    SdeModel m;
    m.name = "duffing";
    m.dimension = 2;
    m.noise_dim = 1;
    m.stratonovich = true;
    auto b = [alpha, beta](const VectorXd& x) {
        VectorXd v(2);
        v << x(1), -alpha * x(0) - beta * x(0) * x(0) * x(0);
        return v;
    };
    m.drift = b;
    m.diffusion = [b, eps](const VectorXd& x) { return MatrixXd(eps * b(x)); };
    return m;
}

SdeModel lemon_slice(int k, double beta)
{
    if (!(beta > 0.0))
        throw InputError("lemon_slice: beta must be positive");
    SdeModel m;
    m.name = "lemon_slice";
    m.dimension = 2;
    m.noise_dim = 2;
    m.reversible = true;
    m.inverse_temperature = beta;
    const double kk = static_cast<double>(k);
    m.potential = [kk](const VectorXd& x) {
        const double r = std::hypot(x(0), x(1));
        const double phi = std::atan2(x(1), x(0));
        return std::cos(kk * phi) + 1.0 / std::cos(0.5 * phi) + 10.0 * (r - 1.0) * (r - 1.0) + 1.0 / r;
    };
    m.potential_gradient = [kk](const VectorXd& x) {
        const double r = std::hypot(x(0), x(1));
        const double phi = std::atan2(x(1), x(0));
        const double sec = 1.0 / std::cos(0.5 * phi);
        const double v_r = 20.0 * (r - 1.0) - 1.0 / (r * r);
        const double v_phi = -kk * std::sin(kk * phi) + 0.5 * sec * std::tan(0.5 * phi);
        const double c = x(0) / r;
        const double s = x(1) / r;
        VectorXd g(2);
        g << v_r * c - v_phi / r * s, v_r * s + v_phi / r * c;
        return g;
    };
    auto grad = m.potential_gradient;
    m.drift = [grad](const VectorXd& x) { return VectorXd(-grad(x)); };
    const double s = std::sqrt(2.0 / beta);
    m.diffusion = [s](const VectorXd&) { return MatrixXd(s * MatrixXd::Identity(2, 2)); };
    return m;
}

SdeModel gradient_system()
{
    SdeModel m;
    m.name = "gradient_system";
    m.dimension = 2;
    m.noise_dim = 0;
    m.potential = [](const VectorXd& x) {
        const double q = x(0) * x(0) - 1.0;
        return q * q + x(1) * x(1) + 0.5 * x(0) * x(1) + 0.3 * x(0);
    };
    m.potential_gradient = [](const VectorXd& x) {
        VectorXd g(2);
        g << 4.0 * x(0) * x(0) * x(0) - 4.0 * x(0) + 0.5 * x(1) + 0.3, 2.0 * x(1) + 0.5 * x(0);
        return g;
    };
    auto grad = m.potential_gradient;
    m.drift = [grad](const VectorXd& x) { return VectorXd(-grad(x)); };
    return m;
}

namespace {

void check_state(const VectorXd& x, long step)
{
    if (!x.allFinite()) {
        std::ostringstream msg;
        msg << "integration produced a non-finite state at step " << step;
        throw IntegrationError(msg.str(), step);
    }
}

void check_x0(const SdeModel& model, const VectorXd& x0, double dt, long steps)
{
    if (x0.size() != model.dimension)
        throw InputError("integrate: initial state has the wrong dimension");
    if (!(dt > 0.0))
        throw InputError("integrate: dt must be positive");
    if (steps < 0)
        throw InputError("integrate: negative step count");
}

}  // namespace

MatrixXd integrate_em(const SdeModel& model, const VectorXd& x0, double dt, long steps, std::uint64_t seed)
{
    check_x0(model, x0, dt, steps);
    const auto d = model.dimension;
    MatrixXd traj(steps + 1, d);
    traj.row(0) = x0.transpose();
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sq = std::sqrt(dt);
    VectorXd x = x0;
    VectorXd dw(model.noise_dim);
    for (long n = 1; n <= steps; ++n) {
        VectorXd next = x + dt * model.drift(x);
        if (model.noise_dim > 0) {
            for (int k = 0; k < model.noise_dim; ++k)
                dw(k) = sq * normal(rng);
            next += model.diffusion(x) * dw;
        }
        check_state(next, n);
        x = std::move(next);
        traj.row(n) = x.transpose();
    }
    return traj;
}

MatrixXd integrate_rk4(const SdeModel& model, const VectorXd& x0, double dt, long steps)
{
    check_x0(model, x0, dt, steps);
    MatrixXd traj(steps + 1, model.dimension);
    traj.row(0) = x0.transpose();
    VectorXd x = x0;
    for (long n = 1; n <= steps; ++n) {
        const VectorXd k1 = model.drift(x);
        const VectorXd k2 = model.drift(x + 0.5 * dt * k1);
        const VectorXd k3 = model.drift(x + 0.5 * dt * k2);
        const VectorXd k4 = model.drift(x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_state(x, n);
        traj.row(n) = x.transpose();
    }
    return traj;
}

VectorXd noise_induced_drift(const SdeModel& model, const VectorXd& x, double fd_step)
{
    const int d = model.dimension;
    VectorXd c = VectorXd::Zero(d);
    if (model.noise_dim == 0)
        return c;
    const MatrixXd s = model.diffusion(x);
    std::vector<MatrixXd> jac;
    if (model.diffusion_jacobian) {
        jac = model.diffusion_jacobian(x);
    } else {
        jac.resize(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            VectorXd xp = x, xm = x;
            xp(j) += fd_step;
            xm(j) -= fd_step;
            jac[static_cast<std::size_t>(j)] = (model.diffusion(xp) - model.diffusion(xm)) / (2.0 * fd_step);
        }
    }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < model.noise_dim; ++k)
                c(i) += jac[static_cast<std::size_t>(j)](i, k) * s(j, k);
    return c;
}

SdeModel stratonovich_to_ito(const SdeModel& model, double fd_step)
{
    if (!model.stratonovich)
        throw InputError("stratonovich_to_ito: model is not flagged as Stratonovich");
    SdeModel out = model;
    out.name = model.name + "_ito";
    out.stratonovich = false;
    // Copy kept by value so the returned model owns everything it calls.
    out.drift = [model, fd_step](const VectorXd& x) {
        return VectorXd(model.drift(x) + 0.5 * noise_induced_drift(model, x, fd_step));
    };
    return out;
}

MatrixXd analytic_ou_generator(double alpha, double beta, int max_degree)
{
    if (max_degree < 0)
        throw InputError("analytic_ou_generator: negative degree");
    const int n = max_degree + 1;
    MatrixXd l = MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        l(k, k) = -alpha * k;
        if (k >= 2 && std::isfinite(beta))
            l(k - 2, k) = static_cast<double>(k * (k - 1)) / beta;
    }
    return l;
}

}  // namespace gedmd
