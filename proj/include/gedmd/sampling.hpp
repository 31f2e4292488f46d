#pragma once

#include "gedmd/dictionary.hpp"
#include "gedmd/models.hpp"
#include "gedmd/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gedmd {

enum class SampleSource { exact, trajectory_pairs, spawned_bursts };

const char* to_string(SampleSource source);

/// Points with per-point drift and (optionally) diffusion samples.
///
/// `diffusion` is m x d^2 with a_jk stored at column j * d + k.
struct SampleSet {
    MatrixXd points;
    MatrixXd drift;
    MatrixXd diffusion;
    SampleSource source = SampleSource::exact;
    double lag = 0.0;
    int replicas = 0;
    std::string measure_note;

    int samples() const { return static_cast<int>(points.rows()); }
    int dimension() const { return static_cast<int>(points.cols()); }
    bool has_diffusion() const { return diffusion.size() > 0; }
    MatrixXd diffusion_at(int l) const;
    double diffusion_entry(int l, int j, int k) const { return diffusion(l, j * dimension() + k); }

    /// Throws InputError on shape mismatch, non-finite entries or an
    /// asymmetric / indefinite diffusion slice.
    void validate() const;
};

MatrixXd sample_uniform(const std::vector<Interval>& box, int m, std::uint64_t seed);

/// Exact b(x_l) and, unless `with_diffusion` is false, a(x_l).
SampleSet exact_samples(const SdeModel& model, const MatrixXd& points, bool with_diffusion = true,
                        std::string measure_note = {});

/// First-order estimates from consecutive trajectory rows:
/// b = (x_{l+1} - x_l) / t, a = (x_{l+1} - x_l)(x_{l+1} - x_l)^T / t.
SampleSet kramers_moyal(const MatrixXd& trajectory, double lag);

/// Second-order time derivatives of an ODE trajectory at interior rows.
SampleSet central_differences(const MatrixXd& trajectory, double dt);

/// Adds i.i.d. N(0, stddev^2) noise to every drift sample.
void add_drift_noise(SampleSet& set, double stddev, std::uint64_t seed);

/// Adds i.i.d. noise to the upper triangle of every diffusion slice, mirrored to
/// keep the slices symmetric. Slices may become indefinite.
void add_diffusion_noise(SampleSet& set, double stddev, std::uint64_t seed);

/// Inverse-CDF sampler for an unnormalized 1D density tabulated on a uniform grid.
class InverseCdfSampler {
public:
    InverseCdfSampler(const std::function<double(double)>& log_density, Interval range, int grid_points);
    double operator()(Rng& rng) const;

private:
    VectorXd grid_;
    VectorXd cdf_;
};

/// I.i.d. samples from the invariant density of the lemon-slice model,
/// using that exp(-beta V) r dr dphi factorizes in polar coordinates.
MatrixXd sample_lemon_slice(int k, double beta, int m, std::uint64_t seed);

}  // namespace gedmd
