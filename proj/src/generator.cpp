#include "gedmd/generator.hpp"

#include "gedmd/errors.hpp"

#include <algorithm>

namespace gedmd {

namespace {

void check_block(const EvaluationBlock& block, const SampleSet& sample)
{
    if (block.samples() != sample.samples())
        throw InputError("gedmd: evaluation block and sample set have different sample counts");
    if (block.dimension() != sample.dimension())
        throw InputError("gedmd: evaluation block and sample set have different dimensions");
    if (sample.drift.rows() != sample.points.rows())
        throw InputError("gedmd: drift samples missing");
}

void rank_warning(GeneratorEstimate& est)
{
    if (est.rank < est.size())
        est.warnings.push_back("Gram matrix is rank deficient (rank " + std::to_string(est.rank) + " of " +
                               std::to_string(est.size()) + "); pseudoinverse used");
}

MatrixXd reversible_A(const EvaluationBlock& block, const SampleSet& sample, std::size_t chunk)
{
    const int d = block.dimension();
    const auto n = block.size();
    MatrixXd a = MatrixXd::Zero(n, n);
    for (int j = 0; j < d; ++j) {
        for (int k = 0; k < d; ++k) {
            const VectorXd ajk = sample.diffusion.col(j * d + k);
            if (ajk.cwiseAbs().maxCoeff() == 0.0)
                continue;
            const MatrixXd weighted = block.gradient(j) * ajk.asDiagonal();
            a += chunked_outer_mean(weighted, block.gradient(k), chunk);
        }
    }
    a *= -0.5;
    return 0.5 * (a + a.transpose());
}

GeneratorEstimate reversible_from(const MatrixXd& psi, const MatrixXd& a_hat, const GeneratorOptions& options)
{
    const ScaledSvd svd = scaled_svd(psi, options.svd_cutoff);
    GeneratorEstimate est;
    est.samples = static_cast<std::size_t>(psi.cols());
    est.svd_cutoff = options.svd_cutoff;
    est.rank = svd.rank();
    est.A_hat = a_hat;
    est.G_hat = chunked_outer_mean(psi, psi, options.chunk);
    const MatrixXd g_pinv = svd.gram_pinv();
    est.M = a_hat * g_pinv;
    est.adjoint_M = a_hat.transpose() * g_pinv;
    rank_warning(est);
    return est;
}

}  // namespace

nlohmann::json matrix_to_json(const MatrixXd& a)
{
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            row.push_back(a(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j)
{
    if (!j.is_array())
        throw InputError("matrix_from_json: expected an array of rows");
    if (j.empty())
        return MatrixXd();
    MatrixXd a(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != j[0].size())
            throw InputError("matrix_from_json: ragged rows");
        for (std::size_t k = 0; k < j[i].size(); ++k)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
    return a;
}

nlohmann::json GeneratorEstimate::to_json() const
{
    nlohmann::json j;
    j["dictionary"] = dictionary;
    j["samples"] = samples;
    j["svd_cutoff"] = svd_cutoff;
    j["rank"] = rank;
    j["A_hat"] = matrix_to_json(A_hat);
    j["G_hat"] = matrix_to_json(G_hat);
    j["M"] = matrix_to_json(M);
    j["adjoint_M"] = matrix_to_json(adjoint_M);
    j["warnings"] = warnings;
    return j;
}

MatrixXd dpsi_deterministic(const EvaluationBlock& block, const SampleSet& sample)
{
    check_block(block, sample);
    MatrixXd out = MatrixXd::Zero(block.size(), block.samples());
    for (int k = 0; k < block.dimension(); ++k)
        out += block.gradient(k) * sample.drift.col(k).asDiagonal();
    return out;
}

MatrixXd dpsi_stochastic(const EvaluationBlock& block, const SampleSet& sample)
{
    check_block(block, sample);
    if (!block.has_hessians())
        throw InputError("gedmd_stochastic: second derivatives of the dictionary are required");
    if (!sample.has_diffusion())
        throw InputError("gedmd_stochastic: diffusion samples are required");
    MatrixXd out = dpsi_deterministic(block, sample);
    const int d = block.dimension();
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            out += 0.5 * (block.hessian(j, k) * sample.diffusion.col(j * d + k).asDiagonal());
    return out;
}

GeneratorData generator_data(const Dictionary& dict, const SampleSet& sample, GeneratorKind kind, std::size_t chunk)
{
    if (sample.dimension() != dict.dimension())
        throw InputError("gedmd: sample dimension does not match the dictionary");
    const auto m = static_cast<std::size_t>(sample.samples());
    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t chunks = (m + chunk - 1) / chunk;
    GeneratorData data;
    data.psi.resize(dict.size(), static_cast<Eigen::Index>(m));
    data.dpsi.resize(dict.size(), static_cast<Eigen::Index>(m));
    const bool hess = kind == GeneratorKind::stochastic;
    parallel_for(chunks, [&](std::size_t c) {
        const auto start = static_cast<Eigen::Index>(c * chunk);
        const auto len = static_cast<Eigen::Index>(std::min(chunk, m - c * chunk));
        SampleSet part;
        part.points = sample.points.middleRows(start, len);
        part.drift = sample.drift.middleRows(start, len);
        if (sample.has_diffusion())
            part.diffusion = sample.diffusion.middleRows(start, len);
        const EvaluationBlock block = dict.evaluate(part.points, hess);
        data.psi.middleCols(start, len) = block.values;
        data.dpsi.middleCols(start, len) = hess ? dpsi_stochastic(block, part) : dpsi_deterministic(block, part);
    });
    return data;
}

GeneratorEstimate estimate_from_data(const MatrixXd& psi, const MatrixXd& dpsi, const GeneratorOptions& options)
{
    if (psi.rows() != dpsi.rows() || psi.cols() != dpsi.cols())
        throw InputError("gedmd: psi and dpsi shapes differ");
    if (!psi.allFinite() || !dpsi.allFinite())
        throw InputError("gedmd: non-finite data");
    const ScaledSvd svd = scaled_svd(psi, options.svd_cutoff);
    GeneratorEstimate est;
    est.samples = static_cast<std::size_t>(psi.cols());
    est.svd_cutoff = options.svd_cutoff;
    est.rank = svd.rank();
    est.A_hat = chunked_outer_mean(dpsi, psi, options.chunk);
    est.G_hat = chunked_outer_mean(psi, psi, options.chunk);
    // Solving against the data matrix avoids squaring its condition number.
    est.M = svd.solve_right(dpsi);
    // A^T G^+ = D^-1 V S (dPsi U)^T D V S^-2 V^T D in terms of the scaled SVD.
    const MatrixXd proj = dpsi * svd.right;  // n x r
    const VectorXd& s = svd.sigma;
    const MatrixXd left_scaled = svd.scale.cwiseInverse().asDiagonal() * svd.left * s.asDiagonal();
    const MatrixXd inner = proj.transpose() * svd.scale.asDiagonal() * svd.left;  // r x r
    est.adjoint_M = left_scaled * inner * s.cwiseAbs2().cwiseInverse().asDiagonal() * svd.left.transpose() *
                    svd.scale.asDiagonal();
    rank_warning(est);
    return est;
}

GeneratorEstimate gedmd_deterministic(const EvaluationBlock& block, const SampleSet& sample,
                                      const GeneratorOptions& options)
{
    return estimate_from_data(block.values, dpsi_deterministic(block, sample), options);
}

GeneratorEstimate gedmd_deterministic(const Dictionary& dict, const SampleSet& sample, const GeneratorOptions& options)
{
    const GeneratorData data = generator_data(dict, sample, GeneratorKind::deterministic, options.chunk);
    GeneratorEstimate est = estimate_from_data(data.psi, data.dpsi, options);
    est.dictionary = dict.to_json();
    return est;
}

GeneratorEstimate gedmd_stochastic(const EvaluationBlock& block, const SampleSet& sample,
                                   const GeneratorOptions& options)
{
    return estimate_from_data(block.values, dpsi_stochastic(block, sample), options);
}

GeneratorEstimate gedmd_stochastic(const Dictionary& dict, const SampleSet& sample, const GeneratorOptions& options)
{
    const GeneratorData data = generator_data(dict, sample, GeneratorKind::stochastic, options.chunk);
    GeneratorEstimate est = estimate_from_data(data.psi, data.dpsi, options);
    est.dictionary = dict.to_json();
    return est;
}

GeneratorEstimate gedmd_reversible(const EvaluationBlock& block, const SampleSet& sample,
                                   const GeneratorOptions& options)
{
    check_block(block, sample);
    if (!sample.has_diffusion())
        throw InputError("gedmd_reversible: diffusion samples are required");
    return reversible_from(block.values, reversible_A(block, sample, options.chunk), options);
}

GeneratorEstimate gedmd_reversible(const Dictionary& dict, const SampleSet& sample, const GeneratorOptions& options)
{
    if (sample.dimension() != dict.dimension())
        throw InputError("gedmd_reversible: sample dimension does not match the dictionary");
    if (!sample.has_diffusion())
        throw InputError("gedmd_reversible: diffusion samples are required");
    const auto m = static_cast<std::size_t>(sample.samples());
    const std::size_t chunk = std::max<std::size_t>(options.chunk, 1);
    const std::size_t chunks = (m + chunk - 1) / chunk;
    MatrixXd psi(dict.size(), static_cast<Eigen::Index>(m));
    std::vector<MatrixXd> parts(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        const auto start = static_cast<Eigen::Index>(c * chunk);
        const auto len = static_cast<Eigen::Index>(std::min(chunk, m - c * chunk));
        SampleSet part;
        part.points = sample.points.middleRows(start, len);
        part.drift = MatrixXd::Zero(len, sample.dimension());
        part.diffusion = sample.diffusion.middleRows(start, len);
        const EvaluationBlock block = dict.evaluate(part.points, false);
        psi.middleCols(start, len) = block.values;
        // chunk-local mean times chunk length gives the chunk sum
        parts[c] = reversible_A(block, part, chunk) * static_cast<double>(len);
    });
    MatrixXd a_hat = tree_reduce(std::move(parts)) / static_cast<double>(m);
    GeneratorEstimate est = reversible_from(psi, 0.5 * (a_hat + a_hat.transpose()), options);
    est.dictionary = dict.to_json();
    return est;
}

MatrixXd perron_frobenius_estimate(const GeneratorEstimate& est)
{
    return est.adjoint_M;
}

MatrixXd edmd(const MatrixXd& psi_x, const MatrixXd& psi_y, double svd_cutoff)
{
    if (psi_x.rows() != psi_y.rows() || psi_x.cols() != psi_y.cols())
        throw InputError("edmd: data matrices differ in shape");
    return scaled_svd(psi_x, svd_cutoff).solve_right(psi_y);
}

MatrixXd edmd_with_log(const MatrixXd& points, const MatrixXd& lagged_points, const Dictionary& dict, double tau,
                       double svd_cutoff)
{
    if (!(tau > 0.0))
        throw InputError("edmd_with_log: lag must be positive");
    const MatrixXd k = edmd(dict.values(points), dict.values(lagged_points), svd_cutoff);
    return principal_log(k) / tau;
}

}  // namespace gedmd
