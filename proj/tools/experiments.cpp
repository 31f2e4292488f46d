#include "cli.hpp"

#include "gedmd/coarse_grain.hpp"
#include "gedmd/control.hpp"
#include "gedmd/errors.hpp"
#include "gedmd/generator.hpp"
#include "gedmd/io.hpp"
#include "gedmd/spectral.hpp"
#include "gedmd/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace fs = std::filesystem;
using nlohmann::json;

namespace gedmd::cli {

namespace {

struct Output {
    fs::path dir;
    std::vector<std::string> files;
    json summary = json::object();

    void csv(const std::string& name, const CsvTable& table)
    {
        table.write(dir / name);
        files.push_back(name);
    }
    void write(const std::string& name, const json& j)
    {
        write_json(dir / name, j);
        files.push_back(name);
    }
};

std::vector<Interval> read_box(const Node& n, const std::string& key)
{
    const auto& v = n.raw().contains(key) ? n.raw().at(key) : json();
    if (!v.is_array() || v.empty())
        n.fail(key, "expected a non-empty array of [lo, hi] pairs");
    std::vector<Interval> box;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number() ||
            !(p[1].get<double>() > p[0].get<double>()))
            n.fail(key + "[" + std::to_string(i) + "]", "expected [lo, hi] with lo < hi");
        box.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return box;
}

int positive_int(const Node& n, const std::string& key, long long fallback)
{
    const long long v = n.integer(key, fallback);
    if (v < 1)
        n.fail(key, "must be positive");
    return static_cast<int>(v);
}

int positive_int(const Node& n, const std::string& key)
{
    const long long v = n.integer(key);
    if (v < 1)
        n.fail(key, "must be positive");
    return static_cast<int>(v);
}

SdeModel build_model(const Node& n)
{
    const std::string name = n.string("name");
    const Node p = n.optional_child("params");
    if (name == "ornstein_uhlenbeck")
        return ornstein_uhlenbeck(p.number("alpha", 1.0), p.number("beta", 1.0), p.number("u", 0.0));
    if (name == "quadratic_system")
        return quadratic_system(p.number("gamma", -0.8), p.number("delta", -0.7));
    if (name == "double_well")
        return double_well();
    if (name == "duffing") {
        SdeModel m = duffing(p.number("alpha", -1.1), p.number("beta", 1.1), p.number("epsilon", 0.05));
        return p.boolean("ito_correction", true) ? stratonovich_to_ito(m) : m;
    }
    if (name == "lemon_slice")
        return lemon_slice(static_cast<int>(p.integer("k", 4)), p.number("beta", 1.0));
    if (name == "gradient_system")
        return gradient_system();
    n.fail("name", "unknown model '" + name + "'");
}

Dictionary build_dictionary(const Node& n)
{
    try {
        return Dictionary::from_json(n.raw());
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        const std::string prefix = "dictionary";
        if (msg.rfind(prefix, 0) == 0)
            msg = msg.substr(prefix.size());
        throw UsageError(n.path() + msg);
    } catch (const Error& e) {
        throw UsageError(n.path() + ": " + e.what());
    }
}

SampleSet build_samples(const Node& s, const Node& model_node, const SdeModel& model, std::uint64_t seed)
{
    const std::string kind = s.string("kind", "uniform");
    SampleSet set;
    if (kind == "uniform") {
        const auto box = read_box(s, "box");
        if (static_cast<int>(box.size()) != model.dimension)
            s.fail("box", "dimension does not match the model");
        const MatrixXd pts = sample_uniform(box, positive_int(s, "m"), seed);
        set = exact_samples(model, pts, s.boolean("diffusion", !model.deterministic()), "uniform on box");
    } else if (kind == "invariant") {
        if (model.name != "lemon_slice")
            s.fail("kind", "invariant sampling is available for the lemon_slice model only");
        const Node p = model_node.optional_child("params");
        const MatrixXd pts = sample_lemon_slice(static_cast<int>(p.integer("k", 4)), p.number("beta", 1.0),
                                                positive_int(s, "m"), seed);
        set = exact_samples(model, pts, true, "invariant measure");
    } else if (kind == "trajectory") {
        const auto x0v = s.numbers("x0");
        if (static_cast<int>(x0v.size()) != model.dimension)
            s.fail("x0", "dimension does not match the model");
        const VectorXd x0 = Eigen::Map<const VectorXd>(x0v.data(), static_cast<Eigen::Index>(x0v.size()));
        const double dt = s.number("dt");
        if (!(dt > 0.0))
            s.fail("dt", "must be positive");
        const long steps = positive_int(s, "steps");
        if (model.deterministic())
            set = central_differences(integrate_rk4(model, x0, dt, steps), dt);
        else
            set = kramers_moyal(integrate_em(model, x0, dt, steps, seed), dt);
    } else {
        s.fail("kind", "expected uniform, invariant or trajectory");
    }
    const Node noise = s.optional_child("noise");
    const double drift_noise = noise.number("drift", 0.0);
    const double diffusion_noise = noise.number("diffusion", 0.0);
    if (drift_noise < 0.0 || diffusion_noise < 0.0)
        noise.fail("", "standard deviations must be nonnegative");
    add_drift_noise(set, drift_noise, splitmix64(seed + 1));
    add_diffusion_noise(set, diffusion_noise, splitmix64(seed + 2));
    return set;
}

GeneratorOptions build_options(const Node& solver)
{
    GeneratorOptions o;
    o.svd_cutoff = solver.number("svd_cutoff", 1e-10);
    if (!(o.svd_cutoff >= 0.0))
        solver.fail("svd_cutoff", "must be nonnegative");
    o.chunk = static_cast<std::size_t>(positive_int(solver, "chunk", 1024));
    return o;
}

GeneratorEstimate estimate(const std::string& kind, const Node& solver, const Dictionary& dict,
                           const SampleSet& set)
{
    const GeneratorOptions o = build_options(solver);
    if (kind == "deterministic")
        return gedmd_deterministic(dict, set, o);
    if (kind == "stochastic") {
        if (!set.has_diffusion())
            solver.fail("generator", "stochastic estimator needs diffusion samples");
        return gedmd_stochastic(dict, set, o);
    }
    if (kind == "reversible") {
        if (!set.has_diffusion())
            solver.fail("generator", "reversible estimator needs diffusion samples");
        return gedmd_reversible(dict, set, o);
    }
    solver.fail("generator", "expected deterministic, stochastic or reversible");
}

std::vector<std::string> term_names(const Dictionary& dict)
{
    std::vector<std::string> out;
    for (int i = 0; i < dict.size(); ++i)
        out.push_back(dict.term_name(i));
    return out;
}

json to_list(const VectorXd& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

CsvTable eigenvalue_table(const SpectralDecomposition& dec, int count)
{
    CsvTable t({"index", "real", "imag", "timescale"});
    for (int l = 0; l < std::min(count, dec.size()); ++l)
        t.add_row({static_cast<long long>(l), dec.eigenvalues(l).real(), dec.eigenvalues(l).imag(),
                   dec.timescales(l)});
    return t;
}

json eigenvalue_json(const SpectralDecomposition& dec, int count)
{
    json arr = json::array();
    for (int l = 0; l < std::min(count, dec.size()); ++l)
        arr.push_back({dec.eigenvalues(l).real(), dec.eigenvalues(l).imag()});
    return arr;
}

// Reference Gram matrix of the uniform measure on a box by tensor Gauss-Legendre quadrature.
MatrixXd quadrature_gram(const Dictionary& dict, const std::vector<Interval>& box, int order)
{
    const QuadratureRule rule = gauss_legendre(order);
    const int d = static_cast<int>(box.size());
    long total = 1;
    for (int k = 0; k < d; ++k)
        total *= order;
    MatrixXd pts(total, d);
    VectorXd w(total);
    for (long idx = 0; idx < total; ++idx) {
        long rest = idx;
        double weight = 1.0;
        for (int k = 0; k < d; ++k) {
            const int q = static_cast<int>(rest % order);
            rest /= order;
            const double half = 0.5 * (box[static_cast<std::size_t>(k)].hi - box[static_cast<std::size_t>(k)].lo);
            pts(idx, k) = box[static_cast<std::size_t>(k)].lo + half * (rule.nodes(q) + 1.0);
            weight *= 0.5 * rule.weights(q);
        }
        w(idx) = weight;
    }
    const MatrixXd psi = dict.values(pts);
    return psi * w.asDiagonal() * psi.transpose();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void run_estimate(const Node& e, std::uint64_t seed, Output& out)
{
    const Node mnode = e.child("model");
    const SdeModel model = build_model(mnode);
    const Dictionary dict = build_dictionary(e.child("dictionary"));
    const Node solver = e.optional_child("solver");
    const std::string kind = solver.string("generator", model.deterministic() ? "deterministic" : "stochastic");
    const Node sampling = e.child("sampling");
    const SampleSet set = build_samples(sampling, mnode, model, seed);
    const GeneratorEstimate est = estimate(kind, solver, dict, set);
    out.write("generator.json", est.to_json());
    out.csv("M.csv", matrix_table(est.M, term_names(dict), "row"));
    out.summary["rank"] = est.rank;
    out.summary["samples"] = est.samples;
    out.summary["warnings"] = est.warnings;

    const std::string compare = e.string("compare", "none");
    if (compare == "analytic_ou") {
        if (model.name != "ornstein_uhlenbeck" || dict.kind() != Dictionary::Kind::monomials || dict.dimension() != 1)
            e.fail("compare", "analytic_ou needs the ornstein_uhlenbeck model with 1D monomials");
        const Node p = mnode.optional_child("params");
        const MatrixXd ref = analytic_ou_generator(p.number("alpha", 1.0), p.number("beta", 1.0), dict.max_degree());
        out.summary["max_abs_error_vs_analytic"] = (est.L() - ref).cwiseAbs().maxCoeff();
    } else if (compare != "none") {
        e.fail("compare", "expected none or analytic_ou");
    }

    const Node conv = e.optional_child("convergence");
    if (conv.has("sizes")) {
        const auto sizes = conv.numbers("sizes");
        const int replicas = positive_int(conv, "replicas", 5);
        const int order = positive_int(conv, "quadrature_order", 64);
        const auto box = read_box(sampling, "box");
        const MatrixXd G = quadrature_gram(dict, box, order);
        CsvTable t({"m", "replica", "frobenius_error"});
        std::vector<double> ms, means;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            const int m = static_cast<int>(sizes[i]);
            if (m < 1)
                conv.fail("sizes[" + std::to_string(i) + "]", "must be positive");
            double mean = 0.0;
            for (int r = 0; r < replicas; ++r) {
                const MatrixXd pts = sample_uniform(box, m, splitmix64(seed + 1000 * (i + 1) + static_cast<std::size_t>(r)));
                const MatrixXd psi = dict.values(pts);
                const MatrixXd G_hat = chunked_outer_mean(psi, psi, 1024);
                const double err = (G_hat - G).norm();
                t.add_row({static_cast<long long>(m), static_cast<long long>(r), err});
                mean += err / replicas;
            }
            ms.push_back(m);
            means.push_back(mean);
        }
        out.csv("convergence.csv", t);
        out.summary["convergence_slope"] = loglog_slope(ms, means);
    }
}

void run_spectrum(const Node& e, std::uint64_t seed, Output& out)
{
    const Node mnode = e.child("model");
    const SdeModel model = build_model(mnode);
    const Dictionary dict = build_dictionary(e.child("dictionary"));
    const Node solver = e.optional_child("solver");
    const std::string kind = solver.string("generator", model.deterministic() ? "deterministic" : "stochastic");
    const SampleSet set = build_samples(e.child("sampling"), mnode, model, seed);
    const GeneratorEstimate est = estimate(kind, solver, dict, set);
    const SpectralDecomposition dec = decompose(est);
    const int count = static_cast<int>(e.integer("count", dict.size()));
    out.csv("eigenvalues.csv", eigenvalue_table(dec, count));

    std::vector<std::string> header{"term"};
    for (int l = 0; l < std::min(count, dec.size()); ++l) {
        header.push_back("xi" + std::to_string(l) + "_re");
        header.push_back("xi" + std::to_string(l) + "_im");
    }
    CsvTable vecs(header);
    for (int i = 0; i < dict.size(); ++i) {
        std::vector<CsvCell> row{dict.term_name(i)};
        for (int l = 0; l < std::min(count, dec.size()); ++l) {
            row.emplace_back(dec.eigenvectors(i, l).real());
            row.emplace_back(dec.eigenvectors(i, l).imag());
        }
        vecs.add_row(std::move(row));
    }
    out.csv("eigenvectors.csv", vecs);
    out.summary["eigenvalues"] = eigenvalue_json(dec, count);
    out.summary["max_residual"] = dec.max_residual;
    out.summary["warnings"] = dec.warnings;

    if (e.boolean("modes", false)) {
        const ModeDecomposition modes = koopman_modes(dec, dict.full_state_selector());
        CsvTable t({"mode", "state", "real", "imag"});
        for (int l : modes.active)
            for (Eigen::Index k = 0; k < modes.modes.rows(); ++k)
                t.add_row({static_cast<long long>(l), static_cast<long long>(k + 1), modes.modes(k, l).real(),
                           modes.modes(k, l).imag()});
        out.csv("modes.csv", t);
        const auto box = read_box(e.child("sampling"), "box");
        const MatrixXd fresh = sample_uniform(box, positive_int(e, "reconstruction_points", 200), splitmix64(seed + 5));
        const MatrixXd rb = reconstruct_drift(dec, modes, dict, fresh);
        const SampleSet truth = exact_samples(model, fresh, false);
        out.summary["active_modes"] = modes.active;
        out.summary["drift_reconstruction_max_error"] = (rb - truth.drift).cwiseAbs().maxCoeff();
    }
}

CsvTable term_table(const std::string& label, const std::vector<std::string>& functions, const MatrixXd& coeffs,
                    const Dictionary& dict, double drop_below)
{
    CsvTable t({label, "term", "coefficient"});
    for (Eigen::Index k = 0; k < coeffs.cols(); ++k)
        for (Eigen::Index i = 0; i < coeffs.rows(); ++i)
            if (std::abs(coeffs(i, k)) > drop_below)
                t.add_row({functions[static_cast<std::size_t>(k)], dict.term_name(static_cast<int>(i)), coeffs(i, k)});
    return t;
}

void run_identify(const Node& e, std::uint64_t seed, Output& out)
{
    const Node mnode = e.child("model");
    const SdeModel model = build_model(mnode);
    const Dictionary dict = build_dictionary(e.child("dictionary"));
    const Node solver = e.optional_child("solver");
    const std::string kind = solver.string("generator", model.deterministic() ? "deterministic" : "stochastic");
    if (kind != "deterministic" && kind != "stochastic")
        solver.fail("generator", "identification uses the deterministic or stochastic estimator");
    const SampleSet set = build_samples(e.child("sampling"), mnode, model, seed);
    const double delta = solver.number("threshold", 0.0);
    const int iterations = positive_int(solver, "iterations", 10);
    const double drop = e.number("drop_below", 1e-8);
    const GeneratorOptions options = build_options(solver);

    IdentifiedModel im;
    MatrixXd L;
    if (delta > 0.0) {
        const GeneratorData data = generator_data(
            dict, set, kind == "stochastic" ? GeneratorKind::stochastic : GeneratorKind::deterministic, options.chunk);
        const ThresholdResult th = hard_threshold(generator_fit_problem(data, options.svd_cutoff), delta, iterations);
        L = th.coefficients;
        im.threshold_history = th.history;
        im.warnings = th.warnings;
    } else {
        const GeneratorEstimate est = estimate(kind, solver, dict, set);
        L = est.L();
        im.warnings = est.warnings;
    }
    const MatrixXd B = dict.full_state_selector();
    im.drift_coeffs = identify_drift(L, B);
    std::vector<std::string> drift_names;
    for (int k = 0; k < dict.dimension(); ++k)
        drift_names.push_back("b" + std::to_string(k + 1));
    out.csv("drift_terms.csv", term_table("function", drift_names, im.drift_coeffs, dict, drop));
    if (kind == "stochastic") {
        im.diffusion_coeffs =
            identify_diffusion(L, dict, set.points, im.drift_coeffs, e.number("closure_tolerance", 1e-6));
        std::vector<std::string> names;
        const int d = dict.dimension();
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j)
                names.push_back("a" + std::to_string(i + 1) + std::to_string(j + 1));
        std::vector<std::string> ordered(names.size());
        for (int i = 0, c = 0; i < d; ++i)
            for (int j = i; j < d; ++j, ++c)
                ordered[static_cast<std::size_t>(triangle_index(i, j, d))] = names[static_cast<std::size_t>(c)];
        out.csv("diffusion_terms.csv", term_table("entry", ordered, im.diffusion_coeffs, dict, drop));
    }
    CsvTable hist({"iteration", "surviving"});
    for (const auto& [it, n] : im.threshold_history)
        hist.add_row({static_cast<long long>(it), static_cast<long long>(n)});
    out.csv("threshold_history.csv", hist);
    out.write("identified.json", im.to_json(dict, drop));
    out.summary["warnings"] = im.warnings;
}

void run_conserved(const Node& e, std::uint64_t seed, Output& out)
{
    const Node mnode = e.child("model");
    const SdeModel model = build_model(mnode);
    const Dictionary dict = build_dictionary(e.child("dictionary"));
    const Node solver = e.optional_child("solver");
    const std::string kind = solver.string("generator", model.deterministic() ? "deterministic" : "stochastic");
    const SampleSet set = build_samples(e.child("sampling"), mnode, model, seed);
    const GeneratorEstimate est = estimate(kind, solver, dict, set);
    const SpectralDecomposition dec = decompose(est);
    const double rel = e.number("zero_tolerance", 1e-6);
    const double tol = rel * spectral_radius(dec);
    out.csv("eigenvalues.csv", eigenvalue_table(dec, dec.size()));
    const auto quantities = conserved_quantities(dec, dict.constant_index(), tol);
    CsvTable t({"quantity", "term", "coefficient"});
    for (std::size_t q = 0; q < quantities.size(); ++q)
        for (Eigen::Index i = 0; i < quantities[q].size(); ++i)
            if (std::abs(quantities[q](i)) > 1e-10)
                t.add_row({static_cast<long long>(q), dict.term_name(static_cast<int>(i)), quantities[q](i)});
    out.csv("conserved.csv", t);
    out.summary["zero_multiplicity"] = zero_multiplicity(dec, tol);
    out.summary["spectral_radius"] = spectral_radius(dec);
    out.summary["zero_tolerance"] = tol;
    out.summary["warnings"] = dec.warnings;
}

CoarseGrainMap build_map(const Node& e)
{
    const std::string name = e.string("map", "polar_angle");
    if (name == "polar_angle")
        return CoarseGrainMap::polar_angle();
    e.fail("map", "expected polar_angle");
}


VectorXd eval_grid(const Node& g)
{
    const double lo = g.number("lo", -2.8);
    const double hi = g.number("hi", 2.8);
    const int count = positive_int(g, "count", 201);
    if (!(hi > lo))
        g.fail("hi", "must exceed lo");
    return VectorXd::LinSpaced(count, lo, hi);
}

// Rebuilds a periodic Gaussian basis with the cross-validated bandwidth when a cv block is given.
Dictionary cross_validated(const Node& e, const std::string& key, const Dictionary& basis, std::uint64_t seed,
                           int samples,
                           const std::function<double(double, const std::vector<int>&, const std::vector<int>&)>& loss,
                           Output& out)
{
    const Node cv = e.optional_child(key);
    if (!cv.has("bandwidths"))
        return basis;
    if (basis.kind() != Dictionary::Kind::periodic_gaussians)
        cv.fail("", "cross-validation needs a periodic_gaussians basis");
    const auto bws = cv.numbers("bandwidths");
    const int folds = positive_int(cv, "folds", 5);
    const BandwidthSelection sel = select_bandwidth(bws, samples, folds, seed, loss);
    CsvTable t({"bandwidth", "mean_validation_loss"});
    for (std::size_t i = 0; i < bws.size(); ++i)
        t.add_row({bws[i], sel.mean_loss[i]});
    out.csv(key + ".csv", t);
    out.summary[key + "_bandwidth"] = sel.best;
    return Dictionary::periodic_gaussians(basis.centers().col(0), sel.best, basis.period());
}

void run_coarsegrain(const Node& e, std::uint64_t seed, Output& out)
{
    const Node mnode = e.child("model");
    const SdeModel model = build_model(mnode);
    if (!model.potential_gradient)
        mnode.fail("name", "coarse-graining needs a model with a potential");
    const double beta = model.inverse_temperature.value_or(1.0);
    const SampleSet set = build_samples(e.child("sampling"), mnode, model, seed);
    const CoarseGrainMap map = build_map(e);
    const Dictionary dict = build_dictionary(e.child("dictionary"));
    if (dict.dimension() != map.reduced_dim)
        e.fail("dictionary", "dimension does not match the reduced coordinate");
    const Node solver = e.optional_child("solver");
    const GeneratorOptions options = build_options(solver);

    const GeneratorEstimate direct = coarse_gedmd(map, dict, set, options);
    const GeneratorEstimate rev = coarse_gedmd_reversible(map, dict, set, options);
    const SpectralDecomposition dec_direct = decompose(direct);
    const SpectralDecomposition dec_rev = decompose(rev);

    const LocalMeanForce lmf = local_mean_force(map, set.points, model.potential_gradient, beta);
    Dictionary force_basis = build_dictionary(e.child("force_basis"));
    force_basis = cross_validated(
        e, "force_cv", force_basis, splitmix64(seed + 11), static_cast<int>(lmf.z.rows()),
        [&](double bw, const std::vector<int>& train, const std::vector<int>& val) {
            return force_matching_cv_loss(lmf, force_basis.centers().col(0), force_basis.period(), bw, train, val);
        },
        out);
    const ForceMatchResult fm = force_matching(lmf, force_basis);

    const MatrixXd z = map.apply(set.points);
    Dictionary diffusion_basis = build_dictionary(e.child("diffusion_basis"));
    const Node dcv = e.optional_child("diffusion_cv");
    if (dcv.has("bandwidths")) {
        const SampleSet reduced = project_samples(map, set);
        diffusion_basis = cross_validated(
            e, "diffusion_cv", diffusion_basis, splitmix64(seed + 12), reduced.samples(),
            [&](double bw, const std::vector<int>& train, const std::vector<int>& val) {
                return diffusion_cv_loss(dict, reduced, diffusion_basis.centers().col(0), diffusion_basis.period(), bw,
                                         train, val);
            },
            out);
    }
    const bool positivity = e.boolean("positivity", true);
    const DiffusionFit dfit = fit_diffusion(rev.A_hat, dict, z, diffusion_basis, positivity);
    const auto design = diffusion_design(dict, z, diffusion_basis, options.chunk);
    const SpectralDecomposition dec_model =
        decompose(MatrixXd(model_generator(dfit, design, rev.G_hat, options.svd_cutoff).transpose()));
    ReducedModel rm = drift_from_potential(force_basis, fm.coefficients, diffusion_basis, dfit.theta);
    rm.galerkin_A = rev.A_hat;
    rm.galerkin_G = rev.G_hat;

    const int count = positive_int(e, "timescales", 3);
    CsvTable ts({"index", "direct", "reversible", "diffusion_model"});
    json ts_json = json::array();
    for (int l = 1; l <= count && l < dec_direct.size(); ++l) {
        ts.add_row({static_cast<long long>(l), dec_direct.timescales(l), dec_rev.timescales(l), dec_model.timescales(l)});
        ts_json.push_back({dec_direct.timescales(l), dec_rev.timescales(l), dec_model.timescales(l)});
    }
    out.csv("timescales.csv", ts);

    const VectorXd grid = eval_grid(e.optional_child("grid"));
    const VectorXd F = integrate_potential(fm, force_basis, grid);
    const VectorXd direct_drift = dict.values(MatrixXd(grid)).transpose() * identify_drift(direct, dict.full_state_selector());
    const VectorXd model_drift = rm.drift(grid);
    CsvTable pot({"z", "free_energy", "diffusion", "drift_direct", "drift_reconstructed"});
    VectorXd a(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        a(i) = rm.diffusion(grid(i));
        pot.add_row({grid(i), F(i), a(i), direct_drift(i), model_drift(i)});
    }
    out.csv("reduced_profiles.csv", pot);
    out.write("reduced_model.json", rm.to_json());

    const double mean_a = a.mean();
    out.summary["timescales"] = ts_json;
    out.summary["force_matching_excluded"] = fm.excluded;
    out.summary["force_matching_train_rms"] = fm.train_rms;
    out.summary["diffusion_mean"] = mean_a;
    out.summary["diffusion_relative_std"] = std::sqrt((a.array() - mean_a).square().mean()) / mean_a;
    out.summary["diffusion_fit_residual"] = dfit.residual;
    out.summary["drift_relative_rms"] = (model_drift - direct_drift).norm() / direct_drift.norm();
    out.summary["warnings"] = fm.warnings;
}

// ---- control ----

struct PlantSpec {
    std::string kind;
    double alpha = 1.0;
    double beta = 2.0;
    double x0 = 0.0;
    double dt = 1e-3;
    BurgersConfig burgers;
    VectorXd y0;

    int dimension() const { return kind == "ou" ? 1 : burgers.grid; }
    VectorXd initial() const { return kind == "ou" ? VectorXd::Constant(1, x0) : y0; }
    std::unique_ptr<Plant> make(std::uint64_t seed) const
    {
        if (kind == "ou")
            return std::make_unique<OuPlant>(alpha, beta, x0, dt, seed);
        return std::make_unique<BurgersPlant>(burgers, y0);
    }
};

PlantSpec build_plant(const Node& n)
{
    PlantSpec p;
    p.kind = n.string("kind");
    if (p.kind == "ou") {
        p.alpha = n.number("alpha", 1.0);
        p.beta = n.number("beta", 2.0);
        p.x0 = n.number("x0", 0.0);
        p.dt = n.number("dt", 1e-3);
        if (!(p.dt > 0.0) || !(p.beta > 0.0))
            n.fail("dt", "dt and beta must be positive");
    } else if (p.kind == "burgers") {
        BurgersConfig& c = p.burgers;
        c.grid = positive_int(n, "grid", c.grid);
        c.length = n.number("length", c.length);
        c.nu = n.number("nu", c.nu);
        c.dt = n.number("dt", c.dt);
        c.chi_amplitude = n.number("chi_amplitude", c.chi_amplitude);
        c.chi_width = n.number("chi_width", c.chi_width);
        const Node init = n.optional_child("initial");
        try {
            p.y0 = burgers_initial(c, init.number("mean", 0.2), init.number("amplitude", 0.1));
            check_burgers_stability(c, p.y0.cwiseAbs().maxCoeff());
        } catch (const ConfigError& e) {
            n.fail("", e.what());
        }
    } else {
        n.fail("kind", "expected ou or burgers");
    }
    return p;
}

MatrixXd build_readout(const Node& e, const Dictionary& dict)
{
    const std::string kind = e.string("readout", "state");
    const MatrixXd B = dict.full_state_selector();
    if (kind == "state")
        return B.transpose();
    if (kind == "mean")
        return B.transpose().colwise().mean();
    e.fail("readout", "expected state or mean");
}

SurrogateFamily build_family(const Node& e, const PlantSpec& plant, const std::vector<double>& inputs,
                             const Dictionary& dict, const MatrixXd& readout, std::uint64_t seed)
{
    const Node t = e.child("training");
    const GeneratorOptions options = build_options(e.optional_child("solver"));
    std::vector<SampleSet> data;
    GeneratorKind kind = GeneratorKind::stochastic;
    if (plant.kind == "ou") {
        const auto box = read_box(t, "box");
        const int m = positive_int(t, "m");
        for (std::size_t i = 0; i < inputs.size(); ++i)
            data.push_back(exact_samples(ornstein_uhlenbeck(plant.alpha, plant.beta, inputs[i]),
                                         sample_uniform(box, m, splitmix64(seed + 20 + i))));
    } else {
        kind = GeneratorKind::deterministic;
        data = burgers_training_data(plant.burgers, inputs, positive_int(t, "trajectories"), t.number("duration"),
                                     positive_int(t, "stride", 10), splitmix64(seed + 20));
    }
    if (dict.dimension() != plant.dimension())
        e.fail("dictionary", "dimension does not match the plant state");
    return fit_surrogates(dict, inputs, data, kind, readout, options);
}

struct Reference {
    std::function<VectorXd(double)> fn;
    std::string kind;
    std::vector<double> values;
    double period = 0.0;
};

Reference build_reference(const Node& n, double initial_readout)
{
    Reference r;
    r.kind = n.string("kind");
    if (r.kind == "constant") {
        const double v = n.number("value");
        r.fn = [v](double) { return VectorXd::Constant(1, v); };
    } else if (r.kind == "piecewise_constant") {
        r.values = n.numbers("values");
        r.period = n.number("period");
        if (r.values.empty() || !(r.period > 0.0))
            n.fail("values", "need at least one value and a positive period");
        r.fn = [values = r.values, period = r.period](double t) {
            auto k = static_cast<std::size_t>(std::max(0.0, std::floor(t / period)));
            return VectorXd::Constant(1, values[std::min(k, values.size() - 1)]);
        };
    } else if (r.kind == "sinusoid") {
        const double offset = n.number("offset", initial_readout);
        const double amp = n.number("amplitude");
        const double period = n.number("period");
        if (!(period > 0.0))
            n.fail("period", "must be positive");
        r.fn = [=](double t) { return VectorXd::Constant(1, offset + amp * std::sin(2.0 * std::numbers::pi * t / period)); };
    } else if (r.kind == "tanh") {
        const double center = n.number("center");
        const double scale = n.number("scale", 1.0);
        r.fn = [=](double t) { return VectorXd::Constant(1, std::tanh((t - center) / scale)); };
    } else {
        n.fail("kind", "expected constant, piecewise_constant, sinusoid or tanh");
    }
    return r;
}

std::vector<double> read_inputs(const Node& e)
{
    const auto inputs = e.numbers("inputs");
    if (inputs.empty())
        e.fail("inputs", "need at least one input");
    return inputs;
}

void surrogate_checks(const Node& e, const PlantSpec& plant, const SurrogateFamily& family, const Dictionary& dict,
                      const std::vector<double>& inputs, std::uint64_t seed, Output& out)
{
    if (plant.kind == "ou") {
        const VectorXd z0 = dict.values(MatrixXd::Constant(1, 1, plant.x0)).col(0);
        double err = 0.0;
        for (int i = 0; i < family.count(); ++i) {
            const MatrixXd z = predict(family, i, z0, 3.0, 0.01);
            for (Eigen::Index k = 0; k < z.rows(); ++k) {
                const double t = 0.01 * static_cast<double>(k);
                const double u = inputs[static_cast<std::size_t>(i)];
                const double analytic = u + (plant.x0 - u) * std::exp(-plant.alpha * t);
                err = std::max(err, std::abs((family.readout * z.row(k).transpose())(0) - analytic));
            }
        }
        out.summary["surrogate_mean_error"] = err;
        return;
    }
    const Node t = e.child("training");
    const int stride = positive_int(t, "stride", 10);
    const auto held = burgers_training_data(plant.burgers, inputs, positive_int(t, "holdout_trajectories", 3),
                                            t.number("duration"), stride, splitmix64(seed + 99));
    const double lag = stride * plant.burgers.dt;
    const MatrixXd B = dict.full_state_selector().transpose();
    double surrogate = 0.0, persistence = 0.0;
    for (int i = 0; i < family.count(); ++i) {
        const auto& pts = held[static_cast<std::size_t>(i)].points;
        const MatrixXd& P = family.propagator(i, lag);
        const MatrixXd psi = dict.values(pts);
        for (Eigen::Index l = 0; l < pts.rows(); ++l) {
            const VectorXd x = pts.row(l).transpose();
            const MatrixXd traj = burgers_simulate(plant.burgers, x, inputs[static_cast<std::size_t>(i)], lag);
            const VectorXd next = traj.bottomRows(1).transpose();
            surrogate += (B * (P * psi.col(l)) - next).squaredNorm();
            persistence += (x - next).squaredNorm();
        }
    }
    out.summary["one_step_error"] = std::sqrt(surrogate);
    out.summary["persistence_error"] = std::sqrt(persistence);
}

void run_control_mpc(const Node& e, std::uint64_t seed, Output& out)
{
    const PlantSpec plant = build_plant(e.child("plant"));
    const auto inputs = read_inputs(e);
    const Dictionary dict = build_dictionary(e.child("dictionary"));
    const MatrixXd readout = build_readout(e, dict);
    const SurrogateFamily family = build_family(e, plant, inputs, dict, readout, seed);
    surrogate_checks(e, plant, family, dict, inputs, seed, out);

    const double initial = (readout * dict.values(plant.initial().transpose())).col(0)(0);
    const Reference ref = build_reference(e.child("reference"), initial);
    const Node m = e.child("mpc");
    MpcProblem problem;
    problem.t0 = 0.0;
    problem.te = m.number("te");
    problem.h = m.number("h");
    problem.horizon = static_cast<int>(m.integer("horizon", 3));
    problem.substeps = positive_int(m, "substeps", 5);
    problem.alpha = m.number("alpha", 0.0);
    problem.average_window = m.boolean("average_window", plant.kind == "ou");
    problem.reference = ref.fn;
    if (problem.horizon < 1 || problem.horizon > 6)
        m.fail("horizon", "must be between 1 and 6");
    if (!(problem.h > 0.0) || !(problem.te > problem.h))
        m.fail("h", "need 0 < h < te");
    if (problem.alpha < 0.0)
        m.fail("alpha", "must be nonnegative");
    const int replicas = plant.kind == "ou" ? positive_int(e, "replicas", 1) : 1;

    const MonteCarloTrace trace = mpc_monte_carlo(
        problem, family, dict, [&](int r) { return plant.make(splitmix64(seed + 1000 + static_cast<std::uint64_t>(r))); },
        replicas);

    CsvTable t({"t", "readout", "reference", "u", "stage_cost"});
    const auto loops = static_cast<Eigen::Index>(trace.input_times.size());
    double sq = 0.0;
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        const double time = trace.times[k];
        auto j = static_cast<Eigen::Index>(std::ceil((time - problem.t0) / problem.h - 1e-9)) - 1;
        j = std::clamp<Eigen::Index>(j, 0, loops - 1);
        const double y = trace.mean_readout(static_cast<Eigen::Index>(k), 0);
        const double r = ref.fn(time)(0);
        sq += (y - r) * (y - r);
        t.add_row({time, y, r, trace.mean_input(j), trace.mean_stage_cost(j)});
    }
    out.csv("control.csv", t);
    out.summary["replicas"] = replicas;
    out.summary["tracking_rms"] = std::sqrt(sq / static_cast<double>(trace.times.size()));
    if (ref.kind == "piecewise_constant") {
        json offsets = json::array();
        for (std::size_t p = 0; (p + 1) * ref.period <= problem.te + 1e-9; ++p) {
            const double lo = (static_cast<double>(p) + 0.6) * ref.period;
            const double hi = static_cast<double>(p + 1) * ref.period;
            double s = 0.0;
            int n = 0;
            for (std::size_t k = 0; k < trace.times.size(); ++k)
                if (trace.times[k] >= lo && trace.times[k] < hi) {
                    s += trace.mean_readout(static_cast<Eigen::Index>(k), 0);
                    ++n;
                }
            if (n > 0)
                offsets.push_back(std::abs(s / n - ref.fn(lo)(0)));
        }
        out.summary["steady_state_offsets"] = offsets;
    }
}

void run_control_switching(const Node& e, std::uint64_t seed, Output& out)
{
    const PlantSpec plant = build_plant(e.child("plant"));
    if (plant.kind != "ou")
        e.fail("plant.kind", "switching-time optimization is configured for the ou plant");
    const auto inputs = read_inputs(e);
    const Dictionary dict = build_dictionary(e.child("dictionary"));
    const MatrixXd readout = build_readout(e, dict);
    const SurrogateFamily family = build_family(e, plant, inputs, dict, readout, seed);
    surrogate_checks(e, plant, family, dict, inputs, seed, out);

    const VectorXd z0 = dict.values(plant.initial().transpose()).col(0);
    const Reference ref = build_reference(e.child("reference"), (readout * z0)(0));
    const Node s = e.child("switching");
    SwitchingProblem problem;
    problem.t0 = s.number("t0", 0.0);
    problem.te = s.number("te");
    problem.alpha = s.number("alpha", 0.0);
    problem.z0 = z0;
    problem.reference = ref.fn;
    if (!(problem.te > problem.t0))
        s.fail("te", "must exceed t0");
    const int p = positive_int(s, "switches");
    const VectorXd initial = VectorXd::LinSpaced(p + 2, problem.t0, problem.te).segment(1, p);
    const SwitchingResult res = switching_time_optimize(family, problem, initial, positive_int(s, "max_iterations", 300),
                                                        s.number("tolerance", 1e-9));

    json schedule;
    schedule["switch_times"] = to_list(res.taus);
    schedule["inputs"] = inputs;
    schedule["cost"] = res.cost;
    schedule["iterations"] = res.iterations;
    schedule["converged"] = res.converged;
    schedule["warnings"] = res.warnings;
    out.write("schedule.json", schedule);
    CsvTable hist({"iteration", "cost"});
    for (std::size_t i = 0; i < res.cost_history.size(); ++i)
        hist.add_row({static_cast<long long>(i), res.cost_history[i]});
    out.csv("cost_history.csv", hist);

    const double sample_dt = e.number("sample_dt", 0.01);
    std::vector<double> times;
    const auto count = static_cast<long>(std::llround((problem.te - problem.t0) / sample_dt));
    for (long k = 0; k <= count; ++k)
        times.push_back(problem.t0 + static_cast<double>(k) * sample_dt);
    const MatrixXd surrogate = simulate_schedule(family, z0, res.taus, problem.t0, times);
    const int replicas = positive_int(e, "replicas", 1);
    const MatrixXd mc = schedule_monte_carlo(
        family, dict, res.taus, times,
        [&](int r) { return plant.make(splitmix64(seed + 1000 + static_cast<std::uint64_t>(r))); }, replicas);

    CsvTable t({"t", "surrogate", "monte_carlo_mean", "reference", "u"});
    double se = 0.0, sm = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        const double r = ref.fn(times[k])(0);
        se += std::pow(surrogate(row, 0) - r, 2);
        sm += std::pow(mc(row, 0) - surrogate(row, 0), 2);
        t.add_row({times[k], surrogate(row, 0), mc(row, 0), r,
                   inputs[static_cast<std::size_t>(active_input(res.taus, family.count(), times[k]))]});
    }
    out.csv("trajectory.csv", t);
    const auto n = static_cast<double>(times.size());
    out.summary["replicas"] = replicas;
    out.summary["surrogate_rms"] = std::sqrt(se / n);
    out.summary["monte_carlo_vs_surrogate_rms"] = std::sqrt(sm / n);
    out.summary["cost"] = res.cost;
    out.summary["converged"] = res.converged;
    out.summary["warnings"] = res.warnings;
}

using Runner = void (*)(const Node&, std::uint64_t, Output&);

const std::map<std::string, Runner>& runners()
{
    static const std::map<std::string, Runner> table{
        {"estimate", run_estimate},       {"spectrum", run_spectrum},       {"identify", run_identify},
        {"conserved", run_conserved},     {"coarsegrain", run_coarsegrain}, {"control-mpc", run_control_mpc},
        {"control-switching", run_control_switching},
    };
    return table;
}

}  // namespace

void run(const fs::path& config, const RunOptions& options, std::ostream& log)
{
    json cfg;
    try {
        cfg = read_json(config);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (!cfg.is_object())
        throw UsageError("config: expected a JSON object");
    json resolved = cfg;
    const Node root(cfg, resolved, "");
    const std::string name = root.string("name", config.stem().string());
    std::uint64_t seed = static_cast<std::uint64_t>(root.integer("seed", 0));
    if (options.seed) {
        seed = *options.seed;
        resolved["seed"] = seed;
    }
    if (!cfg.contains("experiments") || !cfg["experiments"].is_array())
        throw UsageError("experiments: expected an array");
    if (cfg["experiments"].empty())
        throw UsageError("experiments: empty experiment list");
    const Node list(cfg["experiments"], resolved["experiments"], "experiments");

    // Validate kinds and ids before doing any work.
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const Node e = list.at(i);
        const std::string kind = e.string("kind");
        if (!runners().contains(kind))
            e.fail("kind", "unknown experiment kind '" + kind + "'");
        const std::string id = e.string("id", kind + "-" + std::to_string(i));
        if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..")
            e.fail("id", "must be a plain directory name");
        if (std::find(ids.begin(), ids.end(), id) != ids.end())
            e.fail("id", "duplicate id '" + id + "'");
        ids.push_back(id);
    }

    const fs::path out_dir = options.out_dir ? *options.out_dir : fs::path(root.string("output_dir", "out/" + name));
    fs::create_directories(out_dir);
    json manifest;
    manifest["tool"] = "gedmd";
    manifest["config_file"] = config.filename().string();
    manifest["name"] = name;
    manifest["seed"] = seed;
    manifest["experiments"] = json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
        const Node e = list.at(i);
        const std::string kind = e.string("kind");
        const std::uint64_t exp_seed = splitmix64(seed + i);
        Output out;
        out.dir = out_dir / ids[i];
        fs::create_directories(out.dir);
        log << "[" << ids[i] << "] " << kind << '\n';
        try {
            runners().at(kind)(e, exp_seed, out);
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& ex) {
            throw std::runtime_error("experiments[" + std::to_string(i) + "] (" + kind + "): " + ex.what());
        }
        out.write("summary.json", out.summary);
        for (const auto& f : out.files)
            log << "  wrote " << (fs::path(ids[i]) / f).string() << '\n';
        manifest["experiments"].push_back(
            {{"id", ids[i]}, {"kind", kind}, {"seed", exp_seed}, {"artifacts", out.files}, {"summary", out.summary}});
    }
    manifest["resolved_config"] = resolved;
    write_json(out_dir / "manifest.json", manifest);
    log << "manifest: " << (out_dir / "manifest.json").string() << '\n';
}

fs::path bundled_config_dir()
{
    if (const char* env = std::getenv("GEDMD_CONFIG_DIR"))
        return env;
    return GEDMD_CONFIG_DIR;
}

std::vector<BundledConfig> list_bundled()
{
    std::vector<BundledConfig> out;
    const fs::path dir = bundled_config_dir();
    if (!fs::is_directory(dir))
        return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json" || entry.path().filename() == "schema.json")
            continue;
        const json j = read_json(entry.path());
        BundledConfig c;
        c.name = j.value("name", entry.path().stem().string());
        c.description = j.value("description", "");
        c.file = entry.path();
        for (const auto& e : j.value("experiments", json::array()))
            c.kinds.push_back(e.value("kind", "?"));
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

}  // namespace gedmd::cli
