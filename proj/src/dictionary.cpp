#include "gedmd/dictionary.hpp"

#include "gedmd/errors.hpp"

#include <cmath>
#include <sstream>

namespace gedmd {

namespace {

void collect(int dim, int pos, int remaining, std::vector<int>& current, std::vector<std::vector<int>>& out)
{
    if (pos == dim - 1) {
        current[static_cast<std::size_t>(pos)] = remaining;
        out.push_back(current);
        return;
    }
    for (int e = remaining; e >= 0; --e) {
        current[static_cast<std::size_t>(pos)] = e;
        collect(dim, pos + 1, remaining - e, current, out);
    }
}

void check_finite(const MatrixXd& points)
{
    if (!points.allFinite())
        throw InputError("dictionary evaluation: non-finite input point");
}

// 1D tables: value, first and second derivative of the degree-p factor.
struct Table1d {
    std::vector<double> v, d1, d2;
};

void monomial_table(double x, int max_degree, Table1d& t)
{
    const auto n = static_cast<std::size_t>(max_degree + 1);
    t.v.assign(n, 0.0);
    t.d1.assign(n, 0.0);
    t.d2.assign(n, 0.0);
    t.v[0] = 1.0;
    for (std::size_t p = 1; p < n; ++p)
        t.v[p] = t.v[p - 1] * x;
    for (std::size_t p = 1; p < n; ++p)
        t.d1[p] = static_cast<double>(p) * t.v[p - 1];
    for (std::size_t p = 2; p < n; ++p)
        t.d2[p] = static_cast<double>(p * (p - 1)) * t.v[p - 2];
}

void legendre_table(double s, double chain, int max_degree, Table1d& t)
{
    const auto n = static_cast<std::size_t>(max_degree + 1);
    t.v.assign(n, 0.0);
    t.d1.assign(n, 0.0);
    t.d2.assign(n, 0.0);
    t.v[0] = 1.0;
    if (n > 1) {
        t.v[1] = s;
        t.d1[1] = 1.0;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double kk = static_cast<double>(k);
        t.v[k + 1] = ((2 * kk + 1) * s * t.v[k] - kk * t.v[k - 1]) / (kk + 1);
        t.d1[k + 1] = ((2 * kk + 1) * (t.v[k] + s * t.d1[k]) - kk * t.d1[k - 1]) / (kk + 1);
        t.d2[k + 1] = ((2 * kk + 1) * (2 * t.d1[k] + s * t.d2[k]) - kk * t.d2[k - 1]) / (kk + 1);
    }
    for (std::size_t k = 0; k < n; ++k) {
        t.d1[k] *= chain;
        t.d2[k] *= chain * chain;
    }
}

// Shared tensor-product evaluation for the polynomial kinds.
void tensor_evaluate(const std::vector<std::vector<int>>& exps, const std::vector<Table1d>& tables, Eigen::Index col,
                     EvaluationBlock& out, bool hess)
{
    const int d = static_cast<int>(tables.size());
    for (std::size_t i = 0; i < exps.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const auto& e = exps[i];
        double value = 1.0;
        for (int k = 0; k < d; ++k)
            value *= tables[static_cast<std::size_t>(k)].v[static_cast<std::size_t>(e[static_cast<std::size_t>(k)])];
        out.values(row, col) = value;
        for (int k = 0; k < d; ++k) {
            const auto ek = static_cast<std::size_t>(e[static_cast<std::size_t>(k)]);
            if (ek == 0)
                continue;
            double g = tables[static_cast<std::size_t>(k)].d1[ek];
            for (int j = 0; j < d; ++j) {
                if (j == k)
                    continue;
                g *= tables[static_cast<std::size_t>(j)].v[static_cast<std::size_t>(e[static_cast<std::size_t>(j)])];
            }
            out.gradients[static_cast<std::size_t>(k)](row, col) = g;
        }
        if (!hess)
            continue;
        for (int a = 0; a < d; ++a) {
            const auto ea = static_cast<std::size_t>(e[static_cast<std::size_t>(a)]);
            if (ea == 0)
                continue;
            for (int b = a; b < d; ++b) {
                const auto eb = static_cast<std::size_t>(e[static_cast<std::size_t>(b)]);
                if (eb == 0)
                    continue;
                double h = 1.0;
                for (int j = 0; j < d; ++j) {
                    const auto& tj = tables[static_cast<std::size_t>(j)];
                    const auto ej = static_cast<std::size_t>(e[static_cast<std::size_t>(j)]);
                    if (j == a && j == b)
                        h *= tj.d2[ej];
                    else if (j == a || j == b)
                        h *= tj.d1[ej];
                    else
                        h *= tj.v[ej];
                }
                out.hessians[static_cast<std::size_t>(a * d + b)](row, col) = h;
                out.hessians[static_cast<std::size_t>(b * d + a)](row, col) = h;
            }
        }
    }
}

}  // namespace

std::vector<std::vector<int>> graded_lex_exponents(int dimension, int max_degree)
{
    std::vector<std::vector<int>> out;
    std::vector<int> current(static_cast<std::size_t>(dimension), 0);
    for (int t = 0; t <= max_degree; ++t)
        collect(dimension, 0, t, current, out);
    return out;
}

const char* to_string(Dictionary::Kind kind)
{
    switch (kind) {
    case Dictionary::Kind::monomials:
        return "monomials";
    case Dictionary::Kind::gaussians:
        return "gaussians";
    case Dictionary::Kind::periodic_gaussians:
        return "periodic_gaussians";
    case Dictionary::Kind::legendre:
        return "legendre";
    }
    return "unknown";
}

Dictionary Dictionary::monomials(int dimension, int max_degree)
{
    if (dimension < 1 || max_degree < 0)
        throw InputError("monomials: dimension must be >= 1 and max_degree >= 0");
    Dictionary dict;
    dict.kind_ = Kind::monomials;
    dict.dim_ = dimension;
    dict.max_degree_ = max_degree;
    dict.exponents_ = graded_lex_exponents(dimension, max_degree);
    dict.size_ = static_cast<int>(dict.exponents_.size());
    return dict;
}

Dictionary Dictionary::gaussians(MatrixXd centers, double bandwidth)
{
    if (centers.rows() < 1 || centers.cols() < 1)
        throw InputError("gaussians: need at least one center");
    if (!(bandwidth > 0.0))
        throw InputError("gaussians: bandwidth must be positive");
    Dictionary dict;
    dict.kind_ = Kind::gaussians;
    dict.dim_ = static_cast<int>(centers.cols());
    dict.size_ = static_cast<int>(centers.rows());
    dict.bandwidth_ = bandwidth;
    dict.centers_ = std::move(centers);
    return dict;
}

Dictionary Dictionary::gaussian_grid(const std::vector<Interval>& box, const std::vector<int>& per_dim,
                                     double bandwidth)
{
    if (box.empty() || box.size() != per_dim.size())
        throw InputError("gaussian_grid: box and per_dim must have the same nonzero length");
    const auto d = box.size();
    std::size_t total = 1;
    for (int c : per_dim) {
        if (c < 1)
            throw InputError("gaussian_grid: per_dim entries must be positive");
        total *= static_cast<std::size_t>(c);
    }
    MatrixXd centers(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        // last dimension varies fastest
        for (std::size_t k = d; k-- > 0;) {
            const auto cells = static_cast<std::size_t>(per_dim[k]);
            const std::size_t i = rem % cells;
            rem /= cells;
            const double w = (box[k].hi - box[k].lo) / static_cast<double>(cells);
            centers(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(k)) =
                box[k].lo + (static_cast<double>(i) + 0.5) * w;
        }
    }
    return gaussians(std::move(centers), bandwidth);
}

Dictionary Dictionary::periodic_gaussians(VectorXd centers, double bandwidth, double period)
{
    if (centers.size() < 1)
        throw InputError("periodic_gaussians: need at least one center");
    if (!(bandwidth > 0.0) || !(period > 0.0))
        throw InputError("periodic_gaussians: bandwidth and period must be positive");
    Dictionary dict;
    dict.kind_ = Kind::periodic_gaussians;
    dict.dim_ = 1;
    dict.size_ = static_cast<int>(centers.size());
    dict.bandwidth_ = bandwidth;
    dict.period_ = period;
    dict.centers_ = centers;
    return dict;
}

Dictionary Dictionary::legendre(int max_degree, std::vector<Interval> domain)
{
    if (domain.empty() || max_degree < 0)
        throw InputError("legendre: need a domain and max_degree >= 0");
    for (const auto& iv : domain)
        if (!(iv.hi > iv.lo))
            throw InputError("legendre: each domain interval must have hi > lo");
    Dictionary dict;
    dict.kind_ = Kind::legendre;
    dict.dim_ = static_cast<int>(domain.size());
    dict.max_degree_ = max_degree;
    dict.domain_ = std::move(domain);
    dict.exponents_ = graded_lex_exponents(dict.dim_, max_degree);
    dict.size_ = static_cast<int>(dict.exponents_.size());
    return dict;
}

EvaluationBlock Dictionary::evaluate(const MatrixXd& points, bool with_hessians) const
{
    if (points.cols() != dim_)
        throw InputError("dictionary evaluation: points have " + std::to_string(points.cols()) +
                         " columns, dictionary dimension is " + std::to_string(dim_));
    if (points.rows() < 1)
        throw InputError("dictionary evaluation: need at least one point");
    check_finite(points);

    const auto m = points.rows();
    EvaluationBlock out;
    out.values = MatrixXd::Zero(size_, m);
    out.gradients.assign(static_cast<std::size_t>(dim_), MatrixXd::Zero(size_, m));
    if (with_hessians)
        out.hessians.assign(static_cast<std::size_t>(dim_ * dim_), MatrixXd::Zero(size_, m));

    switch (kind_) {
    case Kind::monomials:
        evaluate_monomials(points, out, with_hessians);
        break;
    case Kind::gaussians:
        evaluate_gaussians(points, out, with_hessians);
        break;
    case Kind::periodic_gaussians:
        evaluate_periodic(points, out, with_hessians);
        break;
    case Kind::legendre:
        evaluate_legendre(points, out, with_hessians);
        break;
    }
    return out;
}

MatrixXd Dictionary::values(const MatrixXd& points) const
{
    // TODO: a values-only path would skip the gradient tables for large dictionaries.
    return evaluate(points, false).values;
}

void Dictionary::evaluate_monomials(const MatrixXd& points, EvaluationBlock& out, bool hess) const
{
    std::vector<Table1d> tables(static_cast<std::size_t>(dim_));
    for (Eigen::Index l = 0; l < points.rows(); ++l) {
        for (int k = 0; k < dim_; ++k)
            monomial_table(points(l, k), max_degree_, tables[static_cast<std::size_t>(k)]);
        tensor_evaluate(exponents_, tables, l, out, hess);
    }
}

void Dictionary::evaluate_legendre(const MatrixXd& points, EvaluationBlock& out, bool hess) const
{
    std::vector<Table1d> tables(static_cast<std::size_t>(dim_));
    for (Eigen::Index l = 0; l < points.rows(); ++l) {
        for (int k = 0; k < dim_; ++k) {
            const auto& iv = domain_[static_cast<std::size_t>(k)];
            const double x = points(l, k);
            const double slack = 1e-12 * (iv.hi - iv.lo);
            if (x < iv.lo - slack || x > iv.hi + slack) {
                std::ostringstream msg;
                msg << "legendre evaluation: coordinate " << k + 1 << " value " << x << " outside domain ["
                    << iv.lo << ", " << iv.hi << "]";
                throw DomainError(msg.str());
            }
            const double half = 0.5 * (iv.hi - iv.lo);
            const double s = (x - 0.5 * (iv.hi + iv.lo)) / half;
            legendre_table(s, 1.0 / half, max_degree_, tables[static_cast<std::size_t>(k)]);
        }
        tensor_evaluate(exponents_, tables, l, out, hess);
    }
}

void Dictionary::evaluate_gaussians(const MatrixXd& points, EvaluationBlock& out, bool hess) const
{
    const double inv_s2 = 1.0 / (bandwidth_ * bandwidth_);
    VectorXd diff(dim_);
    for (Eigen::Index l = 0; l < points.rows(); ++l) {
        for (int i = 0; i < size_; ++i) {
            diff = points.row(l).transpose() - centers_.row(i).transpose();
            const double v = std::exp(-0.5 * diff.squaredNorm() * inv_s2);
            out.values(i, l) = v;
            for (int k = 0; k < dim_; ++k)
                out.gradients[static_cast<std::size_t>(k)](i, l) = -diff(k) * inv_s2 * v;
            if (!hess)
                continue;
            for (int a = 0; a < dim_; ++a) {
                for (int b = 0; b < dim_; ++b) {
                    double h = diff(a) * diff(b) * inv_s2 * inv_s2;
                    if (a == b)
                        h -= inv_s2;
                    out.hessians[static_cast<std::size_t>(a * dim_ + b)](i, l) = h * v;
                }
            }
        }
    }
}

void Dictionary::evaluate_periodic(const MatrixXd& points, EvaluationBlock& out, bool hess) const
{
    const double inv_s2 = 1.0 / (bandwidth_ * bandwidth_);
    for (Eigen::Index l = 0; l < points.rows(); ++l) {
        for (int i = 0; i < size_; ++i) {
            double delta = points(l, 0) - centers_(i, 0);
            delta -= period_ * std::round(delta / period_);
            const double v = std::exp(-0.5 * delta * delta * inv_s2);
            out.values(i, l) = v;
            out.gradients[0](i, l) = -delta * inv_s2 * v;
            if (hess)
                out.hessians[0](i, l) = (delta * delta * inv_s2 - 1.0) * inv_s2 * v;
        }
    }
}

MatrixXd Dictionary::full_state_selector() const
{
    MatrixXd b = MatrixXd::Zero(size_, dim_);
    switch (kind_) {
    case Kind::monomials:
    case Kind::legendre:
        for (int k = 0; k < dim_; ++k) {
            for (int i = 0; i < size_; ++i) {
                const auto& e = exponents_[static_cast<std::size_t>(i)];
                int total = 0;
                for (int v : e)
                    total += v;
                if (total == 1 && e[static_cast<std::size_t>(k)] == 1) {
                    if (kind_ == Kind::monomials) {
                        b(i, k) = 1.0;
                    } else {
                        // x_k = mid + half * P1(s_k)
                        const auto& iv = domain_[static_cast<std::size_t>(k)];
                        b(i, k) = 0.5 * (iv.hi - iv.lo);
                        b(0, k) = 0.5 * (iv.hi + iv.lo);
                    }
                }
            }
        }
        if (max_degree_ < 1)
            throw UnsupportedDictionary("full_state_selector: dictionary of degree 0 has no coordinate functions");
        return b;
    case Kind::gaussians:
    case Kind::periodic_gaussians:
        break;
    }
    throw UnsupportedDictionary(std::string("full_state_selector: ") + to_string(kind_) +
                                " dictionary does not contain the coordinate functions");
}

std::optional<int> Dictionary::constant_index() const
{
    if (kind_ == Kind::monomials || kind_ == Kind::legendre)
        return 0;
    return std::nullopt;
}

std::string Dictionary::term_name(int i) const
{
    if (i < 0 || i >= size_)
        throw InputError("term_name: index out of range");
    std::ostringstream os;
    switch (kind_) {
    case Kind::monomials: {
        const auto& e = exponents_[static_cast<std::size_t>(i)];
        bool first = true;
        for (int k = 0; k < dim_; ++k) {
            const int p = e[static_cast<std::size_t>(k)];
            if (p == 0)
                continue;
            if (!first)
                os << '*';
            os << 'x' << k + 1;
            if (p > 1)
                os << '^' << p;
            first = false;
        }
        if (first)
            os << '1';
        break;
    }
    case Kind::legendre: {
        const auto& e = exponents_[static_cast<std::size_t>(i)];
        bool first = true;
        for (int k = 0; k < dim_; ++k) {
            const int p = e[static_cast<std::size_t>(k)];
            if (p == 0)
                continue;
            if (!first)
                os << '*';
            os << 'P' << p << "(x" << k + 1 << ')';
            first = false;
        }
        if (first)
            os << '1';
        break;
    }
    case Kind::gaussians:
        os << "gauss" << i;
        break;
    case Kind::periodic_gaussians:
        os << "pgauss" << i;
        break;
    }
    return os.str();
}

nlohmann::json Dictionary::to_json() const
{
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    j["dimension"] = dim_;
    j["size"] = size_;
    switch (kind_) {
    case Kind::monomials:
        j["max_degree"] = max_degree_;
        break;
    case Kind::legendre: {
        j["max_degree"] = max_degree_;
        auto dom = nlohmann::json::array();
        for (const auto& iv : domain_)
            dom.push_back({iv.lo, iv.hi});
        j["domain"] = dom;
        break;
    }
    case Kind::gaussians: {
        j["bandwidth"] = bandwidth_;
        auto c = nlohmann::json::array();
        for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
            auto row = nlohmann::json::array();
            for (Eigen::Index k = 0; k < centers_.cols(); ++k)
                row.push_back(centers_(i, k));
            c.push_back(row);
        }
        j["centers"] = c;
        break;
    }
    case Kind::periodic_gaussians: {
        j["bandwidth"] = bandwidth_;
        j["period"] = period_;
        auto c = nlohmann::json::array();
        for (Eigen::Index i = 0; i < centers_.rows(); ++i)
            c.push_back(centers_(i, 0));
        j["centers"] = c;
        break;
    }
    }
    return j;
}

namespace {

std::vector<Interval> intervals_from_json(const nlohmann::json& arr, const std::string& field)
{
    if (!arr.is_array() || arr.empty())
        throw ConfigError(field + ": expected a non-empty array of [lo, hi] pairs");
    std::vector<Interval> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& p = arr[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ConfigError(field + "[" + std::to_string(i) + "]: expected [lo, hi]");
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

VectorXd linspace_or_list(const nlohmann::json& spec, const std::string& field)
{
    if (spec.contains("centers")) {
        const auto& c = spec.at("centers");
        if (!c.is_array() || c.empty())
            throw ConfigError(field + ".centers: expected a non-empty array");
        VectorXd v(static_cast<Eigen::Index>(c.size()));
        for (std::size_t i = 0; i < c.size(); ++i)
            v(static_cast<Eigen::Index>(i)) = c[i].get<double>();
        return v;
    }
    if (spec.contains("linspace")) {
        const auto& l = spec.at("linspace");
        if (!l.is_array() || l.size() != 3)
            throw ConfigError(field + ".linspace: expected [lo, hi, count]");
        const int count = l[2].get<int>();
        if (count < 1)
            throw ConfigError(field + ".linspace: count must be positive");
        return VectorXd::LinSpaced(count, l[0].get<double>(), l[1].get<double>());
    }
    throw ConfigError(field + ": expected 'centers' or 'linspace'");
}

}  // namespace

Dictionary Dictionary::from_json(const nlohmann::json& spec)
{
    if (!spec.is_object() || !spec.contains("kind"))
        throw ConfigError("dictionary.kind: missing");
    const auto kind = spec.at("kind").get<std::string>();
    try {
        if (kind == "monomials")
            return monomials(spec.at("dimension").get<int>(), spec.at("max_degree").get<int>());
        if (kind == "legendre")
            return legendre(spec.at("max_degree").get<int>(), intervals_from_json(spec.at("domain"), "dictionary.domain"));
        if (kind == "periodic_gaussians")
            return periodic_gaussians(linspace_or_list(spec, "dictionary"), spec.at("bandwidth").get<double>(),
                                      spec.at("period").get<double>());
        if (kind == "gaussians") {
            const double bw = spec.at("bandwidth").get<double>();
            if (spec.contains("grid")) {
                const auto& g = spec.at("grid");
                return gaussian_grid(intervals_from_json(g.at("box"), "dictionary.grid.box"),
                                     g.at("per_dim").get<std::vector<int>>(), bw);
            }
            if (spec.contains("linspace")) {
                VectorXd c = linspace_or_list(spec, "dictionary");
                return gaussians(MatrixXd(c), bw);
            }
            const auto& c = spec.at("centers");
            if (!c.is_array() || c.empty())
                throw ConfigError("dictionary.centers: expected a non-empty array");
            const bool nested = c[0].is_array();
            const auto dim = nested ? c[0].size() : 1;
            MatrixXd centers(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(dim));
            for (std::size_t i = 0; i < c.size(); ++i)
                for (std::size_t k = 0; k < dim; ++k)
                    centers(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                        nested ? c[i][k].get<double>() : c[i].get<double>();
            return gaussians(std::move(centers), bw);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dictionary: ") + e.what());
    }
    throw ConfigError("dictionary.kind: unknown kind '" + kind + "'");
}

}  // namespace gedmd
