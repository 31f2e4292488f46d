#include "gedmd/spectral.hpp"

#include "gedmd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace gedmd {

namespace {

bool lex_less(const VectorXcd& a, const VectorXcd& b)
{
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i).real() != b(i).real())
            return a(i).real() < b(i).real();
        if (a(i).imag() != b(i).imag())
            return a(i).imag() < b(i).imag();
    }
    return false;
}

VectorXcd max_entry_normalized(const VectorXcd& v)
{
    const double top = v.cwiseAbs().maxCoeff();
    if (top == 0.0)
        return v;
    Eigen::Index pick = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) >= (1.0 - 1e-12) * top) {
            pick = i;
            break;
        }
    }
    return v / v(pick);
}

double resolved_tol(const SpectralDecomposition& dec, double zero_tol)
{
    return zero_tol < 0.0 ? 1e-6 * spectral_radius(dec) : zero_tol;
}

}  // namespace

double spectral_radius(const SpectralDecomposition& dec)
{
    return dec.eigenvalues.size() > 0 ? dec.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
}

SpectralDecomposition decompose(const MatrixXd& L)
{
    if (L.rows() != L.cols() || L.rows() == 0)
        throw InputError("decompose: matrix must be square and nonempty");
    if (!L.allFinite())
        throw InputError("decompose: non-finite generator matrix");
    Eigen::EigenSolver<MatrixXd> es(L, true);
    if (es.info() != Eigen::Success) {
        Eigen::JacobiSVD<MatrixXd> svd(L);
        const auto& s = svd.singularValues();
        std::ostringstream msg;
        msg << "decompose: eigenvalue computation failed (size " << L.rows() << ", 2-norm condition "
            << s(0) / s(s.size() - 1) << ")";
        throw NumericalError(msg.str());
    }
    const VectorXcd values = es.eigenvalues();
    MatrixXcd vectors = es.eigenvectors();
    const auto n = values.size();
    for (Eigen::Index l = 0; l < n; ++l)
        vectors.col(l) = max_entry_normalized(vectors.col(l));

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (values(a).real() != values(b).real())
            return values(a).real() > values(b).real();
        return false;
    });
    // Real parts that agree to rounding are ties; order those groups by imaginary part.
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    const double tie = 1e-12 * scale;
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start + 1;
        while (end < order.size() && values(order[end - 1]).real() - values(order[end]).real() <= tie)
            ++end;
        std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end), [&](Eigen::Index a, Eigen::Index b) {
                             if (std::abs(values(a).imag() - values(b).imag()) > tie)
                                 return values(a).imag() < values(b).imag();
                             return lex_less(vectors.col(a), vectors.col(b));
                         });
        start = end;
    }

    SpectralDecomposition dec;
    dec.eigenvalues.resize(n);
    dec.eigenvectors.resize(n, n);
    dec.timescales.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = order[static_cast<std::size_t>(i)];
        dec.eigenvalues(i) = values(src);
        dec.eigenvectors.col(i) = vectors.col(src);
        const double re = values(src).real();
        dec.timescales(i) = re == 0.0 ? std::numeric_limits<double>::infinity() : std::abs(1.0 / re);
    }
    const MatrixXcd lc = L.cast<std::complex<double>>();
    for (Eigen::Index i = 0; i < n; ++i) {
        const VectorXcd r = lc * dec.eigenvectors.col(i) - dec.eigenvalues(i) * dec.eigenvectors.col(i);
        dec.max_residual = std::max(dec.max_residual, r.norm() / dec.eigenvectors.col(i).norm());
    }
    return dec;
}

SpectralDecomposition decompose(const GeneratorEstimate& est)
{
    return decompose(MatrixXd(est.M.transpose()));
}

MatrixXcd eigenfunction_values(const SpectralDecomposition& dec, const Dictionary& dict, const MatrixXd& points)
{
    if (dict.size() != dec.size())
        throw InputError("eigenfunction_values: dictionary size does not match the decomposition");
    const MatrixXd psi = dict.values(points);
    return psi.transpose().cast<std::complex<double>>() * dec.eigenvectors;
}

VectorXcd normalized_at(const SpectralDecomposition& dec, int l, int index)
{
    const VectorXcd v = dec.eigenvectors.col(l);
    if (std::abs(v(index)) == 0.0)
        throw NumericalError("normalized_at: eigenvector has a zero entry at the requested index");
    return v / v(index);
}

ModeDecomposition koopman_modes(const SpectralDecomposition& dec, const MatrixXd& selector, double mode_tol)
{
    if (selector.rows() != dec.size())
        throw InputError("koopman_modes: selector rows must equal the dictionary size");
    ModeDecomposition out;
    const MatrixXcd xi_t = dec.eigenvectors.transpose();
    Eigen::JacobiSVD<MatrixXcd> svd(xi_t, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cutoff = 1e-12 * s(0);
    bool singular = false;
    VectorXcd inv(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) {
            inv(i) = 1.0 / s(i);
        } else {
            inv(i) = 0.0;
            singular = true;
        }
    }
    MatrixXcd xi_t_inv;
    if (singular) {
        out.warnings.push_back("eigenvector matrix is singular; modes use a pseudoinverse");
        xi_t_inv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
    } else {
        xi_t_inv = xi_t.partialPivLu().inverse();
    }
    out.modes = selector.transpose().cast<std::complex<double>>() * xi_t_inv;
    for (Eigen::Index l = 0; l < out.modes.cols(); ++l)
        if (out.modes.col(l).norm() > mode_tol)
            out.active.push_back(static_cast<int>(l));
    return out;
}

MatrixXd reconstruct_drift(const SpectralDecomposition& dec, const ModeDecomposition& modes, const Dictionary& dict,
                           const MatrixXd& points)
{
    const MatrixXcd phi = eigenfunction_values(dec, dict, points);  // m x n
    const MatrixXcd b = phi * dec.eigenvalues.asDiagonal() * modes.modes.transpose();
    return b.real();
}

int zero_multiplicity(const SpectralDecomposition& dec, double zero_tol)
{
    const double tol = resolved_tol(dec, zero_tol);
    int count = 0;
    for (Eigen::Index i = 0; i < dec.eigenvalues.size(); ++i)
        if (std::abs(dec.eigenvalues(i)) < tol)
            ++count;
    return count;
}

std::vector<VectorXd> conserved_quantities(const SpectralDecomposition& dec, std::optional<int> constant_index,
                                           double zero_tol)
{
    const double tol = resolved_tol(dec, zero_tol);
    const auto n = dec.size();
    std::vector<VectorXd> candidates;
    for (int l = 0; l < n; ++l) {
        if (std::abs(dec.eigenvalues(l)) >= tol)
            continue;
        const VectorXcd v = dec.eigenvectors.col(l);
        for (const VectorXd& part : {VectorXd(v.real()), VectorXd(v.imag())}) {
            const double norm = part.norm();
            if (norm == 0.0)
                continue;
            VectorXd c = part / norm;
            if (constant_index)
                c(*constant_index) = 0.0;
            candidates.push_back(c);
        }
    }
    std::vector<VectorXd> out;
    if (candidates.empty())
        return out;
    MatrixXd c(n, static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i)
        c.col(static_cast<Eigen::Index>(i)) = candidates[i];
    Eigen::JacobiSVD<MatrixXd> svd(c, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) <= 1e-6)
            break;
        VectorXd u = svd.matrixU().col(i);
        Eigen::Index pick = 0;
        u.cwiseAbs().maxCoeff(&pick);
        out.push_back(u / u(pick));
    }
    return out;
}

}  // namespace gedmd
