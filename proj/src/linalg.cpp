#include "reformnet/linalg.hpp"

#include <cmath>

namespace reformnet {

namespace {

Eigen::JacobiSVD<Matrix> svd_of(const Matrix& m, unsigned options) {
    if (!all_finite(m))
        throw InvalidInputError("non-finite entries in matrix");
    return Eigen::JacobiSVD<Matrix>(m, options);
}

Eigen::Index rank_from_singular_values(const Vector& sv, double tol) {
    if (sv.size() == 0) return 0;
    const double cutoff = tol * sv(0); // singular values sorted descending
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++r;
    return r;
}

// Eigendecomposition of the symmetrized input with the PSD check shared by
// sqrtm_psd and sym_power.
Eigen::SelfAdjointEigenSolver<Matrix> psd_eigen(const Matrix& m, double tol) {
    if (!all_finite(m))
        throw InvalidInputError("non-finite entries in matrix");
    if (m.rows() != m.cols())
        throw ShapeError("sqrtm_psd requires a square matrix");
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
    const Vector& ev = es.eigenvalues();
    const double scale = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    if (ev(0) < -tol * scale)
        throw NotPsdError("matrix has a negative eigenvalue beyond tolerance");
    return es;
}

} // namespace

bool all_finite(const Matrix& m) {
    return m.allFinite();
}

Matrix pinv(const Matrix& m, double tol) {
    if (m.size() == 0) return m.transpose();
    const auto svd = svd_of(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const Eigen::Index r = rank_from_singular_values(sv, tol);
    if (r == 0) return Matrix::Zero(m.cols(), m.rows());
    Vector inv_sv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < r; ++i) inv_sv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

Matrix proj_onto_row_space(const Matrix& m, double tol) {
    const auto svd = svd_of(m, Eigen::ComputeThinV);
    const Eigen::Index r = rank_from_singular_values(svd.singularValues(), tol);
    if (r == 0) return Matrix::Zero(m.cols(), m.cols());
    const Matrix vr = svd.matrixV().leftCols(r);
    return vr * vr.transpose();
}

namespace {

// Clamp the spectrum to [0, inf) with the same relative cutoff pinv uses, so
// that noise eigenvalues of singular inputs are not amplified by the root.
Vector clamped_spectrum(const Vector& ev, double tol) {
    const double cutoff = tol * std::max(0.0, ev(ev.size() - 1));
    return ev.unaryExpr([cutoff](double v) { return v > cutoff ? v : 0.0; });
}

} // namespace

Matrix sqrtm_psd(const Matrix& m, double tol) {
    const auto es = psd_eigen(m, tol);
    const Vector ev = clamped_spectrum(es.eigenvalues(), tol);
    const Matrix root = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
    return 0.5 * (root + root.transpose());
}

Matrix sym_power(const Matrix& m, double p, double tol) {
    if (p < 0.0)
        throw InvalidInputError("sym_power requires p >= 0");
    const auto es = psd_eigen(m, tol);
    Vector ev = clamped_spectrum(es.eigenvalues(), tol);
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        ev(i) = ev(i) > 0.0 ? std::pow(ev(i), p) : 0.0;
    const Matrix out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

Eigen::Index numerical_rank(const Matrix& m, double tol) {
    if (m.size() == 0) return 0;
    const auto svd = svd_of(m, 0);
    return rank_from_singular_values(svd.singularValues(), tol);
}

} // namespace reformnet
