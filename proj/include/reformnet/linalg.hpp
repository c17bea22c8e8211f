#pragma once

#include <Eigen/Dense>

#include "reformnet/errors.hpp"

namespace reformnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Relative singular-value cutoff shared by pinv, projectors and rank so that
// all three agree on what the row space of a given matrix is.
inline constexpr double kDefaultTol = 1e-10;

bool all_finite(const Matrix& m);

// Moore-Penrose pseudo-inverse via SVD. Singular values below tol * sigma_max
// are treated as zero. Throws InvalidInputError on non-finite input.
Matrix pinv(const Matrix& m, double tol = kDefaultTol);

// Orthogonal projector P = M+ M onto the row space of m (cols x cols).
Matrix proj_onto_row_space(const Matrix& m, double tol = kDefaultTol);

// Symmetric PSD square root. Input is symmetrized before decomposition;
// eigenvalues below -tol * |lambda|_max raise NotPsdError, small negative
// ones are clamped to zero.
Matrix sqrtm_psd(const Matrix& m, double tol = kDefaultTol);

// Fractional power m^p of a symmetric PSD matrix, same conventions as
// sqrtm_psd. p must be >= 0.
Matrix sym_power(const Matrix& m, double p, double tol = kDefaultTol);

// Number of singular values above tol * sigma_max.
Eigen::Index numerical_rank(const Matrix& m, double tol = kDefaultTol);

} // namespace reformnet
