#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reformnet/cprank.hpp"
#include "reformnet/linalg.hpp"
#include "reformnet/rng.hpp"

using namespace reformnet;

TEST_CASE("pinv of identity and rank-deficient diagonal") {
    CHECK((pinv(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm() < 1e-14);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 2.0;
    const Matrix dp = pinv(d);
    CHECK(dp(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(dp(1, 1) == 0.0);
    CHECK(dp(0, 1) == 0.0);
}

TEST_CASE("pinv satisfies the Penrose identities on random matrices") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index rows = rng.uniform_int(1, 7);
        const Eigen::Index cols = rng.uniform_int(1, 7);
        Matrix m = rng.gaussian(rows, cols);
        if (trial % 3 == 0 && rows > 1) m.row(0) = m.row(rows - 1); // force rank deficiency
        const Matrix p = pinv(m);
        const double scale = 1e-8 * (1.0 + m.norm());
        CHECK((m * p * m - m).norm() < scale);
        CHECK((p * m * p - p).norm() < scale);
        CHECK(((m * p).transpose() - m * p).norm() < scale);
        CHECK(((p * m).transpose() - p * m).norm() < scale);
    }
}

TEST_CASE("pinv example: random 5x3 full-rank") {
    Rng rng(5);
    const Matrix m = rng.gaussian(5, 3);
    CHECK((m * pinv(m) * m - m).norm() < 1e-10);
}

TEST_CASE("pinv rejects non-finite input") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(pinv(m), InvalidInputError);
}

TEST_CASE("row-space projector axioms") {
    Rng rng(3);
    const Matrix m = rng.gaussian(2, 3); // full row rank a.s.
    const Matrix p = proj_onto_row_space(m);
    CHECK((p * p - p).norm() < 1e-12);
    CHECK((p.transpose() - p).norm() < 1e-14);
    CHECK((m * p - m).norm() < 1e-12);
    CHECK(numerical_rank(p) == numerical_rank(m));
}

TEST_CASE("projector of the zero matrix is zero") {
    CHECK(proj_onto_row_space(Matrix::Zero(3, 4)).norm() == 0.0);
}

TEST_CASE("projector onto span{(1,1)} is the half all-ones matrix") {
    Matrix m(1, 2);
    m << 1.0, 1.0;
    const Matrix expected = 0.5 * Matrix::Ones(2, 2);
    CHECK((proj_onto_row_space(m) - expected).norm() < 1e-14);
}

TEST_CASE("sqrtm_psd basics") {
    CHECK((sqrtm_psd(Matrix::Identity(4, 4)) - Matrix::Identity(4, 4)).norm() < 1e-13);

    // J^2 = m J, so sqrt(J) = J / sqrt(m)
    for (int m = 2; m <= 5; ++m) {
        const Matrix j = Matrix::Ones(m, m);
        CHECK((sqrtm_psd(j) - j / std::sqrt(double(m))).norm() < 1e-12);
    }
}

TEST_CASE("sqrtm_psd round-trips B_4") {
    const Matrix b = bipartite_matrix(4);
    CHECK((sqrtm_psd(b * b) - b).norm() < 1e-10);
}

TEST_CASE("sqrtm of random PSD squares back") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = rng.gaussian(5, 5);
        const Matrix psd = a * a.transpose();
        const Matrix s = sqrtm_psd(psd, 1e-8);
        CHECK((s * s - psd).norm() < 1e-8 * (1.0 + psd.norm()));
        CHECK((s.transpose() - s).norm() < 1e-12);
    }
}

TEST_CASE("sqrtm_psd rejects indefinite input") {
    Matrix m = Matrix::Identity(2, 2);
    m(1, 1) = -1.0;
    CHECK_THROWS_AS(sqrtm_psd(m), NotPsdError);
}

TEST_CASE("numerical rank") {
    CHECK(numerical_rank(Matrix::Identity(3, 3)) == 3);
    CHECK(numerical_rank(Matrix::Ones(4, 4)) == 1);
    CHECK(numerical_rank(Matrix::Zero(2, 5)) == 0);
}

TEST_CASE("rank of B_4 from its explicit eigendecomposition") {
    // Eigenvectors (1,1,1,1), (1,1,-1,-1), (1,-1,0,0), (0,0,1,-1) give
    // eigenvalues 4, 0, 2, 2: the incidence Gram of a connected bipartite
    // graph on 4 vertices has rank 3.
    const Matrix b = bipartite_matrix(4);
    Vector v1(4), v2(4), v3(4), v4(4);
    v1 << 1, 1, 1, 1;
    v2 << 1, 1, -1, -1;
    v3 << 1, -1, 0, 0;
    v4 << 0, 0, 1, -1;
    CHECK((b * v1 - 4.0 * v1).norm() < 1e-14);
    CHECK((b * v2).norm() < 1e-14);
    CHECK((b * v3 - 2.0 * v3).norm() < 1e-14);
    CHECK((b * v4 - 2.0 * v4).norm() < 1e-14);
    CHECK(numerical_rank(b) == 3);
}

TEST_CASE("sym_power interpolates between identity and the matrix") {
    Rng rng(23);
    const Matrix a = rng.gaussian(4, 4);
    const Matrix psd = a * a.transpose();
    CHECK((sym_power(psd, 1.0) - psd).norm() < 1e-10);
    const Matrix half = sym_power(psd, 0.5);
    CHECK((half * half - psd).norm() < 1e-9);
}
