#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reformnet/reform_k.hpp"
#include "reformnet/rng.hpp"
#include "test_util.hpp"

using namespace reformnet;
using testutil::rel_err;

TEST_CASE("pair validation") {
    const Eigen::Index n = 3;
    CovariancePair good{Matrix::Identity(n, n), Matrix::Identity(n, n), 0.0};
    CHECK_NOTHROW(check_pair(good));

    CovariancePair indefinite{-Matrix::Identity(n, n), Matrix::Identity(n, n), 0.0};
    CHECK_THROWS_AS(check_pair(indefinite), NotPsdError);

    // K_sigma PSD but K_sigma - beta^2 ones not: outside the translated cone
    CovariancePair untranslated{Matrix::Identity(n, n), Matrix::Identity(n, n), 1.0};
    CHECK_THROWS_AS(check_pair(untranslated), NotPsdError);
}

TEST_CASE("chain from weights: Gram structure and exact image chain") {
    Rng rng(50);
    for (int trial = 0; trial < 8; ++trial) {
        const auto params = testutil::random_net(
            rng, 3, 2, 3, 5, trial % 2 ? Activation::relu() : Activation::identity(),
            trial % 3 ? 1.0 : 0.0);
        const Matrix x = rng.gaussian(3, 6);
        const CovarianceChain chain = chain_from_weights(params, x);
        CHECK_NOTHROW(check_chain(chain, 1e-10));
        const ForwardTrace trace = forward(params, x);
        for (size_t l = 0; l < chain.pairs.size(); ++l) {
            CHECK((chain.pairs[l].k - trace.pre[l].transpose() * trace.pre[l]).norm() <
                  1e-12);
            CHECK(numerical_rank(chain.pairs[l].k) <= trace.pre[l].rows());
            CHECK_NOTHROW(check_pair(chain.pairs[l]));
        }
    }
}

TEST_CASE("relu on nonnegative pre-activations gives K = Ksig when beta = 0") {
    NetworkParams params;
    params.beta = 0.0;
    params.activation = Activation::relu();
    Matrix w1 = Matrix::Zero(2, 3);
    w1 << 1.0, 2.0, 0.0, 0.5, 1.5, 0.0;
    Matrix w2 = Matrix::Zero(1, 3);
    w2 << 1.0, 1.0, 0.0;
    params.weights = {w1, w2};
    Matrix x(2, 4);
    x << 0.2, 1.0, 0.4, 0.0, 0.3, 0.1, 2.0, 0.5; // nonnegative data
    const CovarianceChain chain = chain_from_weights(params, x);
    CHECK((chain.pairs[0].k - chain.pairs[0].k_sigma).norm() < 1e-12);
}

TEST_CASE("trace identity: loss_k equals loss_r on random networks") {
    Rng rng(51);
    for (int trial = 0; trial < 12; ++trial) {
        const auto params = testutil::random_net(
            rng, 2, 2, 3, 5, trial % 2 ? Activation::relu() : Activation::identity(),
            trial % 3 ? 1.0 : 0.0);
        const Matrix x = rng.gaussian(2, 5);
        const Matrix y = rng.gaussian(2, 5);
        const double lambda = rng.uniform(0.01, 1.0);
        const double lk = loss_k(chain_from_weights(params, x), CostKind::kMse, y, lambda);
        const double lr = loss_r(reps_from_weights(params, x), CostKind::kMse, y, lambda);
        CHECK(std::abs(lk - lr) < 1e-8 * (1.0 + std::abs(lr)));
    }
}

TEST_CASE("all-zero chain costs C(0)") {
    NetworkParams params;
    params.beta = 0.0;
    params.activation = Activation::relu();
    params.weights = {Matrix::Zero(2, 3), Matrix::Zero(1, 3)};
    const Matrix x = Matrix::Identity(2, 2);
    const Matrix y = Matrix::Ones(1, 2);
    const CovarianceChain chain = chain_from_weights(params, x);
    CHECK(loss_k(chain, CostKind::kMse, y, 0.7) ==
          doctest::Approx(cost_value(CostKind::kMse, Matrix::Zero(1, 2), y)));
}

TEST_CASE("bipartite optimum chain has representation cost N^2") {
    const int n = 4;
    const Matrix b = bipartite_matrix(n);
    CovarianceChain chain;
    chain.beta = 0.0;
    chain.activation = Activation::relu();
    chain.k0_sigma = Matrix::Identity(n, n);
    chain.pairs = {CovariancePair{b, b, 0.0}};
    chain.output = b;
    // targets = output makes the cost term vanish; lambda-weight 1 leaves
    // the pure regularizer 2 Tr[B_N]
    const double value = loss_k(chain, CostKind::kMse, b, 1.0);
    CHECK(value == doctest::Approx(double(n) * n).epsilon(1e-10));
}

TEST_CASE("loss_k rejects broken image chains") {
    CovarianceChain chain;
    chain.beta = 0.0;
    chain.activation = Activation::relu();
    Matrix k0 = Matrix::Zero(2, 2);
    k0(0, 0) = 1.0; // rank-1 input Gram
    chain.k0_sigma = k0;
    chain.pairs = {CovariancePair{Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0.0}};
    chain.output = Matrix::Ones(1, 2);
    CHECK_THROWS_AS(loss_k(chain, CostKind::kMse, Matrix::Ones(1, 2), 0.1),
                    ConstraintError);
}

TEST_CASE("cone construction basics") {
    Rng rng(52);
    const int n = 4;

    const Vector z = rng.gaussian_vector(n);
    const ConePoint single = cone_construct({z}, 0.0, n);
    CHECK(numerical_rank(single.pair.k) == 1);
    CHECK(witness_residual(single.pair, single.witness, Activation::relu()) == 0.0);

    std::vector<Vector> basis;
    for (int i = 0; i < n; ++i) basis.push_back(Vector::Unit(n, i));
    const ConePoint identity = cone_construct(basis, 0.0, n);
    CHECK((identity.pair.k - Matrix::Identity(n, n)).norm() == 0.0);
    CHECK((identity.pair.k_sigma - Matrix::Identity(n, n)).norm() == 0.0);

    // nonnegative incidence rows of a graph: sigma acts as identity
    const GraphSpec g = complete_bipartite(2, 2);
    const Matrix e = incidence_matrix(g);
    std::vector<Vector> rows;
    for (int r = 0; r < e.rows(); ++r) rows.push_back(e.row(r).transpose());
    const ConePoint gram = cone_construct(rows, 0.0, n);
    CHECK((gram.pair.k - e.transpose() * e).norm() == 0.0);
    CHECK((gram.pair.k - gram.pair.k_sigma).norm() == 0.0);
}

TEST_CASE("cone is convex: conic combinations carry concatenated witnesses") {
    Rng rng(53);
    const int n = 4;
    const double beta = 1.0;
    for (int trial = 0; trial < 6; ++trial) {
        std::vector<Vector> vp, vq;
        for (int i = 0; i < 3; ++i) vp.push_back(rng.gaussian_vector(n));
        for (int i = 0; i < 2; ++i) vq.push_back(rng.gaussian_vector(n));
        const ConePoint p = cone_construct(vp, beta, n);
        const ConePoint q = cone_construct(vq, beta, n);
        const double alpha = rng.uniform(0.0, 3.0);
        const double gamma = rng.uniform(0.0, 3.0);

        CovariancePair combo;
        combo.beta = beta;
        combo.k = alpha * p.pair.k + gamma * q.pair.k;
        const Matrix ones = Matrix::Ones(n, n);
        combo.k_sigma = alpha * (p.pair.k_sigma - beta * beta * ones) +
                        gamma * (q.pair.k_sigma - beta * beta * ones) + beta * beta * ones;

        ConeWitness concatenated;
        for (const Vector& v : vp) concatenated.vectors.push_back(std::sqrt(alpha) * v);
        for (const Vector& v : vq) concatenated.vectors.push_back(std::sqrt(gamma) * v);
        CHECK(witness_residual(combo, concatenated, Activation::relu()) <
              1e-10 * (1.0 + combo.k.norm()));
    }
}

TEST_CASE("rank bounds: identity pair needs exactly N vectors") {
    const int n = 4;
    CovariancePair pair{Matrix::Identity(n, n), Matrix::Identity(n, n), 0.0};
    WitnessSearchConfig cfg;
    cfg.budget = 20;
    cfg.seed = 7;
    const RankSigmaBounds bounds = rank_sigma_bounds(pair, cfg);
    CHECK(bounds.lower == n);
    CHECK(bounds.upper == n);
    CHECK(bounds.upper_certified);
}

TEST_CASE("rank bounds: single-vector pair is rank one") {
    Rng rng(54);
    const int n = 5;
    const ConePoint point = cone_construct({rng.gaussian_vector(n)}, 0.0, n);
    WitnessSearchConfig cfg;
    cfg.budget = 20;
    cfg.seed = 8;
    const RankSigmaBounds bounds = rank_sigma_bounds(point.pair, cfg);
    CHECK(bounds.lower == 1);
    CHECK(bounds.upper == 1);
}

TEST_CASE("rank bounds bracket constructed pairs") {
    Rng rng(55);
    WitnessSearchConfig cfg;
    cfg.budget = 50;
    cfg.seed = 9;
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 5;
        const int k = 1 + trial;
        std::vector<Vector> vs;
        for (int i = 0; i < k; ++i) vs.push_back(rng.gaussian_vector(n));
        const ConePoint point = cone_construct(vs, trial % 2 ? 1.0 : 0.0, n);
        const RankSigmaBounds bounds = rank_sigma_bounds(point.pair, cfg);
        CHECK(bounds.lower <= k);
        CHECK(bounds.upper_certified);
        CHECK(bounds.upper <= k);
        CHECK(bounds.lower <= bounds.upper);
        CHECK(witness_residual(point.pair, bounds.witness, Activation::relu()) <=
              1e-6 * std::sqrt(point.pair.k.squaredNorm() +
                               (point.pair.k_sigma -
                                point.pair.beta * point.pair.beta * Matrix::Ones(n, n))
                                   .squaredNorm()) * (1.0 + 1e-9));
    }
}

TEST_CASE("rank bounds use the graph CP-rank: (B_4, B_4) needs N^2/4 vectors") {
    const Matrix b = bipartite_matrix(4);
    CovariancePair pair{b, b, 0.0};
    WitnessSearchConfig cfg;
    cfg.budget = 50;
    cfg.seed = 10;
    const RankSigmaBounds bounds =
        rank_sigma_bounds(pair, cfg, Activation::relu(), complete_bipartite(2, 2));
    CHECK(bounds.lower == 4);
    CHECK(bounds.upper == 4);
    CHECK(bounds.upper_certified);
}

TEST_CASE("witness rows for bipartite Grams have support at most two") {
    // Nonnegative factorizations of triangle-free incidence Grams can touch
    // at most two vertices per row; the searched witness must show that.
    const Matrix b = bipartite_matrix(4);
    CovariancePair pair{b, b, 0.0};
    WitnessSearchConfig cfg;
    cfg.budget = 50;
    cfg.seed = 11;
    cfg.residual_tol = 1e-8;
    const auto witness = search_witness(pair, 4, Activation::relu(), cfg);
    REQUIRE(witness.has_value());
    const double scale = std::sqrt(b.lpNorm<Eigen::Infinity>());
    for (const Vector& v : witness->vectors) {
        int support = 0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (std::abs(v(i)) > 1e-4 * scale) ++support;
        CHECK(support <= 2);
    }
}

TEST_CASE("shallow representation cost of the bipartite dataset") {
    const int n = 4;
    WitnessSearchConfig cfg;
    cfg.budget = 30;
    cfg.seed = 12;
    const ShallowRepCost rc =
        representation_cost_shallow(Matrix::Identity(n, n), bipartite_matrix(n), cfg);
    CHECK(rc.value == doctest::Approx(double(n) * n).epsilon(1e-10));
    CHECK((rc.pair.k - bipartite_matrix(n)).norm() < 1e-8);
    CHECK(rc.cp_verified);
    CHECK(rc.witness.size() == n * n / 4);
}

TEST_CASE("shallow representation cost of the identity dataset is 2N") {
    const int n = 5;
    WitnessSearchConfig cfg;
    cfg.budget = 10;
    cfg.seed = 13;
    const ShallowRepCost rc =
        representation_cost_shallow(Matrix::Identity(n, n), Matrix::Identity(n, n), cfg);
    CHECK(rc.value == doctest::Approx(2.0 * n).epsilon(1e-12));
    CHECK(rc.cp_verified);
    CHECK(rc.witness.size() == n);
}

TEST_CASE("shallow representation cost of one-hot classes") {
    // class sizes m_i: the square root has blocks J/sqrt(m_i), so the cost is
    // 2 sum sqrt(m_i) and the minimal width is the number of classes
    const int n = 6;
    Matrix y = Matrix::Zero(2, n);
    for (int i = 0; i < 4; ++i) y(0, i) = 1.0; // class sizes 4 and 2
    for (int i = 4; i < n; ++i) y(1, i) = 1.0;
    WitnessSearchConfig cfg;
    cfg.budget = 20;
    cfg.seed = 14;
    const ShallowRepCost rc = representation_cost_shallow(Matrix::Identity(n, n), y, cfg);
    CHECK(rc.value == doctest::Approx(2.0 * (std::sqrt(4.0) + std::sqrt(2.0))).epsilon(1e-10));
    CHECK(rc.cp_verified);
    CHECK(rc.witness.size() == 2);
    // block value is 1/sqrt(m_i), seen on the diagonal of the optimal pair
    CHECK(rc.pair.k(0, 0) == doctest::Approx(1.0 / std::sqrt(4.0)).epsilon(1e-10));
    CHECK(rc.pair.k(5, 5) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("representation cost requires the identity dataset") {
    CHECK_THROWS_AS(representation_cost_shallow(Matrix::Ones(3, 3), Matrix::Identity(3, 3),
                                                WitnessSearchConfig{}),
                    InvalidInputError);
}

TEST_CASE("weights_from_chain reproduces the chain") {
    Rng rng(56);
    for (int trial = 0; trial < 6; ++trial) {
        const auto params = testutil::random_net(
            rng, 3, 2, 3, 4, trial % 2 ? Activation::relu() : Activation::identity(),
            trial % 3 ? 1.0 : 0.0);
        const Matrix x = rng.gaussian(3, 5);
        const CovarianceChain chain = chain_from_weights(params, x);
        // the rows of each hidden representation are an exact witness
        const ForwardTrace trace = forward(params, x);
        std::vector<ConeWitness> witnesses;
        for (size_t l = 0; l + 1 < trace.pre.size(); ++l) {
            ConeWitness w;
            for (Eigen::Index r = 0; r < trace.pre[l].rows(); ++r)
                w.vectors.push_back(trace.pre[l].row(r).transpose());
            witnesses.push_back(std::move(w));
        }
        const NetworkParams rebuilt = weights_from_chain(chain, witnesses, x);
        const CovarianceChain back = chain_from_weights(rebuilt, x);
        for (size_t l = 0; l < chain.pairs.size(); ++l) {
            CHECK((back.pairs[l].k - chain.pairs[l].k).norm() <
                  1e-8 * (1.0 + chain.pairs[l].k.norm()));
            CHECK((back.pairs[l].k_sigma - chain.pairs[l].k_sigma).norm() <
                  1e-8 * (1.0 + chain.pairs[l].k_sigma.norm()));
        }
        CHECK((back.output - chain.output).norm() < 1e-8 * (1.0 + chain.output.norm()));
    }
}

TEST_CASE("weights_from_chain pads and validates widths") {
    Rng rng(57);
    const auto params = random_params(2, {2, 1}, Activation::relu(), 0.0, rng.next_u64());
    const Matrix x = rng.gaussian(2, 4);
    const CovarianceChain chain = chain_from_weights(params, x);
    const ForwardTrace trace = forward(params, x);
    ConeWitness w;
    for (Eigen::Index r = 0; r < trace.pre[0].rows(); ++r)
        w.vectors.push_back(trace.pre[0].row(r).transpose());

    const NetworkParams wide = weights_from_chain(chain, {w}, x, {5});
    CHECK(wide.weights[0].rows() == 5);
    const CovarianceChain back = chain_from_weights(wide, x);
    CHECK((back.pairs[0].k - chain.pairs[0].k).norm() < 1e-8);

    CHECK_THROWS_AS(weights_from_chain(chain, {w}, x, {1}), ShapeError);
}

TEST_CASE("linear interpolation covariance endpoints") {
    Rng rng(58);
    const int n = 4;
    const Matrix x = rng.gaussian(n, n) + 3.0 * Matrix::Identity(n, n);
    const Matrix z_last = rng.gaussian(n, n);
    CHECK((linear_interp_covariance(x, z_last, 0, 2) - x.transpose() * x).norm() <
          1e-8 * x.squaredNorm());
    CHECK((linear_interp_covariance(x, z_last, 2, 2) - z_last.transpose() * z_last).norm() <
          1e-8 * (1.0 + z_last.squaredNorm()));
    // the midpoint squares to K0^{-1/2}-conjugated products; verify via sqrtm
    const Matrix mid = linear_interp_covariance(x, z_last, 1, 2);
    const Matrix xi = x.inverse();
    const Matrix inner = xi.transpose() * z_last.transpose() * z_last * xi;
    const Matrix direct = x.transpose() * sqrtm_psd(0.5 * (inner + inner.transpose())) * x;
    CHECK((mid - direct).norm() < 1e-9 * (1.0 + direct.norm()));
}

TEST_CASE("chain JSON round trip") {
    Rng rng(59);
    const auto params = random_params(2, {3, 2}, Activation::leaky_relu(0.1), 1.0,
                                      rng.next_u64());
    const Matrix x = rng.gaussian(2, 4);
    const CovarianceChain chain = chain_from_weights(params, x);
    const CovarianceChain back = chain_from_json(chain_to_json(chain));
    CHECK(back.beta == chain.beta);
    CHECK(back.activation.kind == chain.activation.kind);
    CHECK((back.k0_sigma - chain.k0_sigma).norm() == 0.0);
    REQUIRE(back.pairs.size() == chain.pairs.size());
    for (size_t l = 0; l < chain.pairs.size(); ++l) {
        CHECK((back.pairs[l].k - chain.pairs[l].k).norm() == 0.0);
        CHECK((back.pairs[l].k_sigma - chain.pairs[l].k_sigma).norm() == 0.0);
    }
    CHECK((back.output - chain.output).norm() == 0.0);
}
