#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reformnet/cprank.hpp"
#include "reformnet/network.hpp"
#include "reformnet/reform_z.hpp"

namespace reformnet {

// Gram pair of a hidden layer: K = Z^T Z and Ksig = (Zsig)^T Zsig, the latter
// carrying the beta^2 all-ones block contributed by the appended beta-row.
struct CovariancePair {
    Matrix k;
    Matrix k_sigma;
    double beta = 0.0;
};

// Symmetry and PSD of both matrices, and of k_sigma - beta^2 ones (the
// translated-cone consistency condition). Eigenvalues down to -tol * |l|_max
// are accepted.
void check_pair(const CovariancePair& pair, double tol = 1e-8);

// The full covariance parameterization of a network on a fixed dataset:
// pairs for layers 1..L-1, the output Z_L, and K0sig = X^T X + beta^2 ones.
struct CovarianceChain {
    std::vector<CovariancePair> pairs;
    Matrix output;
    Matrix k0_sigma;
    double beta = 0.0;
    Activation activation;

    int depth() const { return static_cast<int>(pairs.size()) + 1; }
    Eigen::Index num_points() const { return k0_sigma.rows(); }
};

// Image chain Im K_l inside Im Ksig_{l-1} and Im Z_L^T inside Im Ksig_{L-1},
// via projector residuals. Throws ConstraintError naming the layer.
void check_chain(const CovarianceChain& chain, double tol = kConstraintTol);

CovarianceChain chain_from_weights(const NetworkParams& params, const Matrix& x);

// C(Z_L) + lambda sum_l Tr[K_l (Ksig_{l-1})^+], with K_L := Z_L^T Z_L.
double loss_k(const CovarianceChain& chain, CostKind cost, const Matrix& targets,
              double lambda, double tol = kConstraintTol);

// A finite set of vectors z_i realizing a pair: K = sum z_i z_i^T and
// Ksig = sum sigma(z_i) sigma(z_i)^T + beta^2 ones. Cone coefficients are
// absorbed into the vectors (degree-1 homogeneity).
struct ConeWitness {
    std::vector<Vector> vectors;

    int size() const { return static_cast<int>(vectors.size()); }
};

struct ConePoint {
    CovariancePair pair;
    ConeWitness witness;
};

// Builds the pair realized by the given vectors; the witness reconstructs it
// exactly by construction.
ConePoint cone_construct(const std::vector<Vector>& vectors, double beta, int n,
                         Activation activation = Activation::relu());

// sqrt(||K - sum zz^T||_F^2 + ||Ksig - beta^2 ones - sum s s^T||_F^2).
double witness_residual(const CovariancePair& pair, const ConeWitness& witness,
                        Activation activation);

struct WitnessSearchConfig {
    int budget = 50;       // restarts per candidate size
    int adam_steps = 250;
    int lm_steps = 120;
    double residual_tol = 1e-6; // relative to the pair's Frobenius scale
    std::uint64_t seed = 0;
};

// Attempts to realize the pair with exactly k vectors; alternates adaptive
// gradient steps, row sign flips (which leave K fixed and move only the
// sigma Gram) and a Levenberg-Marquardt polish. Restarts are seeded from
// (config.seed, k, restart), so the first success by restart index is
// deterministic.
std::optional<ConeWitness> search_witness(const CovariancePair& pair, int k,
                                          Activation activation,
                                          const WitnessSearchConfig& config);

struct RankSigmaBounds {
    int lower = 0;
    int upper = 0;
    bool upper_certified = false; // false means upper is the N(N+1) fallback
    ConeWitness witness;          // certificate when certified
};

// Brackets Rank_sigma(K, Ksig): lower from matrix ranks (and the exact
// graph CP-rank when the pair's sigma Gram is the incidence Gram of a
// supplied triangle-free graph); upper from the witness search, with the
// Caratheodory bound N(N+1) as unconditional fallback. Never fails when the
// budget runs out - the interval just stays wide.
RankSigmaBounds rank_sigma_bounds(const CovariancePair& pair,
                                  const WitnessSearchConfig& config,
                                  Activation activation = Activation::relu(),
                                  const std::optional<GraphSpec>& graph = std::nullopt);

struct ShallowRepCost {
    double value = 0.0;   // 2 Tr[(Y^T Y)^{1/2}]
    CovariancePair pair;  // the minimizer K_1 = Ksig_1 = (Y^T Y)^{1/2}
    bool cp_verified = false;
    ConeWitness witness;  // nonnegative decomposition when verified
};

// Closed-form representation cost of a depth-2 relu network without bias on
// X = I_N. The closed form assumes (Y^T Y)^{1/2} is completely positive;
// cp_verified reports whether the witness search certified that within budget.
ShallowRepCost representation_cost_shallow(const Matrix& x, const Matrix& y,
                                           const WitnessSearchConfig& config);

// Recursive reconstruction: stacks each witness into Z_l (zero-padded to
// widths[l-1] rows when widths are given), then W_l = Z_l (Zsig_{l-1})^+.
// chain_from_weights of the result reproduces the chain. Throws ShapeError
// if a witness exceeds its requested width.
NetworkParams weights_from_chain(const CovarianceChain& chain,
                                 const std::vector<ConeWitness>& witnesses,
                                 const Matrix& x,
                                 const std::vector<Eigen::Index>& widths = {});

// Closed form for deep linear networks (identity activation, beta = 0,
// invertible X): the optimal K_l = X^T (X^-T Z_L^T Z_L X^-1)^{l/L} X,
// interpolating between input and output covariances.
Matrix linear_interp_covariance(const Matrix& x, const Matrix& z_last, int ell, int depth);

// JSON layout documented in the README: matrices as {"rows","cols","data"}
// with row-major data.
std::string chain_to_json(const CovarianceChain& chain);
CovarianceChain chain_from_json(const std::string& text);

} // namespace reformnet
