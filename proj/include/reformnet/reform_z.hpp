#pragma once

#include "reformnet/network.hpp"

namespace reformnet {

// Relative residual below which a representation tuple is accepted as a
// member of the constraint set (Im Z_{l+1}^T inside Im (Zsig_l)^T).
inline constexpr double kConstraintTol = 1e-6;

// Hidden representations Z_1..Z_L of a fixed dataset, together with the data
// needed to evaluate Zsig_0 = (X; beta 1^T).
struct HiddenReps {
    std::vector<Matrix> reps;
    Matrix input;
    double beta = 0.0;
    Activation activation;

    int depth() const { return static_cast<int>(reps.size()); }
    Eigen::Index num_points() const { return input.cols(); }

    // Zsig_l for l in [0, L-1]; l = 0 yields (X; beta 1^T).
    Matrix activated(int l) const;
};

// Relative residual ||Z_{l+1} (I - P_row(Zsig_l))||_F / ||Z_{l+1}||_F for
// l in [0, L-1]; zero Z_{l+1} counts as satisfied.
double constraint_residual(const HiddenReps& z, int l, double tol = kDefaultTol);

// Throws ConstraintError naming the first violated layer.
void check_constraints(const HiddenReps& z, double tol = kConstraintTol);

// Phi: package the forward-pass pre-activations; satisfies the constraint
// chain by construction.
HiddenReps reps_from_weights(const NetworkParams& params, const Matrix& x);

// Psi: W_l = Z_l (Zsig_{l-1})^+. Requires the constraint chain.
NetworkParams weights_from_reps(const HiddenReps& z, double tol = kConstraintTol);

// C(Z_L) + lambda sum_l ||Z_l (Zsig_{l-1})^+||_F^2 over the constraint set.
double loss_r(const HiddenReps& z, CostKind cost, const Matrix& targets, double lambda,
              double tol = kConstraintTol);

// Attraction and repulsion forces at a hidden layer, computed through
// Tikhonov-regularized inverses (K + eps I)^-1 of the Gram matrices.
struct ForceField {
    Matrix attraction; // d/dZ_l Tr[Z_l^T Z_l (Ksig_{l-1} + eps I)^-1]
    Matrix repulsion;  // d/dZ_l Tr[K_{l+1} (Ksig_l + eps I)^-1]
    int layer = 0;     // 1-based, in [1, L-1]
    double epsilon = 0.0;
};

// Scale-relative default: 1e-6 * Tr(Ksig_l) / N.
double default_epsilon(const HiddenReps& z, int layer);

ForceField forces(const HiddenReps& z, int layer, double epsilon);

// Tikhonov-regularized objective the projected descent follows:
// C(Z_L) + lambda sum_l Tr[K_l (Ksig_{l-1} + eps I)^-1].
double loss_r_regularized(const HiddenReps& z, CostKind cost, const Matrix& targets,
                          double lambda, double epsilon);

// Projected gradient descent over the constraint set: gradient step on the
// regularized objective, then Z_l <- Z_l P_row(Zsig_{l-1}) sequentially from
// l = 1 to L. Step-halving keeps the recorded objective non-increasing.
// epsilon <= 0 selects the scale-relative default per layer.
HiddenReps projected_gd(const HiddenReps& z0, CostKind cost, const Matrix& targets,
                        double lambda, int steps, double lr, double epsilon,
                        std::vector<double>* objective_history = nullptr);

} // namespace reformnet
