#include "reformnet/reform_z.hpp"

#include <cmath>
#include <string>

namespace reformnet {

Matrix HiddenReps::activated(int l) const {
    const Matrix& base = (l == 0) ? input : reps[l - 1];
    Matrix out(base.rows() + 1, base.cols());
    out.topRows(base.rows()) = (l == 0) ? base : activation.apply(base);
    out.row(base.rows()).setConstant(beta);
    return out;
}

double constraint_residual(const HiddenReps& z, int l, double tol) {
    const Matrix& next = z.reps[l];
    const double scale = next.norm();
    if (scale == 0.0) return 0.0;
    const Matrix p = proj_onto_row_space(z.activated(l), tol);
    return (next - next * p).norm() / scale;
}

void check_constraints(const HiddenReps& z, double tol) {
    for (int l = 0; l < z.depth(); ++l) {
        if (constraint_residual(z, l) > tol)
            throw ConstraintError(l + 1, "representation Z_" + std::to_string(l + 1) +
                                             " leaves the row space of Zsig_" +
                                             std::to_string(l));
    }
}

HiddenReps reps_from_weights(const NetworkParams& params, const Matrix& x) {
    const ForwardTrace trace = forward(params, x);
    return HiddenReps{trace.pre, x, params.beta, params.activation};
}

NetworkParams weights_from_reps(const HiddenReps& z, double tol) {
    check_constraints(z, tol);
    NetworkParams params;
    params.beta = z.beta;
    params.activation = z.activation;
    for (int l = 0; l < z.depth(); ++l)
        params.weights.push_back(z.reps[l] * pinv(z.activated(l)));
    return params;
}

double loss_r(const HiddenReps& z, CostKind cost, const Matrix& targets, double lambda,
              double tol) {
    check_constraints(z, tol);
    double reg = 0.0;
    for (int l = 0; l < z.depth(); ++l)
        reg += (z.reps[l] * pinv(z.activated(l))).squaredNorm();
    return cost_value(cost, z.reps.back(), targets) + lambda * reg;
}

double default_epsilon(const HiddenReps& z, int layer) {
    const Matrix zs = z.activated(layer);
    return 1e-6 * zs.squaredNorm() / static_cast<double>(z.num_points());
}

namespace {

// Apply (G + eps I)^-1 to rhs, G the Gram matrix of zs.
Matrix regularized_gram_solve(const Matrix& zs, double eps, const Matrix& rhs) {
    Matrix gram = zs.transpose() * zs;
    gram.diagonal().array() += eps;
    return Eigen::LDLT<Matrix>(gram).solve(rhs);
}

Matrix attraction_force(const HiddenReps& z, int layer, double eps) {
    const Matrix& zl = z.reps[layer - 1];
    const Matrix prev = z.activated(layer - 1);
    return 2.0 * regularized_gram_solve(prev, eps, zl.transpose()).transpose();
}

Matrix repulsion_force(const HiddenReps& z, int layer, double eps) {
    const Matrix& zl = z.reps[layer - 1];
    const Matrix& znext = z.reps[layer];
    const Matrix sig = z.activation.apply(zl);
    Matrix ksig = sig.transpose() * sig;
    ksig.array() += z.beta * z.beta; // beta^2 ones block from the appended row
    ksig.diagonal().array() += eps;
    const Eigen::LDLT<Matrix> solver(ksig);
    const Matrix knext = znext.transpose() * znext;
    const Matrix a = solver.solve(solver.solve(knext).transpose());
    return -2.0 * z.activation.apply_derivative(zl).cwiseProduct(sig * a);
}

} // namespace

ForceField forces(const HiddenReps& z, int layer, double epsilon) {
    if (layer < 1 || layer >= z.depth())
        throw ShapeError("force layer must be in [1, L-1]");
    ForceField field;
    field.layer = layer;
    field.epsilon = epsilon;
    field.attraction = attraction_force(z, layer, epsilon);
    field.repulsion = repulsion_force(z, layer, epsilon);
    return field;
}

double loss_r_regularized(const HiddenReps& z, CostKind cost, const Matrix& targets,
                          double lambda, double epsilon) {
    double reg = 0.0;
    for (int l = 0; l < z.depth(); ++l) {
        const Matrix prev = z.activated(l);
        const double eps = epsilon > 0.0 ? epsilon : default_epsilon(z, l);
        const Matrix k = z.reps[l].transpose() * z.reps[l];
        reg += regularized_gram_solve(prev, eps, k).trace();
    }
    return cost_value(cost, z.reps.back(), targets) + lambda * reg;
}

namespace {

std::vector<Matrix> regularized_gradient(const HiddenReps& z, CostKind cost,
                                         const Matrix& targets, double lambda,
                                         double epsilon) {
    const int depth = z.depth();
    std::vector<Matrix> grads(depth);
    for (int layer = 1; layer <= depth; ++layer) {
        const double eps_prev =
            epsilon > 0.0 ? epsilon : default_epsilon(z, layer - 1);
        Matrix g = lambda * attraction_force(z, layer, eps_prev);
        if (layer < depth) {
            const double eps_here = epsilon > 0.0 ? epsilon : default_epsilon(z, layer);
            g += lambda * repulsion_force(z, layer, eps_here);
        } else {
            g += cost_gradient(cost, z.reps.back(), targets);
        }
        grads[layer - 1] = std::move(g);
    }
    return grads;
}

void project_onto_constraints(HiddenReps& z) {
    for (int l = 0; l < z.depth(); ++l)
        z.reps[l] = z.reps[l] * proj_onto_row_space(z.activated(l));
}

} // namespace

HiddenReps projected_gd(const HiddenReps& z0, CostKind cost, const Matrix& targets,
                        double lambda, int steps, double lr, double epsilon,
                        std::vector<double>* objective_history) {
    HiddenReps z = z0;
    check_constraints(z);
    double current = loss_r_regularized(z, cost, targets, lambda, epsilon);
    if (objective_history) objective_history->push_back(current);
    double step_size = lr;
    for (int t = 0; t < steps; ++t) {
        const auto grads = regularized_gradient(z, cost, targets, lambda, epsilon);
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            HiddenReps trial = z;
            for (int l = 0; l < trial.depth(); ++l)
                trial.reps[l] -= step_size * grads[l];
            project_onto_constraints(trial);
            const double value = loss_r_regularized(trial, cost, targets, lambda, epsilon);
            if (!std::isfinite(value)) {
                step_size *= 0.5;
                continue;
            }
            if (value <= current + 1e-12 * (1.0 + std::abs(current))) {
                z = std::move(trial);
                current = value;
                step_size = std::min(step_size * 1.3, lr);
                accepted = true;
                break;
            }
            step_size *= 0.5;
        }
        if (!accepted) break;
        if (current > 1e12)
            throw DivergenceError(t, "projected descent diverged");
        if (objective_history) objective_history->push_back(current);
    }
    return z;
}

} // namespace reformnet
