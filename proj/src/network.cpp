#include "reformnet/network.hpp"

#include <cmath>
#include <string>

#include "reformnet/rng.hpp"

namespace reformnet {

void NetworkParams::validate() const {
    if (weights.empty())
        throw ShapeError("network needs at least one layer");
    for (size_t l = 1; l < weights.size(); ++l) {
        if (weights[l].cols() != weights[l - 1].rows() + 1)
            throw ShapeError("cols(W_" + std::to_string(l + 1) + ") must equal rows(W_" +
                             std::to_string(l) + ")+1");
    }
}

namespace {

Matrix with_beta_row(const Matrix& m, double beta) {
    Matrix out(m.rows() + 1, m.cols());
    out.topRows(m.rows()) = m;
    out.row(m.rows()).setConstant(beta);
    return out;
}

Matrix softmax_columns(const Matrix& z) {
    Matrix p = z;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double shift = z.col(j).maxCoeff();
        p.col(j) = (z.col(j).array() - shift).exp();
        p.col(j) /= p.col(j).sum();
    }
    return p;
}

} // namespace

ForwardTrace forward(const NetworkParams& params, const Matrix& x) {
    params.validate();
    if (x.rows() != params.input_dim())
        throw ShapeError("input rows do not match cols(W_1)-1");
    ForwardTrace trace;
    trace.act.reserve(params.weights.size());
    trace.pre.reserve(params.weights.size());
    trace.act.push_back(with_beta_row(x, params.beta));
    for (size_t l = 0; l < params.weights.size(); ++l) {
        trace.pre.push_back(params.weights[l] * trace.act.back());
        if (l + 1 < params.weights.size())
            trace.act.push_back(with_beta_row(params.activation.apply(trace.pre.back()),
                                              params.beta));
    }
    return trace;
}

double cost_value(CostKind cost, const Matrix& output, const Matrix& targets) {
    if (output.rows() != targets.rows() || output.cols() != targets.cols())
        throw ShapeError("output/target shape mismatch");
    const double n = static_cast<double>(output.cols());
    switch (cost) {
    case CostKind::kMse:
        return (output - targets).squaredNorm() / n;
    case CostKind::kSse:
        return (output - targets).squaredNorm();
    case CostKind::kCrossEntropy: {
        double total = 0.0;
        for (Eigen::Index j = 0; j < output.cols(); ++j) {
            const double shift = output.col(j).maxCoeff();
            const double lse = std::log((output.col(j).array() - shift).exp().sum()) + shift;
            total += lse - targets.col(j).dot(output.col(j));
        }
        return total / n;
    }
    }
    return 0.0;
}

Matrix cost_gradient(CostKind cost, const Matrix& output, const Matrix& targets) {
    if (output.rows() != targets.rows() || output.cols() != targets.cols())
        throw ShapeError("output/target shape mismatch");
    const double n = static_cast<double>(output.cols());
    switch (cost) {
    case CostKind::kMse:
        return 2.0 / n * (output - targets);
    case CostKind::kSse:
        return 2.0 * (output - targets);
    case CostKind::kCrossEntropy:
        return (softmax_columns(output) - targets) / n;
    }
    return Matrix();
}

double loss(const NetworkParams& params, const Matrix& x, const Matrix& targets,
            CostKind cost, double lambda) {
    const ForwardTrace trace = forward(params, x);
    return cost_value(cost, trace.output(), targets) + lambda * params.squared_norm();
}

std::vector<Matrix> gradient(const NetworkParams& params, const Matrix& x,
                             const Matrix& targets, CostKind cost, double lambda) {
    const ForwardTrace trace = forward(params, x);
    const int depth = params.depth();
    std::vector<Matrix> grads(depth);
    Matrix g = cost_gradient(cost, trace.output(), targets); // dC/dZ_l, l = L..1
    for (int l = depth - 1; l >= 0; --l) {
        grads[l] = g * trace.act[l].transpose() + 2.0 * lambda * params.weights[l];
        if (l > 0) {
            const Matrix back = params.weights[l].transpose() * g;
            // drop the beta-row (constant, carries no gradient) and chain through sigma
            g = back.topRows(back.rows() - 1)
                    .cwiseProduct(params.activation.apply_derivative(trace.pre[l - 1]));
        }
    }
    return grads;
}

double gradient_norm(const std::vector<Matrix>& grads) {
    double s = 0.0;
    for (const Matrix& g : grads) s += g.squaredNorm();
    return std::sqrt(s);
}

namespace {

void check_divergence(double value, int step, double threshold) {
    if (!std::isfinite(value) || value > threshold)
        throw DivergenceError(step, "training diverged at step " + std::to_string(step));
}

} // namespace

TrainResult train(const NetworkParams& initial, const Matrix& x, const Matrix& targets,
                  CostKind cost, double lambda, const OptimizerConfig& opt) {
    NetworkParams params = initial;
    params.validate();
    TrainResult result;
    result.loss_history.push_back(loss(params, x, targets, cost, lambda));
    check_divergence(result.loss_history.back(), 0, opt.divergence_threshold);

    // Phase 1: Adam, full batch.
    std::vector<Matrix> m1, m2;
    for (const Matrix& w : params.weights) {
        m1.push_back(Matrix::Zero(w.rows(), w.cols()));
        m2.push_back(Matrix::Zero(w.rows(), w.cols()));
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= opt.adam_steps; ++t) {
        const auto grads = gradient(params, x, targets, cost, lambda);
        const double bc1 = 1.0 - std::pow(b1, t);
        const double bc2 = 1.0 - std::pow(b2, t);
        for (size_t l = 0; l < params.weights.size(); ++l) {
            m1[l] = b1 * m1[l] + (1.0 - b1) * grads[l];
            m2[l] = b2 * m2[l] + (1.0 - b2) * grads[l].cwiseProduct(grads[l]);
            const Matrix mhat = m1[l] / bc1;
            const Matrix vhat = m2[l] / bc2;
            params.weights[l].array() -= opt.adam_lr * mhat.array() / (vhat.array().sqrt() + eps);
        }
        result.loss_history.push_back(loss(params, x, targets, cost, lambda));
        check_divergence(result.loss_history.back(), t, opt.divergence_threshold);
    }

    // Phase 2: plain GD with step-halving; the recorded loss is non-increasing.
    double lr = opt.gd_lr;
    for (int t = 0; t < opt.gd_steps; ++t) {
        const auto grads = gradient(params, x, targets, cost, lambda);
        const double gnorm = gradient_norm(grads);
        result.final_gradient_norm = gnorm;
        if (opt.grad_tol > 0.0 && gnorm <= opt.grad_tol) break;
        const double current = result.loss_history.back();
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            NetworkParams trial = params;
            for (size_t l = 0; l < trial.weights.size(); ++l)
                trial.weights[l] -= lr * grads[l];
            const double trial_loss = loss(trial, x, targets, cost, lambda);
            if (trial_loss <= current + 1e-12 * (1.0 + std::abs(current))) {
                params = std::move(trial);
                result.loss_history.push_back(trial_loss);
                lr = std::min(lr * 1.3, opt.gd_lr);
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) break; // step size underflowed; at numerical stationarity
        check_divergence(result.loss_history.back(), opt.adam_steps + t + 1,
                         opt.divergence_threshold);
    }
    if (opt.gd_steps > 0 || opt.adam_steps > 0)
        result.final_gradient_norm =
            gradient_norm(gradient(params, x, targets, cost, lambda));
    result.params = std::move(params);
    return result;
}

NetworkParams random_params(Eigen::Index input_dim, const std::vector<Eigen::Index>& widths,
                            Activation activation, double beta, std::uint64_t seed,
                            double gain) {
    Rng rng(seed);
    NetworkParams params;
    params.beta = beta;
    params.activation = activation;
    Eigen::Index fan_in = input_dim;
    for (Eigen::Index w : widths) {
        const double stddev = gain / std::sqrt(static_cast<double>(fan_in + 1));
        params.weights.push_back(rng.gaussian(w, fan_in + 1, stddev));
        fan_in = w;
    }
    return params;
}

NetworkParams append_dead_neuron(const NetworkParams& params, int layer) {
    if (layer < 1 || layer >= params.depth())
        throw ShapeError("dead neuron layer out of range");
    NetworkParams out = params;
    Matrix& w = out.weights[layer - 1];
    w.conservativeResize(w.rows() + 1, Eigen::NoChange);
    w.row(w.rows() - 1).setZero();
    // matching zero column in the next layer, inserted before the bias column
    Matrix& wn = out.weights[layer];
    Matrix grown(wn.rows(), wn.cols() + 1);
    grown.leftCols(wn.cols() - 1) = wn.leftCols(wn.cols() - 1);
    grown.col(wn.cols() - 1).setZero();
    grown.col(wn.cols()) = wn.col(wn.cols() - 1);
    wn = grown;
    return out;
}

} // namespace reformnet
