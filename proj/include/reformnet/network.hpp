#pragma once

#include <cstdint>
#include <vector>

#include "reformnet/linalg.hpp"

namespace reformnet {

// Positively homogeneous activations of degree 1: sigma(t x) = t sigma(x)
// for t > 0. This is the class required by the covariance reformulation.
enum class ActivationKind { kRelu, kLeakyRelu, kIdentity };

struct Activation {
    ActivationKind kind = ActivationKind::kRelu;
    double slope = 0.01; // leaky_relu only, in (0, 1)

    static Activation relu() { return {ActivationKind::kRelu, 0.0}; }
    static Activation leaky_relu(double slope) { return {ActivationKind::kLeakyRelu, slope}; }
    static Activation identity() { return {ActivationKind::kIdentity, 1.0}; }

    double value(double x) const {
        switch (kind) {
        case ActivationKind::kRelu: return x > 0.0 ? x : 0.0;
        case ActivationKind::kLeakyRelu: return x > 0.0 ? x : slope * x;
        case ActivationKind::kIdentity: return x;
        }
        return x;
    }

    // sigma'(0) := 0 for relu (dead-neuron convention); slope for leaky.
    double derivative(double x) const {
        switch (kind) {
        case ActivationKind::kRelu: return x > 0.0 ? 1.0 : 0.0;
        case ActivationKind::kLeakyRelu: return x > 0.0 ? 1.0 : slope;
        case ActivationKind::kIdentity: return 1.0;
        }
        return 1.0;
    }

    Matrix apply(const Matrix& m) const {
        return m.unaryExpr([this](double x) { return value(x); });
    }
    Matrix apply_derivative(const Matrix& m) const {
        return m.unaryExpr([this](double x) { return derivative(x); });
    }
};

// Weights of a fully-connected network. W_l has shape n_l x (n_{l-1}+1);
// the extra column multiplies the constant beta-row appended to every
// activation, so beta = 0 disables the bias and beta = 1 recovers the
// standard one.
struct NetworkParams {
    std::vector<Matrix> weights;
    double beta = 0.0;
    Activation activation;

    int depth() const { return static_cast<int>(weights.size()); }
    Eigen::Index input_dim() const { return weights.front().cols() - 1; }
    Eigen::Index output_dim() const { return weights.back().rows(); }

    double squared_norm() const {
        double s = 0.0;
        for (const Matrix& w : weights) s += w.squaredNorm();
        return s;
    }

    // Throws ShapeError unless consecutive shapes chain and depth >= 1.
    void validate() const;
};

// Pre-activations Z_1..Z_L and activations Zsig_0..Zsig_{L-1}; each Zsig has
// the constant beta-row appended, and Zsig_0 = (X; beta 1^T).
struct ForwardTrace {
    std::vector<Matrix> pre;
    std::vector<Matrix> act;

    const Matrix& output() const { return pre.back(); }
};

// mse: (1/N) ||Z - Y||_F^2.  sse: ||Z - Y||_F^2 (no normalization; this is
// the form the size-2 counterexample's closed-form losses are stated in).
// cross_entropy: multiclass, softmax over output rows, one-hot target columns.
enum class CostKind { kMse, kSse, kCrossEntropy };

ForwardTrace forward(const NetworkParams& params, const Matrix& x);

double cost_value(CostKind cost, const Matrix& output, const Matrix& targets);
Matrix cost_gradient(CostKind cost, const Matrix& output, const Matrix& targets);

// C(Z_L) + lambda * sum_l ||W_l||_F^2
double loss(const NetworkParams& params, const Matrix& x, const Matrix& targets,
            CostKind cost, double lambda);

// Exact gradient of loss() w.r.t. every W_l (backpropagation).
std::vector<Matrix> gradient(const NetworkParams& params, const Matrix& x,
                             const Matrix& targets, CostKind cost, double lambda);

double gradient_norm(const std::vector<Matrix>& grads);

// Two-phase full-batch optimizer: adaptive-moment warmup, then plain GD with
// step-halving on loss increase.
struct OptimizerConfig {
    int adam_steps = 2000;
    double adam_lr = 1e-2;
    int gd_steps = 1000;
    double gd_lr = 1e-2;
    double grad_tol = 0.0;  // stop the GD phase early once ||grad|| <= grad_tol
    double divergence_threshold = 1e12;
    std::uint64_t seed = 0; // used by callers that derive the initialization
};

struct TrainResult {
    NetworkParams params;
    std::vector<double> loss_history; // loss before step 0, then after each step
    double final_gradient_norm = 0.0;

    double final_loss() const { return loss_history.back(); }
};

// Throws DivergenceError (with the step index) if the loss exceeds the
// configured threshold.
TrainResult train(const NetworkParams& initial, const Matrix& x, const Matrix& targets,
                  CostKind cost, double lambda, const OptimizerConfig& opt);

// i.i.d. Gaussian init with per-layer stddev gain / sqrt(n_{l-1}+1).
NetworkParams random_params(Eigen::Index input_dim, const std::vector<Eigen::Index>& widths,
                            Activation activation, double beta, std::uint64_t seed,
                            double gain = 1.0);

// Width-monotonicity construction: appends a neuron with zero incoming and
// outgoing weights to hidden layer `layer` (1-based); leaves the network
// function and the parameter norm unchanged.
NetworkParams append_dead_neuron(const NetworkParams& params, int layer);

} // namespace reformnet
