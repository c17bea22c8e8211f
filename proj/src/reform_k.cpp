#include "reformnet/reform_k.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "reformnet/rng.hpp"

namespace reformnet {

namespace {

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_psd(const Matrix& m, double tol, const char* what) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    const double scale = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    if (ev(0) < -tol * scale)
        throw NotPsdError(std::string(what) + " is not PSD within tolerance");
}

} // namespace

void check_pair(const CovariancePair& pair, double tol) {
    if (pair.k.rows() != pair.k.cols() || pair.k_sigma.rows() != pair.k_sigma.cols() ||
        pair.k.rows() != pair.k_sigma.rows())
        throw ShapeError("covariance pair matrices must be square of equal size");
    check_psd(pair.k, tol, "K");
    check_psd(pair.k_sigma, tol, "K_sigma");
    const Matrix translated =
        pair.k_sigma - pair.beta * pair.beta * Matrix::Ones(pair.k_sigma.rows(), pair.k_sigma.cols());
    check_psd(translated, tol, "K_sigma - beta^2 ones");
}

void check_chain(const CovarianceChain& chain, double tol) {
    const Eigen::Index n = chain.num_points();
    Matrix prev_sigma = chain.k0_sigma;
    for (size_t l = 0; l < chain.pairs.size(); ++l) {
        const Matrix& k = chain.pairs[l].k;
        if (k.rows() != n)
            throw ShapeError("pair size does not match the dataset");
        const Matrix p = proj_onto_row_space(prev_sigma);
        const double scale = k.norm();
        if (scale > 0.0 && (k - p * k).norm() > tol * scale)
            throw ConstraintError(static_cast<int>(l) + 1,
                                  "Im K_" + std::to_string(l + 1) +
                                      " leaves Im Ksig_" + std::to_string(l));
        prev_sigma = chain.pairs[l].k_sigma;
    }
    const Matrix p = proj_onto_row_space(prev_sigma);
    const double scale = chain.output.norm();
    if (scale > 0.0 && (chain.output - chain.output * p).norm() > tol * scale)
        throw ConstraintError(chain.depth(),
                              "Im Z_L^T leaves Im Ksig_" + std::to_string(chain.pairs.size()));
}

CovarianceChain chain_from_weights(const NetworkParams& params, const Matrix& x) {
    const ForwardTrace trace = forward(params, x);
    CovarianceChain chain;
    chain.beta = params.beta;
    chain.activation = params.activation;
    chain.k0_sigma = trace.act[0].transpose() * trace.act[0];
    for (int l = 0; l + 1 < params.depth(); ++l) {
        CovariancePair pair;
        pair.k = trace.pre[l].transpose() * trace.pre[l];
        pair.k_sigma = trace.act[l + 1].transpose() * trace.act[l + 1];
        pair.beta = params.beta;
        chain.pairs.push_back(std::move(pair));
    }
    chain.output = trace.output();
    return chain;
}

double loss_k(const CovarianceChain& chain, CostKind cost, const Matrix& targets,
              double lambda, double tol) {
    check_chain(chain, tol);
    double reg = 0.0;
    Matrix prev_sigma = chain.k0_sigma;
    for (const CovariancePair& pair : chain.pairs) {
        reg += (pair.k * pinv(prev_sigma)).trace();
        prev_sigma = pair.k_sigma;
    }
    reg += (chain.output.transpose() * chain.output * pinv(prev_sigma)).trace();
    return cost_value(cost, chain.output, targets) + lambda * reg;
}

ConePoint cone_construct(const std::vector<Vector>& vectors, double beta, int n,
                         Activation activation) {
    ConePoint point;
    point.pair.beta = beta;
    point.pair.k = Matrix::Zero(n, n);
    Matrix sig_gram = Matrix::Zero(n, n);
    for (const Vector& z : vectors) {
        if (z.size() != n)
            throw ShapeError("cone vector has wrong dimension");
        point.pair.k += z * z.transpose();
        const Vector s = activation.apply(z);
        sig_gram += s * s.transpose();
    }
    point.pair.k_sigma = sig_gram + beta * beta * Matrix::Ones(n, n);
    point.witness.vectors = vectors;
    return point;
}

double witness_residual(const CovariancePair& pair, const ConeWitness& witness,
                        Activation activation) {
    const Eigen::Index n = pair.k.rows();
    Matrix k = Matrix::Zero(n, n);
    Matrix m = Matrix::Zero(n, n);
    for (const Vector& z : witness.vectors) {
        k += z * z.transpose();
        const Vector s = activation.apply(z);
        m += s * s.transpose();
    }
    const Matrix m_target =
        pair.k_sigma - pair.beta * pair.beta * Matrix::Ones(n, n);
    return std::sqrt((pair.k - k).squaredNorm() + (m_target - m).squaredNorm());
}

namespace {

// Witness search works on the scale-normalized targets K/s and M/s with
// M = Ksig - beta^2 ones; a witness row matrix C (k x N) multiplies back by
// sqrt(s) on the way out.
struct SearchTargets {
    Matrix k;
    Matrix m;
};

double search_objective(const SearchTargets& t, const Matrix& c, Activation act) {
    const Matrix s = act.apply(c);
    return (t.k - c.transpose() * c).squaredNorm() +
           (t.m - s.transpose() * s).squaredNorm();
}

Matrix search_gradient(const SearchTargets& t, const Matrix& c, Activation act) {
    const Matrix s = act.apply(c);
    const Matrix rk = t.k - c.transpose() * c;
    const Matrix rm = t.m - s.transpose() * s;
    return -4.0 * c * rk - 4.0 * act.apply_derivative(c).cwiseProduct(s * rm);
}

// Row sign flips leave the K term unchanged and move only the sigma Gram;
// they are the cheap escape from relu dead zones.
void sign_flip_sweep(const SearchTargets& t, Matrix& c, Activation act) {
    double best = search_objective(t, c, act);
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
        c.row(r) = -c.row(r);
        const double flipped = search_objective(t, c, act);
        if (flipped < best) {
            best = flipped;
        } else {
            c.row(r) = -c.row(r);
        }
    }
}

void adam_minimize(const SearchTargets& t, Matrix& c, Activation act, int steps,
                   double lr) {
    if (c.size() == 0) return;
    Matrix m1 = Matrix::Zero(c.rows(), c.cols());
    Matrix m2 = m1;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int step = 1; step <= steps; ++step) {
        const Matrix g = search_gradient(t, c, act);
        m1 = b1 * m1 + (1.0 - b1) * g;
        m2 = b2 * m2 + (1.0 - b2) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(b1, step);
        const double bc2 = 1.0 - std::pow(b2, step);
        c.array() -= lr * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + eps);
    }
}

Vector residual_vector(const SearchTargets& t, const Matrix& c, Activation act) {
    const Eigen::Index n = t.k.rows();
    const Matrix s = act.apply(c);
    const Matrix rk = t.k - c.transpose() * c;
    const Matrix rm = t.m - s.transpose() * s;
    Vector r(2 * n * n);
    r.head(n * n) = Eigen::Map<const Vector>(rk.data(), n * n);
    r.tail(n * n) = Eigen::Map<const Vector>(rm.data(), n * n);
    return r;
}

// Levenberg-Marquardt on the exact-fit least squares problem, optionally
// restricted to a support mask (frozen zeros remove the relu kinks from the
// linearization, restoring quadratic convergence near completely positive
// solutions). Stalls out quickly when stuck at a positive local minimum.
void lm_polish(const SearchTargets& t, Matrix& c, Activation act, int max_iters,
               double target_sq, const Matrix* mask = nullptr) {
    if (c.size() == 0) return;
    const Eigen::Index n = t.k.rows();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> free_entries;
    for (Eigen::Index a = 0; a < c.rows(); ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            if (!mask || (*mask)(a, b) > 0.0) free_entries.emplace_back(a, b);
    const Eigen::Index p = static_cast<Eigen::Index>(free_entries.size());
    if (p == 0) return;

    double mu = 1e-4;
    double f = search_objective(t, c, act);
    int stall = 0;
    for (int iter = 0; iter < max_iters && f > target_sq; ++iter) {
        const Vector r = residual_vector(t, c, act);
        const Matrix s = act.apply(c);
        const Matrix d = act.apply_derivative(c);
        // residual layout is column-major: r1 entry (i,j) sits at j*n + i
        Matrix jac = Matrix::Zero(2 * n * n, p);
        for (Eigen::Index col = 0; col < p; ++col) {
            const auto [a, b] = free_entries[col];
            for (Eigen::Index j = 0; j < n; ++j) {
                jac(j * n + b, col) -= c(a, j);
                jac(b * n + j, col) -= c(a, j);
                jac(n * n + j * n + b, col) -= d(a, b) * s(a, j);
                jac(n * n + b * n + j, col) -= d(a, b) * s(a, j);
            }
        }
        const Matrix jtj = jac.transpose() * jac;
        const Vector jtr = jac.transpose() * r;
        bool accepted = false;
        for (int tries = 0; tries < 8; ++tries) {
            Matrix damped = jtj;
            damped.diagonal().array() += mu;
            const Vector delta = -Eigen::LDLT<Matrix>(damped).solve(jtr);
            Matrix trial = c;
            for (Eigen::Index col = 0; col < p; ++col)
                trial(free_entries[col].first, free_entries[col].second) += delta(col);
            const double f_trial = search_objective(t, trial, act);
            if (f_trial < f) {
                if (f - f_trial < 1e-14 * (1.0 + f)) ++stall; else stall = 0;
                c = std::move(trial);
                f = f_trial;
                mu = std::max(mu / 3.0, 1e-12);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if (!accepted) ++stall;
        if (stall >= 4) break;
    }
}

// Damped multiplicative update for symmetric NMF (A ~ C^T C with C >= 0);
// preserves nonnegativity and homes in on completely positive factorizations
// far more reliably than unconstrained descent.
void snmf_multiplicative(const Matrix& a, Matrix& c, int iters) {
    const double tiny = 1e-12;
    for (int it = 0; it < iters; ++it) {
        const Matrix numer = c * a;
        const Matrix denom = c * (c.transpose() * c);
        c = c.cwiseProduct(
            (numer.array() / (denom.array() + tiny)).min(4.0).max(0.0).matrix() * 0.5 +
            Matrix::Constant(c.rows(), c.cols(), 0.5));
    }
}

Matrix eigen_init(const Matrix& target, int k, Rng& rng, bool absolute) {
    const Eigen::Index n = target.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> es(target);
    Matrix c = rng.gaussian(k, n, 0.05);
    const Eigen::Index available = es.eigenvalues().size();
    for (int row = 0; row < k; ++row) {
        const Eigen::Index idx = available - 1 - row; // largest first
        if (idx < 0) break;
        const double ev = es.eigenvalues()(idx);
        if (ev <= 0.0) break;
        Vector v = std::sqrt(ev) * es.eigenvectors().col(idx);
        c.row(row) += (absolute ? v.cwiseAbs() : v).transpose();
    }
    return c;
}

} // namespace

std::optional<ConeWitness> search_witness(const CovariancePair& pair, int k,
                                          Activation activation,
                                          const WitnessSearchConfig& config) {
    if (k < 0) throw ShapeError("witness size must be non-negative");
    const Eigen::Index n = pair.k.rows();
    const Matrix m_target = symmetrized(
        pair.k_sigma - pair.beta * pair.beta * Matrix::Ones(n, n));
    const Matrix k_target = symmetrized(pair.k);
    const double scale_sq = k_target.squaredNorm() + m_target.squaredNorm();
    if (scale_sq == 0.0) {
        ConeWitness w;
        w.vectors.assign(k, Vector::Zero(n));
        return w;
    }
    // Normalize so entries are O(1) and a fixed Adam step size works.
    const double s = std::sqrt(std::sqrt(scale_sq) / std::sqrt(static_cast<double>(n)));
    SearchTargets targets{k_target / (s * s), m_target / (s * s)};
    const double tol_sq = config.residual_tol * config.residual_tol * scale_sq /
                          (s * s * s * s);

    // Pairs with K close to Ksig - beta^2 ones are completely positive
    // targets whose witnesses live in the nonnegative orthant; bias the
    // restarts there.
    const bool cp_style =
        (targets.k - targets.m).norm() < 1e-6 * (1.0 + targets.k.norm());

    for (int restart = 0; restart < config.budget; ++restart) {
        Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(k), restart));
        Matrix c;
        const double stddev = std::sqrt(std::max(targets.k.trace(), 0.1) /
                                        std::max<double>(1.0, k * n));
        if (restart == 0 && k > 0) {
            c = eigen_init(targets.k, k, rng, false);
        } else if (restart == 1 && k > 0) {
            c = eigen_init(targets.m, k, rng, true);
        } else if (cp_style || restart % 2 == 0) {
            c = rng.gaussian(k, n, stddev).cwiseAbs();
        } else {
            c = rng.gaussian(k, n, stddev);
        }
        if (cp_style && restart >= 2) {
            snmf_multiplicative(0.5 * (targets.k + targets.m), c, 12 * config.adam_steps);
            // freeze the support the multiplicative phase identified
            const double thresh = 1e-2 * c.maxCoeff();
            const Matrix mask =
                c.unaryExpr([&](double v) { return v > thresh ? 1.0 : 0.0; });
            c = c.cwiseProduct(mask);
            lm_polish(targets, c, activation, config.lm_steps, tol_sq, &mask);
        } else {
            adam_minimize(targets, c, activation, config.adam_steps, 0.05);
            sign_flip_sweep(targets, c, activation);
            adam_minimize(targets, c, activation, config.adam_steps / 2, 0.02);
            sign_flip_sweep(targets, c, activation);
            lm_polish(targets, c, activation, config.lm_steps, tol_sq);
        }
        double f = search_objective(targets, c, activation);
        if (f > tol_sq && f < 1e6 * tol_sq) {
            // close call: clamp stray small negatives (relu kinks have no
            // gradient to clear them) and re-polish
            Matrix clamped = c.unaryExpr(
                [](double v) { return (v < 0.0 && v > -1e-3) ? 0.0 : v; });
            lm_polish(targets, clamped, activation, config.lm_steps, tol_sq);
            if (search_objective(targets, clamped, activation) < f) {
                c = std::move(clamped);
                f = search_objective(targets, c, activation);
            }
        }
        if (f <= tol_sq) {
            ConeWitness w;
            for (Eigen::Index row = 0; row < c.rows(); ++row)
                w.vectors.push_back(s * c.row(row).transpose());
            return w;
        }
    }
    return std::nullopt;
}

RankSigmaBounds rank_sigma_bounds(const CovariancePair& pair,
                                  const WitnessSearchConfig& config,
                                  Activation activation,
                                  const std::optional<GraphSpec>& graph) {
    check_pair(pair);
    const Eigen::Index n = pair.k.rows();
    const Matrix m_target =
        symmetrized(pair.k_sigma - pair.beta * pair.beta * Matrix::Ones(n, n));
    RankSigmaBounds bounds;
    bounds.lower = static_cast<int>(
        std::max(numerical_rank(pair.k, 1e-8), numerical_rank(m_target, 1e-8)));
    if (graph)
        bounds.lower = std::max(bounds.lower, cp_rank_lower_bound(m_target, graph));
    const int caratheodory = static_cast<int>(n * (n + 1));
    bounds.upper = caratheodory;
    for (int k = bounds.lower; k <= caratheodory; ++k) {
        if (auto witness = search_witness(pair, k, activation, config)) {
            bounds.upper = k;
            bounds.upper_certified = true;
            bounds.witness = std::move(*witness);
            break;
        }
    }
    return bounds;
}

ShallowRepCost representation_cost_shallow(const Matrix& x, const Matrix& y,
                                           const WitnessSearchConfig& config) {
    const Eigen::Index n = y.cols();
    if (x.rows() != n || x.cols() != n ||
        (x - Matrix::Identity(n, n)).lpNorm<Eigen::Infinity>() > 1e-12)
        throw InvalidInputError("representation_cost_shallow requires X = I_N");
    ShallowRepCost result;
    const Matrix root = sqrtm_psd(symmetrized(y.transpose() * y), 1e-8);
    result.value = 2.0 * root.trace();
    result.pair = CovariancePair{root, root, 0.0};
    const int max_k = static_cast<int>(n * (n + 1));
    for (int k = static_cast<int>(numerical_rank(root, 1e-8)); k <= max_k; ++k) {
        if (auto witness = search_witness(result.pair, k, Activation::relu(), config)) {
            result.cp_verified = true;
            result.witness = std::move(*witness);
            break;
        }
        if (config.budget <= 0) break;
    }
    return result;
}

NetworkParams weights_from_chain(const CovarianceChain& chain,
                                 const std::vector<ConeWitness>& witnesses,
                                 const Matrix& x,
                                 const std::vector<Eigen::Index>& widths) {
    check_chain(chain);
    if (witnesses.size() != chain.pairs.size())
        throw ShapeError("one witness per hidden layer required");
    if (!widths.empty() && widths.size() != witnesses.size())
        throw ShapeError("one width per hidden layer required");
    const Eigen::Index n = chain.num_points();
    NetworkParams params;
    params.beta = chain.beta;
    params.activation = chain.activation;
    Matrix prev(x.rows() + 1, n);
    prev.topRows(x.rows()) = x;
    prev.row(x.rows()).setConstant(chain.beta);
    for (size_t l = 0; l < witnesses.size(); ++l) {
        const Eigen::Index k = witnesses[l].size();
        const Eigen::Index width = widths.empty() ? k : widths[l];
        if (k > width)
            throw ShapeError("witness size exceeds requested width at layer " +
                             std::to_string(l + 1));
        Matrix z = Matrix::Zero(width, n);
        for (Eigen::Index row = 0; row < k; ++row)
            z.row(row) = witnesses[l].vectors[row].transpose();
        params.weights.push_back(z * pinv(prev));
        Matrix next(width + 1, n);
        next.topRows(width) = chain.activation.apply(z);
        next.row(width).setConstant(chain.beta);
        prev = std::move(next);
    }
    params.weights.push_back(chain.output * pinv(prev));
    return params;
}

Matrix linear_interp_covariance(const Matrix& x, const Matrix& z_last, int ell, int depth) {
    if (x.rows() != x.cols())
        throw ShapeError("interpolation formula needs a square data matrix");
    if (ell < 0 || ell > depth || depth < 1)
        throw ShapeError("layer index out of range");
    if (numerical_rank(x) < x.rows())
        throw InvalidInputError("data matrix must be invertible");
    const Matrix xi = x.inverse();
    const Matrix inner = symmetrized(xi.transpose() * z_last.transpose() * z_last * xi);
    const Matrix powered =
        sym_power(inner, static_cast<double>(ell) / static_cast<double>(depth), 1e-8);
    return symmetrized(x.transpose() * powered * x);
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
    j["data"] = std::move(data);
    return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ShapeError("matrix data length does not match shape header");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = data[i * cols + k];
    return m;
}

std::string activation_name(ActivationKind kind) {
    switch (kind) {
    case ActivationKind::kRelu: return "relu";
    case ActivationKind::kLeakyRelu: return "leaky_relu";
    case ActivationKind::kIdentity: return "identity";
    }
    return "relu";
}

ActivationKind activation_from_name(const std::string& name) {
    if (name == "relu") return ActivationKind::kRelu;
    if (name == "leaky_relu") return ActivationKind::kLeakyRelu;
    if (name == "identity") return ActivationKind::kIdentity;
    throw InvalidInputError("unknown activation: " + name);
}

} // namespace

std::string chain_to_json(const CovarianceChain& chain) {
    nlohmann::json j;
    j["beta"] = chain.beta;
    j["activation"] = {{"kind", activation_name(chain.activation.kind)},
                       {"slope", chain.activation.slope}};
    j["k0_sigma"] = matrix_to_json(chain.k0_sigma);
    j["pairs"] = nlohmann::json::array();
    for (const CovariancePair& pair : chain.pairs)
        j["pairs"].push_back({{"k", matrix_to_json(pair.k)},
                              {"k_sigma", matrix_to_json(pair.k_sigma)}});
    j["output"] = matrix_to_json(chain.output);
    return j.dump(2);
}

CovarianceChain chain_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    CovarianceChain chain;
    chain.beta = j.at("beta").get<double>();
    chain.activation.kind = activation_from_name(j.at("activation").at("kind").get<std::string>());
    chain.activation.slope = j.at("activation").at("slope").get<double>();
    chain.k0_sigma = matrix_from_json(j.at("k0_sigma"));
    for (const auto& pj : j.at("pairs")) {
        CovariancePair pair;
        pair.k = matrix_from_json(pj.at("k"));
        pair.k_sigma = matrix_from_json(pj.at("k_sigma"));
        pair.beta = chain.beta;
        chain.pairs.push_back(std::move(pair));
    }
    chain.output = matrix_from_json(j.at("output"));
    return chain;
}

} // namespace reformnet
