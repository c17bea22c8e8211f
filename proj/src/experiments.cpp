#include "reformnet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "reformnet/cprank.hpp"
#include "reformnet/rng.hpp"

namespace reformnet {

namespace {

std::pair<Matrix, Matrix> generate_teacher(const TeacherData& spec) {
    const NetworkParams teacher = random_params(
        spec.input_dim, spec.widths, Activation::relu(), 1.0, mix_seed(spec.seed, 0x7e), 1.0);
    Rng rng(mix_seed(spec.seed, 0xda));
    const Matrix x = rng.gaussian(spec.input_dim, spec.n);
    return {x, forward(teacher, x).output()};
}

std::pair<Matrix, Matrix> generate_onehot(const OneHotData& spec) {
    if (spec.classes < 1 || spec.classes > spec.n)
        throw ShapeError("onehot needs 1 <= classes <= N");
    Rng rng(mix_seed(spec.seed, 0x02));
    std::vector<int> labels(spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i)
        labels[i] = static_cast<int>(i % spec.classes); // balanced classes
    for (Eigen::Index i = spec.n - 1; i > 0; --i)
        std::swap(labels[i], labels[rng.uniform_int(0, static_cast<int>(i))]);
    Matrix y = Matrix::Zero(spec.classes, spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i) y(labels[i], i) = 1.0;
    return {Matrix::Identity(spec.n, spec.n), y};
}

std::pair<Matrix, Matrix> generate_clusters(const ClustersData& spec) {
    if (spec.classes < 1 || spec.classes > spec.n)
        throw ShapeError("clusters needs 1 <= classes <= N");
    Rng rng(mix_seed(spec.seed, 0xc1));
    const Matrix centers = rng.gaussian(spec.dim, spec.classes, 2.0);
    Matrix x(spec.dim, spec.n);
    Matrix y = Matrix::Zero(spec.classes, spec.n);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
        const int label = static_cast<int>(i % spec.classes);
        x.col(i) = centers.col(label) + rng.gaussian_vector(spec.dim, 0.3);
        y(label, i) = 1.0;
    }
    return {x, y};
}

} // namespace

std::pair<Matrix, Matrix> generate(const DatasetSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::pair<Matrix, Matrix> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, TeacherData>) {
                return generate_teacher(s);
            } else if constexpr (std::is_same_v<T, BipartiteData>) {
                const Eigen::Index n = s.n;
                return {Matrix::Identity(n, n), bipartite_matrix(s.n)};
            } else if constexpr (std::is_same_v<T, OneHotData>) {
                return generate_onehot(s);
            } else if constexpr (std::is_same_v<T, CounterexampleData>) {
                Matrix x(1, 2), y(1, 2);
                x << 1.0, -1.0;
                y << 1.0, 1.0;
                return {x, y};
            } else {
                return generate_clusters(s);
            }
        },
        spec);
}

namespace {

double run_trial(const SweepConfig& config, const Matrix& x, const Matrix& y,
                 Eigen::Index width, int trial) {
    std::vector<Eigen::Index> widths(static_cast<size_t>(config.depth) - 1, width);
    widths.push_back(y.rows());
    OptimizerConfig opt = config.opt;
    opt.seed = mix_seed(config.seed, static_cast<std::uint64_t>(width), trial);
    const NetworkParams init = random_params(x.rows(), widths, config.activation,
                                             config.beta, opt.seed, config.init_gain);
    try {
        return train(init, x, y, config.cost, config.lambda, opt).final_loss();
    } catch (const DivergenceError&) {
        return std::numeric_limits<double>::quiet_NaN(); // recorded, not fatal
    }
}

} // namespace

SweepReport sweep(const SweepConfig& config, const DatasetSpec& data) {
    if (config.widths.empty() ||
        !std::is_sorted(config.widths.begin(), config.widths.end(),
                        [](auto a, auto b) { return a <= b; }))
        throw ShapeError("widths must be strictly increasing");
    if (config.trials < 1) throw ShapeError("trials must be >= 1");
    if (config.depth < 2) throw ShapeError("a width sweep needs a hidden layer");
    const auto [x, y] = generate(data);

    const unsigned hardware = std::max(1u, std::thread::hardware_concurrency());
    const size_t workers = config.num_threads > 0
                               ? static_cast<size_t>(config.num_threads)
                               : static_cast<size_t>(hardware);

    SweepReport report;
    report.plateau_tol = config.plateau_tol;
    for (Eigen::Index width : config.widths) {
        SweepRow row;
        row.width = width;
        row.trial_losses.resize(config.trials);
        // trials run in parallel workers; assembly is an ordered reduction
        for (int base = 0; base < config.trials; base += static_cast<int>(workers)) {
            std::vector<std::future<double>> batch;
            const int end = std::min(config.trials, base + static_cast<int>(workers));
            for (int trial = base; trial < end; ++trial)
                batch.push_back(std::async(std::launch::async, run_trial,
                                           std::cref(config), std::cref(x), std::cref(y),
                                           width, trial));
            for (int trial = base; trial < end; ++trial)
                row.trial_losses[trial] = batch[trial - base].get();
        }
        double best = std::numeric_limits<double>::quiet_NaN();
        for (double v : row.trial_losses)
            if (std::isfinite(v) && !(v >= best)) best = v; // NaN-safe min
        row.min_loss = best;
        report.rows.push_back(std::move(row));
    }

    const double widest = report.rows.back().min_loss;
    if (std::isfinite(widest)) {
        for (const SweepRow& row : report.rows) {
            if (std::isfinite(row.min_loss) &&
                row.min_loss <= (1.0 + config.plateau_tol) * widest) {
                report.plateau_start = row.width;
                break;
            }
        }
    }
    return report;
}

void write_sweep_csv(const SweepReport& report, std::ostream& out) {
    out.precision(17);
    out << "# plateau_tol=" << report.plateau_tol << " plateau_start=";
    if (report.plateau_start) out << *report.plateau_start; else out << "none";
    out << '\n' << "width,min_loss";
    const size_t trials = report.rows.empty() ? 0 : report.rows.front().trial_losses.size();
    for (size_t t = 0; t < trials; ++t) out << ",loss_" << t;
    out << '\n';
    for (const SweepRow& row : report.rows) {
        out << row.width << ',' << row.min_loss;
        for (double v : row.trial_losses) out << ',' << v;
        out << '\n';
    }
}

namespace {

// The depth-2 counterexample network: W_1 = (a1; a2), W_2 = (b1, b2), with
// the bias column present but zero (beta = 0).
NetworkParams counterexample_params(double a1, double a2, double b1, double b2) {
    NetworkParams params;
    params.beta = 0.0;
    params.activation = Activation::relu();
    Matrix w1 = Matrix::Zero(2, 2);
    w1(0, 0) = a1;
    w1(1, 0) = a2;
    Matrix w2 = Matrix::Zero(1, 3);
    w2(0, 0) = b1;
    w2(0, 1) = b2;
    params.weights = {std::move(w1), std::move(w2)};
    return params;
}

} // namespace

bool CounterexampleReport::all_ok() const {
    if (!base_matches || decreasing_perturbations > 0) return false;
    for (const EpsilonRow& row : epsilon_rows)
        if (!row.matches || (row.epsilon > 0.0 && !row.strictly_below_base)) return false;
    return true;
}

std::string CounterexampleReport::failure_summary() const {
    std::ostringstream out;
    if (!base_matches)
        out << "base loss " << base_loss << " != " << expected_base << "; ";
    if (decreasing_perturbations > 0)
        out << decreasing_perturbations << "/" << perturbation_samples
            << " perturbations decreased the loss; ";
    for (const EpsilonRow& row : epsilon_rows) {
        if (!row.matches)
            out << "eps=" << row.epsilon << " loss " << row.loss << " != " << row.expected
                << "; ";
        if (row.epsilon > 0.0 && !row.strictly_below_base)
            out << "eps=" << row.epsilon << " did not lower the loss; ";
    }
    return out.str();
}

CounterexampleReport verify_counterexample(double lambda, std::span<const double> epsilons,
                                           int perturbation_samples,
                                           double perturbation_radius, std::uint64_t seed) {
    if (lambda <= 0.0 || lambda >= 1.0)
        throw InvalidInputError("counterexample requires 0 < lambda < 1");
    const auto [x, y] = generate(CounterexampleData{});
    // The closed forms track the plain squared error, not the 1/N average.
    const CostKind cost = CostKind::kSse;

    CounterexampleReport report;
    report.lambda = lambda;
    report.expected_base = 1.0 + 2.0 * lambda - lambda * lambda;

    // (i) interior segment point a1 = a2 with a1^2 + a2^2 = 1 - lambda
    const double a = std::sqrt((1.0 - lambda) / 2.0);
    const NetworkParams segment = counterexample_params(a, a, a, a);
    report.base_loss = loss(segment, x, y, cost, lambda);
    report.base_matches = std::abs(report.base_loss - report.expected_base) <= 1e-10;

    // (ii) random perturbations of the full parameter vector
    Rng rng(mix_seed(seed, 0xce));
    report.perturbation_samples = perturbation_samples;
    for (int sample = 0; sample < perturbation_samples; ++sample) {
        NetworkParams perturbed = segment;
        double norm_sq = 0.0;
        std::vector<Matrix> direction;
        for (const Matrix& w : perturbed.weights) {
            direction.push_back(rng.gaussian(w.rows(), w.cols()));
            norm_sq += direction.back().squaredNorm();
        }
        const double scale = perturbation_radius / std::sqrt(norm_sq);
        for (size_t l = 0; l < perturbed.weights.size(); ++l)
            perturbed.weights[l] += scale * direction[l];
        const double value = loss(perturbed, x, y, cost, lambda);
        if (value < report.base_loss - 1e-12 * (1.0 + report.base_loss))
            ++report.decreasing_perturbations;
    }

    // (iii) segment extremum a2 = 0 escaped along the second neuron
    const double root = std::sqrt(1.0 - lambda);
    for (double eps : epsilons) {
        const NetworkParams escaped = counterexample_params(root, -eps, root, eps);
        CounterexampleReport::EpsilonRow row;
        row.epsilon = eps;
        row.loss = loss(escaped, x, y, cost, lambda);
        row.expected = lambda * lambda + (eps * eps - 1.0) * (eps * eps - 1.0) +
                       2.0 * lambda * (1.0 - lambda + eps * eps);
        row.matches = std::abs(row.loss - row.expected) <= 1e-10;
        row.strictly_below_base = row.loss < report.base_loss;
        report.epsilon_rows.push_back(row);
    }
    return report;
}

void write_forces_csv(const HiddenReps& reps, const ForceField& field, std::ostream& out) {
    const Matrix& z = reps.reps[field.layer - 1];
    out.precision(17);
    out << "# layer=" << field.layer << " epsilon=" << field.epsilon
        << " n_neurons=" << z.rows() << " n_datapoints=" << z.cols() << '\n';
    out << "neuron,datapoint,z,attraction,repulsion\n";
    for (Eigen::Index k = 0; k < z.rows(); ++k)
        for (Eigen::Index i = 0; i < z.cols(); ++i)
            out << k << ',' << i << ',' << z(k, i) << ',' << field.attraction(k, i) << ','
                << field.repulsion(k, i) << '\n';
}

void export_forces(const NetworkParams& params, const Matrix& x, int layer, double epsilon,
                   const std::string& out_path) {
    const HiddenReps reps = reps_from_weights(params, x);
    const double eps = epsilon > 0.0 ? epsilon : default_epsilon(reps, layer);
    const ForceField field = forces(reps, layer, eps);
    std::ofstream out(out_path);
    if (!out)
        throw std::runtime_error("cannot open " + out_path + " for writing");
    write_forces_csv(reps, field, out);
    if (!out)
        throw std::runtime_error("failed writing " + out_path);
}

} // namespace reformnet
