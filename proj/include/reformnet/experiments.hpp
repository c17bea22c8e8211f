#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "reformnet/network.hpp"
#include "reformnet/reform_z.hpp"

namespace reformnet {

// Dataset generators. All are deterministic functions of their seed.
struct TeacherData { // Gaussian inputs through a random fixed teacher network
    int depth = 3;
    std::vector<Eigen::Index> widths = {10, 10, 10};
    Eigen::Index input_dim = 50;
    Eigen::Index n = 100;
    std::uint64_t seed = 0;
};
struct BipartiteData { // X = I_N, Y = B_N
    int n = 4;
};
struct OneHotData { // X = I_N, one-hot class columns
    Eigen::Index n = 8;
    int classes = 2;
    std::uint64_t seed = 0;
};
struct CounterexampleData {}; // X = (1, -1), Y = (1, 1)
struct ClustersData { // Gaussian blobs with one-hot labels
    Eigen::Index n = 12;
    int classes = 3;
    Eigen::Index dim = 2;
    std::uint64_t seed = 0;
};

using DatasetSpec =
    std::variant<TeacherData, BipartiteData, OneHotData, CounterexampleData, ClustersData>;

std::pair<Matrix, Matrix> generate(const DatasetSpec& spec);

// Width sweep: per width, `trials` independent trainings seeded from
// hash(seed, width, trial); the per-width loss is the min over trials.
struct SweepConfig {
    std::vector<Eigen::Index> widths; // strictly increasing hidden widths
    int trials = 3;
    int depth = 2;             // number of weight layers L
    double lambda = 1e-3;
    CostKind cost = CostKind::kMse;
    Activation activation = Activation::relu();
    double beta = 1.0;
    double init_gain = 1.0;
    OptimizerConfig opt;
    std::uint64_t seed = 0;
    double plateau_tol = 0.01;
    int num_threads = 0; // 0: hardware concurrency
};

struct SweepRow {
    Eigen::Index width = 0;
    std::vector<double> trial_losses; // NaN marks a diverged trial
    double min_loss = 0.0;            // NaN if every trial diverged
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::optional<Eigen::Index> plateau_start; // smallest width within
                                               // (1+tol) of the widest width's loss
    double plateau_tol = 0.01;
};

SweepReport sweep(const SweepConfig& config, const DatasetSpec& data);

// CSV: "# plateau_start=..." comment, then width,min_loss,loss_0..loss_{T-1}.
void write_sweep_csv(const SweepReport& report, std::ostream& out);

// Checks on the depth-2 weight configuration that is a local minimum of the
// parameter loss but not of the covariance reformulation:
//   (i)  loss on the minimum segment equals 1 + 2l - l^2,
//   (ii) random perturbations at an interior segment point never decrease it,
//   (iii) the cusp-escape direction W^eps lowers it, matching
//         l^2 + (e^2-1)^2 + 2l(1-l+e^2).
struct CounterexampleReport {
    double lambda = 0.0;
    double base_loss = 0.0;
    double expected_base = 0.0;
    bool base_matches = false;
    int perturbation_samples = 0;
    int decreasing_perturbations = 0;
    struct EpsilonRow {
        double epsilon = 0.0;
        double loss = 0.0;
        double expected = 0.0;
        bool matches = false;
        bool strictly_below_base = false;
    };
    std::vector<EpsilonRow> epsilon_rows;

    bool all_ok() const;
    std::string failure_summary() const; // empty when all_ok()
};

CounterexampleReport verify_counterexample(double lambda, std::span<const double> epsilons,
                                           int perturbation_samples = 10000,
                                           double perturbation_radius = 1e-3,
                                           std::uint64_t seed = 0);

// One CSV row per (neuron, datapoint) of the layer: indices, the Z_l entry
// and both force components; the header records the matrix shape so either
// PCA view (rows = datapoints or columns = neurons) can be rebuilt.
void export_forces(const NetworkParams& params, const Matrix& x, int layer, double epsilon,
                   const std::string& out_path);
void write_forces_csv(const HiddenReps& reps, const ForceField& field, std::ostream& out);

} // namespace reformnet
