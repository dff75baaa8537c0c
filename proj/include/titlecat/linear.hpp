#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "titlecat/features.hpp"

namespace titlecat::linear {

// One-vs-rest linear max-margin classifier trained in the primal. Row k of
// `weights` and entry k of `biases` score class `labels[k]`.
struct LinearModel {
    std::vector<std::string> labels;  // sorted, distinct
    Eigen::MatrixXd weights;          // K x d
    Eigen::VectorXd biases;           // K
    double c_reg = 1.0;

    std::size_t class_count() const { return labels.size(); }
    int dimension() const { return static_cast<int>(weights.cols()); }
};

// Per-epoch averaged regularized hinge objective, for convergence checks.
struct LinearTrainLog {
    std::vector<double> epoch_objective;
};

// K binary hinge sub-problems (one per class against the rest) solved with
// deterministic-seeded stochastic subgradient descent, Pegasos step schedule
// eta_t = 1/(lambda t) with lambda = 1/C; the bias is unregularized.
LinearModel train_linear_ovr(const std::vector<features::DocVector>& vectors,
                             const std::vector<std::string>& labels, double C = 1.0,
                             int epochs = 100, std::uint64_t seed = 0,
                             LinearTrainLog* log = nullptr);

// Argmax of w_k . x + b_k; ties break towards the earlier label. Returns the
// winning label and the per-class scores in label order.
std::pair<std::string, Eigen::VectorXd> predict_linear(const LinearModel& model,
                                                       const Eigen::VectorXd& vector);

}  // namespace titlecat::linear
