#include "titlecat/linear.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "titlecat/common.hpp"

namespace titlecat::linear {

LinearModel train_linear_ovr(const std::vector<features::DocVector>& vectors,
                             const std::vector<std::string>& labels, double C, int epochs,
                             std::uint64_t seed, LinearTrainLog* log) {
    if (vectors.size() != labels.size()) {
        throw DataError("train_linear_ovr: vector and label counts differ");
    }
    if (vectors.empty()) throw DataError("train_linear_ovr: no training vectors");
    if (C <= 0.0) throw ConfigError("train_linear_ovr: C must be positive");
    if (epochs < 1) throw ConfigError("train_linear_ovr: epochs must be positive");

    const int dim = static_cast<int>(vectors[0].values.size());
    for (const auto& v : vectors) {
        if (v.values.size() != dim) {
            throw DataError("train_linear_ovr: inconsistent vector dimensions");
        }
    }
    std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw DataError("train_linear_ovr: need at least two distinct labels");
    }

    LinearModel model;
    model.labels.assign(distinct.begin(), distinct.end());
    model.c_reg = C;
    const auto K = static_cast<Eigen::Index>(model.labels.size());
    model.weights = Eigen::MatrixXd::Zero(K, dim);
    model.biases = Eigen::VectorXd::Zero(K);

    std::vector<int> class_of(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        class_of[i] = static_cast<int>(
            std::lower_bound(model.labels.begin(), model.labels.end(), labels[i]) -
            model.labels.begin());
    }

    const double lambda = 1.0 / C;
    const auto n = static_cast<double>(vectors.size());
    if (log) log->epoch_objective.assign(static_cast<std::size_t>(epochs), 0.0);

    // Each binary sub-problem runs its own deterministic pass so a given
    // class's parameters do not depend on how many other classes exist.
    for (Eigen::Index k = 0; k < K; ++k) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
        std::vector<std::size_t> order(vectors.size());
        std::iota(order.begin(), order.end(), 0);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
        double b = 0.0;
        double t = 0.0;
        for (int epoch = 0; epoch < epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t i : order) {
                t += 1.0;
                double eta = 1.0 / (lambda * t);
                double y = class_of[i] == static_cast<int>(k) ? 1.0 : -1.0;
                double margin = y * (w.dot(vectors[i].values) + b);
                w *= (1.0 - eta * lambda);
                if (margin < 1.0) {
                    w += eta * y * vectors[i].values;
                    b += eta * y;
                }
            }
            if (log) {
                double hinge = 0.0;
                for (std::size_t i = 0; i < vectors.size(); ++i) {
                    double y = class_of[i] == static_cast<int>(k) ? 1.0 : -1.0;
                    hinge += std::max(0.0, 1.0 - y * (w.dot(vectors[i].values) + b));
                }
                log->epoch_objective[static_cast<std::size_t>(epoch)] +=
                    (0.5 * lambda * w.squaredNorm() + hinge / n) / static_cast<double>(K);
            }
        }
        model.weights.row(k) = w.transpose();
        model.biases[k] = b;
    }
    return model;
}

std::pair<std::string, Eigen::VectorXd> predict_linear(const LinearModel& model,
                                                       const Eigen::VectorXd& vector) {
    if (vector.size() != model.dimension()) {
        throw DataError("predict_linear: vector dimension " + std::to_string(vector.size()) +
                        " does not match model dimension " + std::to_string(model.dimension()));
    }
    Eigen::VectorXd scores = model.weights * vector + model.biases;
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[best]) best = k;
    }
    return {model.labels[static_cast<std::size_t>(best)], std::move(scores)};
}

}  // namespace titlecat::linear
