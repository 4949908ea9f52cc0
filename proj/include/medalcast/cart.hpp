#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace medalcast {

enum class TreeTask { Classify, Regress };
enum class MaxFeatures { All, Sqrt };

using Matrix = std::vector<std::vector<double>>;

struct TreeNode {
    int feature = -1;       // -1 for leaves
    double threshold = 0.0; // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    int n_samples = 0;
    double value = 0.0;     // leaf mean / positive-class fraction

    bool is_leaf() const { return left < 0; }
};

struct DecisionTree {
    TreeTask task = TreeTask::Regress;
    std::vector<TreeNode> nodes; // node 0 is the root
    int max_depth_seen = 0;

    int max_feature_index() const;
};

struct TreeParams {
    MaxFeatures max_features = MaxFeatures::All;
    int min_samples_split = 2;
    std::optional<int> max_depth;
    std::uint64_t seed = 0;
};

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Highest-gain midpoint split over the candidate features, or nullopt when no
// split has positive gain. Gain is the impurity decrease weighted by the
// sample fractions (Gini for classification, mean squared error otherwise).
// Ties break on (lowest feature index, lowest threshold).
std::optional<SplitChoice> best_split(const Matrix& X, const std::vector<double>& y,
                                      std::span<const std::size_t> samples,
                                      std::span<const int> features, TreeTask task);

// Greedy recursive partitioning. Feature subsets per node are drawn from a
// stream seeded by params.seed, so identical inputs give identical trees.
DecisionTree fit_tree(const Matrix& X, const std::vector<double>& y, TreeTask task,
                      const TreeParams& params);

// Same, but trains on the given row indices (bootstrap resamples may repeat rows).
DecisionTree fit_tree_on(const Matrix& X, const std::vector<double>& y, TreeTask task,
                         const TreeParams& params, std::vector<std::size_t> samples);

double predict_tree(const DecisionTree& tree, std::span<const double> x);

nlohmann::json tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& j);

} // namespace medalcast
