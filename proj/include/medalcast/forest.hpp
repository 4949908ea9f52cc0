#pragma once

#include "medalcast/cart.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace medalcast {

struct Forest {
    TreeTask task = TreeTask::Regress;
    std::vector<DecisionTree> trees; // training order, tree i seeded from derive(master, i)
    std::uint64_t master_seed = 0;
    std::vector<std::string> feature_names;

    int n_trees() const { return static_cast<int>(trees.size()); }
};

// Bagging: each tree trains on a with-replacement resample of size |X| drawn
// from a stream seeded by derive_seed(master_seed, i). Trees are assigned to
// workers by index, so the result is identical for any worker count.
Forest fit_forest(const Matrix& X, const std::vector<double>& y, TreeTask task, int n_trees,
                  TreeParams params, std::uint64_t master_seed, int workers = 1,
                  std::vector<std::string> feature_names = {});

// Tree outputs in training order.
std::vector<double> per_tree_predictions(const Forest& forest, std::span<const double> x);

// Mean of the positive-class fractions; the 0/1 vote thresholds this at 0.5.
double forest_vote_fraction(const Forest& forest, std::span<const double> x);

// Regression: mean of tree outputs. Classification: 1 iff the mean fraction
// is >= 0.5 (exact ties count as positive).
double predict_forest(const Forest& forest, std::span<const double> x);

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& j);

} // namespace medalcast
