#pragma once

#include "medalcast/forest.hpp"
#include "medalcast/twostage.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace medalcast {

struct Attribution {
    double base_value = 0.0; // expected prediction with no features known
    double prediction = 0.0;
    std::map<std::string, double> shap;

    nlohmann::json to_json() const;
};

// Per-feature attribution vector aligned to feature index; the map-based
// wrappers below name the entries.
std::vector<double> tree_shap_values(const DecisionTree& tree, std::span<const double> x,
                                     std::size_t width);
std::vector<double> brute_force_shapley_values(const DecisionTree& tree,
                                               std::span<const double> x, std::size_t width);

// Sample-weighted mean of leaf values: the prediction knowing nothing.
double tree_base_value(const DecisionTree& tree);

// Exact path-dependent Shapley values in polynomial time, conditioning on the
// per-node training sample counts.
Attribution tree_shap(const DecisionTree& tree, std::span<const double> x,
                      const std::vector<std::string>& feature_names);

// Exact Shapley by coalition enumeration over the features the tree actually
// splits on (at most 15). The coalition value descends the tree, following x
// for in-coalition features and both children count-weighted otherwise.
Attribution brute_force_shapley(const DecisionTree& tree, std::span<const double> x,
                                const std::vector<std::string>& feature_names);

// Feature-wise mean of the per-tree attributions.
Attribution forest_shap(const Forest& forest, std::span<const double> x);

// Descending by mean absolute value, ties by feature name; at most top_k rows.
std::vector<std::pair<std::string, double>> global_importance(
    const std::vector<Attribution>& attributions, std::size_t top_k = 20);

// Attribution of the regression stage for one nation; the classifier gate is
// reported as a boolean, not attributed. Values are in log-medal units.
struct ExplanationReport {
    std::string nation;
    Scenario scenario = Scenario::Actual;
    int games_year = 0;
    bool gate_open = false;
    Attribution attribution;       // meaningful only when the gate is open
    double prediction_log = 0.0;
    double prediction_medals = 0.0; // exp(prediction_log), pre-rescale units

    nlohmann::json to_json() const;
    std::string to_text() const; // force-style signed listing
};

ExplanationReport explain_nation(const TwoStageModel& model, const FilledPanel& panel,
                                 const std::string& nation, int games_year, Scenario scenario);

} // namespace medalcast
