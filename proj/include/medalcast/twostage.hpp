#pragma once

#include "medalcast/forest.hpp"
#include "medalcast/preprocess.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace medalcast {

struct TwoStageConfig {
    int n_trees_classifier = 10;
    int n_trees_regressor = 1000;
    MaxFeatures classifier_max_features = MaxFeatures::Sqrt;
    MaxFeatures regressor_max_features = MaxFeatures::All;
    int min_samples_split = 2;
    std::optional<int> max_depth;
    // Stage 2 trains on rows with actual medal success; the alternative keeps
    // only rows the fitted classifier also gates in.
    bool stage2_predicted_subset = false;
    std::uint64_t master_seed = 0;
    int workers = 1;

    nlohmann::json to_json() const;
    std::string digest() const; // excludes workers: results must not depend on them
};

struct TwoStageModel {
    Forest classifier; // gates zero vs. positive medals
    Forest regressor;  // predicts ln(medals) on the gated-in side
    EncodingContext ctx;
    int trained_through = 0; // last Games year seen in training
    TwoStageConfig config;
};

// Classifier on all rows, regressor on the positive-medal subset (where the
// log target exists).
TwoStageModel fit_two_stage(const DesignMatrix& matrix, const EncodingContext& ctx,
                            const TwoStageConfig& config);

// nullopt when the classifier votes zero; otherwise exp(mean of the
// regressor's log-scale tree outputs).
std::optional<double> predict_raw(const TwoStageModel& model, std::span<const double> x);

// Half-up rounding after scaling every raw prediction by
// total_medals / sum(raws). Nations absent from `raws` were gated out and get 0.
std::map<std::string, int> rescale_and_round(const std::map<std::string, double>& raws,
                                             long long total_medals);

inline constexpr int kCiGroupCount = 100;
inline constexpr int kCiTrimCount = 5;

// Groups the regressor's trees into 100 consecutive blocks, averages each
// block's log outputs into a scaled sub-forest value, drops the 5 values
// farthest from their mean (ties drop the earlier block) and returns the
// min/max of the remaining 95.
std::pair<double, double> confidence_interval(const TwoStageModel& model,
                                              std::span<const double> x, double scale);

// Every nation repeats its previous Games' medal count.
std::map<std::string, int> naive_forecast(const std::map<std::string, int>& prev_medals);

struct Forecast {
    std::string nation;
    int medals = 0;
    std::optional<std::pair<double, double>> ci; // absent when gated out
    double raw = 0.0;                            // pre-round scaled value
    Scenario scenario = Scenario::Actual;
};

// Full prediction pipeline for one Games year: encode, gate, exponentiate,
// rescale to events * 3, round, and attach grouped-tree intervals.
std::vector<Forecast> forecast_games(const TwoStageModel& model, const FilledPanel& panel,
                                     int games_year, Scenario scenario, bool with_ci = true);

// Sorted by medals descending, nation ascending; rank is the 1-based position.
std::vector<Forecast> ranked(std::vector<Forecast> forecasts);

nlohmann::json model_to_json(const TwoStageModel& model);
TwoStageModel model_from_json(const nlohmann::json& j);

nlohmann::json forecast_report_json(const std::vector<Forecast>& forecasts, int games_year,
                                    const std::string& data_digest,
                                    const std::string& config_digest);
std::string forecast_report_csv(const std::vector<Forecast>& forecasts);
std::string forecast_report_text(const std::vector<Forecast>& forecasts, int games_year);

} // namespace medalcast
