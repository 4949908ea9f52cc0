#pragma once

#include "medalcast/twostage.hpp"

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace medalcast {

enum class MetricSubset { All, NonZero, Zero };

// Fraction of nations with an exactly correct forecast, restricted by the
// nations' actual medal count (zero / non-zero) when a subset is given.
double metric_correct_share(const std::map<std::string, int>& pred,
                            const std::map<std::string, int>& actual, MetricSubset subset);

// Fraction of nations whose actual count lies in [ci_low - pad, ci_high + pad].
// Forecasts without an interval are scored as the zero-width interval at the
// point forecast, padded the same way.
double metric_ci_coverage(const std::vector<Forecast>& forecasts,
                          const std::map<std::string, int>& actual, int pad = 2);

// Sum of |pred - actual| over the k nations with the highest actual medal
// counts (ties by nation identifier).
long long metric_top_k_abs_dev(const std::map<std::string, int>& pred,
                               const std::map<std::string, int>& actual, std::size_t k = 17);

struct EvaluationPlan {
    std::vector<int> target_games;
    TwoStageConfig config;
    int ci_pad = 2;
    std::size_t top_k = 17;
};

struct YearMetrics {
    int year = 0;
    int n_total = 0, n_zero = 0, n_nonzero = 0;
    double correct_share_total = 0, correct_share_nonzero = 0, correct_share_zero = 0;
    double ci_coverage = 0;
    long long top_k_abs_dev = 0;
    double naive_total = 0, naive_nonzero = 0, naive_zero = 0;
    double naive_ci_coverage = 0;
    long long naive_top_k_abs_dev = 0;
};

struct MetricsReport {
    std::vector<YearMetrics> years;
    std::size_t top_k = 17;
    int ci_pad = 2;
    std::string data_digest;
    std::string config_digest;

    nlohmann::json to_json() const;
    std::string to_csv() const;
    std::string to_text() const; // includes published reference rows for context
};

// Published accuracy figures from earlier forecasting papers, shown beside our
// rows in reports. Values are quoted results, not computed here.
struct ReferenceResult {
    const char* model;
    int year;
    double correct_total, correct_nonzero, correct_zero, ci_coverage; // < 0 where unreported
    long long top_k_abs_dev;                                          // < 0 where unreported
};
const std::vector<ReferenceResult>& reference_results();

// Expanding-window protocol: for each target Games, fit context and model on
// all earlier Games only, forecast every participating nation, and score both
// the model and the repeat-last-games baseline on the same nations.
MetricsReport run_evaluation(const FilledPanel& panel, const EvaluationPlan& plan);

struct ScenarioRow {
    std::string nation;
    int forecast = 0;         // pandemic scenario
    std::optional<std::pair<double, double>> ci;
    int forecast_nocovid = 0;
    std::optional<std::pair<double, double>> ci_nocovid;
    int delta = 0;            // forecast - forecast_nocovid
    int prev_medals = 0;
    int delta_prev = 0;       // forecast - prev_medals
};

// Runs the full forecast pipeline under both scenarios with the same model.
std::vector<ScenarioRow> scenario_delta(const TwoStageModel& model, const FilledPanel& panel,
                                        int games_year);

nlohmann::json scenario_report_json(const std::vector<ScenarioRow>& rows, int games_year,
                                    const std::string& data_digest,
                                    const std::string& config_digest);
std::string scenario_report_csv(const std::vector<ScenarioRow>& rows);
std::string scenario_report_text(const std::vector<ScenarioRow>& rows, int games_year);

} // namespace medalcast
