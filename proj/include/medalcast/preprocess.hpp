#pragma once

#include "medalcast/dataset.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace medalcast {

struct TimeSeries {
    std::string nation;
    std::string variable;
    std::map<int, double> points; // year -> value, finite

    bool empty() const { return points.empty(); }
};

// Fills every interior missing year on the straight line between its
// bracketing known points. Known points are untouched.
TimeSeries interpolate_linear(const TimeSeries& s);

// Years before the first point take the first value, years after the last
// take the last value. Only the requested years are added.
TimeSeries extrapolate_constant(const TimeSeries& s, const std::vector<int>& target_years);

// Trend extrapolation for steadily growing variables: with n missing target
// years on one side (n < 6) and more points available than missing, the slope
// is the least-squares fit over the n+1 nearest available points and the line
// is anchored at the nearest available value. Throws RuleNotApplicable when
// the conditions fail; callers fall back to extrapolate_constant.
TimeSeries extrapolate_linear_trend(const TimeSeries& s, const std::vector<int>& target_years);

enum class FillMethod { Observed, Interp, ExtrapConst, ExtrapLin, Benchmark };
const char* fill_method_name(FillMethod m);

struct PanelRow {
    NationYearRecord rec; // all socio-economic cells filled
    std::array<FillMethod, 4> fill{FillMethod::Observed, FillMethod::Observed,
                                   FillMethod::Observed, FillMethod::Observed};
};

struct FilledPanel {
    std::vector<PanelRow> rows; // sorted by (games_year, nation)
    std::map<int, int> events_per_games;
    std::map<std::string, std::string> provenance;

    std::vector<int> games_years() const;
    std::vector<const NationYearRecord*> records_for(int games_year) const;
    const NationYearRecord* find(const std::string& nation, int games_year) const;
    std::string digest() const;
};

// Interpolation, per-side extrapolation (trend for GDP/population, constant
// otherwise) and regional benchmarking for nations with no data at all.
// Throws EmptyRegion when a fully-missing nation has no regional donor.
FilledPanel fill_panel(const RawDataset& raw);

void write_panel_csv(const FilledPanel& panel, const std::filesystem::path& path);

enum class Scenario { Actual, NoCovid };
const char* scenario_name(Scenario s);
Scenario parse_scenario(const std::string& s);

inline constexpr int kAthleteBucketEdges[3] = {10, 50, 150}; // 0-9, 10-49, 50-149, >149
inline constexpr const char* kAthleteBucketNames[4] = {"athletes_0_9", "athletes_10_49",
                                                       "athletes_50_149", "athletes_over_149"};
inline constexpr const char* kRegimeNames[3] = {"CAPME", "POSTCOM", "CEEC"};

// Canonical UN region vocabulary used for the one-hot block. Labels present in
// the data but not listed here are appended in sorted order at fit time.
const std::vector<std::string>& default_region_labels();

struct EncodingContext {
    std::array<double, 4> deaths_thresholds{};    // ascending quintile cut points
    std::array<double, 4> incidents_thresholds{};
    std::map<int, double> global_gdp_by_year;         // games_year -> sum of gdp
    std::map<int, double> global_gdp_nocovid_by_year; // counterfactual sums
    std::vector<std::string> region_labels;
    std::vector<std::string> feature_names;

    std::size_t width() const { return feature_names.size(); }
    nlohmann::json to_json() const;
    static EncodingContext from_json(const nlohmann::json& j);
};

// bin = 1 + #{thresholds <= value}, clamped to 5.
int quintile_bin(double value, const std::array<double, 4>& thresholds);

// Nearest-rank percentile: the ceil(p*n)-th order statistic.
double nearest_rank_percentile(std::vector<double> values, double p);

// Thresholds and per-year global GDP are computed from the given training rows
// only, so fitting on years < Y is unaffected by whatever year-Y rows exist.
EncodingContext fit_encoding_context(std::span<const NationYearRecord> train_records);

// Adds per-year global GDP sums for a prediction year the context was not
// fitted on. Existing years are left untouched.
void extend_global_gdp(EncodingContext& ctx, std::span<const NationYearRecord> year_records);

std::vector<double> encode_features(const NationYearRecord& rec, const EncodingContext& ctx,
                                    Scenario scenario);

struct DesignMatrix {
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<std::string, int>> keys; // (nation, games_year)
    std::vector<int> y_class;                      // medals > 0
    std::vector<double> y_log;                     // ln(medals); NaN where y_class == 0
    std::vector<int> prev_medals;
    std::vector<std::string> feature_names;

    std::size_t size() const { return rows.size(); }
};

// One row per (nation, Games) with first_year <= games_year <= last_year.
DesignMatrix build_design_matrix(const FilledPanel& panel, int first_year, int last_year,
                                 const EncodingContext& ctx, Scenario scenario);

// Moment skewness of a sample; used for target-distribution diagnostics.
double sample_skewness(std::span<const double> values);

} // namespace medalcast
