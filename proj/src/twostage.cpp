#include "medalcast/twostage.hpp"

#include "medalcast/csv.hpp"
#include "medalcast/errors.hpp"
#include "medalcast/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

using nlohmann::json;

namespace medalcast {

namespace {

// Sub-seed tags so the two forests never share tree streams.
constexpr std::uint64_t kClassifierStream = 0x101;
constexpr std::uint64_t kRegressorStream = 0x202;

} // namespace

json TwoStageConfig::to_json() const {
    json j;
    j["n_trees_classifier"] = n_trees_classifier;
    j["n_trees_regressor"] = n_trees_regressor;
    j["classifier_max_features"] = classifier_max_features == MaxFeatures::Sqrt ? "sqrt" : "all";
    j["regressor_max_features"] = regressor_max_features == MaxFeatures::Sqrt ? "sqrt" : "all";
    j["min_samples_split"] = min_samples_split;
    j["max_depth"] = max_depth ? json(*max_depth) : json(nullptr);
    j["stage2_predicted_subset"] = stage2_predicted_subset;
    j["master_seed"] = master_seed;
    return j;
}

std::string TwoStageConfig::digest() const { return string_digest(to_json().dump()); }

TwoStageModel fit_two_stage(const DesignMatrix& matrix, const EncodingContext& ctx,
                            const TwoStageConfig& config) {
    if (matrix.rows.empty()) throw Error(ErrorCode::EmptyInput, "empty design matrix");
    const auto n_pos = static_cast<std::size_t>(
        std::count(matrix.y_class.begin(), matrix.y_class.end(), 1));
    if (n_pos == 0 || n_pos == matrix.rows.size())
        throw Error(ErrorCode::DegenerateTargets,
                    "training rows are all " + std::string(n_pos == 0 ? "zero" : "positive"));

    TwoStageModel model;
    model.ctx = ctx;
    model.config = config;
    for (const auto& [_, year] : matrix.keys)
        model.trained_through = std::max(model.trained_through, year);

    std::vector<double> y_class(matrix.y_class.begin(), matrix.y_class.end());
    TreeParams cls_params;
    cls_params.max_features = config.classifier_max_features;
    cls_params.min_samples_split = config.min_samples_split;
    cls_params.max_depth = config.max_depth;
    model.classifier = fit_forest(matrix.rows, y_class, TreeTask::Classify,
                                  config.n_trees_classifier, cls_params,
                                  derive_seed(config.master_seed, kClassifierStream),
                                  config.workers, ctx.feature_names);

    Matrix pos_rows;
    std::vector<double> pos_logs;
    for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
        if (matrix.y_class[i] != 1) continue;
        if (config.stage2_predicted_subset &&
            predict_forest(model.classifier, matrix.rows[i]) < 0.5)
            continue;
        pos_rows.push_back(matrix.rows[i]);
        pos_logs.push_back(matrix.y_log[i]);
    }
    if (pos_rows.empty())
        throw Error(ErrorCode::DegenerateTargets, "no rows left for the regression stage");

    TreeParams reg_params;
    reg_params.max_features = config.regressor_max_features;
    reg_params.min_samples_split = config.min_samples_split;
    reg_params.max_depth = config.max_depth;
    model.regressor = fit_forest(pos_rows, pos_logs, TreeTask::Regress,
                                 config.n_trees_regressor, reg_params,
                                 derive_seed(config.master_seed, kRegressorStream),
                                 config.workers, ctx.feature_names);
    return model;
}

std::optional<double> predict_raw(const TwoStageModel& model, std::span<const double> x) {
    if (forest_vote_fraction(model.classifier, x) < 0.5) return std::nullopt;
    return std::exp(predict_forest(model.regressor, x));
}

std::map<std::string, int> rescale_and_round(const std::map<std::string, double>& raws,
                                             long long total_medals) {
    double sum = 0;
    for (const auto& [_, raw] : raws) sum += raw;
    if (raws.empty() || sum <= 0) throw Error(ErrorCode::ZeroSum, "no positive raw predictions");
    const double scale = static_cast<double>(total_medals) / sum;
    std::map<std::string, int> out;
    for (const auto& [nation, raw] : raws)
        out[nation] = static_cast<int>(std::floor(scale * raw + 0.5));
    return out;
}

std::pair<double, double> confidence_interval(const TwoStageModel& model,
                                              std::span<const double> x, double scale) {
    if (forest_vote_fraction(model.classifier, x) < 0.5)
        throw Error(ErrorCode::GateClosed, "no interval for a zero forecast");
    const int n_trees = model.regressor.n_trees();
    if (n_trees % kCiGroupCount != 0)
        throw Error(ErrorCode::IndivisibleForest,
                    std::to_string(n_trees) + " trees cannot form " +
                        std::to_string(kCiGroupCount) + " equal groups");
    const int group_size = n_trees / kCiGroupCount;

    const auto logs = per_tree_predictions(model.regressor, x);
    std::vector<double> values(kCiGroupCount);
    for (int g = 0; g < kCiGroupCount; ++g) {
        double sum = 0;
        for (int t = 0; t < group_size; ++t)
            sum += logs[static_cast<std::size_t>(g * group_size + t)];
        values[static_cast<std::size_t>(g)] = scale * std::exp(sum / group_size);
    }

    double mean = 0;
    for (double v : values) mean += v;
    mean /= kCiGroupCount;

    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // drop the farthest from the mean; equal deviations drop the earlier block
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(values[a] - mean) > std::abs(values[b] - mean);
    });
    double low = std::numeric_limits<double>::infinity();
    double high = -std::numeric_limits<double>::infinity();
    for (std::size_t i = kCiTrimCount; i < order.size(); ++i) {
        low = std::min(low, values[order[i]]);
        high = std::max(high, values[order[i]]);
    }
    return {low, high};
}

std::map<std::string, int> naive_forecast(const std::map<std::string, int>& prev_medals) {
    return prev_medals;
}

std::vector<Forecast> forecast_games(const TwoStageModel& model, const FilledPanel& panel,
                                     int games_year, Scenario scenario, bool with_ci) {
    auto records = panel.records_for(games_year);
    if (records.empty())
        throw Error(ErrorCode::InsufficientHistory,
                    "no records for games year " + std::to_string(games_year));
    auto et = panel.events_per_games.find(games_year);
    if (et == panel.events_per_games.end())
        throw Error(ErrorCode::UnfilledCell,
                    "events count missing for " + std::to_string(games_year));
    const long long total_medals = 3LL * et->second;

    EncodingContext ctx = model.ctx;
    {
        std::vector<NationYearRecord> copies;
        copies.reserve(records.size());
        for (const auto* r : records) copies.push_back(*r);
        extend_global_gdp(ctx, copies);
    }

    std::map<std::string, std::vector<double>> encoded;
    std::map<std::string, double> raws;
    for (const auto* r : records) {
        auto x = encode_features(*r, ctx, scenario);
        if (auto raw = predict_raw(model, x)) raws[r->nation] = *raw;
        encoded[r->nation] = std::move(x);
    }

    std::map<std::string, int> medals;
    double scale = 0;
    if (!raws.empty()) {
        medals = rescale_and_round(raws, total_medals);
        double sum = 0;
        for (const auto& [_, raw] : raws) sum += raw;
        scale = static_cast<double>(total_medals) / sum;
    }

    std::vector<Forecast> out;
    for (const auto* r : records) {
        Forecast f;
        f.nation = r->nation;
        f.scenario = scenario;
        auto it = raws.find(r->nation);
        if (it != raws.end()) {
            f.raw = scale * it->second;
            f.medals = medals.at(r->nation);
            if (with_ci) f.ci = confidence_interval(model, encoded.at(r->nation), scale);
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<Forecast> ranked(std::vector<Forecast> forecasts) {
    std::sort(forecasts.begin(), forecasts.end(), [](const Forecast& a, const Forecast& b) {
        if (a.medals != b.medals) return a.medals > b.medals;
        return a.nation < b.nation;
    });
    return forecasts;
}

json model_to_json(const TwoStageModel& model) {
    return json{{"format_version", 1},
                {"classifier", forest_to_json(model.classifier)},
                {"regressor", forest_to_json(model.regressor)},
                {"encoding_context", model.ctx.to_json()},
                {"trained_through", model.trained_through},
                {"config", model.config.to_json()}};
}

TwoStageModel model_from_json(const json& j) {
    if (j.value("format_version", 0) != 1)
        throw Error(ErrorCode::SchemaViolation, "unsupported model format version");
    TwoStageModel model;
    model.classifier = forest_from_json(j.at("classifier"));
    model.regressor = forest_from_json(j.at("regressor"));
    model.ctx = EncodingContext::from_json(j.at("encoding_context"));
    model.trained_through = j.at("trained_through").get<int>();
    const auto& c = j.at("config");
    model.config.n_trees_classifier = c.at("n_trees_classifier").get<int>();
    model.config.n_trees_regressor = c.at("n_trees_regressor").get<int>();
    model.config.classifier_max_features =
        c.at("classifier_max_features").get<std::string>() == "sqrt" ? MaxFeatures::Sqrt
                                                                     : MaxFeatures::All;
    model.config.regressor_max_features =
        c.at("regressor_max_features").get<std::string>() == "sqrt" ? MaxFeatures::Sqrt
                                                                    : MaxFeatures::All;
    model.config.min_samples_split = c.at("min_samples_split").get<int>();
    model.config.max_depth = c.at("max_depth").is_null()
                                 ? std::nullopt
                                 : std::optional<int>(c.at("max_depth").get<int>());
    model.config.stage2_predicted_subset = c.at("stage2_predicted_subset").get<bool>();
    model.config.master_seed = c.at("master_seed").get<std::uint64_t>();
    return model;
}

namespace {

std::string ci_cell(const std::optional<std::pair<double, double>>& ci, bool high) {
    if (!ci) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", high ? ci->second : ci->first);
    return buf;
}

} // namespace

json forecast_report_json(const std::vector<Forecast>& forecasts, int games_year,
                          const std::string& data_digest, const std::string& config_digest) {
    json rows = json::array();
    int rank = 0;
    for (const auto& f : forecasts) {
        ++rank;
        json row{{"rank", rank},
                 {"nation", f.nation},
                 {"medals", f.medals},
                 {"raw", f.raw},
                 {"scenario", scenario_name(f.scenario)}};
        row["ci_low"] = f.ci ? json(f.ci->first) : json(nullptr);
        row["ci_high"] = f.ci ? json(f.ci->second) : json(nullptr);
        rows.push_back(std::move(row));
    }
    return json{{"format_version", 1},
                {"games_year", games_year},
                {"data_digest", data_digest},
                {"config_digest", config_digest},
                {"forecasts", std::move(rows)}};
}

std::string forecast_report_csv(const std::vector<Forecast>& forecasts) {
    std::ostringstream out;
    out << "rank,nation,medals,ci_low,ci_high,scenario\n";
    int rank = 0;
    for (const auto& f : forecasts) {
        ++rank;
        out << rank << ',' << csv_escape(f.nation) << ',' << f.medals << ','
            << ci_cell(f.ci, false) << ',' << ci_cell(f.ci, true) << ','
            << scenario_name(f.scenario) << '\n';
    }
    return out.str();
}

std::string forecast_report_text(const std::vector<Forecast>& forecasts, int games_year) {
    std::ostringstream out;
    out << "Medal forecast, Games " << games_year << "\n";
    out << "rank  nation                        medals      95% CI\n";
    int rank = 0;
    for (const auto& f : forecasts) {
        ++rank;
        char line[128];
        if (f.ci)
            std::snprintf(line, sizeof(line), "%4d  %-28s %6d  [%6.1f, %6.1f]\n", rank,
                          f.nation.c_str(), f.medals, f.ci->first, f.ci->second);
        else
            std::snprintf(line, sizeof(line), "%4d  %-28s %6d\n", rank, f.nation.c_str(),
                          f.medals);
        out << line;
    }
    return out.str();
}

} // namespace medalcast
