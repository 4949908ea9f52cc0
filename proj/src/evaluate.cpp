#include "medalcast/evaluate.hpp"

#include "medalcast/csv.hpp"
#include "medalcast/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

using nlohmann::json;

namespace medalcast {

double metric_correct_share(const std::map<std::string, int>& pred,
                            const std::map<std::string, int>& actual, MetricSubset subset) {
    if (pred.size() != actual.size())
        throw Error(ErrorCode::KeyMismatch, "prediction and actual nation sets differ in size");
    int denom = 0, hits = 0;
    for (const auto& [nation, act] : actual) {
        auto it = pred.find(nation);
        if (it == pred.end())
            throw Error(ErrorCode::KeyMismatch, "no prediction for " + nation);
        if (subset == MetricSubset::Zero && act != 0) continue;
        if (subset == MetricSubset::NonZero && act == 0) continue;
        ++denom;
        if (it->second == act) ++hits;
    }
    if (denom == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(hits) / denom;
}

double metric_ci_coverage(const std::vector<Forecast>& forecasts,
                          const std::map<std::string, int>& actual, int pad) {
    int scored = 0, covered = 0;
    for (const auto& f : forecasts) {
        auto it = actual.find(f.nation);
        if (it == actual.end()) continue;
        const double low = (f.ci ? f.ci->first : f.medals) - pad;
        const double high = (f.ci ? f.ci->second : f.medals) + pad;
        ++scored;
        if (low <= it->second && it->second <= high) ++covered;
    }
    if (scored == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(covered) / scored;
}

long long metric_top_k_abs_dev(const std::map<std::string, int>& pred,
                               const std::map<std::string, int>& actual, std::size_t k) {
    if (actual.size() < k)
        throw Error(ErrorCode::TooFewNations, std::to_string(actual.size()) + " nations, need " +
                                                  std::to_string(k));
    std::vector<std::pair<std::string, int>> by_actual(actual.begin(), actual.end());
    std::sort(by_actual.begin(), by_actual.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    long long total = 0;
    for (std::size_t i = 0; i < k; ++i) {
        auto it = pred.find(by_actual[i].first);
        if (it == pred.end())
            throw Error(ErrorCode::KeyMismatch, "no prediction for " + by_actual[i].first);
        total += std::llabs(static_cast<long long>(it->second) - by_actual[i].second);
    }
    return total;
}

const std::vector<ReferenceResult>& reference_results() {
    static const std::vector<ReferenceResult> rows = {
        {"Tobit (Forrest et al., 2010)", 2008, 0.47, 0.17, 0.94, -1, 92},
        {"Tobit (Andreff et al., 2008)", 2008, 0.05, -1, -1, 0.60, 135},
        {"Logit (Andreff et al., 2008)", 2008, 0.00, -1, -1, 0.45, 204},
        {"Tobit (Maennig and Wellbrock, 2008)", 2008, 0.41, 0.11, 0.83, -1, 153},
        {"OLS (Celik and Gius, 2014)", 2012, 0.10, 0.10, -1, -1, 104},
        {"Hurdle (Scelles et al., 2020)", 2016, 0.22, 0.22, 0.22, 0.93, 139},
        {"Tobit (Scelles et al., 2020)", 2016, 0.43, 0.11, 0.69, 0.91, 138},
    };
    return rows;
}

MetricsReport run_evaluation(const FilledPanel& panel, const EvaluationPlan& plan) {
    MetricsReport report;
    report.top_k = plan.top_k;
    report.ci_pad = plan.ci_pad;
    report.data_digest = panel.digest();
    report.config_digest = plan.config.digest();

    std::vector<int> targets = plan.target_games;
    std::sort(targets.begin(), targets.end());
    const auto all_years = panel.games_years();

    for (int target : targets) {
        std::vector<int> train_years;
        for (int y : all_years)
            if (y < target) train_years.push_back(y);
        if (train_years.empty())
            throw Error(ErrorCode::InsufficientHistory,
                        "no Games before " + std::to_string(target));
        if (std::find(all_years.begin(), all_years.end(), target) == all_years.end())
            throw Error(ErrorCode::InsufficientHistory,
                        "no records for target Games " + std::to_string(target));

        std::vector<NationYearRecord> train_records;
        for (const auto& row : panel.rows)
            if (row.rec.games_year < target) train_records.push_back(row.rec);
        auto ctx = fit_encoding_context(train_records);
        auto matrix =
            build_design_matrix(panel, train_years.front(), train_years.back(), ctx,
                                Scenario::Actual);
        for (const auto& [nation, year] : matrix.keys)
            if (year >= target)
                throw Error(ErrorCode::LeakageDetected,
                            nation + " " + std::to_string(year) + " in training slice for " +
                                std::to_string(target));

        auto model = fit_two_stage(matrix, ctx, plan.config);
        const bool with_ci = plan.config.n_trees_regressor % kCiGroupCount == 0;
        auto forecasts = forecast_games(model, panel, target, Scenario::Actual, with_ci);

        std::map<std::string, int> actual, pred, naive_prev;
        for (const auto* r : panel.records_for(target)) {
            actual[r->nation] = r->medals;
            naive_prev[r->nation] = r->prev_medals;
        }
        for (const auto& f : forecasts) pred[f.nation] = f.medals;
        auto naive = naive_forecast(naive_prev);
        std::vector<Forecast> naive_forecasts;
        for (const auto& [nation, medals] : naive)
            naive_forecasts.push_back(Forecast{nation, medals, std::nullopt, 0.0,
                                               Scenario::Actual});

        YearMetrics m;
        m.year = target;
        m.n_total = static_cast<int>(actual.size());
        for (const auto& [_, v] : actual) (v == 0 ? m.n_zero : m.n_nonzero) += 1;
        m.correct_share_total = metric_correct_share(pred, actual, MetricSubset::All);
        m.correct_share_nonzero = metric_correct_share(pred, actual, MetricSubset::NonZero);
        m.correct_share_zero = metric_correct_share(pred, actual, MetricSubset::Zero);
        m.ci_coverage = metric_ci_coverage(forecasts, actual, plan.ci_pad);
        m.top_k_abs_dev = metric_top_k_abs_dev(pred, actual, plan.top_k);
        m.naive_total = metric_correct_share(naive, actual, MetricSubset::All);
        m.naive_nonzero = metric_correct_share(naive, actual, MetricSubset::NonZero);
        m.naive_zero = metric_correct_share(naive, actual, MetricSubset::Zero);
        m.naive_ci_coverage = metric_ci_coverage(naive_forecasts, actual, plan.ci_pad);
        m.naive_top_k_abs_dev = metric_top_k_abs_dev(naive, actual, plan.top_k);
        report.years.push_back(m);
    }
    return report;
}

namespace {

json metric_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

std::string pct(double v) {
    if (std::isnan(v)) return "-";
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.0f%%", v * 100.0);
    return buf;
}

} // namespace

json MetricsReport::to_json() const {
    json years_json = json::array();
    for (const auto& m : years) {
        years_json.push_back({{"year", m.year},
                              {"n_total", m.n_total},
                              {"n_zero", m.n_zero},
                              {"n_nonzero", m.n_nonzero},
                              {"model",
                               {{"correct_share_total", metric_or_null(m.correct_share_total)},
                                {"correct_share_nonzero", metric_or_null(m.correct_share_nonzero)},
                                {"correct_share_zero", metric_or_null(m.correct_share_zero)},
                                {"ci_coverage", metric_or_null(m.ci_coverage)},
                                {"top_k_abs_dev", m.top_k_abs_dev}}},
                              {"naive",
                               {{"correct_share_total", metric_or_null(m.naive_total)},
                                {"correct_share_nonzero", metric_or_null(m.naive_nonzero)},
                                {"correct_share_zero", metric_or_null(m.naive_zero)},
                                {"ci_coverage", metric_or_null(m.naive_ci_coverage)},
                                {"top_k_abs_dev", m.naive_top_k_abs_dev}}}});
    }
    json refs = json::array();
    for (const auto& r : reference_results()) {
        refs.push_back({{"model", r.model},
                        {"year", r.year},
                        {"source", "published"},
                        {"correct_share_total", r.correct_total < 0 ? json(nullptr) : json(r.correct_total)},
                        {"correct_share_nonzero",
                         r.correct_nonzero < 0 ? json(nullptr) : json(r.correct_nonzero)},
                        {"correct_share_zero", r.correct_zero < 0 ? json(nullptr) : json(r.correct_zero)},
                        {"ci_coverage", r.ci_coverage < 0 ? json(nullptr) : json(r.ci_coverage)},
                        {"top_k_abs_dev", r.top_k_abs_dev < 0 ? json(nullptr) : json(r.top_k_abs_dev)}});
    }
    return json{{"format_version", 1},
                {"top_k", top_k},
                {"ci_pad", ci_pad},
                {"data_digest", data_digest},
                {"config_digest", config_digest},
                {"years", std::move(years_json)},
                {"reference_results", std::move(refs)}};
}

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out << "year,model,correct_share_total,correct_share_nonzero,correct_share_zero,"
           "ci_coverage,top_k_abs_dev\n";
    auto cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    for (const auto& m : years) {
        out << m.year << ",two_stage_rf," << cell(m.correct_share_total) << ','
            << cell(m.correct_share_nonzero) << ',' << cell(m.correct_share_zero) << ','
            << cell(m.ci_coverage) << ',' << m.top_k_abs_dev << '\n';
        out << m.year << ",naive," << cell(m.naive_total) << ',' << cell(m.naive_nonzero) << ','
            << cell(m.naive_zero) << ',' << cell(m.naive_ci_coverage) << ','
            << m.naive_top_k_abs_dev << '\n';
    }
    return out.str();
}

std::string MetricsReport::to_text() const {
    std::ostringstream out;
    auto line = [&](const std::string& label, auto value_of) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %-38s", label.c_str());
        out << buf;
        for (const auto& m : years) {
            std::snprintf(buf, sizeof(buf), " %8s", value_of(m).c_str());
            out << buf;
        }
        out << '\n';
    };
    auto ref_line = [&](const ReferenceResult& r, auto value_of) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %-38s", r.model);
        out << buf;
        for (const auto& m : years) {
            std::string cell = m.year == r.year ? value_of(r) : "-";
            std::snprintf(buf, sizeof(buf), " %8s", cell.c_str());
            out << buf;
        }
        out << "  [published]\n";
    };

    out << "Forecasting accuracy\n";
    {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %-38s", "");
        out << buf;
        for (const auto& m : years) {
            std::snprintf(buf, sizeof(buf), " %8d", m.year);
            out << buf;
        }
        out << '\n';
    }

    out << "Correct forecast\n";
    line("Two-staged random forest", [](const YearMetrics& m) { return pct(m.correct_share_total); });
    line("Naive forecast", [](const YearMetrics& m) { return pct(m.naive_total); });
    for (const auto& r : reference_results())
        if (r.correct_total >= 0) ref_line(r, [](const ReferenceResult& x) { return pct(x.correct_total); });

    out << "Correct forecast (non-zero medals)\n";
    line("Two-staged random forest",
         [](const YearMetrics& m) { return pct(m.correct_share_nonzero); });
    line("Naive forecast", [](const YearMetrics& m) { return pct(m.naive_nonzero); });
    for (const auto& r : reference_results())
        if (r.correct_nonzero >= 0)
            ref_line(r, [](const ReferenceResult& x) { return pct(x.correct_nonzero); });

    out << "Correct forecast (zero medals)\n";
    line("Two-staged random forest",
         [](const YearMetrics& m) { return pct(m.correct_share_zero); });
    line("Naive forecast", [](const YearMetrics& m) { return pct(m.naive_zero); });
    for (const auto& r : reference_results())
        if (r.correct_zero >= 0)
            ref_line(r, [](const ReferenceResult& x) { return pct(x.correct_zero); });

    out << "95% confidence intervals +/- " << ci_pad << " medals\n";
    line("Two-staged random forest", [](const YearMetrics& m) { return pct(m.ci_coverage); });
    line("Naive forecast", [](const YearMetrics& m) { return pct(m.naive_ci_coverage); });
    for (const auto& r : reference_results())
        if (r.ci_coverage >= 0)
            ref_line(r, [](const ReferenceResult& x) { return pct(x.ci_coverage); });

    out << "Absolute deviation top-" << top_k << " nations\n";
    line("Two-staged random forest",
         [](const YearMetrics& m) { return std::to_string(m.top_k_abs_dev); });
    line("Naive forecast", [](const YearMetrics& m) { return std::to_string(m.naive_top_k_abs_dev); });
    for (const auto& r : reference_results())
        if (r.top_k_abs_dev >= 0)
            ref_line(r, [](const ReferenceResult& x) { return std::to_string(x.top_k_abs_dev); });
    return out.str();
}

std::vector<ScenarioRow> scenario_delta(const TwoStageModel& model, const FilledPanel& panel,
                                        int games_year) {
    const bool with_ci = model.regressor.n_trees() % kCiGroupCount == 0;
    auto actual = forecast_games(model, panel, games_year, Scenario::Actual, with_ci);
    auto nocovid = forecast_games(model, panel, games_year, Scenario::NoCovid, with_ci);

    std::map<std::string, const Forecast*> nc_by_nation;
    for (const auto& f : nocovid) nc_by_nation[f.nation] = &f;

    std::vector<ScenarioRow> rows;
    for (const auto& f : actual) {
        ScenarioRow row;
        row.nation = f.nation;
        row.forecast = f.medals;
        row.ci = f.ci;
        const auto* nc = nc_by_nation.at(f.nation);
        row.forecast_nocovid = nc->medals;
        row.ci_nocovid = nc->ci;
        row.delta = row.forecast - row.forecast_nocovid;
        if (const auto* rec = panel.find(f.nation, games_year)) row.prev_medals = rec->prev_medals;
        row.delta_prev = row.forecast - row.prev_medals;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const ScenarioRow& a, const ScenarioRow& b) {
        if (a.forecast != b.forecast) return a.forecast > b.forecast;
        return a.nation < b.nation;
    });
    return rows;
}

namespace {

std::string ci_text(const std::optional<std::pair<double, double>>& ci, bool high) {
    if (!ci) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", high ? ci->second : ci->first);
    return buf;
}

} // namespace

json scenario_report_json(const std::vector<ScenarioRow>& rows, int games_year,
                          const std::string& data_digest, const std::string& config_digest) {
    json out = json::array();
    int rank = 0;
    for (const auto& r : rows) {
        ++rank;
        out.push_back(
            {{"rank", rank},
             {"nation", r.nation},
             {"medals", r.forecast},
             {"ci_low", r.ci ? json(r.ci->first) : json(nullptr)},
             {"ci_high", r.ci ? json(r.ci->second) : json(nullptr)},
             {"medals_nocovid", r.forecast_nocovid},
             {"ci_low_nocovid", r.ci_nocovid ? json(r.ci_nocovid->first) : json(nullptr)},
             {"ci_high_nocovid", r.ci_nocovid ? json(r.ci_nocovid->second) : json(nullptr)},
             {"delta", r.delta},
             {"prev_medals", r.prev_medals},
             {"delta_prev", r.delta_prev}});
    }
    return json{{"format_version", 1},
                {"games_year", games_year},
                {"data_digest", data_digest},
                {"config_digest", config_digest},
                {"rows", std::move(out)}};
}

std::string scenario_report_csv(const std::vector<ScenarioRow>& rows) {
    std::ostringstream out;
    out << "rank,nation,medals,ci_low,ci_high,medals_nocovid,ci_low_nocovid,ci_high_nocovid,"
           "delta,prev_medals,delta_prev\n";
    int rank = 0;
    for (const auto& r : rows) {
        ++rank;
        out << rank << ',' << csv_escape(r.nation) << ',' << r.forecast << ','
            << ci_text(r.ci, false) << ',' << ci_text(r.ci, true) << ',' << r.forecast_nocovid
            << ',' << ci_text(r.ci_nocovid, false) << ',' << ci_text(r.ci_nocovid, true) << ','
            << r.delta << ',' << r.prev_medals << ',' << r.delta_prev << '\n';
    }
    return out.str();
}

std::string scenario_report_text(const std::vector<ScenarioRow>& rows, int games_year) {
    std::ostringstream out;
    out << "Scenario comparison, Games " << games_year << " (pandemic vs. counterfactual)\n";
    out << "rank  nation                        medals  no-covid  delta  prev  delta-prev\n";
    int rank = 0;
    for (const auto& r : rows) {
        ++rank;
        char line[160];
        std::snprintf(line, sizeof(line), "%4d  %-28s %6d  %8d  %+5d  %4d  %+10d\n", rank,
                      r.nation.c_str(), r.forecast, r.forecast_nocovid, r.delta, r.prev_medals,
                      r.delta_prev);
        out << line;
    }
    return out.str();
}

} // namespace medalcast
