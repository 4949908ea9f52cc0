#include "medalcast/preprocess.hpp"

#include "medalcast/csv.hpp"
#include "medalcast/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using nlohmann::json;

namespace medalcast {

const char* fill_method_name(FillMethod m) {
    switch (m) {
        case FillMethod::Observed: return "observed";
        case FillMethod::Interp: return "interp";
        case FillMethod::ExtrapConst: return "extrap_const";
        case FillMethod::ExtrapLin: return "extrap_lin";
        case FillMethod::Benchmark: return "benchmark";
    }
    return "?";
}

const char* scenario_name(Scenario s) {
    return s == Scenario::Actual ? "actual" : "no-covid";
}

Scenario parse_scenario(const std::string& s) {
    if (s == "actual") return Scenario::Actual;
    if (s == "no-covid" || s == "no_covid") return Scenario::NoCovid;
    throw Error(ErrorCode::UnknownCategory, "scenario '" + s + "'");
}

TimeSeries interpolate_linear(const TimeSeries& s) {
    if (s.points.size() < 2)
        throw Error(ErrorCode::TooFewPoints, "interpolation needs at least 2 points");
    TimeSeries out = s;
    auto it = s.points.begin();
    auto next = std::next(it);
    for (; next != s.points.end(); ++it, ++next) {
        const auto [y0, v0] = *it;
        const auto [y1, v1] = *next;
        const double slope = (v1 - v0) / static_cast<double>(y1 - y0);
        for (int y = y0 + 1; y < y1; ++y)
            out.points[y] = v0 + slope * static_cast<double>(y - y0);
    }
    return out;
}

TimeSeries extrapolate_constant(const TimeSeries& s, const std::vector<int>& target_years) {
    if (s.points.empty()) throw Error(ErrorCode::EmptySeries, s.nation + "/" + s.variable);
    TimeSeries out = s;
    const auto [first_year, first_value] = *s.points.begin();
    const auto [last_year, last_value] = *s.points.rbegin();
    for (int y : target_years) {
        if (y < first_year) out.points[y] = first_value;
        else if (y > last_year) out.points[y] = last_value;
    }
    return out;
}

namespace {

double ols_slope(std::span<const std::pair<int, double>> pts) {
    const double n = static_cast<double>(pts.size());
    double mx = 0, my = 0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (const auto& [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

} // namespace

TimeSeries extrapolate_linear_trend(const TimeSeries& s, const std::vector<int>& target_years) {
    if (s.points.empty()) throw Error(ErrorCode::EmptySeries, s.nation + "/" + s.variable);
    const int first_year = s.points.begin()->first;
    const int last_year = s.points.rbegin()->first;

    std::vector<int> before, after;
    for (int y : target_years) {
        if (y < first_year) before.push_back(y);
        else if (y > last_year) after.push_back(y);
    }

    TimeSeries out = s;
    auto fill_side = [&](const std::vector<int>& targets, bool past_side) {
        const std::size_t n = targets.size();
        if (n == 0) return;
        if (n >= 6 || s.points.size() <= n)
            throw Error(ErrorCode::RuleNotApplicable,
                        s.nation + "/" + s.variable + ": " + std::to_string(n) +
                            " missing, " + std::to_string(s.points.size()) + " available");
        // n+1 points nearest to the gap
        std::vector<std::pair<int, double>> nearest;
        if (past_side) {
            auto it = s.points.begin();
            for (std::size_t k = 0; k <= n; ++k, ++it) nearest.emplace_back(it->first, it->second);
        } else {
            auto it = s.points.rbegin();
            for (std::size_t k = 0; k <= n; ++k, ++it) nearest.emplace_back(it->first, it->second);
            std::reverse(nearest.begin(), nearest.end());
        }
        const double slope = ols_slope(nearest);
        const auto [anchor_year, anchor_value] =
            past_side ? *s.points.begin() : *s.points.rbegin();
        for (int y : targets)
            out.points[y] = anchor_value + slope * static_cast<double>(y - anchor_year);
    };
    fill_side(before, /*past_side=*/true);
    fill_side(after, /*past_side=*/false);
    return out;
}

std::vector<int> FilledPanel::games_years() const {
    std::set<int> years;
    for (const auto& row : rows) years.insert(row.rec.games_year);
    return {years.begin(), years.end()};
}

std::vector<const NationYearRecord*> FilledPanel::records_for(int games_year) const {
    std::vector<const NationYearRecord*> out;
    for (const auto& row : rows)
        if (row.rec.games_year == games_year) out.push_back(&row.rec);
    return out;
}

const NationYearRecord* FilledPanel::find(const std::string& nation, int games_year) const {
    for (const auto& row : rows)
        if (row.rec.games_year == games_year && row.rec.nation == nation) return &row.rec;
    return nullptr;
}

std::string FilledPanel::digest() const {
    std::string all;
    for (const auto& [file, digest] : provenance) all += file + "=" + digest + "\n";
    return string_digest(all);
}

FilledPanel fill_panel(const RawDataset& raw) {
    FilledPanel panel;
    panel.events_per_games = raw.events_per_games;
    panel.provenance = raw.provenance;
    for (const auto& r : raw.records) panel.rows.push_back(PanelRow{r, {}});

    // Every participating nation gets a value for every Games' feature year,
    // so regional donors are defined at every year a recipient might need.
    std::set<int> needed_set;
    for (const auto& r : raw.records) needed_set.insert(feature_year(r.games_year));
    const std::vector<int> needed(needed_set.begin(), needed_set.end());

    std::set<std::string> nations;
    for (const auto& r : raw.records) nations.insert(r.nation);

    for (std::size_t vi = 0; vi < 4; ++vi) {
        const PanelVariable var = kPanelVariables[vi];
        const bool trending = var == PanelVariable::Gdp || var == PanelVariable::Population;
        const auto& source = raw.annual.at(var);

        std::map<std::string, std::map<int, double>> filled;
        std::map<std::string, std::map<int, FillMethod>> tags;
        std::vector<std::string> fully_missing;

        for (const auto& nation : nations) {
            auto it = source.find(nation);
            if (it == source.end() || it->second.empty()) {
                fully_missing.push_back(nation);
                continue;
            }
            TimeSeries series{nation, panel_variable_name(var), it->second};
            auto& tag = tags[nation];
            for (const auto& [y, _] : series.points) tag[y] = FillMethod::Observed;

            if (series.points.size() >= 2) {
                TimeSeries dense = interpolate_linear(series);
                for (const auto& [y, v] : dense.points)
                    if (!tag.count(y)) tag[y] = FillMethod::Interp;
                series = std::move(dense);
            }

            const int first_year = it->second.begin()->first;
            const int last_year = it->second.rbegin()->first;
            std::vector<int> before, after;
            for (int y : needed) {
                if (y < first_year) before.push_back(y);
                else if (y > last_year) after.push_back(y);
            }
            auto extrapolate_side = [&](const std::vector<int>& targets) {
                if (targets.empty()) return;
                TimeSeries base{nation, panel_variable_name(var), it->second};
                if (trending) {
                    try {
                        auto ext = extrapolate_linear_trend(base, targets);
                        for (int y : targets) {
                            double v = ext.points.at(y);
                            // backcast growth trends can cross zero; population
                            // must stay positive for the log feature
                            if (var == PanelVariable::Population) v = std::max(v, 1.0);
                            else v = std::max(v, 0.0);
                            series.points[y] = v;
                            tag[y] = FillMethod::ExtrapLin;
                        }
                        return;
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::RuleNotApplicable) throw;
                    }
                }
                auto ext = extrapolate_constant(base, targets);
                for (int y : targets) {
                    series.points[y] = ext.points.at(y);
                    tag[y] = FillMethod::ExtrapConst;
                }
            };
            extrapolate_side(before);
            extrapolate_side(after);
            filled[nation] = std::move(series.points);
        }

        for (const auto& nation : fully_missing) {
            auto mt = raw.meta.find(nation);
            const std::string region = mt != raw.meta.end() ? mt->second.first : std::string();
            auto& out = filled[nation];
            auto& tag = tags[nation];
            for (int y : needed) {
                double sum = 0;
                int donors = 0;
                for (const auto& [donor, values] : filled) {
                    if (donor == nation || !values.count(y)) continue;
                    auto dm = raw.meta.find(donor);
                    if (dm == raw.meta.end() || dm->second.first != region) continue;
                    if (tags.at(donor).at(y) == FillMethod::Benchmark) continue;
                    sum += values.at(y);
                    ++donors;
                }
                if (donors == 0)
                    throw Error(ErrorCode::EmptyRegion,
                                std::string(panel_variable_name(var)) + " for " + nation +
                                    " in region '" + region + "', year " + std::to_string(y));
                out[y] = sum / donors;
                tag[y] = FillMethod::Benchmark;
            }
        }

        for (auto& row : panel.rows) {
            const int fy = feature_year(row.rec.games_year);
            auto fn = filled.find(row.rec.nation);
            if (fn == filled.end() || !fn->second.count(fy))
                throw Error(ErrorCode::UnfilledCell,
                            std::string(panel_variable_name(var)) + " " + row.rec.nation + " " +
                                std::to_string(fy));
            const double value = fn->second.at(fy);
            switch (var) {
                case PanelVariable::Gdp: row.rec.gdp = value; break;
                case PanelVariable::Population: row.rec.population = value; break;
                case PanelVariable::RespDeaths: row.rec.resp_deaths = value; break;
                case PanelVariable::RespIncidents: row.rec.resp_incidents = value; break;
            }
            row.fill[vi] = tags.at(row.rec.nation).at(fy);
        }
    }

    // counterfactual GDP defaults to the actual value outside the pandemic year
    for (auto& row : panel.rows)
        if (row.rec.games_year < 2020) row.rec.gdp_nocovid = row.rec.gdp;

    return panel;
}

void write_panel_csv(const FilledPanel& panel, const std::filesystem::path& path) {
    std::vector<std::string> header = {
        "nation",        "games_year",     "medals",
        "athletes",      "gdp",            "gdp_fill",
        "population",    "population_fill", "resp_deaths",
        "resp_deaths_fill", "resp_incidents", "resp_incidents_fill",
        "covid_deaths",  "covid_incidents", "gdp_nocovid",
        "region",        "regime",         "host_role",
        "prev_medals"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : panel.rows) {
        const auto& r = row.rec;
        rows.push_back({r.nation,
                        std::to_string(r.games_year),
                        std::to_string(r.medals),
                        std::to_string(r.athletes),
                        format_double(r.gdp.value_or(0)),
                        fill_method_name(row.fill[0]),
                        format_double(r.population.value_or(0)),
                        fill_method_name(row.fill[1]),
                        format_double(r.resp_deaths.value_or(0)),
                        fill_method_name(row.fill[2]),
                        format_double(r.resp_incidents.value_or(0)),
                        fill_method_name(row.fill[3]),
                        format_double(r.covid_deaths),
                        format_double(r.covid_incidents),
                        r.gdp_nocovid ? format_double(*r.gdp_nocovid) : std::string(),
                        r.region,
                        regime_name(r.regime),
                        host_role_name(r.host_role),
                        std::to_string(r.prev_medals)});
    }
    write_csv(path, header, rows);
}

const std::vector<std::string>& default_region_labels() {
    static const std::vector<std::string> labels = {
        "Australia and New Zealand",
        "Caribbean",
        "Central America",
        "Central Asia",
        "Eastern Asia",
        "Eastern Europe",
        "Latin America & Caribbean",
        "Melanesia",
        "Micronesia",
        "Northern Africa",
        "Northern America",
        "Northern Europe",
        "Polynesia",
        "South America",
        "South-eastern Asia",
        "Southern Asia",
        "Southern Europe",
        "Sub-Saharan Africa",
        "Western Africa",
        "Western Asia",
        "Western Europe",
    };
    return labels;
}

int quintile_bin(double value, const std::array<double, 4>& thresholds) {
    int bin = 1;
    for (double t : thresholds)
        if (t <= value) ++bin;
    return std::min(bin, 5);
}

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of empty sample");
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, n);
    return values[k - 1];
}

namespace {

double require(const std::optional<double>& v, const char* what, const NationYearRecord& rec) {
    if (!v)
        throw Error(ErrorCode::UnfilledCell,
                    std::string(what) + " for " + rec.nation + " " + std::to_string(rec.games_year));
    return *v;
}

} // namespace

EncodingContext fit_encoding_context(std::span<const NationYearRecord> train_records) {
    if (train_records.empty()) throw Error(ErrorCode::EmptyInput, "no training records");
    EncodingContext ctx;

    std::vector<double> deaths, incidents;
    for (const auto& r : train_records) {
        deaths.push_back(require(r.resp_deaths, "resp_deaths", r) + r.covid_deaths);
        incidents.push_back(require(r.resp_incidents, "resp_incidents", r) + r.covid_incidents);
        ctx.global_gdp_by_year[r.games_year] += require(r.gdp, "gdp", r);
        ctx.global_gdp_nocovid_by_year[r.games_year] += r.gdp_nocovid.value_or(*r.gdp);
    }
    const double ps[4] = {0.2, 0.4, 0.6, 0.8};
    for (int i = 0; i < 4; ++i) {
        ctx.deaths_thresholds[i] = nearest_rank_percentile(deaths, ps[i]);
        ctx.incidents_thresholds[i] = nearest_rank_percentile(incidents, ps[i]);
    }

    ctx.region_labels = default_region_labels();
    std::set<std::string> extra;
    for (const auto& r : train_records)
        if (std::find(ctx.region_labels.begin(), ctx.region_labels.end(), r.region) ==
            ctx.region_labels.end())
            extra.insert(r.region);
    ctx.region_labels.insert(ctx.region_labels.end(), extra.begin(), extra.end());

    ctx.feature_names = {"gdp_share", "log_population"};
    for (const auto* name : kAthleteBucketNames) ctx.feature_names.push_back(name);
    ctx.feature_names.push_back("disease_deaths_q");
    ctx.feature_names.push_back("disease_incidents_q");
    ctx.feature_names.push_back("host_current");
    ctx.feature_names.push_back("host_last");
    ctx.feature_names.push_back("host_next");
    for (const auto* name : kRegimeNames) ctx.feature_names.push_back(std::string("regime_") + name);
    for (const auto& label : ctx.region_labels) ctx.feature_names.push_back("region_" + label);
    ctx.feature_names.push_back("prev_medals");
    return ctx;
}

void extend_global_gdp(EncodingContext& ctx, std::span<const NationYearRecord> year_records) {
    std::map<int, double> sums, sums_nc;
    for (const auto& r : year_records) {
        sums[r.games_year] += require(r.gdp, "gdp", r);
        sums_nc[r.games_year] += r.gdp_nocovid.value_or(*r.gdp);
    }
    for (const auto& [year, sum] : sums)
        if (!ctx.global_gdp_by_year.count(year)) {
            ctx.global_gdp_by_year[year] = sum;
            ctx.global_gdp_nocovid_by_year[year] = sums_nc.at(year);
        }
}

std::vector<double> encode_features(const NationYearRecord& rec, const EncodingContext& ctx,
                                    Scenario scenario) {
    std::vector<double> x;
    x.reserve(ctx.width());

    double gdp;
    const std::map<int, double>* global;
    if (scenario == Scenario::NoCovid) {
        if (!rec.gdp_nocovid)
            throw Error(ErrorCode::MissingCounterfactualColumn,
                        "gdp_nocovid for " + rec.nation + " " + std::to_string(rec.games_year));
        gdp = *rec.gdp_nocovid;
        global = &ctx.global_gdp_nocovid_by_year;
    } else {
        gdp = require(rec.gdp, "gdp", rec);
        global = &ctx.global_gdp_by_year;
    }
    auto git = global->find(rec.games_year);
    if (git == global->end() || git->second <= 0)
        throw Error(ErrorCode::UnfilledCell,
                    "global gdp for year " + std::to_string(rec.games_year));
    x.push_back(gdp / git->second);

    x.push_back(std::log(require(rec.population, "population", rec)));

    int bucket = 3;
    for (int i = 0; i < 3; ++i)
        if (rec.athletes < kAthleteBucketEdges[i]) {
            bucket = i;
            break;
        }
    for (int i = 0; i < 4; ++i) x.push_back(i == bucket ? 1.0 : 0.0);

    const double covid_d = scenario == Scenario::Actual ? rec.covid_deaths : 0.0;
    const double covid_i = scenario == Scenario::Actual ? rec.covid_incidents : 0.0;
    x.push_back(quintile_bin(require(rec.resp_deaths, "resp_deaths", rec) + covid_d,
                             ctx.deaths_thresholds));
    x.push_back(quintile_bin(require(rec.resp_incidents, "resp_incidents", rec) + covid_i,
                             ctx.incidents_thresholds));

    x.push_back(rec.host_role == HostRole::Current ? 1.0 : 0.0);
    x.push_back(rec.host_role == HostRole::Last ? 1.0 : 0.0);
    x.push_back(rec.host_role == HostRole::Next ? 1.0 : 0.0);

    for (int i = 0; i < 3; ++i)
        x.push_back(static_cast<int>(rec.regime) == i ? 1.0 : 0.0);

    auto rit = std::find(ctx.region_labels.begin(), ctx.region_labels.end(), rec.region);
    if (rit == ctx.region_labels.end())
        throw Error(ErrorCode::UnknownCategory, "region '" + rec.region + "' for " + rec.nation);
    const auto region_idx = static_cast<std::size_t>(rit - ctx.region_labels.begin());
    for (std::size_t i = 0; i < ctx.region_labels.size(); ++i)
        x.push_back(i == region_idx ? 1.0 : 0.0);

    x.push_back(static_cast<double>(rec.prev_medals));
    return x;
}

DesignMatrix build_design_matrix(const FilledPanel& panel, int first_year, int last_year,
                                 const EncodingContext& ctx, Scenario scenario) {
    DesignMatrix m;
    m.feature_names = ctx.feature_names;
    for (const auto& row : panel.rows) {
        const auto& r = row.rec;
        if (r.games_year < first_year || r.games_year > last_year) continue;
        m.rows.push_back(encode_features(r, ctx, scenario));
        m.keys.emplace_back(r.nation, r.games_year);
        m.y_class.push_back(r.medals > 0 ? 1 : 0);
        m.y_log.push_back(r.medals > 0 ? std::log(static_cast<double>(r.medals))
                                       : std::numeric_limits<double>::quiet_NaN());
        m.prev_medals.push_back(r.prev_medals);
    }
    return m;
}

double sample_skewness(std::span<const double> values) {
    const auto n = static_cast<double>(values.size());
    if (values.size() < 3) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0;
    for (double v : values) mean += v;
    mean /= n;
    double m2 = 0, m3 = 0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (m2 <= 0) return std::numeric_limits<double>::quiet_NaN();
    return m3 / std::pow(m2, 1.5);
}

json EncodingContext::to_json() const {
    json j;
    j["format_version"] = 1;
    j["deaths_thresholds"] = deaths_thresholds;
    j["incidents_thresholds"] = incidents_thresholds;
    json g = json::object(), gn = json::object();
    for (const auto& [y, v] : global_gdp_by_year) g[std::to_string(y)] = v;
    for (const auto& [y, v] : global_gdp_nocovid_by_year) gn[std::to_string(y)] = v;
    j["global_gdp_by_year"] = std::move(g);
    j["global_gdp_nocovid_by_year"] = std::move(gn);
    j["region_labels"] = region_labels;
    j["feature_names"] = feature_names;
    return j;
}

EncodingContext EncodingContext::from_json(const json& j) {
    EncodingContext ctx;
    for (int i = 0; i < 4; ++i) {
        ctx.deaths_thresholds[static_cast<std::size_t>(i)] =
            j["deaths_thresholds"][static_cast<std::size_t>(i)].get<double>();
        ctx.incidents_thresholds[static_cast<std::size_t>(i)] =
            j["incidents_thresholds"][static_cast<std::size_t>(i)].get<double>();
    }
    for (const auto& [y, v] : j["global_gdp_by_year"].items())
        ctx.global_gdp_by_year[std::stoi(y)] = v.get<double>();
    for (const auto& [y, v] : j["global_gdp_nocovid_by_year"].items())
        ctx.global_gdp_nocovid_by_year[std::stoi(y)] = v.get<double>();
    ctx.region_labels = j["region_labels"].get<std::vector<std::string>>();
    ctx.feature_names = j["feature_names"].get<std::vector<std::string>>();
    return ctx;
}

} // namespace medalcast
