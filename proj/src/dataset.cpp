#include "medalcast/dataset.hpp"

#include "medalcast/csv.hpp"
#include "medalcast/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

using nlohmann::json;

namespace medalcast {

Regime parse_regime(const std::string& s) {
    if (s == "CAPME") return Regime::CAPME;
    if (s == "POSTCOM") return Regime::POSTCOM;
    if (s == "CEEC") return Regime::CEEC;
    throw Error(ErrorCode::UnknownCategory, "regime '" + s + "'");
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::CAPME: return "CAPME";
        case Regime::POSTCOM: return "POSTCOM";
        case Regime::CEEC: return "CEEC";
    }
    return "?";
}

const char* host_role_name(HostRole r) {
    switch (r) {
        case HostRole::None: return "none";
        case HostRole::Current: return "current";
        case HostRole::Last: return "last";
        case HostRole::Next: return "next";
    }
    return "?";
}

const char* panel_variable_name(PanelVariable v) {
    switch (v) {
        case PanelVariable::Gdp: return "gdp";
        case PanelVariable::Population: return "population";
        case PanelVariable::RespDeaths: return "resp_deaths";
        case PanelVariable::RespIncidents: return "resp_incidents";
    }
    return "?";
}

int feature_year(int games_year) {
    return games_year == 2020 ? 2020 : games_year - 1;
}

NationYearRecord* RawDataset::find_record(const std::string& nation, int games_year) {
    for (auto& r : records)
        if (r.games_year == games_year && r.nation == nation) return &r;
    return nullptr;
}

const NationYearRecord* RawDataset::find_record(const std::string& nation, int games_year) const {
    return const_cast<RawDataset*>(this)->find_record(nation, games_year);
}

std::vector<int> RawDataset::games_years() const {
    std::set<int> years;
    for (const auto& r : records) years.insert(r.games_year);
    return {years.begin(), years.end()};
}

std::vector<long long> split_integer(long long total, std::span<const double> shares) {
    std::vector<long long> parts(shares.size());
    std::vector<std::pair<double, std::size_t>> fracs;
    long long assigned = 0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        double exact = static_cast<double>(total) * shares[i];
        parts[i] = static_cast<long long>(std::floor(exact));
        assigned += parts[i];
        fracs.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
        return a.first > b.first; // ties resolved by lower index (stable)
    });
    long long leftover = total - assigned;
    for (long long k = 0; k < leftover && k < static_cast<long long>(fracs.size()); ++k)
        parts[fracs[static_cast<std::size_t>(k)].second] += 1;
    return parts;
}

namespace {

void sort_records(RawDataset& raw) {
    std::sort(raw.records.begin(), raw.records.end(),
              [](const NationYearRecord& a, const NationYearRecord& b) {
                  return std::tie(a.games_year, a.nation) < std::tie(b.games_year, b.nation);
              });
}

std::optional<double> lookup(const AnnualTable& table, const std::string& nation, int year) {
    auto it = table.find(nation);
    if (it == table.end()) return std::nullopt;
    auto jt = it->second.find(year);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

// Re-derives every joined cell of each record from the source tables.
void rejoin_records(RawDataset& raw) {
    std::vector<int> schedule;
    {
        std::set<int> years;
        for (const auto& [y, _] : raw.hosts) years.insert(y);
        for (const auto& [y, _] : raw.events_per_games) years.insert(y);
        for (const auto& r : raw.records) years.insert(r.games_year);
        schedule.assign(years.begin(), years.end());
    }
    auto neighbour = [&](int year, int step) -> std::optional<int> {
        auto it = std::find(schedule.begin(), schedule.end(), year);
        if (it == schedule.end()) return std::nullopt;
        auto idx = static_cast<std::ptrdiff_t>(it - schedule.begin()) + step;
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(schedule.size())) return std::nullopt;
        return schedule[static_cast<std::size_t>(idx)];
    };

    for (auto& r : raw.records) {
        const int fy = feature_year(r.games_year);
        r.gdp = lookup(raw.annual[PanelVariable::Gdp], r.nation, fy);
        r.population = lookup(raw.annual[PanelVariable::Population], r.nation, fy);
        r.resp_deaths = lookup(raw.annual[PanelVariable::RespDeaths], r.nation, fy);
        r.resp_incidents = lookup(raw.annual[PanelVariable::RespIncidents], r.nation, fy);

        if (r.games_year >= 2020) {
            auto it = raw.covid.find(r.nation);
            r.covid_deaths = it != raw.covid.end() ? it->second.first : 0.0;
            r.covid_incidents = it != raw.covid.end() ? it->second.second : 0.0;
            auto gt = raw.covid_gdp_nocovid.find(r.nation);
            r.gdp_nocovid = gt != raw.covid_gdp_nocovid.end()
                                ? std::optional<double>(gt->second)
                                : std::nullopt;
        } else {
            r.covid_deaths = 0.0;
            r.covid_incidents = 0.0;
            r.gdp_nocovid = r.gdp;
        }

        auto mt = raw.meta.find(r.nation);
        if (mt != raw.meta.end()) {
            r.region = mt->second.first;
            r.regime = mt->second.second;
        } else {
            r.region.clear();
            r.regime = Regime::CAPME;
        }

        r.host_role = HostRole::None;
        auto host_of = [&](int y) -> const std::string* {
            auto it = raw.hosts.find(y);
            return it != raw.hosts.end() ? &it->second : nullptr;
        };
        if (auto* h = host_of(r.games_year); h && *h == r.nation) {
            r.host_role = HostRole::Current;
        } else if (auto py = neighbour(r.games_year, -1)) {
            if (auto* h = host_of(*py); h && *h == r.nation) r.host_role = HostRole::Last;
        }
        if (r.host_role == HostRole::None) {
            if (auto ny = neighbour(r.games_year, +1)) {
                if (auto* h = host_of(*ny); h && *h == r.nation) r.host_role = HostRole::Next;
            }
        }
    }
    recompute_prev_medals(raw);
}

} // namespace

void recompute_prev_medals(RawDataset& raw) {
    std::map<std::pair<int, std::string>, int> medals_at;
    std::set<int> years;
    for (const auto& r : raw.records) {
        medals_at[{r.games_year, r.nation}] = r.medals;
        years.insert(r.games_year);
    }
    for (const auto& [y, _] : raw.events_per_games) years.insert(y);
    std::vector<int> schedule(years.begin(), years.end());
    for (auto& r : raw.records) {
        auto it = std::lower_bound(schedule.begin(), schedule.end(), r.games_year);
        if (it == schedule.begin()) {
            r.prev_medals = 0;
            continue;
        }
        int prev_year = *std::prev(it);
        auto mt = medals_at.find({prev_year, r.nation});
        r.prev_medals = mt != medals_at.end() ? mt->second : 0;
    }
}

RawDataset load_dataset(const std::filesystem::path& input_dir) {
    RawDataset raw;
    for (auto v : kPanelVariables) raw.annual[v]; // materialize all four tables

    auto read = [&](const char* name) {
        auto path = input_dir / name;
        auto table = read_csv(path);
        raw.provenance[name] = file_digest(path);
        return table;
    };

    { // events.csv: games_year,num_events
        auto t = read("events.csv");
        auto cy = t.column("games_year"), ce = t.column("num_events");
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            int year = static_cast<int>(parse_int_cell(t.rows[i][cy], t.file, i + 2, "games_year"));
            int events = static_cast<int>(parse_int_cell(t.rows[i][ce], t.file, i + 2, "num_events"));
            if (raw.events_per_games.count(year))
                throw Error(ErrorCode::DuplicateKey, "events.csv games_year " + std::to_string(year));
            raw.events_per_games[year] = events;
        }
    }

    { // medals.csv: nation,games_year,medals,athletes
        auto t = read("medals.csv");
        auto cn = t.column("nation"), cy = t.column("games_year");
        auto cm = t.column("medals"), ca = t.column("athletes");
        std::set<std::pair<std::string, int>> seen;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            NationYearRecord r;
            r.nation = t.rows[i][cn];
            r.games_year = static_cast<int>(parse_int_cell(t.rows[i][cy], t.file, i + 2, "games_year"));
            r.medals = static_cast<int>(parse_int_cell(t.rows[i][cm], t.file, i + 2, "medals"));
            r.athletes = static_cast<int>(parse_int_cell(t.rows[i][ca], t.file, i + 2, "athletes"));
            if (!seen.insert({r.nation, r.games_year}).second)
                throw Error(ErrorCode::DuplicateKey,
                            "(" + r.nation + ", " + std::to_string(r.games_year) + ")");
            raw.records.push_back(std::move(r));
        }
    }

    { // socio.csv: nation,year,gdp_usd,population
        auto t = read("socio.csv");
        auto cn = t.column("nation"), cy = t.column("year");
        auto cg = t.column("gdp_usd"), cp = t.column("population");
        std::set<std::pair<std::string, int>> seen;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& nation = t.rows[i][cn];
            int year = static_cast<int>(parse_int_cell(t.rows[i][cy], t.file, i + 2, "year"));
            if (!seen.insert({nation, year}).second)
                throw Error(ErrorCode::DuplicateKey,
                            "socio.csv (" + nation + ", " + std::to_string(year) + ")");
            if (!t.rows[i][cg].empty())
                raw.annual[PanelVariable::Gdp][nation][year] =
                    parse_real_cell(t.rows[i][cg], t.file, i + 2, "gdp_usd");
            if (!t.rows[i][cp].empty())
                raw.annual[PanelVariable::Population][nation][year] =
                    parse_real_cell(t.rows[i][cp], t.file, i + 2, "population");
        }
    }

    { // disease.csv: nation,year,resp_deaths,resp_incidents
        auto t = read("disease.csv");
        auto cn = t.column("nation"), cy = t.column("year");
        auto cd = t.column("resp_deaths"), ci = t.column("resp_incidents");
        std::set<std::pair<std::string, int>> seen;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& nation = t.rows[i][cn];
            int year = static_cast<int>(parse_int_cell(t.rows[i][cy], t.file, i + 2, "year"));
            if (!seen.insert({nation, year}).second)
                throw Error(ErrorCode::DuplicateKey,
                            "disease.csv (" + nation + ", " + std::to_string(year) + ")");
            if (!t.rows[i][cd].empty())
                raw.annual[PanelVariable::RespDeaths][nation][year] =
                    parse_real_cell(t.rows[i][cd], t.file, i + 2, "resp_deaths");
            if (!t.rows[i][ci].empty())
                raw.annual[PanelVariable::RespIncidents][nation][year] =
                    parse_real_cell(t.rows[i][ci], t.file, i + 2, "resp_incidents");
        }
    }

    { // covid.csv: nation,covid_deaths,covid_incidents[,gdp_nocovid]
        auto t = read("covid.csv");
        auto cn = t.column("nation");
        auto cd = t.column("covid_deaths"), ci = t.column("covid_incidents");
        auto cg = t.find_column("gdp_nocovid");
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& nation = t.rows[i][cn];
            if (raw.covid.count(nation))
                throw Error(ErrorCode::DuplicateKey, "covid.csv " + nation);
            raw.covid[nation] = {parse_real_cell(t.rows[i][cd], t.file, i + 2, "covid_deaths"),
                                 parse_real_cell(t.rows[i][ci], t.file, i + 2, "covid_incidents")};
            if (cg && !t.rows[i][*cg].empty())
                raw.covid_gdp_nocovid[nation] =
                    parse_real_cell(t.rows[i][*cg], t.file, i + 2, "gdp_nocovid");
        }
    }

    { // meta.csv: nation,region,regime
        auto t = read("meta.csv");
        auto cn = t.column("nation"), cr = t.column("region"), cg = t.column("regime");
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const auto& nation = t.rows[i][cn];
            if (raw.meta.count(nation))
                throw Error(ErrorCode::DuplicateKey, "meta.csv " + nation);
            raw.meta[nation] = {t.rows[i][cr], parse_regime(t.rows[i][cg])};
        }
    }

    { // hosts.csv: games_year,host_nation
        auto t = read("hosts.csv");
        auto cy = t.column("games_year"), ch = t.column("host_nation");
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            int year = static_cast<int>(parse_int_cell(t.rows[i][cy], t.file, i + 2, "games_year"));
            if (raw.hosts.count(year))
                throw Error(ErrorCode::DuplicateKey, "hosts.csv games_year " + std::to_string(year));
            raw.hosts[year] = t.rows[i][ch];
        }
    }

    sort_records(raw);
    rejoin_records(raw);
    return raw;
}

std::vector<MappingRule> load_mapping_rules(const std::filesystem::path& mapping_csv) {
    auto t = read_csv(mapping_csv);
    auto cs = t.column("source"), ct = t.column("target");
    auto ck = t.column("kind"), csh = t.column("share");
    std::vector<MappingRule> rules;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        MappingRule r;
        r.source = t.rows[i][cs];
        r.target = t.rows[i][ct];
        const auto& kind = t.rows[i][ck];
        if (kind == "aggregate") r.kind = MappingRule::Kind::Aggregate;
        else if (kind == "rename") r.kind = MappingRule::Kind::Rename;
        else if (kind == "split") r.kind = MappingRule::Kind::Split;
        else
            throw Error(ErrorCode::SchemaViolation,
                        t.file + ":" + std::to_string(i + 2) + ": bad kind '" + kind + "'");
        if (!t.rows[i][csh].empty()) {
            r.share = parse_real_cell(t.rows[i][csh], t.file, i + 2, "share");
            r.share_given = true;
            if (r.share <= 0.0 || r.share > 1.0)
                throw Error(ErrorCode::ShareSumViolation,
                            "share " + t.rows[i][csh] + " outside (0, 1]");
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

namespace {

bool value_is_integral(double v) {
    return std::abs(v) < 9.0e15 && v == std::floor(v);
}

// Merge-add every quantity of `source` into `target` and drop `source`.
// `transfer_identity` additionally moves meta/host labels (rename semantics).
void absorb_entity(RawDataset& raw, const std::string& source, const std::string& target,
                   bool transfer_identity) {
    for (auto v : kPanelVariables) {
        auto& table = raw.annual[v];
        auto it = table.find(source);
        if (it == table.end()) continue;
        auto& dst = table[target];
        for (const auto& [year, value] : it->second) dst[year] += value;
        table.erase(it);
    }
    for (std::size_t i = 0; i < raw.records.size();) {
        auto& r = raw.records[i];
        if (r.nation != source) {
            ++i;
            continue;
        }
        if (auto* t = raw.find_record(target, r.games_year)) {
            t->medals += r.medals;
            t->athletes += r.athletes;
        } else {
            NationYearRecord moved = r;
            moved.nation = target;
            raw.records.push_back(std::move(moved));
        }
        raw.records.erase(raw.records.begin() + static_cast<std::ptrdiff_t>(i));
    }
    if (auto it = raw.covid.find(source); it != raw.covid.end()) {
        raw.covid[target].first += it->second.first;
        raw.covid[target].second += it->second.second;
        raw.covid.erase(it);
    }
    if (auto it = raw.covid_gdp_nocovid.find(source); it != raw.covid_gdp_nocovid.end()) {
        raw.covid_gdp_nocovid[target] += it->second;
        raw.covid_gdp_nocovid.erase(it);
    }
    if (auto it = raw.meta.find(source); it != raw.meta.end()) {
        if (transfer_identity && !raw.meta.count(target)) raw.meta[target] = it->second;
        raw.meta.erase(it);
    }
    if (transfer_identity)
        for (auto& [year, host] : raw.hosts)
            if (host == source) host = target;
}

struct SplitGroup {
    std::string source;
    std::vector<std::string> targets;
    std::vector<double> shares;
};

void apply_split(RawDataset& raw, const SplitGroup& group) {
    double sum = std::accumulate(group.shares.begin(), group.shares.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::ShareSumViolation,
                    group.source + " split shares sum to " + format_double(sum));

    for (auto v : kPanelVariables) {
        auto& table = raw.annual[v];
        auto it = table.find(group.source);
        if (it == table.end()) continue;
        const bool integral_quantity = v == PanelVariable::Population;
        for (const auto& [year, value] : it->second) {
            if (integral_quantity && value_is_integral(value)) {
                auto parts = split_integer(static_cast<long long>(value), group.shares);
                for (std::size_t k = 0; k < group.targets.size(); ++k)
                    table[group.targets[k]][year] += static_cast<double>(parts[k]);
            } else {
                for (std::size_t k = 0; k < group.targets.size(); ++k)
                    table[group.targets[k]][year] += value * group.shares[k];
            }
        }
        table.erase(group.source);
    }

    for (std::size_t i = 0; i < raw.records.size();) {
        auto& r = raw.records[i];
        if (r.nation != group.source) {
            ++i;
            continue;
        }
        auto medal_parts = split_integer(r.medals, group.shares);
        auto athlete_parts = split_integer(r.athletes, group.shares);
        const int year = r.games_year;
        raw.records.erase(raw.records.begin() + static_cast<std::ptrdiff_t>(i));
        for (std::size_t k = 0; k < group.targets.size(); ++k) {
            if (auto* t = raw.find_record(group.targets[k], year)) {
                t->medals += static_cast<int>(medal_parts[k]);
                t->athletes += static_cast<int>(athlete_parts[k]);
            } else {
                NationYearRecord part;
                part.nation = group.targets[k];
                part.games_year = year;
                part.medals = static_cast<int>(medal_parts[k]);
                part.athletes = static_cast<int>(athlete_parts[k]);
                raw.records.push_back(std::move(part));
            }
        }
    }

    if (auto it = raw.covid.find(group.source); it != raw.covid.end()) {
        for (std::size_t k = 0; k < group.targets.size(); ++k) {
            raw.covid[group.targets[k]].first += it->second.first * group.shares[k];
            raw.covid[group.targets[k]].second += it->second.second * group.shares[k];
        }
        raw.covid.erase(it);
    }
    raw.meta.erase(group.source);
}

} // namespace

RawDataset apply_nation_mapping(const RawDataset& raw, std::vector<MappingRule> rules) {
    RawDataset out = raw;

    // Collect split groups, deriving shares where the file left them blank.
    std::map<std::string, SplitGroup> splits;
    std::vector<std::string> split_order;
    for (const auto& rule : rules) {
        if (rule.kind != MappingRule::Kind::Split) continue;
        auto [it, inserted] = splits.try_emplace(rule.source);
        if (inserted) {
            it->second.source = rule.source;
            split_order.push_back(rule.source);
        }
        it->second.targets.push_back(rule.target);
        it->second.shares.push_back(rule.share_given ? rule.share : -1.0);
    }
    const auto& population = out.annual[PanelVariable::Population];
    for (auto& [source, group] : splits) {
        bool needs_derivation =
            std::any_of(group.shares.begin(), group.shares.end(), [](double s) { return s < 0; });
        if (!needs_derivation) continue;
        // Basis: earliest year every split target has a population value.
        std::optional<int> basis;
        auto first_it = population.find(group.targets.front());
        if (first_it != population.end()) {
            for (const auto& [year, _] : first_it->second) {
                bool all = true;
                for (const auto& t : group.targets) {
                    auto pt = population.find(t);
                    if (pt == population.end() || !pt->second.count(year)) {
                        all = false;
                        break;
                    }
                }
                if (all) {
                    basis = year;
                    break;
                }
            }
        }
        if (!basis)
            throw Error(ErrorCode::UnknownEntity,
                        "cannot derive split shares for " + source +
                            ": no year covers every target's population");
        double total = 0;
        for (const auto& t : group.targets) total += population.at(t).at(*basis);
        if (total <= 0)
            throw Error(ErrorCode::ShareSumViolation, "zero population basis for " + source);
        for (std::size_t k = 0; k < group.targets.size(); ++k)
            group.shares[k] = population.at(group.targets[k]).at(*basis) / total;
    }

    for (const auto& rule : rules)
        if (rule.kind == MappingRule::Kind::Aggregate)
            absorb_entity(out, rule.source, rule.target, /*transfer_identity=*/false);
    for (const auto& rule : rules)
        if (rule.kind == MappingRule::Kind::Rename)
            absorb_entity(out, rule.source, rule.target, /*transfer_identity=*/true);
    for (const auto& source : split_order) apply_split(out, splits.at(source));

    sort_records(out);
    rejoin_records(out);
    return out;
}

ValidationReport validate_dataset(const RawDataset& raw) {
    ValidationReport report;
    report.record_count = static_cast<int>(raw.records.size());

    for (auto v : kPanelVariables) report.missing_cells[panel_variable_name(v)] = 0;
    report.missing_cells["covid"] = 0;
    report.missing_cells["meta"] = 0;

    std::map<int, int> current_hosts;
    for (const auto& r : raw.records) {
        report.nations_per_games[r.games_year] += 1;
        if (!r.gdp) report.missing_cells["gdp"] += 1;
        if (!r.population) report.missing_cells["population"] += 1;
        if (!r.resp_deaths) report.missing_cells["resp_deaths"] += 1;
        if (!r.resp_incidents) report.missing_cells["resp_incidents"] += 1;
        if (r.games_year >= 2020 && !raw.covid.count(r.nation))
            report.missing_cells["covid"] += 1;
        if (!raw.meta.count(r.nation)) {
            report.missing_cells["meta"] += 1;
            report.violations.push_back("no region/regime entry: " + r.nation);
        }
        if (r.medals > 0 && r.athletes == 0)
            report.violations.push_back("medals without athletes: " + r.nation + " " +
                                        std::to_string(r.games_year));
        if (r.games_year < 2020 && (r.covid_deaths != 0 || r.covid_incidents != 0))
            report.violations.push_back("covid values before 2020: " + r.nation + " " +
                                        std::to_string(r.games_year));
        if (r.population && *r.population <= 0)
            report.violations.push_back("non-positive population: " + r.nation + " " +
                                        std::to_string(r.games_year));
        if (r.host_role == HostRole::Current) current_hosts[r.games_year] += 1;
    }
    for (const auto& [year, count] : report.nations_per_games) {
        if (!raw.events_per_games.count(year))
            report.violations.push_back("games_year " + std::to_string(year) +
                                        " missing from events.csv");
        int hosts = current_hosts.count(year) ? current_hosts.at(year) : 0;
        if (hosts != 1)
            report.violations.push_back("games_year " + std::to_string(year) + " has " +
                                        std::to_string(hosts) + " current-host records");
    }
    return report;
}

json ValidationReport::to_json() const {
    json j;
    j["record_count"] = record_count;
    j["missing_cells"] = missing_cells;
    j["violations"] = violations;
    json counts = json::object();
    for (const auto& [year, n] : nations_per_games) counts[std::to_string(year)] = n;
    j["nations_per_games"] = counts;
    return j;
}

std::string ValidationReport::to_text() const {
    std::ostringstream out;
    out << "records: " << record_count << "\n";
    out << "nations per games:";
    for (const auto& [year, n] : nations_per_games) out << " " << year << "=" << n;
    out << "\nmissing cells:";
    for (const auto& [var, n] : missing_cells) out << " " << var << "=" << n;
    out << "\nviolations: " << violations.size() << "\n";
    for (const auto& v : violations) out << "  - " << v << "\n";
    return out.str();
}

namespace {

json optional_to_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

} // namespace

json raw_dataset_to_json(const RawDataset& raw) {
    json j;
    j["format_version"] = 1;

    json records = json::array();
    for (const auto& r : raw.records) {
        records.push_back({{"nation", r.nation},
                           {"games_year", r.games_year},
                           {"medals", r.medals},
                           {"athletes", r.athletes},
                           {"gdp", optional_to_json(r.gdp)},
                           {"population", optional_to_json(r.population)},
                           {"resp_deaths", optional_to_json(r.resp_deaths)},
                           {"resp_incidents", optional_to_json(r.resp_incidents)},
                           {"covid_deaths", r.covid_deaths},
                           {"covid_incidents", r.covid_incidents},
                           {"gdp_nocovid", optional_to_json(r.gdp_nocovid)},
                           {"region", r.region},
                           {"regime", regime_name(r.regime)},
                           {"host_role", host_role_name(r.host_role)},
                           {"prev_medals", r.prev_medals}});
    }
    j["records"] = std::move(records);

    json events = json::object();
    for (const auto& [year, n] : raw.events_per_games) events[std::to_string(year)] = n;
    j["events_per_games"] = std::move(events);
    j["provenance"] = raw.provenance;

    json annual = json::object();
    for (const auto& [var, table] : raw.annual) {
        json t = json::object();
        for (const auto& [nation, series] : table) {
            json s = json::object();
            for (const auto& [year, value] : series) s[std::to_string(year)] = value;
            t[nation] = std::move(s);
        }
        annual[panel_variable_name(var)] = std::move(t);
    }
    j["annual"] = std::move(annual);

    json covid = json::object();
    for (const auto& [nation, dv] : raw.covid)
        covid[nation] = {{"deaths", dv.first}, {"incidents", dv.second}};
    j["covid"] = std::move(covid);
    j["covid_gdp_nocovid"] = raw.covid_gdp_nocovid;

    json meta = json::object();
    for (const auto& [nation, rr] : raw.meta)
        meta[nation] = {{"region", rr.first}, {"regime", regime_name(rr.second)}};
    j["meta"] = std::move(meta);

    json hosts = json::object();
    for (const auto& [year, nation] : raw.hosts) hosts[std::to_string(year)] = nation;
    j["hosts"] = std::move(hosts);
    return j;
}

RawDataset raw_dataset_from_json(const json& j) {
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw Error(ErrorCode::SchemaViolation, "unsupported dataset format version");
    RawDataset raw;
    for (auto v : kPanelVariables) raw.annual[v];

    for (const auto& rj : j["records"]) {
        NationYearRecord r;
        r.nation = rj["nation"].get<std::string>();
        r.games_year = rj["games_year"].get<int>();
        r.medals = rj["medals"].get<int>();
        r.athletes = rj["athletes"].get<int>();
        r.gdp = optional_from_json(rj["gdp"]);
        r.population = optional_from_json(rj["population"]);
        r.resp_deaths = optional_from_json(rj["resp_deaths"]);
        r.resp_incidents = optional_from_json(rj["resp_incidents"]);
        r.covid_deaths = rj["covid_deaths"].get<double>();
        r.covid_incidents = rj["covid_incidents"].get<double>();
        r.gdp_nocovid = optional_from_json(rj["gdp_nocovid"]);
        r.region = rj["region"].get<std::string>();
        r.regime = parse_regime(rj["regime"].get<std::string>());
        const auto role = rj["host_role"].get<std::string>();
        r.host_role = role == "current" ? HostRole::Current
                      : role == "last"  ? HostRole::Last
                      : role == "next"  ? HostRole::Next
                                        : HostRole::None;
        r.prev_medals = rj["prev_medals"].get<int>();
        raw.records.push_back(std::move(r));
    }
    for (const auto& [year, n] : j["events_per_games"].items())
        raw.events_per_games[std::stoi(year)] = n.get<int>();
    raw.provenance = j["provenance"].get<std::map<std::string, std::string>>();
    for (const auto& [name, table] : j["annual"].items()) {
        PanelVariable var = PanelVariable::Gdp;
        for (auto v : kPanelVariables)
            if (name == panel_variable_name(v)) var = v;
        for (const auto& [nation, series] : table.items())
            for (const auto& [year, value] : series.items())
                raw.annual[var][nation][std::stoi(year)] = value.get<double>();
    }
    for (const auto& [nation, dv] : j["covid"].items())
        raw.covid[nation] = {dv["deaths"].get<double>(), dv["incidents"].get<double>()};
    raw.covid_gdp_nocovid = j["covid_gdp_nocovid"].get<std::map<std::string, double>>();
    for (const auto& [nation, rr] : j["meta"].items())
        raw.meta[nation] = {rr["region"].get<std::string>(),
                            parse_regime(rr["regime"].get<std::string>())};
    for (const auto& [year, nation] : j["hosts"].items())
        raw.hosts[std::stoi(year)] = nation.get<std::string>();
    return raw;
}

std::string dataset_digest(const RawDataset& raw) {
    std::string all;
    for (const auto& [file, digest] : raw.provenance) all += file + "=" + digest + "\n";
    return string_digest(all);
}

} // namespace medalcast
