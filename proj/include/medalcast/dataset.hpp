#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace medalcast {

enum class Regime { CAPME, POSTCOM, CEEC };
enum class HostRole { None, Current, Last, Next };

Regime parse_regime(const std::string& s);
const char* regime_name(Regime r);
const char* host_role_name(HostRole r);

// Year the socio-economic features are read from: the year before the Games,
// except for the postponed 2020 Games where 2020 itself is the latest
// pre-Games year.
int feature_year(int games_year);

// One nation's observation for one Games cycle. Socio-economic cells are
// optional until the fill stage has run.
struct NationYearRecord {
    std::string nation;
    int games_year = 0;
    int medals = 0;
    int athletes = 0;
    std::optional<double> gdp;            // US$, current prices, feature year
    std::optional<double> population;
    std::optional<double> resp_deaths;    // lower-respiratory deaths, feature year
    std::optional<double> resp_incidents;
    double covid_deaths = 0.0;            // zero for games before 2020
    double covid_incidents = 0.0;
    std::optional<double> gdp_nocovid;    // counterfactual GDP, only distinct for 2020
    std::string region;
    Regime regime = Regime::CAPME;
    HostRole host_role = HostRole::None;
    int prev_medals = 0;
};

enum class PanelVariable { Gdp, Population, RespDeaths, RespIncidents };
inline constexpr PanelVariable kPanelVariables[] = {
    PanelVariable::Gdp, PanelVariable::Population,
    PanelVariable::RespDeaths, PanelVariable::RespIncidents};
const char* panel_variable_name(PanelVariable v);

// year -> value, per nation, per variable
using AnnualTable = std::map<std::string, std::map<int, double>>;

struct RawDataset {
    std::vector<NationYearRecord> records;   // sorted by (games_year, nation)
    std::map<int, int> events_per_games;     // games_year -> scheduled event count
    std::map<std::string, std::string> provenance; // file -> digest

    // Source panels the records are joined from; the fill stage needs the full
    // annual resolution, not just the joined feature years.
    std::map<PanelVariable, AnnualTable> annual;
    std::map<std::string, std::pair<double, double>> covid; // nation -> (deaths, incidents)
    std::map<std::string, double> covid_gdp_nocovid;        // optional pre-pandemic GDP column
    std::map<std::string, std::pair<std::string, Regime>> meta; // nation -> (region, regime)
    std::map<int, std::string> hosts;                       // games_year -> host nation

    NationYearRecord* find_record(const std::string& nation, int games_year);
    const NationYearRecord* find_record(const std::string& nation, int games_year) const;
    std::vector<int> games_years() const;
};

struct MappingRule {
    enum class Kind { Aggregate, Rename, Split };
    std::string source;
    std::string target;
    Kind kind = Kind::Rename;
    double share = 1.0;      // split weight; derived from population when not given
    bool share_given = false;
};

// Reads the seven schema files, joins them into per-(nation, Games) records,
// and leaves missing socio-economic cells unset.
RawDataset load_dataset(const std::filesystem::path& input_dir);

std::vector<MappingRule> load_mapping_rules(const std::filesystem::path& mapping_csv);

// Aggregates, renames and splits entities across every table of the dataset.
// Integer quantities are split with largest-remainder rounding so totals are
// conserved exactly. Split shares left unset are derived from the targets'
// populations at the earliest year all targets are covered.
RawDataset apply_nation_mapping(const RawDataset& raw, std::vector<MappingRule> rules);

// Recomputes the lagged-medal column from the (possibly mapped) medal history.
void recompute_prev_medals(RawDataset& raw);

struct ValidationReport {
    std::map<std::string, int> missing_cells;      // variable -> count
    std::vector<std::string> violations;
    std::map<int, int> nations_per_games;
    int record_count = 0;

    nlohmann::json to_json() const;
    std::string to_text() const;
};

ValidationReport validate_dataset(const RawDataset& raw);

nlohmann::json raw_dataset_to_json(const RawDataset& raw);
RawDataset raw_dataset_from_json(const nlohmann::json& j);

// Largest-remainder apportionment: parts sum to total exactly; fractional-part
// ties go to the lower index.
std::vector<long long> split_integer(long long total, std::span<const double> shares);

// Combined digest of every input file, for report provenance.
std::string dataset_digest(const RawDataset& raw);

} // namespace medalcast
