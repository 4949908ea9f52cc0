#include "medalcast/csv.hpp"
#include "medalcast/dataset.hpp"
#include "medalcast/errors.hpp"
#include "medalcast/evaluate.hpp"
#include "medalcast/explain.hpp"
#include "medalcast/preprocess.hpp"
#include "medalcast/twostage.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::string data;
    std::string out;
    std::string raw_out;
    std::string model_path = "model.json";
    std::string nation;
    std::string scenario = "actual";
    std::string format = "text";
    std::string stage2_subset = "actual";
    std::uint64_t seed = 42;
    int workers = 0; // 0 = hardware concurrency
    int trees_classifier = 10;
    int trees_regressor = 1000;
    int target_year = 0;
    std::vector<int> years;
    std::size_t top_k = 17;
    int ci_pad = 2;
};

int effective_workers(int workers) {
    if (workers > 0) return workers;
    const auto hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

medalcast::TwoStageConfig make_config(const Options& opt) {
    medalcast::TwoStageConfig config;
    config.n_trees_classifier = opt.trees_classifier;
    config.n_trees_regressor = opt.trees_regressor;
    config.master_seed = opt.seed;
    config.workers = effective_workers(opt.workers);
    config.stage2_predicted_subset = opt.stage2_subset == "predicted";
    return config;
}

struct LoadedData {
    medalcast::RawDataset raw;     // after nation mapping
    medalcast::FilledPanel panel;
};

LoadedData load_all(const Options& opt) {
    LoadedData data;
    data.raw = medalcast::load_dataset(opt.data);
    const auto mapping_path = fs::path(opt.data) / "mapping.csv";
    if (fs::exists(mapping_path)) {
        auto rules = medalcast::load_mapping_rules(mapping_path);
        data.raw.provenance["mapping.csv"] = medalcast::file_digest(mapping_path);
        data.raw = medalcast::apply_nation_mapping(data.raw, std::move(rules));
    }
    data.panel = medalcast::fill_panel(data.raw);
    return data;
}

void emit(const Options& opt, const std::string& content) {
    if (opt.out.empty()) {
        std::cout << content;
        if (!content.empty() && content.back() != '\n') std::cout << '\n';
    } else {
        std::ofstream file(opt.out, std::ios::binary);
        if (!file)
            throw medalcast::Error(medalcast::ErrorCode::MissingFile,
                                   "cannot write " + opt.out);
        file << content;
    }
}

medalcast::TwoStageModel train_model(const LoadedData& data, const Options& opt) {
    const auto years = data.panel.games_years();
    std::vector<int> train_years;
    for (int y : years)
        if (y < opt.target_year) train_years.push_back(y);
    if (train_years.empty())
        throw medalcast::Error(medalcast::ErrorCode::InsufficientHistory,
                               "no Games before " + std::to_string(opt.target_year));

    std::vector<medalcast::NationYearRecord> train_records;
    for (const auto& row : data.panel.rows)
        if (row.rec.games_year < opt.target_year) train_records.push_back(row.rec);
    auto ctx = medalcast::fit_encoding_context(train_records);
    auto matrix = medalcast::build_design_matrix(data.panel, train_years.front(),
                                                 train_years.back(), ctx,
                                                 medalcast::Scenario::Actual);
    return medalcast::fit_two_stage(matrix, ctx, make_config(opt));
}

medalcast::TwoStageModel read_model(const Options& opt) {
    std::ifstream in(opt.model_path);
    if (!in)
        throw medalcast::Error(medalcast::ErrorCode::MissingFile, opt.model_path);
    json j;
    in >> j;
    return medalcast::model_from_json(j);
}

int cmd_ingest(const Options& opt) {
    auto data = load_all(opt);
    auto report = medalcast::validate_dataset(data.raw);
    if (opt.format == "json") std::cout << report.to_json().dump(2) << '\n';
    else std::cout << report.to_text();

    const std::string panel_path = opt.out.empty() ? "panel.csv" : opt.out;
    medalcast::write_panel_csv(data.panel, panel_path);
    std::cout << "panel written: " << panel_path << " (" << data.panel.rows.size()
              << " observations)\n";
    if (!opt.raw_out.empty()) {
        std::ofstream raw_file(opt.raw_out, std::ios::binary);
        raw_file << medalcast::raw_dataset_to_json(data.raw).dump(2) << '\n';
        std::cout << "raw dataset written: " << opt.raw_out << '\n';
    }
    return 0;
}

int cmd_validate(const Options& opt) {
    auto raw = medalcast::load_dataset(opt.data);
    const auto mapping_path = fs::path(opt.data) / "mapping.csv";
    if (fs::exists(mapping_path))
        raw = medalcast::apply_nation_mapping(raw,
                                              medalcast::load_mapping_rules(mapping_path));
    auto report = medalcast::validate_dataset(raw);
    if (opt.format == "json") std::cout << report.to_json().dump(2) << '\n';
    else std::cout << report.to_text();
    return 0;
}

int cmd_train(const Options& opt) {
    auto data = load_all(opt);
    auto model = train_model(data, opt);
    json j = medalcast::model_to_json(model);
    j["data_digest"] = data.panel.digest();

    const std::string path = opt.out.empty() ? opt.model_path : opt.out;
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw medalcast::Error(medalcast::ErrorCode::MissingFile, "cannot write " + path);
    file << j.dump() << '\n';
    file.close();

    std::cout << "model written: " << path << "\n"
              << "trained through: " << model.trained_through << "\n"
              << "trees: " << model.classifier.n_trees() << " classifier, "
              << model.regressor.n_trees() << " regressor\n"
              << "model digest: " << medalcast::file_digest(path) << "\n";
    return 0;
}

int cmd_evaluate(const Options& opt) {
    auto data = load_all(opt);
    medalcast::EvaluationPlan plan;
    plan.target_games = opt.years;
    plan.config = make_config(opt);
    plan.ci_pad = opt.ci_pad;
    plan.top_k = opt.top_k;
    auto report = medalcast::run_evaluation(data.panel, plan);

    if (opt.format == "json") emit(opt, report.to_json().dump(2) + "\n");
    else if (opt.format == "csv") emit(opt, report.to_csv());
    else emit(opt, report.to_text());
    return 0;
}

int cmd_forecast(const Options& opt) {
    auto data = load_all(opt);
    auto model = read_model(opt);
    const auto scenario = medalcast::parse_scenario(opt.scenario);
    const bool with_ci = model.regressor.n_trees() % medalcast::kCiGroupCount == 0;
    auto forecasts = medalcast::ranked(
        medalcast::forecast_games(model, data.panel, opt.target_year, scenario, with_ci));

    if (opt.format == "json")
        emit(opt, medalcast::forecast_report_json(forecasts, opt.target_year,
                                                  data.panel.digest(), model.config.digest())
                      .dump(2) +
                  "\n");
    else if (opt.format == "csv") emit(opt, medalcast::forecast_report_csv(forecasts));
    else emit(opt, medalcast::forecast_report_text(forecasts, opt.target_year));
    return 0;
}

int cmd_explain(const Options& opt) {
    auto data = load_all(opt);
    auto model = read_model(opt);
    const auto scenario = medalcast::parse_scenario(opt.scenario);
    auto report =
        medalcast::explain_nation(model, data.panel, opt.nation, opt.target_year, scenario);
    if (opt.format == "json") emit(opt, report.to_json().dump(2) + "\n");
    else if (opt.format == "csv")
        throw medalcast::Error(medalcast::ErrorCode::UnknownCategory,
                               "explain reports support --format json or text");
    else emit(opt, report.to_text());
    return 0;
}

int cmd_scenario(const Options& opt) {
    auto data = load_all(opt);
    auto model = read_model(opt);
    auto rows = medalcast::scenario_delta(model, data.panel, opt.target_year);

    if (opt.format == "json")
        emit(opt, medalcast::scenario_report_json(rows, opt.target_year, data.panel.digest(),
                                                  model.config.digest())
                      .dump(2) +
                  "\n");
    else if (opt.format == "csv") emit(opt, medalcast::scenario_report_csv(rows));
    else emit(opt, medalcast::scenario_report_text(rows, opt.target_year));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-staged random-forest Olympic medal forecasting"};
    app.set_config("--config", "", "read options from a TOML/INI file");
    app.require_subcommand(1);

    Options opt;

    auto add_data = [&](CLI::App* cmd) {
        cmd->add_option("--data", opt.data, "input directory with the CSV schema files")
            ->required();
    };
    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--seed", opt.seed, "master seed for all randomness");
        cmd->add_option("--workers", opt.workers, "parallel tree-training workers (0 = auto)");
        cmd->add_option("--trees-classifier", opt.trees_classifier, "stage-1 tree count");
        cmd->add_option("--trees-regressor", opt.trees_regressor, "stage-2 tree count");
        cmd->add_option("--stage2-subset", opt.stage2_subset,
                        "stage-2 training rows: actual | predicted")
            ->check(CLI::IsMember({"actual", "predicted"}));
    };
    auto add_output = [&](CLI::App* cmd) {
        cmd->add_option("--out", opt.out, "output file (stdout when omitted)");
        cmd->add_option("--format", opt.format, "text | csv | json")
            ->check(CLI::IsMember({"text", "csv", "json"}));
    };

    auto* ingest = app.add_subcommand("ingest", "load, map, validate and fill the panel");
    add_data(ingest);
    ingest->add_option("--out", opt.out, "filled-panel CSV path (default panel.csv)");
    ingest->add_option("--raw-out", opt.raw_out, "also write the raw dataset as JSON");
    ingest->add_option("--format", opt.format, "validation report format: text | json")
        ->check(CLI::IsMember({"text", "json"}));

    auto* validate = app.add_subcommand("validate", "report dataset violations without filling");
    add_data(validate);
    validate->add_option("--format", opt.format, "text | json")
        ->check(CLI::IsMember({"text", "json"}));

    auto* train = app.add_subcommand("train", "fit the two-stage model on Games before a target");
    add_data(train);
    add_model_flags(train);
    train->add_option("--target-year", opt.target_year, "first Games excluded from training")
        ->required();
    train->add_option("--out", opt.out, "model file path (default model.json)");

    auto* evaluate = app.add_subcommand("evaluate", "expanding-window accuracy vs. the naive baseline");
    add_data(evaluate);
    add_model_flags(evaluate);
    add_output(evaluate);
    evaluate->add_option("--years", opt.years, "target Games years, e.g. 2008,2012,2016")
        ->required()
        ->delimiter(',');
    evaluate->add_option("--top-k", opt.top_k, "elite-nation count for the deviation metric");
    evaluate->add_option("--ci-pad", opt.ci_pad, "medals added to both interval ends");

    auto* forecast = app.add_subcommand("forecast", "medal table for one Games from a trained model");
    add_data(forecast);
    add_output(forecast);
    forecast->add_option("--model", opt.model_path, "trained model file");
    forecast->add_option("--target-year", opt.target_year, "Games year to forecast")->required();
    forecast->add_option("--scenario", opt.scenario, "actual | no-covid")
        ->check(CLI::IsMember({"actual", "no-covid"}));

    auto* explain = app.add_subcommand("explain", "per-feature attribution for one nation");
    add_data(explain);
    add_output(explain);
    explain->add_option("--model", opt.model_path, "trained model file");
    explain->add_option("--nation", opt.nation, "nation identifier")->required();
    explain->add_option("--target-year", opt.target_year, "Games year")->required();
    explain->add_option("--scenario", opt.scenario, "actual | no-covid")
        ->check(CLI::IsMember({"actual", "no-covid"}));

    auto* scenario = app.add_subcommand("scenario", "pandemic vs. counterfactual forecast deltas");
    add_data(scenario);
    add_output(scenario);
    scenario->add_option("--model", opt.model_path, "trained model file");
    scenario->add_option("--target-year", opt.target_year, "Games year")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(opt);
        if (validate->parsed()) return cmd_validate(opt);
        if (train->parsed()) return cmd_train(opt);
        if (evaluate->parsed()) return cmd_evaluate(opt);
        if (forecast->parsed()) return cmd_forecast(opt);
        if (explain->parsed()) return cmd_explain(opt);
        if (scenario->parsed()) return cmd_scenario(opt);
    } catch (const medalcast::Error& e) {
        std::cerr << e.what() << '\n';
        return medalcast::is_io_error(e.code()) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
