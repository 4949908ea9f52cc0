#include "medalcast/forest.hpp"

#include "medalcast/errors.hpp"
#include "medalcast/rng.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <mutex>
#include <thread>

using nlohmann::json;

namespace medalcast {

Forest fit_forest(const Matrix& X, const std::vector<double>& y, TreeTask task, int n_trees,
                  TreeParams params, std::uint64_t master_seed, int workers,
                  std::vector<std::string> feature_names) {
    if (n_trees < 1) throw Error(ErrorCode::EmptyInput, "n_trees must be >= 1");
    if (X.empty()) throw Error(ErrorCode::EmptyInput, "no training rows");

    Forest forest;
    forest.task = task;
    forest.master_seed = master_seed;
    forest.feature_names = std::move(feature_names);
    forest.trees.resize(static_cast<std::size_t>(n_trees));

    const auto n_rows = X.size();
    auto train_one = [&](int i) {
        const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(i));
        Rng rng(seed);
        std::vector<std::size_t> sample(n_rows);
        for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n_rows));
        TreeParams tree_params = params;
        tree_params.seed = rng.next_u64(); // feature subsets continue the same stream
        forest.trees[static_cast<std::size_t>(i)] =
            fit_tree_on(X, y, task, tree_params, std::move(sample));
    };

    workers = std::max(1, workers);
    if (workers == 1 || n_trees == 1) {
        for (int i = 0; i < n_trees; ++i) train_one(i);
    } else {
        std::atomic<int> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_trees) return;
                try {
                    train_one(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        const int count = std::min(workers, n_trees);
        pool.reserve(static_cast<std::size_t>(count));
        for (int w = 0; w < count; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }
    return forest;
}

std::vector<double> per_tree_predictions(const Forest& forest, std::span<const double> x) {
    std::vector<double> out;
    out.reserve(forest.trees.size());
    for (const auto& tree : forest.trees) out.push_back(predict_tree(tree, x));
    return out;
}

double forest_vote_fraction(const Forest& forest, std::span<const double> x) {
    if (forest.trees.empty()) throw Error(ErrorCode::EmptyInput, "empty forest");
    double sum = 0;
    for (const auto& tree : forest.trees) sum += predict_tree(tree, x);
    return sum / static_cast<double>(forest.trees.size());
}

double predict_forest(const Forest& forest, std::span<const double> x) {
    const double mean = forest_vote_fraction(forest, x);
    if (forest.task == TreeTask::Classify) return mean >= 0.5 ? 1.0 : 0.0;
    return mean;
}

json forest_to_json(const Forest& forest) {
    json trees = json::array();
    for (const auto& tree : forest.trees) trees.push_back(tree_to_json(tree));
    return json{{"format_version", 1},
                {"task", forest.task == TreeTask::Classify ? "classify" : "regress"},
                {"master_seed", forest.master_seed},
                {"feature_names", forest.feature_names},
                {"trees", std::move(trees)}};
}

Forest forest_from_json(const json& j) {
    Forest forest;
    forest.task =
        j.at("task").get<std::string>() == "classify" ? TreeTask::Classify : TreeTask::Regress;
    forest.master_seed = j.at("master_seed").get<std::uint64_t>();
    forest.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& tj : j.at("trees")) forest.trees.push_back(tree_from_json(tj));
    return forest;
}

} // namespace medalcast
