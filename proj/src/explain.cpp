#include "medalcast/explain.hpp"

#include "medalcast/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>

using nlohmann::json;

namespace medalcast {

namespace {

void check_tree(const DecisionTree& tree, std::span<const double> x) {
    if (tree.nodes.empty()) throw Error(ErrorCode::EmptyInput, "empty tree");
    for (const auto& node : tree.nodes)
        if (node.n_samples <= 0)
            throw Error(ErrorCode::MissingNodeCounts, "node without sample count");
    if (tree.max_feature_index() >= static_cast<int>(x.size()))
        throw Error(ErrorCode::FeatureOutOfRange,
                    "row width " + std::to_string(x.size()) + " too small for tree");
}

int tree_depth(const DecisionTree& tree, int node, int depth) {
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.is_leaf()) return depth;
    return std::max(tree_depth(tree, n.left, depth + 1), tree_depth(tree, n.right, depth + 1));
}

// One feature's bookkeeping along the current unique path.
struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0; // share of background samples passing the split
    double one_fraction = 0.0;  // 1 when x follows the split, 0 otherwise
    double pweight = 0.0;
};

void extend_path(PathElement* path, int unique_depth, double zero_fraction, double one_fraction,
                 int feature) {
    path[unique_depth] = {feature, zero_fraction, one_fraction,
                          unique_depth == 0 ? 1.0 : 0.0};
    const double d1 = unique_depth + 1;
    for (int i = unique_depth - 1; i >= 0; --i) {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / d1;
        path[i].pweight = zero_fraction * path[i].pweight * (unique_depth - i) / d1;
    }
}

// Inverse of extend_path for the element at path_index; the remaining elements
// shift left.
void unwind_path(PathElement* path, int unique_depth, int path_index) {
    const double one_fraction = path[path_index].one_fraction;
    const double zero_fraction = path[path_index].zero_fraction;
    const double d1 = unique_depth + 1;
    double next_one_portion = path[unique_depth].pweight;
    for (int i = unique_depth - 1; i >= 0; --i) {
        if (one_fraction != 0.0) {
            const double tmp = path[i].pweight;
            path[i].pweight = next_one_portion * d1 / ((i + 1) * one_fraction);
            next_one_portion = tmp - path[i].pweight * zero_fraction * (unique_depth - i) / d1;
        } else {
            path[i].pweight = path[i].pweight * d1 / (zero_fraction * (unique_depth - i));
        }
    }
    for (int i = path_index; i < unique_depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

// Total weight the path would carry after unwinding the element at path_index,
// without materializing the unwound path.
double unwound_path_sum(const PathElement* path, int unique_depth, int path_index) {
    const double one_fraction = path[path_index].one_fraction;
    const double zero_fraction = path[path_index].zero_fraction;
    const double d1 = unique_depth + 1;
    double total = 0.0;
    if (one_fraction != 0.0) {
        double next_one_portion = path[unique_depth].pweight;
        for (int i = unique_depth - 1; i >= 0; --i) {
            const double tmp = next_one_portion * d1 / ((i + 1) * one_fraction);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero_fraction * (unique_depth - i) / d1;
        }
    } else {
        for (int i = unique_depth - 1; i >= 0; --i)
            total += path[i].pweight * d1 / (zero_fraction * (unique_depth - i));
    }
    return total;
}

class TreeShap {
public:
    TreeShap(const DecisionTree& tree, std::span<const double> x, std::vector<double>& phi)
        : tree_(tree), x_(x), phi_(phi) {
        const int depth = tree_depth(tree, 0, 0);
        arena_.resize(static_cast<std::size_t>((depth + 2) * (depth + 3) / 2));
    }

    void run() { recurse(0, 0, arena_.data(), 1.0, 1.0, -1); }

private:
    void recurse(int node_idx, int unique_depth, PathElement* parent_path, double parent_zero,
                 double parent_one, int parent_feature) {
        PathElement* path = parent_path + unique_depth + 1;
        std::copy(parent_path, parent_path + unique_depth + 1, path);
        extend_path(path, unique_depth, parent_zero, parent_one, parent_feature);

        const auto& node = tree_.nodes[static_cast<std::size_t>(node_idx)];
        if (node.is_leaf()) {
            for (int i = 1; i <= unique_depth; ++i) {
                const double w = unwound_path_sum(path, unique_depth, i);
                phi_[static_cast<std::size_t>(path[i].feature)] +=
                    w * (path[i].one_fraction - path[i].zero_fraction) * node.value;
            }
            return;
        }

        const auto& left = tree_.nodes[static_cast<std::size_t>(node.left)];
        const auto& right = tree_.nodes[static_cast<std::size_t>(node.right)];
        const bool go_left = x_[static_cast<std::size_t>(node.feature)] <= node.threshold;
        const int hot = go_left ? node.left : node.right;
        const int cold = go_left ? node.right : node.left;
        const double hot_zero =
            static_cast<double>(go_left ? left.n_samples : right.n_samples) / node.n_samples;
        const double cold_zero =
            static_cast<double>(go_left ? right.n_samples : left.n_samples) / node.n_samples;

        double incoming_zero = 1.0, incoming_one = 1.0;
        int found = -1;
        for (int i = 1; i <= unique_depth; ++i)
            if (path[i].feature == node.feature) {
                found = i;
                break;
            }
        if (found >= 0) {
            incoming_zero = path[found].zero_fraction;
            incoming_one = path[found].one_fraction;
            unwind_path(path, unique_depth, found);
            --unique_depth;
        }

        recurse(hot, unique_depth + 1, path, hot_zero * incoming_zero, incoming_one, node.feature);
        recurse(cold, unique_depth + 1, path, cold_zero * incoming_zero, 0.0, node.feature);
    }

    const DecisionTree& tree_;
    std::span<const double> x_;
    std::vector<double>& phi_;
    std::vector<PathElement> arena_;
};

Attribution make_attribution(const std::vector<double>& values, double base, double prediction,
                             const std::vector<std::string>& feature_names) {
    Attribution a;
    a.base_value = base;
    a.prediction = prediction;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::string name =
            i < feature_names.size() ? feature_names[i] : "f" + std::to_string(i);
        a.shap[name] = values[i];
    }
    return a;
}

} // namespace

double tree_base_value(const DecisionTree& tree) {
    if (tree.nodes.empty()) throw Error(ErrorCode::EmptyInput, "empty tree");
    const double root_n = tree.nodes[0].n_samples;
    double sum = 0;
    for (const auto& node : tree.nodes)
        if (node.is_leaf()) sum += node.value * node.n_samples;
    return sum / root_n;
}

std::vector<double> tree_shap_values(const DecisionTree& tree, std::span<const double> x,
                                     std::size_t width) {
    check_tree(tree, x);
    std::vector<double> phi(width, 0.0);
    TreeShap(tree, x, phi).run();
    return phi;
}

Attribution tree_shap(const DecisionTree& tree, std::span<const double> x,
                      const std::vector<std::string>& feature_names) {
    auto phi = tree_shap_values(tree, x, x.size());
    return make_attribution(phi, tree_base_value(tree), predict_tree(tree, x), feature_names);
}

std::vector<double> brute_force_shapley_values(const DecisionTree& tree,
                                               std::span<const double> x, std::size_t width) {
    check_tree(tree, x);

    std::vector<int> used;
    for (const auto& node : tree.nodes)
        if (!node.is_leaf() &&
            std::find(used.begin(), used.end(), node.feature) == used.end())
            used.push_back(node.feature);
    std::sort(used.begin(), used.end());
    const auto k = used.size();
    if (k > 15)
        throw Error(ErrorCode::TooManyFeatures,
                    std::to_string(k) + " distinct split features (limit 15)");

    std::vector<int> feature_bit(width, -1);
    for (std::size_t b = 0; b < k; ++b)
        feature_bit[static_cast<std::size_t>(used[b])] = static_cast<int>(b);

    // Coalition value: descend following x for in-coalition features, both
    // children weighted by sample counts otherwise.
    std::vector<double> memo(static_cast<std::size_t>(1) << k,
                             std::numeric_limits<double>::quiet_NaN());
    auto descend = [&](auto&& self, int node_idx, std::uint32_t mask) -> double {
        const auto& node = tree.nodes[static_cast<std::size_t>(node_idx)];
        if (node.is_leaf()) return node.value;
        const int bit = feature_bit[static_cast<std::size_t>(node.feature)];
        if (mask & (1u << bit))
            return x[static_cast<std::size_t>(node.feature)] <= node.threshold
                       ? self(self, node.left, mask)
                       : self(self, node.right, mask);
        const auto& left = tree.nodes[static_cast<std::size_t>(node.left)];
        const auto& right = tree.nodes[static_cast<std::size_t>(node.right)];
        return (left.n_samples * self(self, node.left, mask) +
                right.n_samples * self(self, node.right, mask)) /
               static_cast<double>(node.n_samples);
    };
    auto value = [&](std::uint32_t mask) {
        auto& slot = memo[mask];
        if (std::isnan(slot)) slot = descend(descend, 0, mask);
        return slot;
    };

    double factorial[16];
    factorial[0] = 1;
    for (int i = 1; i <= 15; ++i) factorial[i] = factorial[i - 1] * i;

    std::vector<double> phi(width, 0.0);
    const auto full = (static_cast<std::uint32_t>(1) << k) - 1;
    for (std::size_t b = 0; b < k; ++b) {
        const auto jbit = static_cast<std::uint32_t>(1) << b;
        double total = 0;
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            if (mask & jbit) continue;
            const int s = std::popcount(mask);
            const double w = factorial[s] * factorial[k - static_cast<std::size_t>(s) - 1] /
                             factorial[k];
            total += w * (value(mask | jbit) - value(mask));
        }
        phi[static_cast<std::size_t>(used[b])] = total;
    }
    return phi;
}

Attribution brute_force_shapley(const DecisionTree& tree, std::span<const double> x,
                                const std::vector<std::string>& feature_names) {
    auto phi = brute_force_shapley_values(tree, x, x.size());
    return make_attribution(phi, tree_base_value(tree), predict_tree(tree, x), feature_names);
}

Attribution forest_shap(const Forest& forest, std::span<const double> x) {
    if (forest.task != TreeTask::Regress)
        throw Error(ErrorCode::ShapeMismatch, "attributions are defined on regression forests");
    if (forest.trees.empty()) throw Error(ErrorCode::EmptyInput, "empty forest");

    std::vector<double> phi(x.size(), 0.0);
    double base = 0;
    for (const auto& tree : forest.trees) {
        auto tphi = tree_shap_values(tree, x, x.size());
        for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += tphi[i];
        base += tree_base_value(tree);
    }
    const auto n = static_cast<double>(forest.trees.size());
    for (auto& v : phi) v /= n;
    base /= n;
    return make_attribution(phi, base, predict_forest(forest, x), forest.feature_names);
}

std::vector<std::pair<std::string, double>> global_importance(
    const std::vector<Attribution>& attributions, std::size_t top_k) {
    if (attributions.empty()) throw Error(ErrorCode::EmptyInput, "no attributions");
    std::map<std::string, double> sums;
    for (const auto& a : attributions)
        for (const auto& [name, v] : a.shap) sums[name] += std::abs(v);
    std::vector<std::pair<std::string, double>> ranked(sums.begin(), sums.end());
    const auto n = static_cast<double>(attributions.size());
    for (auto& [_, v] : ranked) v /= n;
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);
    return ranked;
}

ExplanationReport explain_nation(const TwoStageModel& model, const FilledPanel& panel,
                                 const std::string& nation, int games_year, Scenario scenario) {
    const auto* rec = panel.find(nation, games_year);
    if (!rec)
        throw Error(ErrorCode::UnknownNation,
                    nation + " has no record for " + std::to_string(games_year));

    EncodingContext ctx = model.ctx;
    {
        std::vector<NationYearRecord> copies;
        for (const auto* r : panel.records_for(games_year)) copies.push_back(*r);
        extend_global_gdp(ctx, copies);
    }
    const auto x = encode_features(*rec, ctx, scenario);

    ExplanationReport report;
    report.nation = nation;
    report.scenario = scenario;
    report.games_year = games_year;
    report.gate_open = forest_vote_fraction(model.classifier, x) >= 0.5;
    if (report.gate_open) {
        report.attribution = forest_shap(model.regressor, x);
        report.prediction_log = report.attribution.prediction;
        report.prediction_medals = std::exp(report.prediction_log);
    }
    return report;
}

json ExplanationReport::to_json() const {
    json j{{"format_version", 1},
           {"nation", nation},
           {"scenario", scenario_name(scenario)},
           {"games_year", games_year},
           {"gate_open", gate_open}};
    if (gate_open) {
        j["base_value"] = attribution.base_value;
        j["prediction_log"] = prediction_log;
        j["prediction_medals"] = prediction_medals;
        j["contributions"] = attribution.to_json()["contributions"];
    }
    return j;
}

std::string ExplanationReport::to_text() const {
    std::ostringstream out;
    out << nation << ", Games " << games_year << ", scenario " << scenario_name(scenario) << "\n";
    if (!gate_open) {
        out << "gate closed: 0 medals, no CI, no attributions\n";
        return out.str();
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "base value        %+9.4f log(medals)\n",
                  attribution.base_value);
    out << buf;
    std::snprintf(buf, sizeof(buf), "prediction        %+9.4f log(medals)  (= %.2f medals, pre-rescale)\n",
                  prediction_log, prediction_medals);
    out << buf;
    out << "contributions (descending |value|):\n";
    std::vector<std::pair<std::string, double>> sorted(attribution.shap.begin(),
                                                       attribution.shap.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        const double am = std::abs(a.second), bm = std::abs(b.second);
        if (am != bm) return am > bm;
        return a.first < b.first;
    });
    for (const auto& [name, v] : sorted) {
        if (v == 0.0) continue;
        std::snprintf(buf, sizeof(buf), "  %-34s %+9.4f\n", name.c_str(), v);
        out << buf;
    }
    return out.str();
}

json Attribution::to_json() const {
    json contributions = json::array();
    std::vector<std::pair<std::string, double>> sorted(shap.begin(), shap.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        const double am = std::abs(a.second), bm = std::abs(b.second);
        if (am != bm) return am > bm;
        return a.first < b.first;
    });
    for (const auto& [name, v] : sorted)
        contributions.push_back({{"feature", name}, {"shap", v}});
    return json{{"base_value", base_value},
                {"prediction", prediction},
                {"contributions", std::move(contributions)}};
}

} // namespace medalcast
