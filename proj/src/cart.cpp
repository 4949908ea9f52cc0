#include "medalcast/cart.hpp"

#include "medalcast/errors.hpp"
#include "medalcast/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

using nlohmann::json;

namespace medalcast {

namespace {

// Treat gains within this band as tied; ties resolve to the candidate seen
// first, i.e. lowest feature index then lowest threshold.
constexpr double kGainEps = 1e-12;

bool strictly_better(double gain, double best) {
    return gain > best + kGainEps * std::max(1.0, std::abs(best));
}

} // namespace

int DecisionTree::max_feature_index() const {
    int m = -1;
    for (const auto& node : nodes)
        if (!node.is_leaf()) m = std::max(m, node.feature);
    return m;
}

std::optional<SplitChoice> best_split(const Matrix& X, const std::vector<double>& y,
                                      std::span<const std::size_t> samples,
                                      std::span<const int> features, TreeTask task) {
    const std::size_t n = samples.size();
    if (n < 2) return std::nullopt;

    double total_sum = 0;
    std::size_t total_pos = 0;
    for (auto s : samples) {
        total_sum += y[s];
        total_pos += y[s] > 0.5 ? 1 : 0;
    }

    std::optional<SplitChoice> best;
    std::vector<std::pair<double, double>> col(n); // (feature value, target)
    for (int f : features) {
        for (std::size_t i = 0; i < n; ++i) {
            col[i].first = X[samples[i]][static_cast<std::size_t>(f)];
            col[i].second = y[samples[i]];
        }
        std::sort(col.begin(), col.end());

        double left_sum = 0;
        std::size_t left_pos = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += col[i].second;
            left_pos += col[i].second > 0.5 ? 1 : 0;
            if (col[i].first == col[i + 1].first) continue;

            const auto nl = static_cast<double>(i + 1);
            const auto nr = static_cast<double>(n - i - 1);
            double gain;
            if (task == TreeTask::Regress) {
                const double right_sum = total_sum - left_sum;
                // between-group sum of squares, normalized to impurity units
                gain = (left_sum * left_sum / nl + right_sum * right_sum / nr -
                        total_sum * total_sum / static_cast<double>(n)) /
                       static_cast<double>(n);
            } else {
                auto purity = [](double pos, double cnt) {
                    const double p = pos / cnt;
                    const double q = 1.0 - p;
                    return p * p + q * q; // 1 - gini
                };
                const auto lp = static_cast<double>(left_pos);
                const auto rp = static_cast<double>(total_pos - left_pos);
                const auto nn = static_cast<double>(n);
                gain = (nl / nn) * purity(lp, nl) + (nr / nn) * purity(rp, nr) -
                       purity(static_cast<double>(total_pos), nn);
            }
            if (gain <= kGainEps) continue;
            if (!best || strictly_better(gain, best->gain)) {
                double mid = col[i].first + (col[i + 1].first - col[i].first) / 2.0;
                if (mid >= col[i + 1].first) mid = col[i].first; // adjacent doubles
                best = SplitChoice{f, mid, gain};
            }
        }
    }
    return best;
}

namespace {

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const std::vector<double>& y, TreeTask task,
                const TreeParams& params)
        : X_(X), y_(y), task_(task), params_(params), rng_(params.seed) {
        n_features_ = static_cast<int>(X[0].size());
        all_features_.resize(static_cast<std::size_t>(n_features_));
        for (int f = 0; f < n_features_; ++f) all_features_[static_cast<std::size_t>(f)] = f;
    }

    DecisionTree run() {
        DecisionTree tree;
        tree.task = task_;
        std::vector<std::size_t> samples(X_.size());
        for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = i;
        build(tree, samples, 0);
        return tree;
    }

    DecisionTree run(std::vector<std::size_t> samples) {
        DecisionTree tree;
        tree.task = task_;
        build(tree, samples, 0);
        return tree;
    }

private:
    int build(DecisionTree& tree, std::vector<std::size_t>& samples, int depth) {
        const int idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.max_depth_seen = std::max(tree.max_depth_seen, depth);

        const auto n = samples.size();
        double sum = 0;
        bool constant = true;
        for (auto s : samples) {
            sum += y_[s];
            constant = constant && y_[s] == y_[samples[0]];
        }
        tree.nodes[static_cast<std::size_t>(idx)].n_samples = static_cast<int>(n);
        tree.nodes[static_cast<std::size_t>(idx)].value = sum / static_cast<double>(n);

        const bool depth_capped = params_.max_depth && depth >= *params_.max_depth;
        if (constant || n < static_cast<std::size_t>(params_.min_samples_split) || depth_capped)
            return idx;

        auto features = pick_features();
        auto split = best_split(X_, y_, samples, features, task_);
        if (!split) return idx;

        std::vector<std::size_t> left, right;
        left.reserve(n);
        right.reserve(n);
        for (auto s : samples)
            (X_[s][static_cast<std::size_t>(split->feature)] <= split->threshold ? left : right)
                .push_back(s);

        tree.nodes[static_cast<std::size_t>(idx)].feature = split->feature;
        tree.nodes[static_cast<std::size_t>(idx)].threshold = split->threshold;
        const int l = build(tree, left, depth + 1);
        tree.nodes[static_cast<std::size_t>(idx)].left = l;
        const int r = build(tree, right, depth + 1);
        tree.nodes[static_cast<std::size_t>(idx)].right = r;
        return idx;
    }

    std::vector<int> pick_features() {
        if (params_.max_features == MaxFeatures::All) return all_features_;
        const int k = std::max(1, static_cast<int>(std::floor(std::sqrt(n_features_))));
        std::vector<int> pool = all_features_;
        for (int i = 0; i < k; ++i) {
            const auto j =
                static_cast<std::size_t>(i) +
                static_cast<std::size_t>(rng_.below(static_cast<std::uint64_t>(n_features_ - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        }
        pool.resize(static_cast<std::size_t>(k));
        std::sort(pool.begin(), pool.end()); // scan order fixes tie-breaking
        return pool;
    }

    const Matrix& X_;
    const std::vector<double>& y_;
    TreeTask task_;
    const TreeParams& params_;
    Rng rng_;
    int n_features_ = 0;
    std::vector<int> all_features_;
};

void check_inputs(const Matrix& X, const std::vector<double>& y, TreeTask task) {
    if (X.empty()) throw Error(ErrorCode::EmptyInput, "no training rows");
    const auto width = X[0].size();
    if (width == 0) throw Error(ErrorCode::EmptyInput, "zero-width rows");
    for (const auto& row : X)
        if (row.size() != width)
            throw Error(ErrorCode::ShapeMismatch, "ragged feature rows");
    if (y.size() != X.size())
        throw Error(ErrorCode::ShapeMismatch, "X has " + std::to_string(X.size()) +
                                                  " rows, y has " + std::to_string(y.size()));
    if (task == TreeTask::Classify)
        for (double v : y)
            if (v != 0.0 && v != 1.0)
                throw Error(ErrorCode::ShapeMismatch, "classification targets must be 0/1");
    for (double v : y)
        if (!std::isfinite(v))
            throw Error(ErrorCode::ShapeMismatch, "non-finite target");
}

} // namespace

DecisionTree fit_tree(const Matrix& X, const std::vector<double>& y, TreeTask task,
                      const TreeParams& params) {
    check_inputs(X, y, task);
    return TreeBuilder(X, y, task, params).run();
}

DecisionTree fit_tree_on(const Matrix& X, const std::vector<double>& y, TreeTask task,
                         const TreeParams& params, std::vector<std::size_t> samples) {
    check_inputs(X, y, task);
    if (samples.empty()) throw Error(ErrorCode::EmptyInput, "empty bootstrap sample");
    return TreeBuilder(X, y, task, params).run(std::move(samples));
}

double predict_tree(const DecisionTree& tree, std::span<const double> x) {
    if (tree.nodes.empty()) throw Error(ErrorCode::EmptyInput, "empty tree");
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf()) {
        const auto f = static_cast<std::size_t>(node->feature);
        if (f >= x.size())
            throw Error(ErrorCode::FeatureOutOfRange,
                        "feature " + std::to_string(node->feature) + " beyond row width " +
                            std::to_string(x.size()));
        node = x[f] <= node->threshold ? &tree.nodes[static_cast<std::size_t>(node->left)]
                                       : &tree.nodes[static_cast<std::size_t>(node->right)];
    }
    return node->value;
}

json tree_to_json(const DecisionTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes)
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.n_samples, n.value});
    return json{{"format_version", 1},
                {"task", tree.task == TreeTask::Classify ? "classify" : "regress"},
                {"max_depth_seen", tree.max_depth_seen},
                {"nodes", std::move(nodes)}};
}

DecisionTree tree_from_json(const json& j) {
    DecisionTree tree;
    tree.task = j.at("task").get<std::string>() == "classify" ? TreeTask::Classify
                                                              : TreeTask::Regress;
    tree.max_depth_seen = j.value("max_depth_seen", 0);
    for (const auto& n : j.at("nodes")) {
        TreeNode node;
        node.feature = n[0].get<int>();
        node.threshold = n[1].get<double>();
        node.left = n[2].get<int>();
        node.right = n[3].get<int>();
        node.n_samples = n[4].get<int>();
        node.value = n[5].get<double>();
        tree.nodes.push_back(node);
    }
    return tree;
}

} // namespace medalcast
