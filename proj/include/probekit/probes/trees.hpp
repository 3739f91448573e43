#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "probekit/probes/base.hpp"

namespace probekit {

namespace detail {

struct TreeNode {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;  // go left when value <= threshold
    int left = -1, right = -1;
    double value = 0.0;      // class index or regression output
};

inline json tree_to_json(const std::vector<TreeNode>& nodes) {
    json arr = json::array();
    for (const auto& n : nodes)
        arr.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left},
                       {"r", n.right}, {"v", n.value}});
    return arr;
}

inline std::vector<TreeNode> tree_from_json(const json& arr) {
    std::vector<TreeNode> nodes;
    for (const auto& j : arr)
        nodes.push_back({j.at("f").get<int>(), j.at("t").get<double>(), j.at("l").get<int>(),
                         j.at("r").get<int>(), j.at("v").get<double>()});
    return nodes;
}

inline double tree_eval(const std::vector<TreeNode>& nodes, const double* x) {
    int cur = 0;
    while (nodes[cur].feature >= 0)
        cur = (x[nodes[cur].feature] <= nodes[cur].threshold) ? nodes[cur].left
                                                              : nodes[cur].right;
    return nodes[cur].value;
}

// CART split search shared by the classification tree and the forest.
// Ties in impurity go to the lower feature index, then lower threshold,
// which falls out of the strict > comparison and the scan order.
struct GiniSplit {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

inline GiniSplit best_gini_split(const MatD& x, const std::vector<int>& y, int num_classes,
                                 const std::vector<size_t>& idx,
                                 const std::vector<int>& features) {
    const size_t n = idx.size();
    std::vector<double> total(num_classes, 0.0);
    for (size_t i : idx) total[y[i]] += 1.0;
    double parent = 1.0;
    for (double c : total) parent -= (c / n) * (c / n);

    GiniSplit best;
    std::vector<std::pair<double, int>> vals(n);
    std::vector<double> left(num_classes);
    for (int f : features) {
        for (size_t t = 0; t < n; ++t) vals[t] = {x.at(idx[t], static_cast<size_t>(f)), y[idx[t]]};
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::fill(left.begin(), left.end(), 0.0);
        for (size_t t = 0; t + 1 < n; ++t) {
            left[vals[t].second] += 1.0;
            if (vals[t].first == vals[t + 1].first) continue;
            const double nl = static_cast<double>(t + 1);
            const double nr = static_cast<double>(n - t - 1);
            double gl = 1.0, gr = 1.0;
            for (int c = 0; c < num_classes; ++c) {
                const double l = left[c] / nl;
                const double r = (total[c] - left[c]) / nr;
                gl -= l * l;
                gr -= r * r;
            }
            const double gain = parent - (nl * gl + nr * gr) / n;
            if (gain > best.gain + 1e-12) {
                best.feature = f;
                best.threshold = vals[t].first + 0.5 * (vals[t + 1].first - vals[t].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

inline int majority_class(const std::vector<int>& y, const std::vector<size_t>& idx,
                          int num_classes) {
    std::vector<int> counts(num_classes, 0);
    for (size_t i : idx) counts[y[i]] += 1;
    int best = 0;
    for (int c = 1; c < num_classes; ++c)
        if (counts[c] > counts[best]) best = c;
    return best;
}

// Builds a gini CART tree; when feature_sample > 0 each node considers a
// random subset of that many features (the forest's decorrelation trick).
inline std::vector<TreeNode> build_gini_tree(const MatD& x, const std::vector<int>& y,
                                             int num_classes, std::vector<size_t> root_idx,
                                             int max_depth, int feature_sample, Rng& rng) {
    std::vector<TreeNode> nodes;
    struct Item {
        std::vector<size_t> idx;
        int node;
        int depth;
    };
    std::vector<Item> stack;
    nodes.emplace_back();
    stack.push_back({std::move(root_idx), 0, 0});
    std::vector<int> all_features(x.cols);
    std::iota(all_features.begin(), all_features.end(), 0);

    while (!stack.empty()) {
        Item item = std::move(stack.back());
        stack.pop_back();
        TreeNode& node = nodes[item.node];
        bool pure = true;
        for (size_t i : item.idx)
            if (y[i] != y[item.idx[0]]) { pure = false; break; }
        if (pure || item.depth >= max_depth || item.idx.size() < 2) {
            node.value = majority_class(y, item.idx, num_classes);
            continue;
        }
        std::vector<int> features = all_features;
        if (feature_sample > 0 && feature_sample < static_cast<int>(x.cols)) {
            rng.shuffle(features);
            features.resize(static_cast<size_t>(feature_sample));
            std::sort(features.begin(), features.end());
        }
        const GiniSplit split = best_gini_split(x, y, num_classes, item.idx, features);
        if (split.feature < 0) {
            node.value = majority_class(y, item.idx, num_classes);
            continue;
        }
        std::vector<size_t> li, ri;
        for (size_t i : item.idx)
            (x.at(i, static_cast<size_t>(split.feature)) <= split.threshold ? li : ri)
                .push_back(i);
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = static_cast<int>(nodes.size());
        node.right = node.left + 1;
        const int left_id = node.left, right_id = node.right;
        nodes.emplace_back();
        nodes.emplace_back();
        // Right pushed first so the left child is processed first (stable
        // rng consumption order for the forest's feature sampling).
        stack.push_back({std::move(ri), right_id, item.depth + 1});
        stack.push_back({std::move(li), left_id, item.depth + 1});
    }
    return nodes;
}

}  // namespace detail

class DecisionTree final : public Classifier {
public:
    explicit DecisionTree(int max_depth) : max_depth_(max_depth) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng& rng) override {
        k_ = num_classes;
        std::vector<size_t> idx(x.rows);
        std::iota(idx.begin(), idx.end(), 0);
        nodes_ = detail::build_gini_tree(x, y, num_classes, std::move(idx), max_depth_, 0, rng);
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        for (size_t i = 0; i < x.rows; ++i)
            out[i] = static_cast<int>(detail::tree_eval(nodes_, x.row(i)));
        return out;
    }

    json params_json() const override {
        return {{"tree", detail::tree_to_json(nodes_)}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        nodes_ = detail::tree_from_json(j.at("tree"));
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override { return nodes_.size() * 2; }

private:
    int max_depth_;
    int k_ = 0;
    std::vector<detail::TreeNode> nodes_;
};

class RandomForest final : public Classifier {
public:
    RandomForest(int max_depth, int n_estimators)
        : max_depth_(max_depth), n_estimators_(n_estimators) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng& rng) override {
        k_ = num_classes;
        trees_.clear();
        const int feature_sample =
            std::max(1, static_cast<int>(std::sqrt(static_cast<double>(x.cols))));
        for (int t = 0; t < n_estimators_; ++t) {
            Rng tree_rng(rng.next_u64());
            std::vector<size_t> boot(x.rows);
            for (auto& i : boot)
                i = static_cast<size_t>(tree_rng.uniform_int(0, static_cast<int64_t>(x.rows) - 1));
            trees_.push_back(detail::build_gini_tree(x, y, num_classes, std::move(boot),
                                                     max_depth_, feature_sample, tree_rng));
        }
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        std::vector<double> votes(k_);
        for (size_t i = 0; i < x.rows; ++i) {
            std::fill(votes.begin(), votes.end(), 0.0);
            for (const auto& t : trees_)
                votes[static_cast<int>(detail::tree_eval(t, x.row(i)))] += 1.0;
            out[i] = detail::argmax_lowest(votes.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        json arr = json::array();
        for (const auto& t : trees_) arr.push_back(detail::tree_to_json(t));
        return {{"trees", arr}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        trees_.clear();
        for (const auto& t : j.at("trees")) trees_.push_back(detail::tree_from_json(t));
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override {
        size_t n = 0;
        for (const auto& t : trees_) n += t.size() * 2;
        return n;
    }

private:
    int max_depth_;
    int n_estimators_;
    int k_ = 0;
    std::vector<std::vector<detail::TreeNode>> trees_;
};

// ---------------------------------------------------------------------------
// Gradient boosting with softmax loss and Newton leaf values. Two growth
// strategies share the machinery: variant A grows level-wise under a depth
// bound, variant B grows leaf-wise under a leaf-count budget.
// ---------------------------------------------------------------------------

namespace detail {

struct GradSplit {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

struct GradLeaf {
    int node;
    std::vector<size_t> idx;
    int depth;
    GradSplit split;  // best available split out of this leaf
};

inline double leaf_gain(double g, double h, double reg) { return g * g / (h + reg); }

inline GradSplit best_grad_split(const MatD& x, const std::vector<double>& g,
                                 const std::vector<double>& h, const std::vector<size_t>& idx,
                                 double reg, size_t min_child) {
    double gt = 0.0, ht = 0.0;
    for (size_t i : idx) {
        gt += g[i];
        ht += h[i];
    }
    const double base = leaf_gain(gt, ht, reg);
    GradSplit best;
    const size_t n = idx.size();
    std::vector<std::pair<double, size_t>> vals(n);
    for (size_t f = 0; f < x.cols; ++f) {
        for (size_t t = 0; t < n; ++t) vals[t] = {x.at(idx[t], f), idx[t]};
        std::sort(vals.begin(), vals.end());
        double gl = 0.0, hl = 0.0;
        for (size_t t = 0; t + 1 < n; ++t) {
            gl += g[vals[t].second];
            hl += h[vals[t].second];
            if (vals[t].first == vals[t + 1].first) continue;
            if (t + 1 < min_child || n - t - 1 < min_child) continue;
            const double gain =
                leaf_gain(gl, hl, reg) + leaf_gain(gt - gl, ht - hl, reg) - base;
            if (gain > best.gain + 1e-12) {
                best.feature = static_cast<int>(f);
                best.threshold = vals[t].first + 0.5 * (vals[t + 1].first - vals[t].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

inline double newton_value(const std::vector<double>& g, const std::vector<double>& h,
                           const std::vector<size_t>& idx, double reg) {
    double gt = 0.0, ht = 0.0;
    for (size_t i : idx) {
        gt += g[i];
        ht += h[i];
    }
    return -gt / (ht + reg);
}

inline std::vector<TreeNode> build_grad_tree(const MatD& x, const std::vector<double>& g,
                                             const std::vector<double>& h, int max_depth,
                                             int max_leaves, double reg) {
    constexpr size_t kMinChild = 4;
    std::vector<TreeNode> nodes;
    nodes.emplace_back();
    std::vector<GradLeaf> open;
    {
        std::vector<size_t> idx(x.rows);
        std::iota(idx.begin(), idx.end(), 0);
        GradLeaf root{0, std::move(idx), 0, {}};
        root.split = best_grad_split(x, g, h, root.idx, reg, kMinChild);
        open.push_back(std::move(root));
    }
    int leaves = 1;
    while (true) {
        // Pick the expandable leaf: leaf-wise takes the best gain anywhere,
        // level-wise (max_leaves == 0) takes the shallowest open leaf.
        int pick = -1;
        for (size_t i = 0; i < open.size(); ++i) {
            if (open[i].split.feature < 0) continue;
            if (max_leaves == 0 && open[i].depth >= max_depth) continue;
            if (pick < 0) { pick = static_cast<int>(i); continue; }
            if (max_leaves > 0) {
                if (open[i].split.gain > open[pick].split.gain) pick = static_cast<int>(i);
            } else {
                if (open[i].depth < open[pick].depth) pick = static_cast<int>(i);
            }
        }
        if (pick < 0) break;
        if (max_leaves > 0 && leaves >= max_leaves) break;

        GradLeaf leaf = std::move(open[static_cast<size_t>(pick)]);
        open.erase(open.begin() + pick);
        std::vector<size_t> li, ri;
        for (size_t i : leaf.idx)
            (x.at(i, static_cast<size_t>(leaf.split.feature)) <= leaf.split.threshold ? li
                                                                                      : ri)
                .push_back(i);
        const int left_id = static_cast<int>(nodes.size());
        const int right_id = left_id + 1;
        nodes[leaf.node].feature = leaf.split.feature;
        nodes[leaf.node].threshold = leaf.split.threshold;
        nodes[leaf.node].left = left_id;
        nodes[leaf.node].right = right_id;
        nodes.emplace_back();
        nodes.emplace_back();
        GradLeaf l{left_id, std::move(li), leaf.depth + 1, {}};
        GradLeaf r{right_id, std::move(ri), leaf.depth + 1, {}};
        l.split = best_grad_split(x, g, h, l.idx, reg, kMinChild);
        r.split = best_grad_split(x, g, h, r.idx, reg, kMinChild);
        open.push_back(std::move(l));
        open.push_back(std::move(r));
        leaves += 1;
    }
    for (const auto& leaf : open)
        nodes[leaf.node].value = newton_value(g, h, leaf.idx, reg);
    return nodes;
}

}  // namespace detail

class GradientBoostedTrees final : public Classifier {
public:
    // Exactly one of max_depth (level-wise) / max_leaves (leaf-wise) is set.
    GradientBoostedTrees(int n_estimators, int max_depth, int max_leaves)
        : n_estimators_(n_estimators), max_depth_(max_depth), max_leaves_(max_leaves) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng&) override {
        const size_t n = x.rows;
        k_ = num_classes;
        trees_.assign(k_, {});
        MatD f(n, k_);
        std::vector<double> p(k_), g(n), h(n);
        constexpr double kLr = 0.1;
        constexpr double kReg = 1.0;
        for (int round = 0; round < n_estimators_; ++round) {
            for (int c = 0; c < k_; ++c) {
                for (size_t i = 0; i < n; ++i) {
                    for (int cc = 0; cc < k_; ++cc) p[cc] = f.at(i, cc);
                    detail::softmax_inplace(p);
                    g[i] = p[c] - (y[i] == c ? 1.0 : 0.0);
                    h[i] = std::max(p[c] * (1.0 - p[c]), 1e-9);
                }
                auto tree = detail::build_grad_tree(x, g, h, max_depth_, max_leaves_, kReg);
                for (size_t i = 0; i < n; ++i)
                    f.at(i, c) += kLr * detail::tree_eval(tree, x.row(i));
                trees_[c].push_back(std::move(tree));
            }
        }
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        std::vector<double> s(k_);
        for (size_t i = 0; i < x.rows; ++i) {
            for (int c = 0; c < k_; ++c) {
                s[c] = 0.0;
                for (const auto& t : trees_[c]) s[c] += 0.1 * detail::tree_eval(t, x.row(i));
            }
            out[i] = detail::argmax_lowest(s.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        json per_class = json::array();
        for (const auto& cls : trees_) {
            json arr = json::array();
            for (const auto& t : cls) arr.push_back(detail::tree_to_json(t));
            per_class.push_back(arr);
        }
        return {{"trees", per_class}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        k_ = j.at("num_classes").get<int>();
        trees_.clear();
        for (const auto& cls : j.at("trees")) {
            trees_.emplace_back();
            for (const auto& t : cls) trees_.back().push_back(detail::tree_from_json(t));
        }
    }
    size_t fitted_param_count() const override {
        size_t n = 0;
        for (const auto& cls : trees_)
            for (const auto& t : cls) n += t.size() * 2;
        return n;
    }

private:
    int n_estimators_;
    int max_depth_;
    int max_leaves_;
    int k_ = 0;
    std::vector<std::vector<std::vector<detail::TreeNode>>> trees_;  // [class][round]
};

}  // namespace probekit
