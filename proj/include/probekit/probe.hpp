#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "probekit/pooling.hpp"
#include "probekit/probes/base.hpp"
#include "probekit/probes/kernel.hpp"
#include "probekit/probes/linear.hpp"
#include "probekit/probes/neighbors.hpp"
#include "probekit/probes/neural.hpp"
#include "probekit/probes/trees.hpp"

namespace probekit {

enum class ClassifierId {
    logistic_regression,
    linear_svm,
    knn,
    decision_tree,
    random_forest,
    gradient_boosted_trees_A,
    gradient_boosted_trees_B,
    mlp,
    bilstm,
    cnn,
    kernel_svm,
    gaussian_nb,
};

inline const std::vector<ClassifierId>& all_classifiers() {
    static const std::vector<ClassifierId> v{
        ClassifierId::logistic_regression, ClassifierId::linear_svm,
        ClassifierId::knn,                 ClassifierId::decision_tree,
        ClassifierId::random_forest,       ClassifierId::gradient_boosted_trees_A,
        ClassifierId::gradient_boosted_trees_B, ClassifierId::mlp,
        ClassifierId::bilstm,              ClassifierId::cnn,
        ClassifierId::kernel_svm,          ClassifierId::gaussian_nb};
    return v;
}

inline std::string to_string(ClassifierId id) {
    switch (id) {
        case ClassifierId::logistic_regression: return "logistic_regression";
        case ClassifierId::linear_svm: return "linear_svm";
        case ClassifierId::knn: return "knn";
        case ClassifierId::decision_tree: return "decision_tree";
        case ClassifierId::random_forest: return "random_forest";
        case ClassifierId::gradient_boosted_trees_A: return "gradient_boosted_trees_A";
        case ClassifierId::gradient_boosted_trees_B: return "gradient_boosted_trees_B";
        case ClassifierId::mlp: return "mlp";
        case ClassifierId::bilstm: return "bilstm";
        case ClassifierId::cnn: return "cnn";
        case ClassifierId::kernel_svm: return "kernel_svm";
        case ClassifierId::gaussian_nb: return "gaussian_nb";
    }
    throw std::invalid_argument("bad classifier enum");
}

inline ClassifierId classifier_from_string(const std::string& s) {
    for (ClassifierId id : all_classifiers())
        if (to_string(id) == s) return id;
    throw std::invalid_argument("unknown classifier: " + s);
}

// Family buckets used in documentation and report grouping.
inline std::string cluster_of(ClassifierId id) {
    switch (id) {
        case ClassifierId::logistic_regression:
        case ClassifierId::linear_svm: return "Linear";
        case ClassifierId::knn: return "Distance-based";
        case ClassifierId::decision_tree:
        case ClassifierId::random_forest:
        case ClassifierId::gradient_boosted_trees_A:
        case ClassifierId::gradient_boosted_trees_B: return "Tree-based";
        case ClassifierId::mlp:
        case ClassifierId::bilstm:
        case ClassifierId::cnn: return "Neural Network";
        case ClassifierId::kernel_svm:
        case ClassifierId::gaussian_nb: return "Other";
    }
    throw std::invalid_argument("bad classifier enum");
}

inline std::string display_name(ClassifierId id) {
    switch (id) {
        case ClassifierId::logistic_regression: return "Logistic Regression";
        case ClassifierId::linear_svm: return "Linear SVM";
        case ClassifierId::knn: return "KNN";
        case ClassifierId::decision_tree: return "Decision Tree";
        case ClassifierId::random_forest: return "Random Forest";
        case ClassifierId::gradient_boosted_trees_A: return "GBT-A";
        case ClassifierId::gradient_boosted_trees_B: return "GBT-B";
        case ClassifierId::mlp: return "MLP";
        case ClassifierId::bilstm: return "BiLSTM";
        case ClassifierId::cnn: return "CNN";
        case ClassifierId::kernel_svm: return "Non-linear SVM";
        case ClassifierId::gaussian_nb: return "Gaussian NB";
    }
    throw std::invalid_argument("bad classifier enum");
}

// ---------------------------------------------------------------------------
// Hyperparameter search spaces.
// ---------------------------------------------------------------------------

struct HyperAxis {
    enum class Kind { log_uniform, int_set, str_set };
    Kind kind = Kind::log_uniform;
    double lo = 0.0, hi = 0.0;
    std::vector<int64_t> ints;
    std::vector<std::string> strs;

    static HyperAxis log_range(double lo, double hi) {
        HyperAxis a;
        a.kind = Kind::log_uniform;
        a.lo = lo;
        a.hi = hi;
        return a;
    }
    static HyperAxis int_choices(std::vector<int64_t> v) {
        HyperAxis a;
        a.kind = Kind::int_set;
        a.ints = std::move(v);
        return a;
    }
    static HyperAxis str_choices(std::vector<std::string> v) {
        HyperAxis a;
        a.kind = Kind::str_set;
        a.strs = std::move(v);
        return a;
    }

    bool contains(const json& v) const {
        switch (kind) {
            case Kind::log_uniform:
                return v.is_number() && v.get<double>() >= lo && v.get<double>() <= hi;
            case Kind::int_set:
                if (!v.is_number_integer()) return false;
                for (int64_t i : ints)
                    if (i == v.get<int64_t>()) return true;
                return false;
            case Kind::str_set:
                if (!v.is_string()) return false;
                for (const auto& s : strs)
                    if (s == v.get<std::string>()) return true;
                return false;
        }
        return false;
    }
};

using SearchSpace = std::map<std::string, HyperAxis>;

inline SearchSpace default_search_space(ClassifierId id) {
    const auto reg = HyperAxis::log_range(1e-3, 1e2);
    const auto depth = HyperAxis::int_choices({3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    const auto estimators = HyperAxis::int_choices({50, 100, 200});
    switch (id) {
        case ClassifierId::logistic_regression:
        case ClassifierId::linear_svm: return {{"reg_strength", reg}};
        case ClassifierId::knn: return {{"n_neighbors", HyperAxis::int_choices({3, 5, 7, 11})}};
        case ClassifierId::decision_tree: return {{"max_depth", depth}};
        case ClassifierId::random_forest: return {{"max_depth", depth}};
        case ClassifierId::gradient_boosted_trees_A:
            return {{"max_depth", depth}, {"n_estimators", estimators}};
        case ClassifierId::gradient_boosted_trees_B:
            return {{"max_leaves", HyperAxis::int_choices({7, 15, 31})},
                    {"n_estimators", estimators}};
        case ClassifierId::mlp:
            return {{"hidden_width", HyperAxis::int_choices({64, 128, 256})}};
        case ClassifierId::bilstm:
            return {{"hidden_width", HyperAxis::int_choices({8, 16, 32})}};
        case ClassifierId::cnn: return {{"channels", HyperAxis::int_choices({8, 16, 32})}};
        case ClassifierId::kernel_svm:
            return {{"kernel", HyperAxis::str_choices({"rbf", "poly"})}, {"reg_strength", reg}};
        case ClassifierId::gaussian_nb:
            return {{"var_smoothing", HyperAxis::log_range(1e-10, 1e-6)}};
    }
    throw std::invalid_argument("bad classifier enum");
}

inline json sample_config(const SearchSpace& space, Rng& rng) {
    json cfg = json::object();
    for (const auto& [name, axis] : space) {
        switch (axis.kind) {
            case HyperAxis::Kind::log_uniform:
                cfg[name] = rng.log_uniform(axis.lo, axis.hi);
                break;
            case HyperAxis::Kind::int_set:
                cfg[name] = axis.ints[static_cast<size_t>(
                    rng.uniform_int(0, static_cast<int64_t>(axis.ints.size()) - 1))];
                break;
            case HyperAxis::Kind::str_set:
                cfg[name] = axis.strs[static_cast<size_t>(
                    rng.uniform_int(0, static_cast<int64_t>(axis.strs.size()) - 1))];
                break;
        }
    }
    return cfg;
}

inline bool config_in_space(const json& cfg, const SearchSpace& space) {
    if (cfg.size() != space.size()) return false;
    for (const auto& [name, axis] : space) {
        if (!cfg.contains(name) || !axis.contains(cfg.at(name))) return false;
    }
    return true;
}

// Trees are scale-invariant; everything else wants standardized features.
inline bool default_standardize(ClassifierId id) {
    switch (id) {
        case ClassifierId::decision_tree:
        case ClassifierId::random_forest:
        case ClassifierId::gradient_boosted_trees_A:
        case ClassifierId::gradient_boosted_trees_B: return false;
        default: return true;
    }
}

inline std::unique_ptr<Classifier> make_classifier(ClassifierId id, const json& hp) {
    switch (id) {
        case ClassifierId::logistic_regression:
            return std::make_unique<LogisticRegression>(hp.value("reg_strength", 1.0));
        case ClassifierId::linear_svm:
            return std::make_unique<LinearSvm>(hp.value("reg_strength", 1.0));
        case ClassifierId::knn:
            return std::make_unique<Knn>(hp.value("n_neighbors", 5));
        case ClassifierId::decision_tree:
            return std::make_unique<DecisionTree>(hp.value("max_depth", 6));
        case ClassifierId::random_forest:
            return std::make_unique<RandomForest>(hp.value("max_depth", 6),
                                                  hp.value("n_estimators", 100));
        case ClassifierId::gradient_boosted_trees_A:
            return std::make_unique<GradientBoostedTrees>(hp.value("n_estimators", 100),
                                                          hp.value("max_depth", 6), 0);
        case ClassifierId::gradient_boosted_trees_B:
            return std::make_unique<GradientBoostedTrees>(hp.value("n_estimators", 100), 0,
                                                          hp.value("max_leaves", 15));
        case ClassifierId::mlp:
            return std::make_unique<Mlp>(hp.value("hidden_width", 128));
        case ClassifierId::bilstm:
            return std::make_unique<BiLstm>(hp.value("hidden_width", 16));
        case ClassifierId::cnn:
            return std::make_unique<Cnn>(hp.value("channels", 16));
        case ClassifierId::kernel_svm:
            return std::make_unique<KernelSvm>(hp.value("kernel", std::string("rbf")),
                                               hp.value("reg_strength", 1.0));
        case ClassifierId::gaussian_nb:
            return std::make_unique<GaussianNb>(hp.value("var_smoothing", 1e-9));
    }
    throw std::invalid_argument("bad classifier enum");
}

// ---------------------------------------------------------------------------
// Probe spec, training, evaluation.
// ---------------------------------------------------------------------------

struct ProbeSpec {
    ClassifierId classifier_id = ClassifierId::logistic_regression;
    SearchSpace search_space;
    int trials = 5;
    uint64_t seed = 42;
    bool standardize = true;

    static ProbeSpec defaults(ClassifierId id, uint64_t seed = 42) {
        ProbeSpec s;
        s.classifier_id = id;
        s.search_space = default_search_space(id);
        s.standardize = default_standardize(id);
        s.seed = seed;
        if (s.trials < 1) throw std::invalid_argument("trials must be >= 1");
        return s;
    }
};

struct Standardizer {
    std::vector<double> mean, std_dev;

    void fit(const MatD& x, const std::vector<size_t>& idx) {
        mean.assign(x.cols, 0.0);
        std_dev.assign(x.cols, 0.0);
        for (size_t i : idx)
            for (size_t j = 0; j < x.cols; ++j) mean[j] += x.at(i, j);
        for (size_t j = 0; j < x.cols; ++j) mean[j] /= static_cast<double>(idx.size());
        for (size_t i : idx)
            for (size_t j = 0; j < x.cols; ++j) {
                const double diff = x.at(i, j) - mean[j];
                std_dev[j] += diff * diff;
            }
        for (size_t j = 0; j < x.cols; ++j) {
            std_dev[j] = std::sqrt(std_dev[j] / static_cast<double>(idx.size()));
            if (std_dev[j] < 1e-12) std_dev[j] = 1.0;
        }
    }

    MatD transform(const MatD& x, const std::vector<size_t>& idx) const {
        MatD out(idx.size(), x.cols);
        for (size_t r = 0; r < idx.size(); ++r)
            for (size_t j = 0; j < x.cols; ++j)
                out.at(r, j) = (x.at(idx[r], j) - mean[j]) / std_dev[j];
        return out;
    }
};

struct ProbeResult {
    double accuracy = 0.0;
    int64_t correct = 0;
    int layer = 0;
    Pooling pooling = Pooling::mean;
    ClassifierId classifier_id = ClassifierId::logistic_regression;
    uint64_t seed = 42;
    int64_t train_size = 0;
    int64_t test_size = 0;
};

struct TrainedProbe {
    ProbeSpec spec;
    json chosen_hyperparams;
    int64_t input_dim = 0;
    int num_classes = 0;
    std::vector<int32_t> label_set;  // sorted; classifier class i <-> label_set[i]
    Standardizer standardizer;       // meaningful when spec.standardize
    std::unique_ptr<Classifier> model;
    double validation_accuracy = 0.0;
    int64_t train_size = 0;
};

namespace detail {

inline std::vector<size_t> all_rows(size_t n) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

// Per-class shuffles are seeded from the class's own index set, so the split
// depends on where each class sits, never on what the class is called.
inline void stratified_split(const std::vector<int>& y, double train_frac, uint64_t seed,
                             std::vector<size_t>& train_idx, std::vector<size_t>& val_idx) {
    std::map<int, std::vector<size_t>> groups;
    for (size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(i);
    train_idx.clear();
    val_idx.clear();
    for (auto& [cls, idx] : groups) {
        Rng rng(seed ^ fnv1a64(idx));
        rng.shuffle(idx);
        const size_t n_train =
            std::max<size_t>(1, static_cast<size_t>(train_frac * static_cast<double>(idx.size())));
        for (size_t t = 0; t < idx.size(); ++t)
            (t < n_train ? train_idx : val_idx).push_back(idx[t]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
}

inline MatD to_f64(const MatF& x) {
    MatD out(x.rows, x.cols);
    for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = static_cast<double>(x.data[i]);
    return out;
}

inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    return fnv1a64(&seed, sizeof(seed), fnv1a64(&salt, sizeof(salt)));
}

struct FitOnce {
    std::unique_ptr<Classifier> model;
    Standardizer stats;
};

inline FitOnce fit_once(ClassifierId id, const json& hp, bool standardize, const MatD& x,
                        const std::vector<int>& y_int, const std::vector<size_t>& rows,
                        int num_classes, uint64_t fit_seed) {
    FitOnce out;
    MatD xt;
    if (standardize) {
        out.stats.fit(x, rows);
        xt = out.stats.transform(x, rows);
    } else {
        xt = MatD(rows.size(), x.cols);
        for (size_t r = 0; r < rows.size(); ++r)
            std::copy(x.row(rows[r]), x.row(rows[r]) + x.cols, xt.row(r));
    }
    std::vector<int> yt(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) yt[r] = y_int[rows[r]];
    out.model = make_classifier(id, hp);
    Rng rng(fit_seed);
    out.model->fit(xt, yt, num_classes, rng);
    return out;
}

inline double score_subset(const FitOnce& fitted, bool standardize, const MatD& x,
                           const std::vector<int>& y_int, const std::vector<size_t>& rows) {
    if (rows.empty()) return 0.0;
    MatD xq;
    if (standardize) {
        xq = fitted.stats.transform(x, rows);
    } else {
        xq = MatD(rows.size(), x.cols);
        for (size_t r = 0; r < rows.size(); ++r)
            std::copy(x.row(rows[r]), x.row(rows[r]) + x.cols, xq.row(r));
    }
    const auto pred = fitted.model->predict(xq);
    int64_t correct = 0;
    for (size_t r = 0; r < rows.size(); ++r)
        if (pred[r] == y_int[rows[r]]) correct += 1;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace detail

inline TrainedProbe fit_probe(const MatD& features, const std::vector<int32_t>& labels,
                              const ProbeSpec& spec) {
    if (features.rows != labels.size())
        throw DimensionMismatch(strfmt("%zu feature rows, %zu labels", features.rows,
                                       labels.size()));
    if (spec.trials < 1) throw std::invalid_argument("trials must be >= 1");

    std::set<int32_t> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw SingleClassTraining("training labels are all identical");

    TrainedProbe probe;
    probe.spec = spec;
    probe.input_dim = static_cast<int64_t>(features.cols);
    probe.label_set.assign(distinct.begin(), distinct.end());
    probe.num_classes = static_cast<int>(probe.label_set.size());
    probe.train_size = static_cast<int64_t>(features.rows);

    std::map<int32_t, int> to_internal;
    for (size_t i = 0; i < probe.label_set.size(); ++i)
        to_internal[probe.label_set[i]] = static_cast<int>(i);
    std::vector<int> y(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) y[i] = to_internal[labels[i]];

    std::vector<size_t> train_idx, val_idx;
    detail::stratified_split(y, 0.8, spec.seed, train_idx, val_idx);

    // All trial configurations are drawn up front so the sampling stream
    // cannot be perturbed by anything a particular fit does.
    Rng sampler(detail::derive_seed(spec.seed, 0x5eedc0de));
    std::vector<json> configs;
    for (int t = 0; t < spec.trials; ++t) configs.push_back(sample_config(spec.search_space, sampler));

    int best_trial = 0;
    double best_acc = -1.0;
    for (int t = 0; t < spec.trials; ++t) {
        const auto fitted =
            detail::fit_once(spec.classifier_id, configs[t], spec.standardize, features, y,
                             train_idx, probe.num_classes, detail::derive_seed(spec.seed, t));
        const auto& score_rows = val_idx.empty() ? train_idx : val_idx;
        const double acc = detail::score_subset(fitted, spec.standardize, features, y, score_rows);
        if (acc > best_acc) {  // strict: ties keep the earlier trial
            best_acc = acc;
            best_trial = t;
        }
    }

    probe.chosen_hyperparams = configs[best_trial];
    probe.validation_accuracy = best_acc;
    auto final_fit = detail::fit_once(spec.classifier_id, probe.chosen_hyperparams,
                                      spec.standardize, features, y,
                                      detail::all_rows(features.rows), probe.num_classes,
                                      detail::derive_seed(spec.seed, 0xf17a1));
    probe.model = std::move(final_fit.model);
    probe.standardizer = final_fit.stats;
    return probe;
}

inline TrainedProbe fit_probe(const PooledFeatures& features, const std::vector<int32_t>& labels,
                              const ProbeSpec& spec) {
    return fit_probe(detail::to_f64(features.values), labels, spec);
}

inline std::vector<int32_t> predict_probe(const TrainedProbe& probe, const MatD& features) {
    if (static_cast<int64_t>(features.cols) != probe.input_dim)
        throw DimensionMismatch(strfmt("probe expects dim %lld, got %zu",
                                       static_cast<long long>(probe.input_dim), features.cols));
    MatD xq;
    if (probe.spec.standardize) {
        xq = probe.standardizer.transform(features, detail::all_rows(features.rows));
    } else {
        xq = features;
    }
    const auto internal = probe.model->predict(xq);
    std::vector<int32_t> out(internal.size());
    for (size_t i = 0; i < internal.size(); ++i) out[i] = probe.label_set[internal[i]];
    return out;
}

inline std::vector<int32_t> predict_probe(const TrainedProbe& probe,
                                          const PooledFeatures& features) {
    return predict_probe(probe, detail::to_f64(features.values));
}

inline ProbeResult evaluate_probe(const TrainedProbe& probe, const MatD& features,
                                  const std::vector<int32_t>& labels) {
    if (features.rows == 0) throw EmptyTestSet("no test rows");
    if (features.rows != labels.size())
        throw DimensionMismatch(strfmt("%zu feature rows, %zu labels", features.rows,
                                       labels.size()));
    const auto pred = predict_probe(probe, features);
    ProbeResult r;
    for (size_t i = 0; i < labels.size(); ++i)
        if (pred[i] == labels[i]) r.correct += 1;
    r.test_size = static_cast<int64_t>(labels.size());
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.test_size);
    r.classifier_id = probe.spec.classifier_id;
    r.seed = probe.spec.seed;
    r.train_size = probe.train_size;
    return r;
}

inline ProbeResult evaluate_probe(const TrainedProbe& probe, const PooledFeatures& features,
                                  const std::vector<int32_t>& labels) {
    ProbeResult r = evaluate_probe(probe, detail::to_f64(features.values), labels);
    r.layer = features.layer;
    r.pooling = features.method;
    return r;
}

// Accuracy of always answering the most frequent training label.
inline double majority_baseline(const std::vector<int32_t>& train_labels,
                                const std::vector<int32_t>& test_labels) {
    if (train_labels.empty() || test_labels.empty()) throw EmptyTestSet("empty labels");
    std::map<int32_t, int64_t> counts;
    for (int32_t l : train_labels) counts[l] += 1;
    int32_t majority = counts.begin()->first;
    for (const auto& [label, c] : counts)
        if (c > counts[majority]) majority = label;
    int64_t correct = 0;
    for (int32_t l : test_labels)
        if (l == majority) correct += 1;
    return static_cast<double>(correct) / static_cast<double>(test_labels.size());
}

// ---------------------------------------------------------------------------
// Probe serialization: one self-describing JSON file.
// ---------------------------------------------------------------------------

inline void save_probe(const TrainedProbe& probe, const std::string& path) {
    json j{
        {"classifier_id", to_string(probe.spec.classifier_id)},
        {"chosen_hyperparams", probe.chosen_hyperparams},
        {"input_dim", probe.input_dim},
        {"num_classes", probe.num_classes},
        {"label_set", probe.label_set},
        {"standardize", probe.spec.standardize},
        {"trials", probe.spec.trials},
        {"seed", probe.spec.seed},
        {"validation_accuracy", probe.validation_accuracy},
        {"train_size", probe.train_size},
        {"feat_mean", probe.standardizer.mean},
        {"feat_std", probe.standardizer.std_dev},
        {"params", probe.model->params_json()},
    };
    write_text_file(path, j.dump() + "\n");
}

inline TrainedProbe load_probe(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("probe file: ") + e.what());
    }
    TrainedProbe probe;
    try {
        const ClassifierId id = classifier_from_string(j.at("classifier_id").get<std::string>());
        probe.spec = ProbeSpec::defaults(id, j.at("seed").get<uint64_t>());
        probe.spec.trials = j.at("trials").get<int>();
        probe.spec.standardize = j.at("standardize").get<bool>();
        probe.chosen_hyperparams = j.at("chosen_hyperparams");
        probe.input_dim = j.at("input_dim").get<int64_t>();
        probe.num_classes = j.at("num_classes").get<int>();
        probe.label_set = j.at("label_set").get<std::vector<int32_t>>();
        probe.validation_accuracy = j.at("validation_accuracy").get<double>();
        probe.train_size = j.at("train_size").get<int64_t>();
        probe.standardizer.mean = j.at("feat_mean").get<std::vector<double>>();
        probe.standardizer.std_dev = j.at("feat_std").get<std::vector<double>>();
        probe.model = make_classifier(id, probe.chosen_hyperparams);
        probe.model->load_params(j.at("params"));
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("probe file: ") + e.what());
    }
    return probe;
}

}  // namespace probekit
