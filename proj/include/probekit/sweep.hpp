#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "probekit/probe.hpp"
#include "probekit/svg.hpp"

namespace probekit {

struct SweepGrid {
    std::vector<int> layers;
    std::vector<Pooling> poolings;
    std::vector<ClassifierId> classifiers;
    uint64_t seed = 42;
    int trials = 5;
    int workers = 1;  // scheduling knob only, never affects results
};

struct SweepCell {
    ProbeResult result;
    std::string status = "ok";  // "ok" or "failed(reason)"
    double wall_ms = 0.0;

    bool ok() const { return status == "ok"; }
};

struct SweepReport {
    std::string model_id;
    std::string dataset_id;
    uint64_t seed = 42;
    double majority_baseline = 0.0;
    std::vector<SweepCell> cells;
    std::optional<ProbeResult> best;
};

inline int pooling_rank(Pooling p) {
    switch (p) {
        case Pooling::mean: return 0;
        case Pooling::attention: return 1;
        case Pooling::concat: return 2;
        case Pooling::max: return 3;
        case Pooling::min: return 4;
        case Pooling::last: return 5;
    }
    return 6;
}

// Higher accuracy wins; ties prefer the lower layer (cheaper truncation),
// then the pooling order above, then the classifier name.
inline bool better_cell(const ProbeResult& a, const ProbeResult& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    if (a.layer != b.layer) return a.layer < b.layer;
    if (pooling_rank(a.pooling) != pooling_rank(b.pooling))
        return pooling_rank(a.pooling) < pooling_rank(b.pooling);
    return to_string(a.classifier_id) < to_string(b.classifier_id);
}

inline ProbeResult select_best(const SweepReport& report) {
    const ProbeResult* best = nullptr;
    for (const auto& cell : report.cells) {
        if (!cell.ok()) continue;
        if (!best || better_cell(cell.result, *best)) best = &cell.result;
    }
    if (!best) throw AllCellsFailed("no grid cell completed successfully");
    return *best;
}

inline SweepReport run_sweep(const ActivationStore& train_store,
                             const ActivationStore& test_store, const SweepGrid& grid) {
    if (grid.layers.empty() || grid.poolings.empty() || grid.classifiers.empty())
        throw std::invalid_argument("sweep grid has an empty axis");
    if (train_store.model_id != test_store.model_id)
        throw StoreMismatch("model_id differs between train and test stores");
    if (train_store.hidden_dim != test_store.hidden_dim)
        throw StoreMismatch("hidden_dim differs between train and test stores");
    if (train_store.label_set() != test_store.label_set())
        throw StoreMismatch("label sets differ between train and test stores");
    for (int l : grid.layers)
        if (!train_store.has_layer(l) || !test_store.has_layer(l))
            throw StoreMismatch("layer " + std::to_string(l) + " missing from a store");

    SweepReport report;
    report.model_id = train_store.model_id;
    report.dataset_id = train_store.dataset_id;
    report.seed = grid.seed;
    report.majority_baseline = majority_baseline(train_store.labels, test_store.labels);

    // Pool once per (layer, pooling); every classifier in the cell reuses it.
    std::map<std::pair<int, Pooling>, std::pair<PooledFeatures, PooledFeatures>> features;
    for (int layer : grid.layers)
        for (Pooling pooling : grid.poolings)
            features.emplace(std::make_pair(layer, pooling),
                             std::make_pair(pool_store(train_store, layer, pooling),
                                            pool_store(test_store, layer, pooling)));

    report.cells.resize(grid.layers.size() * grid.poolings.size() * grid.classifiers.size());
    auto run_cell = [&](size_t flat) {
        const size_t n_cls = grid.classifiers.size();
        const size_t n_pool = grid.poolings.size();
        const int layer = grid.layers[flat / (n_pool * n_cls)];
        const Pooling pooling = grid.poolings[(flat / n_cls) % n_pool];
        const ClassifierId classifier = grid.classifiers[flat % n_cls];
        const auto& [train_feats, test_feats] = features.at({layer, pooling});

        SweepCell cell;
        cell.result.layer = layer;
        cell.result.pooling = pooling;
        cell.result.classifier_id = classifier;
        cell.result.seed = grid.seed;
        cell.result.train_size = static_cast<int64_t>(train_feats.values.rows);
        cell.result.test_size = static_cast<int64_t>(test_feats.values.rows);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            ProbeSpec spec = ProbeSpec::defaults(classifier, grid.seed);
            spec.trials = grid.trials;
            const TrainedProbe probe = fit_probe(train_feats, train_store.labels, spec);
            cell.result = evaluate_probe(probe, test_feats, test_store.labels);
        } catch (const std::exception& e) {
            cell.status = std::string("failed(") + e.what() + ")";
        }
        cell.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        report.cells[flat] = std::move(cell);
    };

    const int workers = std::max(1, grid.workers);
    if (workers == 1) {
        for (size_t i = 0; i < report.cells.size(); ++i) run_cell(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (size_t i = static_cast<size_t>(w); i < report.cells.size();
                     i += static_cast<size_t>(workers))
                    run_cell(i);
            });
        for (auto& t : pool) t.join();
    }

    bool any_ok = false;
    for (const auto& c : report.cells) any_ok = any_ok || c.ok();
    if (any_ok) report.best = select_best(report);
    return report;
}

// ---------------------------------------------------------------------------
// Rendering: cells CSV, per-pooling curve plots, top-3 table.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_safe(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace detail

inline std::string cells_csv(const SweepReport& report) {
    std::string out =
        "model_id,dataset_id,layer,pooling,classifier,accuracy,seed,train_size,test_size,"
        "wall_ms,status\n";
    for (const auto& cell : report.cells) {
        const auto& r = cell.result;
        out += strfmt("%s,%s,%d,%s,%s,%.6f,%llu,%lld,%lld,%.3f,%s\n",
                      detail::csv_safe(report.model_id).c_str(),
                      detail::csv_safe(report.dataset_id).c_str(), r.layer,
                      to_string(r.pooling).c_str(), to_string(r.classifier_id).c_str(),
                      r.accuracy, static_cast<unsigned long long>(r.seed),
                      static_cast<long long>(r.train_size), static_cast<long long>(r.test_size),
                      cell.wall_ms, detail::csv_safe(cell.status).c_str());
    }
    return out;
}

inline std::string top3_table(const SweepReport& report) {
    std::vector<const ProbeResult*> ok;
    for (const auto& c : report.cells)
        if (c.ok()) ok.push_back(&c.result);
    std::sort(ok.begin(), ok.end(),
              [](const ProbeResult* a, const ProbeResult* b) { return better_cell(*a, *b); });
    std::string out = "Model,Dataset,Layer,Prober,Pooling,Accuracy\n";
    for (size_t i = 0; i < ok.size() && i < 3; ++i)
        out += strfmt("%s,%s,%d,%s,%s,%.4f\n", detail::csv_safe(report.model_id).c_str(),
                      detail::csv_safe(report.dataset_id).c_str(), ok[i]->layer,
                      display_name(ok[i]->classifier_id).c_str(),
                      display_name(ok[i]->pooling).c_str(), ok[i]->accuracy);
    return out;
}

inline json report_to_json(const SweepReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells)
        cells.push_back({{"layer", c.result.layer},
                         {"pooling", to_string(c.result.pooling)},
                         {"classifier", to_string(c.result.classifier_id)},
                         {"accuracy", c.result.accuracy},
                         {"correct", c.result.correct},
                         {"seed", c.result.seed},
                         {"train_size", c.result.train_size},
                         {"test_size", c.result.test_size},
                         {"wall_ms", c.wall_ms},
                         {"status", c.status}});
    json j{{"model_id", report.model_id},
           {"dataset_id", report.dataset_id},
           {"seed", report.seed},
           {"majority_baseline", report.majority_baseline},
           {"cells", cells}};
    if (report.best) {
        j["best"] = {{"layer", report.best->layer},
                     {"pooling", to_string(report.best->pooling)},
                     {"classifier", to_string(report.best->classifier_id)},
                     {"accuracy", report.best->accuracy}};
    }
    return j;
}

inline SweepReport report_from_json(const json& j) {
    SweepReport report;
    try {
        report.model_id = j.at("model_id").get<std::string>();
        report.dataset_id = j.at("dataset_id").get<std::string>();
        report.seed = j.at("seed").get<uint64_t>();
        report.majority_baseline = j.at("majority_baseline").get<double>();
        for (const auto& c : j.at("cells")) {
            SweepCell cell;
            cell.result.layer = c.at("layer").get<int>();
            cell.result.pooling = pooling_from_string(c.at("pooling").get<std::string>());
            cell.result.classifier_id =
                classifier_from_string(c.at("classifier").get<std::string>());
            cell.result.accuracy = c.at("accuracy").get<double>();
            cell.result.correct = c.at("correct").get<int64_t>();
            cell.result.seed = c.at("seed").get<uint64_t>();
            cell.result.train_size = c.at("train_size").get<int64_t>();
            cell.result.test_size = c.at("test_size").get<int64_t>();
            cell.wall_ms = c.at("wall_ms").get<double>();
            cell.status = c.at("status").get<std::string>();
            report.cells.push_back(std::move(cell));
        }
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("report file: ") + e.what());
    }
    bool any_ok = false;
    for (const auto& c : report.cells) any_ok = any_ok || c.ok();
    if (any_ok) report.best = select_best(report);
    return report;
}

inline void render_report(const SweepReport& report, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputNotWritable(dir);

    write_text_file(dir + "/cells.csv", cells_csv(report));
    write_text_file(dir + "/top3.csv", top3_table(report));
    write_text_file(dir + "/report.json", report_to_json(report).dump(2) + "\n");

    // One plot per pooling: accuracy vs layer, one series per classifier,
    // with a min/max envelope across classifiers.
    std::vector<Pooling> poolings;
    std::vector<int> layers;
    std::vector<ClassifierId> classifiers;
    for (const auto& c : report.cells) {
        if (std::find(poolings.begin(), poolings.end(), c.result.pooling) == poolings.end())
            poolings.push_back(c.result.pooling);
        if (std::find(layers.begin(), layers.end(), c.result.layer) == layers.end())
            layers.push_back(c.result.layer);
        if (std::find(classifiers.begin(), classifiers.end(), c.result.classifier_id) ==
            classifiers.end())
            classifiers.push_back(c.result.classifier_id);
    }
    std::sort(layers.begin(), layers.end());

    for (Pooling pooling : poolings) {
        LinePlot plot;
        plot.title = report.model_id + " / " + report.dataset_id + " / " +
                     display_name(pooling) + " pooling";
        plot.x_label = "layer";
        plot.y_label = "accuracy";
        for (ClassifierId cls : classifiers) {
            LinePlot::Series s;
            s.name = display_name(cls);
            for (int layer : layers) {
                for (const auto& c : report.cells) {
                    if (!c.ok() || c.result.pooling != pooling || c.result.layer != layer ||
                        c.result.classifier_id != cls)
                        continue;
                    s.xs.push_back(layer);
                    s.ys.push_back(c.result.accuracy);
                }
            }
            if (!s.xs.empty()) plot.series.push_back(std::move(s));
        }
        for (int layer : layers) {
            double lo = 2.0, hi = -1.0;
            for (const auto& c : report.cells) {
                if (!c.ok() || c.result.pooling != pooling || c.result.layer != layer) continue;
                lo = std::min(lo, c.result.accuracy);
                hi = std::max(hi, c.result.accuracy);
            }
            if (hi >= 0.0) {
                plot.band_x.push_back(layer);
                plot.band_lo.push_back(lo);
                plot.band_hi.push_back(hi);
            }
        }
        write_text_file(dir + "/plot_" + to_string(pooling) + ".svg", plot.render());
    }
}

}  // namespace probekit
