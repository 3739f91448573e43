#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "probekit/common.hpp"

namespace probekit {

struct Example {
    std::string text;
    int label = 0;

    bool operator==(const Example&) const = default;
};

// Whitespace-token count; the length function used everywhere in prep.
inline size_t text_length(const std::string& text) { return split_ws(text).size(); }

struct DatasetSpec {
    std::string dataset_id;
    int train_size = 0;
    int test_size = 0;
    std::vector<int> label_set;
    int max_len = 0;
};

inline const std::vector<DatasetSpec>& builtin_specs() {
    static const std::vector<DatasetSpec> specs{
        {"imdb", 7000, 7000, {0, 1}, 132},
        {"sst2", 6920, 1821, {0, 1}, 56},
        {"rotten", 8530, 1066, {0, 1}, 59},
        {"emotion", 6000, 2000, {0, 1, 2, 3, 4, 5}, 64},
    };
    return specs;
}

inline const DatasetSpec& builtin_spec(const std::string& dataset_id) {
    for (const auto& spec : builtin_specs())
        if (spec.dataset_id == dataset_id) return spec;
    throw std::invalid_argument("unknown dataset: " + dataset_id);
}

inline const std::vector<std::string>& emotion_label_names() {
    static const std::vector<std::string> names{"Sadness", "Joy",  "Love",
                                                "Anger",   "Fear", "Surprise"};
    return names;
}

struct SplitStats {
    std::map<int, double> label_distribution;
    double avg_sentence_length = 0.0;
    int64_t n = 0;
};

inline SplitStats compute_stats(const std::vector<Example>& examples) {
    if (examples.empty()) throw EmptyDataset("cannot compute stats of an empty split");
    SplitStats stats;
    stats.n = static_cast<int64_t>(examples.size());
    std::map<int, int64_t> counts;
    int64_t total_len = 0;
    for (const auto& ex : examples) {
        counts[ex.label] += 1;
        total_len += static_cast<int64_t>(text_length(ex.text));
    }
    for (const auto& [label, count] : counts)
        stats.label_distribution[label] =
            static_cast<double>(count) / static_cast<double>(stats.n);
    stats.avg_sentence_length = static_cast<double>(total_len) / static_cast<double>(stats.n);
    return stats;
}

// quota_l = round(target * p_l), corrected largest-remainder so the quotas
// sum to the target exactly. Ties go to the lower label.
inline std::map<int, int> derive_quotas(const SplitStats& stats, int target) {
    std::map<int, int> quotas;
    std::vector<std::pair<double, int>> remainders;  // (fraction, label)
    int assigned = 0;
    for (const auto& [label, p] : stats.label_distribution) {
        const double ideal = target * p;
        const int base = static_cast<int>(std::floor(ideal));
        quotas[label] = base;
        assigned += base;
        remainders.emplace_back(ideal - base, label);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; i < target - assigned; ++i)
        quotas[remainders[static_cast<size_t>(i)].second] += 1;
    return quotas;
}

// Appendix-style reduction: compute quotas from the measured distribution,
// filter each label to texts within max_len, sample its quota, then shuffle
// the combined result. One sequential RNG drives all of it.
inline std::vector<Example> reduce_dataset(const std::vector<Example>& examples,
                                           const DatasetSpec& spec, int target,
                                           uint64_t seed) {
    if (examples.empty()) throw EmptyDataset("cannot reduce an empty split");
    if (target <= 0) throw std::invalid_argument("reduction target must be positive");

    const SplitStats stats = compute_stats(examples);
    const std::map<int, int> quotas = derive_quotas(stats, target);

    std::map<int, std::vector<size_t>> eligible;  // label -> in-length example indices
    for (size_t i = 0; i < examples.size(); ++i)
        if (text_length(examples[i].text) <= static_cast<size_t>(spec.max_len))
            eligible[examples[i].label].push_back(i);

    // Every quota is checked before anything is sampled or written.
    for (const auto& [label, quota] : quotas) {
        const auto it = eligible.find(label);
        const size_t have = it == eligible.end() ? 0 : it->second.size();
        if (have < static_cast<size_t>(quota))
            throw InsufficientSamples(strfmt("label %d: need %d in-length samples, have %zu",
                                             label, quota, have));
    }

    Rng rng(seed);
    std::vector<Example> reduced;
    reduced.reserve(static_cast<size_t>(target));
    for (const auto& [label, quota] : quotas) {
        std::vector<size_t> pool = eligible[label];
        rng.shuffle(pool);
        for (int k = 0; k < quota; ++k) reduced.push_back(examples[pool[static_cast<size_t>(k)]]);
    }
    rng.shuffle(reduced);
    return reduced;
}

struct ValidationReport {
    std::string dataset_id;
    SplitStats original;
    SplitStats reduced;
    int max_len = 0;
};

inline ValidationReport validate_reduction(const std::vector<Example>& reduced,
                                           const SplitStats& original_stats,
                                           const DatasetSpec& spec) {
    ValidationReport report;
    report.dataset_id = spec.dataset_id;
    report.original = original_stats;
    report.reduced = compute_stats(reduced);
    report.max_len = spec.max_len;

    if (report.reduced.avg_sentence_length > static_cast<double>(spec.max_len))
        throw LengthConstraintViolated(strfmt("average length %.3f exceeds bound %d",
                                              report.reduced.avg_sentence_length,
                                              spec.max_len));

    std::vector<int> labels;
    for (const auto& [label, p] : original_stats.label_distribution) labels.push_back(label);
    for (const auto& [label, p] : report.reduced.label_distribution)
        if (!original_stats.label_distribution.count(label)) labels.push_back(label);
    for (int label : labels) {
        const auto orig_it = original_stats.label_distribution.find(label);
        const auto red_it = report.reduced.label_distribution.find(label);
        const double p_orig = orig_it == original_stats.label_distribution.end()
                              ? 0.0 : orig_it->second;
        const double p_red = red_it == report.reduced.label_distribution.end()
                             ? 0.0 : red_it->second;
        if (std::fabs(p_orig - p_red) > 0.02)
            throw DistributionDrift(strfmt("label %d: proportion %.4f vs original %.4f",
                                           label, p_red, p_orig));
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSONL files: one {"text": ..., "label": ...} object per line.
// ---------------------------------------------------------------------------

inline std::string examples_to_jsonl(const std::vector<Example>& examples) {
    std::string out;
    for (const auto& ex : examples)
        out += nlohmann::json{{"text", ex.text}, {"label", ex.label}}.dump() + "\n";
    return out;
}

inline void save_jsonl(const std::string& path, const std::vector<Example>& examples) {
    write_text_file(path, examples_to_jsonl(examples));
}

inline std::vector<Example> load_jsonl(const std::string& path) {
    const std::string body = read_text_file(path);
    std::vector<Example> examples;
    size_t pos = 0;
    int line_no = 0;
    while (pos < body.size()) {
        size_t end = body.find('\n', pos);
        if (end == std::string::npos) end = body.size();
        const std::string line = strip(body.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
            examples.push_back({obj.at("text").get<std::string>(), obj.at("label").get<int>()});
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(strfmt("%s:%d: bad JSONL record: %s", path.c_str(),
                                            line_no, e.what()));
        }
    }
    if (examples.empty()) throw EmptyDataset("no records in " + path);
    return examples;
}

// ---------------------------------------------------------------------------
// Prep driver: reduce both splits, validate, and write files + reports.
// ---------------------------------------------------------------------------

inline nlohmann::json stats_to_json(const SplitStats& stats) {
    nlohmann::json dist = nlohmann::json::object();
    for (const auto& [label, p] : stats.label_distribution) dist[std::to_string(label)] = p;
    return {{"n", stats.n},
            {"avg_sentence_length", stats.avg_sentence_length},
            {"label_distribution", dist}};
}

inline std::string render_prep_report_text(const std::string& dataset_id,
                                           const ValidationReport& train,
                                           const ValidationReport& test) {
    std::string out = "dataset: " + dataset_id + "\n";
    const auto section = [&](const char* name, const ValidationReport& r) {
        out += strfmt("[%s]\n", name);
        out += strfmt("  size: %lld -> %lld\n", static_cast<long long>(r.original.n),
                      static_cast<long long>(r.reduced.n));
        out += strfmt("  avg length: %.3f -> %.3f (max_len %d)\n",
                      r.original.avg_sentence_length, r.reduced.avg_sentence_length,
                      r.max_len);
        out += "  label distribution:\n";
        for (const auto& [label, p] : r.original.label_distribution) {
            const auto it = r.reduced.label_distribution.find(label);
            const double reduced_p = it == r.reduced.label_distribution.end() ? 0.0 : it->second;
            out += strfmt("    %d: %.4f -> %.4f\n", label, p, reduced_p);
        }
    };
    section("train", train);
    section("test", test);
    return out;
}

struct PrepResult {
    std::vector<Example> train;
    std::vector<Example> test;
    ValidationReport train_report;
    ValidationReport test_report;
};

inline PrepResult prep_dataset(const std::vector<Example>& raw_train,
                               const std::vector<Example>& raw_test, const DatasetSpec& spec,
                               uint64_t seed, const std::string& out_dir) {
    PrepResult result;
    const SplitStats train_stats = compute_stats(raw_train);
    const SplitStats test_stats = compute_stats(raw_test);
    result.train = reduce_dataset(raw_train, spec, spec.train_size, seed);
    result.test = reduce_dataset(raw_test, spec, spec.test_size, seed);
    result.train_report = validate_reduction(result.train, train_stats, spec);
    result.test_report = validate_reduction(result.test, test_stats, spec);

    save_jsonl(out_dir + "/train.jsonl", result.train);
    save_jsonl(out_dir + "/test.jsonl", result.test);
    write_text_file(out_dir + "/report.txt",
                    render_prep_report_text(spec.dataset_id, result.train_report,
                                            result.test_report));
    nlohmann::json report{{"dataset_id", spec.dataset_id},
                          {"seed", seed},
                          {"train", {{"original", stats_to_json(result.train_report.original)},
                                     {"reduced", stats_to_json(result.train_report.reduced)}}},
                          {"test", {{"original", stats_to_json(result.test_report.original)},
                                    {"reduced", stats_to_json(result.test_report.reduced)}}}};
    write_text_file(out_dir + "/report.json", report.dump(2) + "\n");
    return result;
}

}  // namespace probekit
