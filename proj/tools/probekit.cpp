#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "probekit/probekit.hpp"

namespace fs = std::filesystem;
using namespace probekit;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t end = s.find(',', pos);
        if (end == std::string::npos) end = s.size();
        const std::string item = strip(s.substr(pos, end - pos));
        if (!item.empty()) out.push_back(item);
        pos = end + 1;
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (const auto& item : split_csv(s)) out.push_back(std::stoi(item));
    return out;
}

// Flag wins over config; a required value missing from both raises
// ConfigParseError naming the field.
std::string pick(const RunConfig& cfg, const std::string& sec, const std::string& key,
                 const CLI::Option* opt, const std::string& flag_value) {
    if (opt->count() > 0) return flag_value;
    return cfg.get(sec, key);
}

std::string pick_or(const RunConfig& cfg, const std::string& sec, const std::string& key,
                    const CLI::Option* opt, const std::string& flag_value,
                    const std::string& fallback) {
    if (opt->count() > 0) return flag_value;
    return cfg.get_or(sec, key, fallback);
}

void prepare_out_dir(const std::string& out, const RunConfig& cfg, bool config_loaded) {
    fs::create_directories(out);
    if (config_loaded) save_config(out + "/config.ini", cfg);
}

std::vector<std::string> texts_of(const std::vector<Example>& examples) {
    std::vector<std::string> texts;
    for (const auto& ex : examples) texts.push_back(ex.text);
    return texts;
}

std::vector<int32_t> labels_of(const std::vector<Example>& examples) {
    std::vector<int32_t> labels;
    for (const auto& ex : examples) labels.push_back(ex.label);
    return labels;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"probekit: hidden-state sentiment probing toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed_flag = 42;
    app.add_option("--config", config_path, "sectioned key/value config file")->expected(1);
    CLI::Option* seed_opt = app.add_option("--seed", seed_flag, "global random seed");

    // prep
    auto* prep = app.add_subcommand("prep", "reduce a dataset split pair");
    std::string prep_dataset_id, prep_in, prep_out;
    auto* prep_dataset_opt = prep->add_option("--dataset", prep_dataset_id, "imdb|sst2|rotten|emotion");
    auto* prep_in_opt = prep->add_option("--in", prep_in, "dir with raw train.jsonl/test.jsonl");
    auto* prep_out_opt = prep->add_option("--out", prep_out, "output directory");

    // extract
    auto* extract = app.add_subcommand("extract", "run the model and store residual activations");
    std::string ex_model, ex_data, ex_layers, ex_out, ex_dataset_id;
    int ex_batch = 8;
    auto* ex_model_opt = extract->add_option("--model", ex_model, "model file");
    auto* ex_data_opt = extract->add_option("--data", ex_data, "labeled JSONL file");
    auto* ex_layers_opt = extract->add_option("--layers", ex_layers, "comma list, e.g. 0,2,4");
    auto* ex_out_opt = extract->add_option("--out", ex_out, "store directory");
    auto* ex_dsid_opt = extract->add_option("--dataset-id", ex_dataset_id, "dataset id tag");
    extract->add_option("--batch-size", ex_batch, "extraction chunk size");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "grid-search layers x poolings x classifiers");
    std::string sw_train, sw_test, sw_layers, sw_poolings, sw_classifiers, sw_out;
    int sw_trials = 5, sw_workers = 1;
    auto* sw_train_opt = sweep->add_option("--train-store", sw_train, "training store dir");
    auto* sw_test_opt = sweep->add_option("--test-store", sw_test, "test store dir");
    auto* sw_layers_opt = sweep->add_option("--layers", sw_layers, "comma list of layers");
    auto* sw_pool_opt = sweep->add_option("--poolings", sw_poolings, "comma list of poolings");
    auto* sw_cls_opt = sweep->add_option("--classifiers", sw_classifiers, "comma list of classifier ids");
    auto* sw_out_opt = sweep->add_option("--out", sw_out, "report directory");
    sweep->add_option("--trials", sw_trials, "hyperparameter trials per cell");
    sweep->add_option("--workers", sw_workers, "sweep worker threads");

    // report
    auto* report_cmd = app.add_subcommand("report", "re-render files from a saved report");
    std::string rp_report, rp_out;
    auto* rp_report_opt = report_cmd->add_option("--report", rp_report, "report.json path");
    auto* rp_out_opt = report_cmd->add_option("--out", rp_out, "output directory");

    // build
    auto* build = app.add_subcommand("build", "assemble a truncated pipeline");
    std::string bd_model, bd_pooling = "mean", bd_head, bd_labels, bd_out;
    int bd_cut = -1;
    auto* bd_model_opt = build->add_option("--model", bd_model, "full model file");
    auto* bd_cut_opt = build->add_option("--cut-layer", bd_cut, "blocks to keep");
    auto* bd_pool_opt = build->add_option("--pooling", bd_pooling, "pooling method");
    auto* bd_head_opt = build->add_option("--head", bd_head, "trained probe JSON");
    build->add_option("--labels", bd_labels, "comma list of label names");
    auto* bd_out_opt = build->add_option("--out", bd_out, "pipeline directory");

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "run a truncated pipeline on texts");
    std::string cl_pipeline, cl_data, cl_out;
    std::vector<std::string> cl_texts;
    auto* cl_pipe_opt = classify_cmd->add_option("--pipeline", cl_pipeline, "pipeline directory");
    classify_cmd->add_option("--text", cl_texts, "text to classify (repeatable)");
    classify_cmd->add_option("--data", cl_data, "labeled JSONL file to score");
    classify_cmd->add_option("--out", cl_out, "optional output directory");

    // eval-prompt
    auto* evalp = app.add_subcommand("eval-prompt", "score a prompting baseline");
    std::string ep_model, ep_template, ep_data, ep_out, ep_stub;
    int ep_max_new = 0;
    auto* ep_model_opt = evalp->add_option("--model", ep_model, "chat model file");
    auto* ep_tpl_opt = evalp->add_option("--template", ep_template, "template id, e.g. zs_binary");
    auto* ep_data_opt = evalp->add_option("--data", ep_data, "labeled JSONL file");
    auto* ep_out_opt = evalp->add_option("--out", ep_out, "output directory");
    evalp->add_option("--max-new-tokens", ep_max_new, "decode budget (0 = template default)");
    evalp->add_option("--stub-reply", ep_stub, "bypass the model with a fixed reply");

    // bench
    auto* bench = app.add_subcommand("bench", "measure latency, throughput, peak memory");
    std::string bn_mode, bn_pipeline, bn_model, bn_template = "zs_binary", bn_data, bn_out;
    std::string bn_device = "cpu";
    std::vector<std::string> bn_refs;
    double bn_sleep_ms = 10.0;
    int bn_iters = 10, bn_warmup = 2, bn_batch = 1;
    auto* bn_mode_opt = bench->add_option("--mode", bn_mode, "pipeline|prompt|sleep");
    bench->add_option("--pipeline", bn_pipeline, "pipeline directory (pipeline mode)");
    bench->add_option("--model", bn_model, "model file (prompt mode)");
    bench->add_option("--template", bn_template, "template id (prompt mode)");
    bench->add_option("--data", bn_data, "JSONL sample of texts");
    bench->add_option("--sleep-ms", bn_sleep_ms, "per-sample cost (sleep mode)");
    bench->add_option("--iters", bn_iters, "measured iterations");
    bench->add_option("--warmup", bn_warmup, "warmup iterations");
    bench->add_option("--batch-size", bn_batch, "samples per iteration");
    bench->add_option("--device", bn_device, "compute device");
    bench->add_option("--ref", bn_refs, "reference row label,peak_mb,ms,sps (repeatable)");
    auto* bn_out_opt = bench->add_option("--out", bn_out, "output directory");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig cfg;
        const bool config_loaded = !config_path.empty();
        if (config_loaded) cfg = load_config(config_path);
        const uint64_t seed = resolve_seed(config_loaded ? &cfg : nullptr,
                                           seed_opt->count() > 0, seed_flag);

        if (prep->parsed()) {
            const std::string dataset_id = pick(cfg, "prep", "dataset", prep_dataset_opt, prep_dataset_id);
            const std::string in_dir = pick(cfg, "prep", "in", prep_in_opt, prep_in);
            const std::string out = pick(cfg, "prep", "out", prep_out_opt, prep_out);
            const DatasetSpec& spec = builtin_spec(dataset_id);
            prepare_out_dir(out, cfg, config_loaded);
            const auto raw_train = load_jsonl(in_dir + "/train.jsonl");
            const auto raw_test = load_jsonl(in_dir + "/test.jsonl");
            const auto result = prep_dataset(raw_train, raw_test, spec, seed, out);
            std::cout << strfmt("prep %s: train %zu test %zu -> %s\n", dataset_id.c_str(),
                                result.train.size(), result.test.size(), out.c_str());
        } else if (extract->parsed()) {
            const std::string model_path = pick(cfg, "extract", "model", ex_model_opt, ex_model);
            const std::string data_path = pick(cfg, "extract", "data", ex_data_opt, ex_data);
            const std::string layers_raw = pick(cfg, "extract", "layers", ex_layers_opt, ex_layers);
            const std::string out = pick(cfg, "extract", "out", ex_out_opt, ex_out);
            const std::string dsid = pick_or(cfg, "extract", "dataset_id", ex_dsid_opt,
                                             ex_dataset_id, fs::path(data_path).stem().string());
            const auto model = ToyTransformer::load(model_path);
            const auto examples = load_jsonl(data_path);
            const TokenizerConfig tok{model.config.vocab_size, model.config.max_seq_len};
            const auto batch = tokenize(texts_of(examples), tok);
            const auto store = extract_activations(model, batch, parse_int_list(layers_raw),
                                                   labels_of(examples), dsid, seed, ex_batch);
            prepare_out_dir(out, cfg, config_loaded);
            save_store(store, out);
            std::cout << strfmt("extract: %lld examples x %zu layers -> %s\n",
                                static_cast<long long>(store.num_examples),
                                store.layer_ids().size(), out.c_str());
        } else if (sweep->parsed()) {
            const std::string train_dir = pick(cfg, "sweep", "train_store", sw_train_opt, sw_train);
            const std::string test_dir = pick(cfg, "sweep", "test_store", sw_test_opt, sw_test);
            const auto train_store = load_store(train_dir);
            const auto test_store = load_store(test_dir);

            SweepGrid grid;
            std::string layers_raw;
            if (sw_layers_opt->count() > 0 || cfg.has("sweep", "layers"))
                layers_raw = pick(cfg, "sweep", "layers", sw_layers_opt, sw_layers);
            if (layers_raw.empty())
                for (int l : train_store.layer_ids()) grid.layers.push_back(l);
            else
                grid.layers = parse_int_list(layers_raw);
            const std::string pool_raw = pick_or(cfg, "sweep", "poolings", sw_pool_opt, sw_poolings,
                                                 "mean,last,max,min,concat,attention");
            for (const auto& p : split_csv(pool_raw)) grid.poolings.push_back(pooling_from_string(p));
            std::string cls_raw = pick_or(cfg, "sweep", "classifiers", sw_cls_opt, sw_classifiers, "");
            if (cls_raw.empty())
                grid.classifiers = all_classifiers();
            else
                for (const auto& c : split_csv(cls_raw)) grid.classifiers.push_back(classifier_from_string(c));
            grid.seed = seed;
            grid.trials = static_cast<int>(cfg.get_int_or("sweep", "trials", sw_trials));
            grid.workers = static_cast<int>(cfg.get_int_or("sweep", "workers", sw_workers));

            const std::string out = pick(cfg, "sweep", "out", sw_out_opt, sw_out);
            prepare_out_dir(out, cfg, config_loaded);
            const SweepReport report = run_sweep(train_store, test_store, grid);
            render_report(report, out);
            if (report.best) {
                ProbeSpec spec = ProbeSpec::defaults(report.best->classifier_id, grid.seed);
                spec.trials = grid.trials;
                const auto features = pool_store(train_store, report.best->layer, report.best->pooling);
                const auto probe = fit_probe(features, train_store.labels, spec);
                save_probe(probe, out + "/best_probe.json");
                std::cout << strfmt("sweep: best layer %d %s %s accuracy %.4f -> %s\n",
                                    report.best->layer,
                                    to_string(report.best->pooling).c_str(),
                                    to_string(report.best->classifier_id).c_str(),
                                    report.best->accuracy, out.c_str());
            } else {
                std::cout << "sweep: every cell failed; see " << out << "/cells.csv\n";
            }
        } else if (report_cmd->parsed()) {
            const std::string in = pick(cfg, "report", "report", rp_report_opt, rp_report);
            const std::string out = pick(cfg, "report", "out", rp_out_opt, rp_out);
            const auto report = report_from_json(nlohmann::json::parse(read_text_file(in)));
            prepare_out_dir(out, cfg, config_loaded);
            render_report(report, out);
            std::cout << strfmt("report: %zu cells -> %s\n", report.cells.size(), out.c_str());
        } else if (build->parsed()) {
            const std::string model_path = pick(cfg, "build", "model", bd_model_opt, bd_model);
            const std::string head_path = pick(cfg, "build", "head", bd_head_opt, bd_head);
            const std::string out = pick(cfg, "build", "out", bd_out_opt, bd_out);
            const int cut = bd_cut_opt->count() > 0 ? bd_cut
                                                    : static_cast<int>(cfg.get_int("build", "cut_layer"));
            const Pooling pooling = pooling_from_string(
                pick_or(cfg, "build", "pooling", bd_pool_opt, bd_pooling, "mean"));
            auto head = load_probe(head_path);
            const auto pipeline = build_truncated(model_path, cut, pooling, std::move(head),
                                                  split_csv(bd_labels));
            prepare_out_dir(out, cfg, config_loaded);
            save_pipeline(pipeline, out);
            std::cout << strfmt("build: kept %lld of %lld params (%.2f%% reduction) -> %s\n",
                                static_cast<long long>(pipeline.plan.kept_params),
                                static_cast<long long>(pipeline.plan.full_params),
                                pipeline.plan.reduction_pct, out.c_str());
        } else if (classify_cmd->parsed()) {
            const std::string dir = pick(cfg, "classify", "pipeline", cl_pipe_opt, cl_pipeline);
            const auto pipeline = load_pipeline(dir);
            std::vector<std::string> texts = cl_texts;
            std::vector<int32_t> golds;
            if (!cl_data.empty()) {
                const auto examples = load_jsonl(cl_data);
                for (const auto& ex : examples) {
                    texts.push_back(ex.text);
                    golds.push_back(ex.label);
                }
            }
            if (texts.empty()) throw EmptyInput("no --text or --data inputs given");
            const auto labels = classify(pipeline, texts);
            const auto names = classify_names(pipeline, texts);
            std::string lines;
            for (size_t i = 0; i < texts.size(); ++i)
                lines += strfmt("%d\t%s\n", labels[i], names[i].c_str());
            std::cout << lines;
            if (!golds.empty() && cl_texts.empty()) {
                int64_t correct = 0;
                for (size_t i = 0; i < golds.size(); ++i)
                    if (labels[i] == golds[i]) correct += 1;
                std::cout << strfmt("accuracy %.4f over %zu examples\n",
                                    static_cast<double>(correct) / static_cast<double>(golds.size()),
                                    golds.size());
            }
            if (!cl_out.empty()) {
                prepare_out_dir(cl_out, cfg, config_loaded);
                write_text_file(cl_out + "/predictions.tsv", lines);
            }
        } else if (evalp->parsed()) {
            const std::string tpl_raw = pick(cfg, "eval-prompt", "template", ep_tpl_opt, ep_template);
            const std::string data_path = pick(cfg, "eval-prompt", "data", ep_data_opt, ep_data);
            const std::string out = pick(cfg, "eval-prompt", "out", ep_out_opt, ep_out);
            const TemplateId tpl = template_from_string(tpl_raw);
            std::vector<PromptExample> dataset;
            for (const auto& ex : load_jsonl(data_path)) dataset.push_back({ex.text, ex.label});

            std::unique_ptr<ChatGenerator> generator;
            std::unique_ptr<ToyTransformer> model;
            if (!ep_stub.empty()) {
                generator = std::make_unique<StubConstantGenerator>(ep_stub);
            } else {
                const std::string model_path = pick(cfg, "eval-prompt", "model", ep_model_opt, ep_model);
                model = std::make_unique<ToyTransformer>(ToyTransformer::load(model_path));
                generator = std::make_unique<ToyChatGenerator>(*model);
            }
            const auto result = evaluate_prompting(*generator, dataset, tpl, ep_max_new);
            prepare_out_dir(out, cfg, config_loaded);
            write_text_file(out + "/log.jsonl", prompt_log_jsonl(result));
            nlohmann::json metrics{{"template", tpl_raw},
                                   {"accuracy", result.accuracy},
                                   {"unparseable_rate", result.unparseable_rate},
                                   {"n", dataset.size()}};
            write_text_file(out + "/metrics.json", metrics.dump(2) + "\n");
            std::cout << strfmt("eval-prompt %s: accuracy %.4f unparseable %.4f\n",
                                tpl_raw.c_str(), result.accuracy, result.unparseable_rate);
        } else if (bench->parsed()) {
            const std::string mode = pick(cfg, "bench", "mode", bn_mode_opt, bn_mode);
            if (mode != "pipeline" && mode != "prompt" && mode != "sleep")
                throw ConfigParseError("bench mode must be pipeline|prompt|sleep, got: " + mode);
            std::vector<std::string> sample;
            if (!bn_data.empty())
                sample = texts_of(load_jsonl(bn_data));
            else if (mode == "sleep")
                sample = {"stub sample"};
            else
                throw ConfigParseError("missing config field: [bench] data");

            RunnerFactory factory;
            std::string runner_id;
            if (mode == "sleep") {
                const double ms = bn_sleep_ms;
                runner_id = "sleep_stub";
                factory = [ms] { return std::make_unique<SleepStubRunner>(ms); };
            } else if (mode == "pipeline") {
                const std::string dir = bn_pipeline.empty() ? cfg.get("bench", "pipeline") : bn_pipeline;
                runner_id = "pipeline:" + dir;
                factory = [dir, runner_id]() -> std::unique_ptr<BenchRunner> {
                    auto pipeline = std::make_shared<TruncatedPipeline>(load_pipeline(dir));
                    return std::make_unique<LambdaRunner>(
                        runner_id, [pipeline](const std::vector<std::string>& batch) {
                            classify(*pipeline, batch);
                        });
                };
            } else if (mode == "prompt") {
                const std::string model_path = bn_model.empty() ? cfg.get("bench", "model") : bn_model;
                const TemplateId tpl = template_from_string(bn_template);
                runner_id = "prompt:" + bn_template;
                factory = [model_path, tpl, runner_id]() -> std::unique_ptr<BenchRunner> {
                    auto model = std::make_shared<ToyTransformer>(ToyTransformer::load(model_path));
                    auto generator = std::make_shared<ToyChatGenerator>(*model);
                    const int budget = default_max_new_tokens(tpl);
                    return std::make_unique<LambdaRunner>(
                        runner_id, [model, generator, tpl, budget](const std::vector<std::string>& batch) {
                            for (const auto& text : batch)
                                generator->generate(render_prompt(get_template(tpl), text), budget);
                        });
                };
            }

            BenchResult result = measure_efficiency(factory, sample, bn_warmup, bn_iters,
                                                    bn_batch, bn_device, runner_id);
            std::vector<ReferenceRow> refs;
            for (const auto& raw : bn_refs) {
                const auto parts = split_csv(raw);
                if (parts.size() != 4) throw ConfigParseError("--ref wants label,peak_mb,ms,sps");
                refs.push_back({parts[0],
                                static_cast<int64_t>(std::stod(parts[1]) * 1024.0 * 1024.0),
                                std::stod(parts[2]), std::stod(parts[3])});
            }
            const std::string table = compare_report({result}, refs);
            std::cout << table;
            if (!throughput_consistent(result))
                throw std::runtime_error("throughput/latency consistency check failed");
            if (bn_out_opt->count() > 0 || cfg.has("bench", "out")) {
                const std::string out = pick(cfg, "bench", "out", bn_out_opt, bn_out);
                prepare_out_dir(out, cfg, config_loaded);
                write_text_file(out + "/bench.csv", table);
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "probekit: error: " << e.what() << "\n";
        return 1;
    }
}
