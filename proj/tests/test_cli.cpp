#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>

#include "test_support.hpp"

using namespace probekit;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Shells out to the installed binary; stdout/stderr land in scratch files.
RunResult run_cli(const testutil::TempDir& tmp, const std::string& args) {
    const std::string out_path = tmp.sub("cli_stdout.txt");
    const std::string err_path = tmp.sub("cli_stderr.txt");
    const std::string cmd = std::string(PROBEKIT_CLI_PATH) + " " + args + " > " + out_path +
                            " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out_path);
    r.err = read_text_file(err_path);
    return r;
}

size_t count_lines(const std::string& s) {
    size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

// Sentence generator over a tiny vocabulary; labels are balanced.
void write_corpus(const std::string& path, int n, uint64_t seed, int max_words = 6) {
    static const std::vector<std::string> words{"good", "bad",  "fine", "dull", "sharp",
                                                "flat", "warm", "cold", "slow", "quick"};
    Rng rng(seed);
    std::vector<Example> rows;
    for (int i = 0; i < n; ++i) {
        const int len = 1 + static_cast<int>(rng.uniform_int(0, max_words - 1));
        std::string text;
        for (int w = 0; w < len; ++w) {
            if (w) text += " ";
            text += words[static_cast<size_t>(rng.uniform_int(0, 9))];
        }
        rows.push_back({text, i % 2});
    }
    save_jsonl(path, rows);
}

// One scratch area with a saved model and two labeled splits.
struct CliRig {
    testutil::TempDir tmp;

    CliRig() {
        unsetenv("PROBEKIT_SEED");  // the child process must see only flags and config
        const auto model = ToyTransformer::random(testutil::tiny_config(2, 8, 256, 32), 51);
        model.save(tmp.sub("model.bin"));
        write_corpus(tmp.sub("train.jsonl"), 40, 1);
        write_corpus(tmp.sub("test.jsonl"), 20, 2);
    }
};

}  // namespace

TEST_CASE("extract, sweep, build, classify chain end to end", "[cli][slow]") {
    CliRig rig;
    const auto& tmp = rig.tmp;

    const auto ex1 = run_cli(tmp, "extract --model " + tmp.sub("model.bin") + " --data " +
                                      tmp.sub("train.jsonl") + " --layers 0,1 --out " +
                                      tmp.sub("train_store"));
    INFO(ex1.err);
    REQUIRE(ex1.exit_code == 0);
    REQUIRE(ex1.out.find("extract:") != std::string::npos);
    REQUIRE(std::filesystem::exists(tmp.sub("train_store/manifest.json")));

    const auto ex2 = run_cli(tmp, "extract --model " + tmp.sub("model.bin") + " --data " +
                                      tmp.sub("test.jsonl") + " --layers 0,1 --out " +
                                      tmp.sub("test_store"));
    REQUIRE(ex2.exit_code == 0);

    // an explicit seed flag is recorded in the store manifest
    const auto seeded = run_cli(tmp, "--seed 7 extract --model " + tmp.sub("model.bin") +
                                         " --data " + tmp.sub("test.jsonl") +
                                         " --layers 0 --out " + tmp.sub("seeded_store"));
    REQUIRE(seeded.exit_code == 0);
    const auto manifest =
        json::parse(read_text_file(tmp.sub("seeded_store/manifest.json")));
    REQUIRE(manifest.at("creation_seed").get<uint64_t>() == 7);

    const auto sw = run_cli(tmp, "sweep --train-store " + tmp.sub("train_store") +
                                     " --test-store " + tmp.sub("test_store") +
                                     " --layers 0,1 --poolings mean,last"
                                     " --classifiers logistic_regression --trials 2 --out " +
                                     tmp.sub("sweep_out"));
    INFO(sw.err);
    REQUIRE(sw.exit_code == 0);
    REQUIRE(sw.out.find("sweep: best layer") != std::string::npos);
    REQUIRE(std::filesystem::exists(tmp.sub("sweep_out/cells.csv")));
    REQUIRE(std::filesystem::exists(tmp.sub("sweep_out/report.json")));
    REQUIRE(std::filesystem::exists(tmp.sub("sweep_out/best_probe.json")));
    // header plus 2 layers x 2 poolings x 1 classifier
    REQUIRE(count_lines(read_text_file(tmp.sub("sweep_out/cells.csv"))) == 5);

    const auto rp = run_cli(tmp, "report --report " + tmp.sub("sweep_out/report.json") +
                                     " --out " + tmp.sub("rerender"));
    REQUIRE(rp.exit_code == 0);
    REQUIRE(read_text_file(tmp.sub("rerender/cells.csv")) ==
            read_text_file(tmp.sub("sweep_out/cells.csv")));

    const auto bd = run_cli(tmp, "build --model " + tmp.sub("model.bin") +
                                     " --cut-layer 1 --pooling mean --head " +
                                     tmp.sub("sweep_out/best_probe.json") +
                                     " --labels negative,positive --out " + tmp.sub("pipeline"));
    INFO(bd.err);
    REQUIRE(bd.exit_code == 0);
    REQUIRE(bd.out.find("reduction") != std::string::npos);
    REQUIRE(std::filesystem::exists(tmp.sub("pipeline/manifest.json")));
    REQUIRE(std::filesystem::exists(tmp.sub("pipeline/prefix.bin")));
    REQUIRE(std::filesystem::exists(tmp.sub("pipeline/head.json")));

    const auto cl = run_cli(tmp, "classify --pipeline " + tmp.sub("pipeline") +
                                     " --text \"good sharp fun\" --text \"dull and slow\"");
    INFO(cl.err);
    REQUIRE(cl.exit_code == 0);
    REQUIRE(count_lines(cl.out) == 2);
    REQUIRE((cl.out.find("negative") != std::string::npos ||
             cl.out.find("positive") != std::string::npos));

    const auto scored = run_cli(tmp, "classify --pipeline " + tmp.sub("pipeline") + " --data " +
                                         tmp.sub("test.jsonl") + " --out " + tmp.sub("preds"));
    REQUIRE(scored.exit_code == 0);
    REQUIRE(scored.out.find("accuracy") != std::string::npos);
    REQUIRE(count_lines(read_text_file(tmp.sub("preds/predictions.tsv"))) == 20);
}

TEST_CASE("prompt evaluation with a stubbed generator", "[cli]") {
    CliRig rig;
    const auto& tmp = rig.tmp;
    const auto r = run_cli(tmp, "eval-prompt --template zs_binary --data " +
                                    tmp.sub("test.jsonl") + " --stub-reply 1 --out " +
                                    tmp.sub("prompt_out"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    const auto metrics = json::parse(read_text_file(tmp.sub("prompt_out/metrics.json")));
    REQUIRE(metrics.at("template").get<std::string>() == "zs_binary");
    REQUIRE(metrics.at("accuracy").get<double>() == 0.5);  // corpus labels alternate
    REQUIRE(metrics.at("unparseable_rate").get<double>() == 0.0);
    REQUIRE(count_lines(read_text_file(tmp.sub("prompt_out/log.jsonl"))) == 20);

    const auto bad = run_cli(tmp, "eval-prompt --template zs_binary --data " +
                                      tmp.sub("test.jsonl") + " --out " + tmp.sub("x"));
    REQUIRE(bad.exit_code == 1);  // needs either a stub reply or a model
}

TEST_CASE("bench in sleep mode prints and saves the table", "[cli]") {
    CliRig rig;
    const auto& tmp = rig.tmp;
    const auto r = run_cli(tmp,
                           "bench --mode sleep --sleep-ms 3 --iters 10 --warmup 2 "
                           "--ref published,100,10,100 --out " +
                               tmp.sub("bench_out"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("runner,peak_memory_mb,avg_ms_per_sample,throughput_sps,reference,"
                       "memory_ratio,time_ratio,throughput_ratio") != std::string::npos);
    REQUIRE(r.out.find("sleep_stub") != std::string::npos);
    REQUIRE(r.out.find("published") != std::string::npos);
    REQUIRE(read_text_file(tmp.sub("bench_out/bench.csv")) == r.out);
}

TEST_CASE("config values fill in for missing flags", "[cli]") {
    CliRig rig;
    const auto& tmp = rig.tmp;
    RunConfig cfg;
    cfg.set("global", "seed", "9");
    cfg.set("extract", "model", tmp.sub("model.bin"));
    cfg.set("extract", "data", tmp.sub("train.jsonl"));
    cfg.set("extract", "layers", "0,1");
    cfg.set("extract", "out", tmp.sub("cfg_store"));
    save_config(tmp.sub("run.ini"), cfg);

    const auto r = run_cli(tmp, "--config " + tmp.sub("run.ini") + " extract");
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    const auto manifest = json::parse(read_text_file(tmp.sub("cfg_store/manifest.json")));
    REQUIRE(manifest.at("creation_seed").get<uint64_t>() == 9);
    // the effective config is archived next to the outputs
    REQUIRE(load_config(tmp.sub("cfg_store/config.ini")) == cfg);

    // flags still beat the config
    const auto flagged = run_cli(tmp, "--config " + tmp.sub("run.ini") + " --seed 3 extract "
                                          "--out " + tmp.sub("flag_store"));
    REQUIRE(flagged.exit_code == 0);
    const auto m2 = json::parse(read_text_file(tmp.sub("flag_store/manifest.json")));
    REQUIRE(m2.at("creation_seed").get<uint64_t>() == 3);
}

TEST_CASE("missing required fields name themselves on stderr", "[cli]") {
    CliRig rig;
    const auto& tmp = rig.tmp;
    RunConfig cfg;
    cfg.set("sweep", "test_store", tmp.sub("nowhere"));
    save_config(tmp.sub("sweep.ini"), cfg);

    const auto r = run_cli(tmp, "--config " + tmp.sub("sweep.ini") + " sweep");
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.err.find("probekit: error:") != std::string::npos);
    REQUIRE(r.err.find("missing config field: [sweep] train_store") != std::string::npos);

    const auto no_cfg = run_cli(tmp, "sweep");
    REQUIRE(no_cfg.exit_code == 1);
    REQUIRE(no_cfg.err.find("missing config field: [sweep] train_store") != std::string::npos);
}

TEST_CASE("bad invocations exit nonzero", "[cli]") {
    CliRig rig;
    const auto& tmp = rig.tmp;
    REQUIRE(run_cli(tmp, "frobnicate").exit_code != 0);
    REQUIRE(run_cli(tmp, "").exit_code != 0);  // a subcommand is required
    REQUIRE(run_cli(tmp, "extract --model missing.bin --data also_missing.jsonl "
                         "--layers 0 --out x")
                .exit_code == 1);
    const auto bad_mode = run_cli(tmp, "bench --mode warp");
    REQUIRE(bad_mode.exit_code == 1);
    REQUIRE(bad_mode.err.find("pipeline|prompt|sleep") != std::string::npos);
}

TEST_CASE("prep reduces builtin-sized corpora", "[cli][slow]") {
    CliRig rig;
    const auto& tmp = rig.tmp;
    std::filesystem::create_directories(tmp.sub("raw"));
    write_corpus(tmp.sub("raw/train.jsonl"), 8000, 5, 5);
    write_corpus(tmp.sub("raw/test.jsonl"), 2100, 6, 5);

    const auto r = run_cli(tmp, "prep --dataset sst2 --in " + tmp.sub("raw") + " --out " +
                                    tmp.sub("prepped"));
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("prep sst2: train 6920 test 1821") != std::string::npos);
    REQUIRE(load_jsonl(tmp.sub("prepped/train.jsonl")).size() == 6920);
    REQUIRE(load_jsonl(tmp.sub("prepped/test.jsonl")).size() == 1821);
    REQUIRE(std::filesystem::exists(tmp.sub("prepped/report.txt")));
    REQUIRE(std::filesystem::exists(tmp.sub("prepped/report.json")));
}
