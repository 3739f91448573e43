// Acceptance gate: every criterion is a standalone check with one PASS/FAIL
// verdict line. Run as `acceptance <1..10>`; exit 0 on pass, 1 on fail.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "test_support.hpp"

using namespace probekit;

namespace {

std::vector<std::string> g_failures;

void expect(bool ok, const std::string& what) {
    if (!ok) g_failures.push_back(what);
}

void note(const std::string& line) { std::printf("  %s\n", line.c_str()); }

int verdict(int n, const std::string& name) {
    if (g_failures.empty()) {
        std::printf("acceptance %d PASS: %s\n", n, name.c_str());
        return 0;
    }
    std::printf("acceptance %d FAIL: %s (%zu checks failed)\n", n, name.c_str(),
                g_failures.size());
    for (const auto& f : g_failures) std::printf("  - %s\n", f.c_str());
    return 1;
}

// ---------------------------------------------------------------------------
// 1. Pooling oracle suite.
// ---------------------------------------------------------------------------

TokenMatrix random_tm(Rng& rng) {
    const size_t t = 1 + static_cast<size_t>(rng.uniform_int(0, 7));
    const size_t d = 1 + static_cast<size_t>(rng.uniform_int(0, 7));
    TokenMatrix tm;
    tm.values = MatD(t, d);
    tm.mask.assign(t, 0);
    size_t valid = 0;
    for (size_t i = 0; i < t; ++i) {
        tm.mask[i] = rng.uniform() < 0.7 ? 1 : 0;
        valid += tm.mask[i];
        for (size_t j = 0; j < d; ++j) tm.values.at(i, j) = rng.gaussian() * 3.0;
    }
    if (valid == 0)
        tm.mask[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(t) - 1))] = 1;
    return tm;
}

std::vector<double> ref_mean(const TokenMatrix& m) {
    std::vector<double> out(m.values.cols, 0.0);
    size_t n = 0;
    for (size_t i = 0; i < m.values.rows; ++i) {
        if (!m.mask[i]) continue;
        ++n;
        for (size_t j = 0; j < m.values.cols; ++j) out[j] += m.values.at(i, j);
    }
    for (auto& v : out) v /= static_cast<double>(n);
    return out;
}

std::vector<double> ref_last(const TokenMatrix& m) {
    size_t last = 0;
    for (size_t i = 0; i < m.values.rows; ++i)
        if (m.mask[i]) last = i;
    std::vector<double> out(m.values.cols);
    for (size_t j = 0; j < m.values.cols; ++j) out[j] = m.values.at(last, j);
    return out;
}

std::vector<double> ref_extrema(const TokenMatrix& m, bool want_max) {
    std::vector<double> out;
    for (size_t j = 0; j < m.values.cols; ++j) {
        bool first = true;
        double best = 0.0;
        for (size_t i = 0; i < m.values.rows; ++i) {
            if (!m.mask[i]) continue;
            const double v = m.values.at(i, j);
            if (first || (want_max ? v > best : v < best)) best = v;
            first = false;
        }
        out.push_back(best);
    }
    return out;
}

std::vector<double> ref_attention(const TokenMatrix& m) {
    std::vector<double> scores(m.values.rows, 0.0);
    double max_score = -1e300;
    for (size_t i = 0; i < m.values.rows; ++i) {
        if (!m.mask[i]) continue;
        for (size_t j = 0; j < m.values.cols; ++j) scores[i] += m.values.at(i, j);
        scores[i] /= static_cast<double>(m.values.cols);
        max_score = std::max(max_score, scores[i]);
    }
    double z = 0.0;
    for (size_t i = 0; i < m.values.rows; ++i)
        if (m.mask[i]) z += std::exp(scores[i] - max_score);
    std::vector<double> out(m.values.cols, 0.0);
    for (size_t i = 0; i < m.values.rows; ++i) {
        if (!m.mask[i]) continue;
        const double w = std::exp(scores[i] - max_score) / z;
        for (size_t j = 0; j < m.values.cols; ++j) out[j] += w * m.values.at(i, j);
    }
    return out;
}

bool close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (tol == 0.0 ? a[i] != b[i] : std::fabs(a[i] - b[i]) > tol) return false;
    }
    return true;
}

int criterion1() {
    Rng rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        const TokenMatrix tm = random_tm(rng);
        const std::string tag = "trial " + std::to_string(trial);
        expect(close(pool_mean(tm), ref_mean(tm), 0.0), tag + ": mean not exact");
        expect(close(pool_last(tm), ref_last(tm), 0.0), tag + ": last not exact");
        expect(close(pool_max(tm), ref_extrema(tm, true), 0.0), tag + ": max not exact");
        expect(close(pool_min(tm), ref_extrema(tm, false), 0.0), tag + ": min not exact");
        std::vector<double> concat = ref_mean(tm);
        for (double v : ref_extrema(tm, true)) concat.push_back(v);
        for (double v : ref_extrema(tm, false)) concat.push_back(v);
        expect(close(pool_concat(tm), concat, 0.0), tag + ": concat not exact");
        expect(close(pool_attention(tm), ref_attention(tm), 1e-9),
               tag + ": attention beyond 1e-9");

        const auto w = attention_weights(tm);
        double sum = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            sum += w[i];
            if (!tm.mask[i]) expect(w[i] == 0.0, tag + ": masked weight not exactly 0");
        }
        expect(std::fabs(sum - 1.0) <= 1e-9, tag + ": attention weights do not sum to 1");
    }
    return verdict(1, "six poolings match naive f64 references on 200 random masked matrices");
}

// ---------------------------------------------------------------------------
// 2. Pooling laws.
// ---------------------------------------------------------------------------

int criterion2() {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t t = 2 + static_cast<size_t>(rng.uniform_int(0, 6));
        const size_t d = 1 + static_cast<size_t>(rng.uniform_int(0, 7));
        TokenMatrix tm;
        tm.values = MatD(t, d);
        tm.mask.assign(t, 1);
        for (size_t i = 0; i < t; ++i)
            for (size_t j = 0; j < d; ++j) tm.values.at(i, j) = rng.gaussian() * 2.0;

        std::vector<size_t> perm(t);
        for (size_t i = 0; i < t; ++i) perm[i] = i;
        rng.shuffle(perm);
        TokenMatrix shuffled = tm;
        for (size_t i = 0; i < t; ++i)
            for (size_t j = 0; j < d; ++j) shuffled.values.at(i, j) = tm.values.at(perm[i], j);

        const std::string tag = "trial " + std::to_string(trial);
        for (Pooling p : {Pooling::mean, Pooling::max, Pooling::min, Pooling::concat,
                          Pooling::attention})
            expect(close(pool(tm, p), pool(shuffled, p), 1e-9),
                   tag + ": " + to_string(p) + " not permutation invariant");

        const auto mean = pool_mean(tm);
        const auto mx = pool_max(tm);
        const auto mn = pool_min(tm);
        for (size_t j = 0; j < d; ++j)
            expect(mn[j] <= mean[j] + 1e-12 && mean[j] <= mx[j] + 1e-12,
                   tag + ": min <= mean <= max violated");
    }

    // Last-token pooling keys on position, so any reordering that moves the
    // final token is a counterexample to invariance.
    TokenMatrix ordered;
    ordered.values = MatD(3, 2);
    ordered.mask.assign(3, 1);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 2; ++j) ordered.values.at(i, j) = static_cast<double>(i);
    TokenMatrix reversed = ordered;
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 2; ++j) reversed.values.at(i, j) = static_cast<double>(2 - i);
    expect(!close(pool_last(ordered), pool_last(reversed), 0.0),
           "last-token pooling unexpectedly permutation invariant");

    // Single valid token: every method must collapse to that token's vector.
    for (int trial = 0; trial < 20; ++trial) {
        TokenMatrix tm;
        tm.values = MatD(5, 4);
        tm.mask.assign(5, 0);
        const size_t keep = static_cast<size_t>(rng.uniform_int(0, 4));
        tm.mask[keep] = 1;
        for (size_t i = 0; i < 5; ++i)
            for (size_t j = 0; j < 4; ++j) tm.values.at(i, j) = rng.gaussian();
        const std::vector<double> row(tm.values.row(keep), tm.values.row(keep) + 4);
        std::vector<double> three = row;
        three.insert(three.end(), row.begin(), row.end());
        three.insert(three.end(), row.begin(), row.end());
        const std::string tag = "single-token trial " + std::to_string(trial);
        expect(close(pool_mean(tm), row, 0.0), tag + ": mean");
        expect(close(pool_last(tm), row, 0.0), tag + ": last");
        expect(close(pool_max(tm), row, 0.0), tag + ": max");
        expect(close(pool_min(tm), row, 0.0), tag + ": min");
        expect(close(pool_concat(tm), three, 0.0), tag + ": concat");
        expect(close(pool_attention(tm), row, 0.0), tag + ": attention");
    }
    return verdict(2, "permutation invariance, ordering law, and single-token collapse hold");
}

// ---------------------------------------------------------------------------
// 3. Prefix equivalence.
// ---------------------------------------------------------------------------

std::vector<std::string> random_texts(int count, int max_words, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> texts;
    for (int i = 0; i < count; ++i) {
        const int len = 1 + static_cast<int>(rng.uniform_int(0, max_words - 1));
        std::string text;
        for (int w = 0; w < len; ++w) {
            if (w) text += " ";
            text += "tok" + std::to_string(rng.uniform_int(0, 5000));
        }
        texts.push_back(text);
    }
    return texts;
}

int criterion3() {
    testutil::TempDir tmp;
    ModelConfig cfg = testutil::tiny_config(4, 32, 101, 16);
    const auto model = ToyTransformer::random(cfg, 77);
    const std::string path = tmp.sub("model.bin");
    model.save(path);
    const auto full = ToyTransformer::load(path);
    const auto texts = random_texts(16, cfg.max_seq_len, 5);
    const TokenizerConfig tok{cfg.vocab_size, cfg.max_seq_len};

    for (int cut = 0; cut <= cfg.num_layers; ++cut) {
        TruncatedPipeline p;
        p.prefix = ToyTransformer::load_prefix(path, cut);
        p.plan.cut_layer = cut;
        p.tokenizer = tok;
        expect(verify_prefix_equivalence(full, p, texts),
               "cut " + std::to_string(cut) + " not bit-exact");
    }

    TruncatedPipeline perturbed;
    perturbed.prefix = ToyTransformer::load_prefix(path, 2);
    perturbed.plan.cut_layer = 2;
    perturbed.tokenizer = tok;
    perturbed.prefix.blocks[0].wq.data[0] += 1e-3f;
    expect(!verify_prefix_equivalence(full, perturbed, texts),
           "perturbed block weight not detected");

    TruncatedPipeline embed_off;
    embed_off.prefix = ToyTransformer::load_prefix(path, 0);
    embed_off.plan.cut_layer = 0;
    embed_off.tokenizer = tok;
    const auto batch = tokenize({texts[0]}, tok);
    embed_off.prefix.embed.at(static_cast<size_t>(batch.token_ids.at(0, 0)), 0) += 1e-3f;
    expect(!verify_prefix_equivalence(full, embed_off, texts),
           "perturbed embedding row not detected");

    return verdict(3, "prefix equivalence bit-exact at every cut, flipped by one perturbed weight");
}

// ---------------------------------------------------------------------------
// 4. Planted-signal sweep.
// ---------------------------------------------------------------------------

int criterion4() {
    const std::vector<int> layers{0, 1, 2, 3, 4};
    for (int k : {0, 2, 4}) {
        const auto train = testutil::planted_store(layers, k, 80, 6, 8, 900 + k);
        const auto test = testutil::planted_store(layers, k, 40, 6, 8, 1900 + k);
        SweepGrid grid;
        grid.layers = layers;
        grid.poolings = {Pooling::mean};
        grid.classifiers = {ClassifierId::logistic_regression};
        grid.trials = 2;
        grid.seed = 42;
        const auto report = run_sweep(train, test, grid);
        const std::string tag = "k=" + std::to_string(k);
        expect(report.majority_baseline == 0.5, tag + ": majority baseline is not 0.5");
        if (!report.best.has_value()) {
            expect(false, tag + ": sweep produced no best cell");
            continue;
        }
        note(strfmt("k=%d: best layer %d accuracy %.4f", k, report.best->layer,
                    report.best->accuracy));
        expect(report.best->layer == k, tag + ": best layer is not the planted one");
        expect(report.best->accuracy >= 0.95, tag + ": linear probe below 0.95");
    }
    return verdict(4, "sweep localizes the planted signal layer for k in {0,2,4}");
}

// ---------------------------------------------------------------------------
// 5. Parameter accounting against the published reduction figures.
// ---------------------------------------------------------------------------

struct ReductionAnchor {
    const ArchitectureConstants* arch;
    std::string dataset;
    int selected_layer;
    double stated_pct;
};

int criterion5() {
    const auto a1 = ArchitectureConstants::from_dims("llama-1b", 128256, 2048, 16, 32, 8,
                                                     8192, true);
    const auto a3 = ArchitectureConstants::from_dims("llama-3b", 128256, 3072, 28, 24, 8,
                                                     8192, true);
    const auto a8 = ArchitectureConstants::from_dims("llama-8b", 128256, 4096, 32, 32, 8,
                                                     14336, false);

    // Guard the raw arithmetic first; without these the comparison below
    // would be meaningless.
    expect(a1.embed_params == 262668288 && a1.per_block_params == 60821504 &&
               a1.total() == 1235812352,
           "1B architecture constants off");
    expect(a3.embed_params == 394002432 && a3.per_block_params == 100669440,
           "3B architecture constants off");
    expect(a8.embed_params == 525336576 && a8.per_block_params == 218112000 &&
               a8.lm_head_params == 525336576,
           "8B architecture constants off");

    const std::vector<ReductionAnchor> anchors{
        {&a1, "sst2", 10, 19.0},   {&a1, "imdb", 8, 19.0},  {&a1, "rotten", 8, 19.0},
        {&a1, "emotion", 1, 61.6}, {&a3, "sst2", 5, 36.6},  {&a3, "imdb", 4, 36.6},
        {&a3, "rotten", 3, 36.6},  {&a3, "emotion", 1, 80.0}, {&a8, "sst2", 3, 53.7},
        {&a8, "imdb", 4, 53.7},    {&a8, "rotten", 9, 53.7}, {&a8, "emotion", 0, 90.7},
    };

    // Two defensible readings of "keep up to the selected layer": the layer
    // index as a block count, or one more so the selected layer's own block
    // stays. The criterion passes if either convention fits every anchor.
    bool keep_l_fits = true, keep_l1_fits = true;
    for (const auto& an : anchors) {
        const double red_l =
            count_parameters(*an.arch, an.selected_layer, 0).reduction_pct;
        const double red_l1 =
            count_parameters(*an.arch, an.selected_layer + 1, 0).reduction_pct;
        const bool ok_l = std::fabs(red_l - an.stated_pct) <= 3.0;
        const bool ok_l1 = std::fabs(red_l1 - an.stated_pct) <= 3.0;
        keep_l_fits = keep_l_fits && ok_l;
        keep_l1_fits = keep_l1_fits && ok_l1;
        note(strfmt("%s %-7s layer %2d: stated %5.1f%%  keep-L %6.2f%%%s  keep-(L+1) %6.2f%%%s",
                    an.arch->model_id.c_str(), an.dataset.c_str(), an.selected_layer,
                    an.stated_pct, red_l, ok_l ? " ok" : "   ", red_l1, ok_l1 ? " ok" : "   "));
    }
    expect(keep_l_fits || keep_l1_fits,
           "no single layer-indexing convention reproduces every stated reduction within 3pp");
    return verdict(5, "published parameter reductions reproduced under one consistent convention");
}

// ---------------------------------------------------------------------------
// 6. Probe determinism and sanity.
// ---------------------------------------------------------------------------

void split_blobs(int per_train, int per_test, int classes, size_t dim, double sep,
                 uint64_t seed, MatD& xtr, std::vector<int32_t>& ytr, MatD& xte,
                 std::vector<int32_t>& yte) {
    MatD all;
    std::vector<int32_t> labels;
    testutil::make_blobs(per_train + per_test, classes, dim, sep, seed, all, labels);
    const int per_class = per_train + per_test;
    xtr = MatD(static_cast<size_t>(per_train) * classes, dim);
    xte = MatD(static_cast<size_t>(per_test) * classes, dim);
    ytr.clear();
    yte.clear();
    size_t tr = 0, te = 0;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            const size_t src = static_cast<size_t>(c) * per_class + i;
            if (i < per_train) {
                std::copy(all.row(src), all.row(src) + dim, xtr.row(tr++));
                ytr.push_back(labels[src]);
            } else {
                std::copy(all.row(src), all.row(src) + dim, xte.row(te++));
                yte.push_back(labels[src]);
            }
        }
}

double accuracy_of(const std::vector<int32_t>& pred, const std::vector<int32_t>& gold) {
    size_t correct = 0;
    for (size_t i = 0; i < pred.size(); ++i) correct += pred[i] == gold[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

int criterion6() {
    MatD xtr, xte;
    std::vector<int32_t> ytr, yte;
    split_blobs(40, 20, 2, 6, 4.0, 101, xtr, ytr, xte, yte);

    for (ClassifierId id : all_classifiers()) {
        ProbeSpec spec = ProbeSpec::defaults(id, 42);
        spec.trials = 2;
        const auto p1 = fit_probe(xtr, ytr, spec);
        const auto p2 = fit_probe(xtr, ytr, spec);
        const std::string tag = to_string(id);
        expect(p1.chosen_hyperparams == p2.chosen_hyperparams, tag + ": hyperparams drift");
        expect(p1.validation_accuracy == p2.validation_accuracy,
               tag + ": validation accuracy drifts");
        expect(p1.model->params_json() == p2.model->params_json(), tag + ": weights drift");
        expect(predict_probe(p1, xte) == predict_probe(p2, xte), tag + ": predictions drift");
    }

    for (ClassifierId id : {ClassifierId::logistic_regression, ClassifierId::linear_svm}) {
        const auto probe = fit_probe(xtr, ytr, ProbeSpec::defaults(id, 42));
        const double acc = accuracy_of(predict_probe(probe, xte), yte);
        expect(acc == 1.0, to_string(id) + strfmt(": %.4f on separable blobs", acc));
    }

    MatD xor_tr, xor_te;
    std::vector<int32_t> xor_ytr, xor_yte;
    testutil::make_xor(50, 7, xor_tr, xor_ytr);
    testutil::make_xor(25, 8, xor_te, xor_yte);
    const auto rbf = fit_probe(xor_tr, xor_ytr, ProbeSpec::defaults(ClassifierId::kernel_svm, 42));
    const double rbf_acc = accuracy_of(predict_probe(rbf, xor_te), xor_yte);
    expect(rbf_acc == 1.0, strfmt("kernel SVM on XOR: %.4f", rbf_acc));
    for (ClassifierId id : {ClassifierId::logistic_regression, ClassifierId::linear_svm}) {
        const auto lin = fit_probe(xor_tr, xor_ytr, ProbeSpec::defaults(id, 42));
        const double acc = accuracy_of(predict_probe(lin, xor_te), xor_yte);
        expect(acc <= 0.75, to_string(id) + strfmt(" on XOR: %.4f", acc));
    }

    MatD x6tr, x6te;
    std::vector<int32_t> y6tr, y6te;
    split_blobs(30, 10, 6, 8, 4.0, 303, x6tr, y6tr, x6te, y6te);
    for (ClassifierId id : all_classifiers()) {
        ProbeSpec spec = ProbeSpec::defaults(id, 42);
        spec.trials = 2;
        const auto probe = fit_probe(x6tr, y6tr, spec);
        const double acc = accuracy_of(predict_probe(probe, x6te), y6te);
        expect(acc >= 0.8, to_string(id) + strfmt(": %.4f on 6-class blobs", acc));
    }
    return verdict(6, "probes are seed-deterministic and sane on blobs and XOR");
}

// ---------------------------------------------------------------------------
// 7. Dataset-prep conformance.
// ---------------------------------------------------------------------------

int64_t word_count(const std::string& text) {
    int64_t n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c));
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

int criterion7() {
    Rng rng(77);
    std::vector<Example> corpus;
    for (int i = 0; i < 3000; ++i) {
        const int len = 1 + static_cast<int>(rng.uniform_int(0, 9));
        std::string text;
        for (int w = 0; w < len; ++w) {
            if (w) text += " ";
            text += "w" + std::to_string(rng.uniform_int(0, 999));
        }
        corpus.push_back({text, rng.uniform() < 0.55 ? 1 : 0});
    }

    DatasetSpec spec{"synt", 500, 200, {0, 1}, 10};
    const auto reduced = reduce_dataset(corpus, spec, 500, 42);
    expect(reduced.size() == 500, strfmt("reduced size %zu, want 500", reduced.size()));

    // Quota oracle: floor the proportional share, then hand out remainders
    // largest first, ties to the lower label.
    int64_t ones = 0;
    for (const auto& ex : corpus) ones += ex.label;
    const double p1 = static_cast<double>(ones) / static_cast<double>(corpus.size());
    const int64_t q0_floor = static_cast<int64_t>(500.0 * (1.0 - p1));
    const int64_t q1_floor = static_cast<int64_t>(500.0 * p1);
    int64_t q0 = q0_floor, q1 = q1_floor;
    const double r0 = 500.0 * (1.0 - p1) - static_cast<double>(q0_floor);
    const double r1 = 500.0 * p1 - static_cast<double>(q1_floor);
    for (int64_t leftover = 500 - q0 - q1; leftover > 0; --leftover) {
        if (r0 >= r1) q0 += 1;
        else q1 += 1;
    }
    int64_t got0 = 0, got1 = 0;
    for (const auto& ex : reduced) (ex.label == 0 ? got0 : got1) += 1;
    expect(got0 == q0 && got1 == q1,
           strfmt("label quotas %lld/%lld, want %lld/%lld", static_cast<long long>(got0),
                  static_cast<long long>(got1), static_cast<long long>(q0),
                  static_cast<long long>(q1)));

    for (const auto& ex : reduced)
        if (word_count(ex.text) > spec.max_len) {
            expect(false, "length cap violated: '" + ex.text + "'");
            break;
        }

    const auto rerun = reduce_dataset(corpus, spec, 500, 42);
    expect(rerun == reduced, "seed-42 rerun is not identical");
    testutil::TempDir tmp;
    save_jsonl(tmp.sub("a.jsonl"), reduced);
    save_jsonl(tmp.sub("b.jsonl"), rerun);
    expect(read_text_file(tmp.sub("a.jsonl")) == read_text_file(tmp.sub("b.jsonl")),
           "seed-42 serialized outputs differ");

    const struct { const char* id; int train, test; } table[] = {
        {"imdb", 7000, 7000}, {"sst2", 6920, 1821}, {"rotten", 8530, 1066},
        {"emotion", 6000, 2000}};
    for (const auto& row : table) {
        const auto& s = builtin_spec(row.id);
        expect(s.train_size == row.train && s.test_size == row.test,
               std::string(row.id) + ": builtin sizes off");
    }

    const char* raw_dir = std::getenv("PROBEKIT_RAW_DATA");
    if (!raw_dir) {
        note("real-dataset sizes skipped; set PROBEKIT_RAW_DATA to a directory with "
             "<id>/train.jsonl and <id>/test.jsonl to enable");
    } else {
        for (const auto& row : table) {
            const std::string base = std::string(raw_dir) + "/" + row.id;
            const auto result = prep_dataset(load_jsonl(base + "/train.jsonl"),
                                             load_jsonl(base + "/test.jsonl"),
                                             builtin_spec(row.id), 42,
                                             tmp.sub(std::string("real_") + row.id));
            expect(result.train.size() == static_cast<size_t>(row.train) &&
                       result.test.size() == static_cast<size_t>(row.test),
                   std::string(row.id) + ": real reduction sizes off");
        }
    }
    return verdict(7, "reduction hits exact sizes, quotas, length cap, and seed determinism");
}

// ---------------------------------------------------------------------------
// 8. Prompt fidelity and parsing.
// ---------------------------------------------------------------------------

std::string fixture_text(const std::string& name) {
    std::string s = read_text_file(testutil::fixture("prompts/" + name + ".txt"));
    if (s.empty() || s.back() != '\n') return s;  // the mismatch will be reported
    s.pop_back();
    return s;
}

struct ParseCase {
    const char* raw;
    Task task;
    int want;
};

int criterion8() {
    for (TemplateId id : all_templates()) {
        const auto& tpl = get_template(id);
        const std::string base = to_string(id);
        expect(tpl.system == fixture_text(base + "_system"), base + ": system drifted");
        expect(tpl.user == fixture_text(base + "_user"), base + ": user drifted");
        expect(tpl.assistant == fixture_text(base + "_assistant"), base + ": assistant drifted");
    }

    const int U = kUnparseable;
    const Task B = Task::binary, E = Task::emotion;
    const std::vector<ParseCase> cases{
        {"1", B, 1}, {"0", B, 0}, {" 1 ", B, 1}, {"\n0\n", B, 0}, {"1.", B, 1},
        {"0.5", B, 0}, {"The answer is 1", B, 1}, {"label: 0", B, 0},
        {"1 because 0 would be wrong", B, 1}, {"I'd say 0, not 1", B, 0},
        {"2", B, U}, {"10", B, U}, {"42", B, U}, {"007", B, U}, {"0 0 7", B, 0},
        {"-1", B, U}, {"-0", B, 0}, {"a-1", B, U}, {"- 1", B, 1}, {"-x 1", B, 1},
        {"", B, U}, {"   ", B, U}, {"positive", B, U}, {"yes", B, U}, {"one", B, U},
        {"!!!", B, U}, {"99999999999999999999999999", B, U},
        {"18446744073709551617", B, U}, {"0x1", B, 0}, {"(1)", B, 1}, {"'0'", B, 0},
        {"answer=1", B, 1}, {"3.14", B, U}, {"Answer:\n\t1", B, 1}, {"0th option", B, 0},
        {"tab\t0", B, 0}, {"\xF0\x9F\x98\x80", B, U},
        {"5", E, 5}, {"3", E, 3}, {"7", E, U}, {"9", E, U},
        {"3: Anger, not 1: Joy", E, 3}, {"0: Sadness", E, 0}, {"[5]", E, 5},
        {"v2.0", E, 2}, {"six", E, U}, {"-3", E, U}, {"- 4", E, 4}, {"100", E, U},
        {"1000001", E, U}, {"12345678", E, U}, {"\xE2\x91\xA0", E, U},
        {"I rate it 5/5", E, 5}, {"minus -2 stars", E, U},
    };
    expect(cases.size() >= 50, strfmt("parse corpus has only %zu cases", cases.size()));
    for (const auto& c : cases) {
        const auto got = parse_label(c.raw, c.task);
        expect(got.label == c.want,
               strfmt("parse '%s' -> %d, want %d", c.raw, got.label, c.want));
        expect(got.raw == c.raw, strfmt("parse '%s' lost the raw string", c.raw));
    }

    std::vector<PromptExample> dataset;
    std::vector<std::pair<std::string, int>> gold;
    const int golds[10] = {1, 0, 1, 1, 0, 0, 1, 0, 1, 1};
    const char* names[10] = {"zero", "one", "two", "three", "four",
                             "five", "six", "seven", "eight", "nine"};
    for (int i = 0; i < 10; ++i) {
        const std::string text = std::string("sample ") + names[i] + " text";
        dataset.push_back({text, golds[i]});
        gold.emplace_back(text, golds[i]);
    }

    StubEchoGoldGenerator echo(gold);
    const auto perfect = evaluate_prompting(echo, dataset, TemplateId::zs_binary);
    expect(perfect.accuracy == 1.0 && perfect.unparseable_rate == 0.0,
           strfmt("echo-gold: accuracy %.4f unparseable %.4f", perfect.accuracy,
                  perfect.unparseable_rate));

    StubConstantGenerator ones("1");
    const auto constant = evaluate_prompting(ones, dataset, TemplateId::zs_binary);
    expect(constant.accuracy == 0.6 && constant.unparseable_rate == 0.0,
           strfmt("constant-1: accuracy %.4f unparseable %.4f", constant.accuracy,
                  constant.unparseable_rate));

    StubConstantGenerator chatty("It is certainly positive!");
    const auto garbage = evaluate_prompting(chatty, dataset, TemplateId::zs_binary);
    expect(garbage.accuracy == 0.0 && garbage.unparseable_rate == 1.0,
           strfmt("garbage reply: accuracy %.4f unparseable %.4f", garbage.accuracy,
                  garbage.unparseable_rate));

    StubConstantGenerator seven("7");
    const auto out_of_range = evaluate_prompting(seven, dataset, TemplateId::zs_emotion);
    expect(out_of_range.unparseable_rate == 1.0, "out-of-range reply not flagged");

    expect(default_max_new_tokens(TemplateId::cot_binary) == 256 &&
               default_max_new_tokens(TemplateId::zs_binary) == 8,
           "token budgets off");
    return verdict(8, "templates match fixtures, parser is total, stub accuracies exact");
}

// ---------------------------------------------------------------------------
// 9. Bench consistency.
// ---------------------------------------------------------------------------

int criterion9() {
    const std::vector<std::string> sample{"alpha beta", "gamma", "delta epsilon"};
    const auto r = measure_efficiency([] { return std::make_unique<SleepStubRunner>(10.0); },
                                      sample, 2, 10, 1, "cpu", "sleep_stub");
    note(strfmt("sleep stub: %.3f ms/sample, %.3f samples/sec, peak %.1f MB",
                r.avg_ms_per_sample, r.throughput_sps,
                static_cast<double>(r.peak_memory_bytes) / (1024.0 * 1024.0)));
    expect(r.avg_ms_per_sample > 8.0 && r.avg_ms_per_sample < 14.0,
           strfmt("10 ms stub measured at %.3f ms", r.avg_ms_per_sample));
    expect(throughput_consistent(r), "stub throughput inconsistent with latency");
    expect(std::fabs(r.throughput_sps - 1000.0 / r.avg_ms_per_sample) / r.throughput_sps <= 0.10,
           "throughput not within 10% of 1000/avg_ms");
    expect(r.peak_memory_bytes > 0, "peak memory not measured");

    testutil::TempDir tmp;
    ModelConfig cfg = testutil::tiny_config(8, 128, 8192, 32);
    cfg.num_heads = 4;
    cfg.num_kv_heads = 2;
    cfg.ffn_dim = 1024;
    ToyTransformer::random(cfg, 23).save(tmp.sub("model.bin"));

    {
        const auto model = ToyTransformer::load(tmp.sub("model.bin"));
        const std::vector<std::string> texts{"good small model", "bad big model",
                                             "fine middle model", "dull deep model",
                                             "sharp fast model", "flat slow model"};
        const std::vector<int32_t> labels{0, 1, 0, 1, 0, 1};
        const auto batch = tokenize(texts, TokenizerConfig{cfg.vocab_size, cfg.max_seq_len});
        const auto store = extract_activations(model, batch, {1}, labels, "bench", 42);
        ProbeSpec spec = ProbeSpec::defaults(ClassifierId::logistic_regression, 42);
        spec.trials = 1;
        save_probe(fit_probe(pool_store(store, 1, Pooling::mean), labels, spec),
                   tmp.sub("head.json"));
    }

    const std::string model_path = tmp.sub("model.bin");
    const std::string head_path = tmp.sub("head.json");
    const auto pipeline_factory = [&](int cut) -> RunnerFactory {
        return [model_path, head_path, cut]() -> std::unique_ptr<BenchRunner> {
            auto pipeline = std::make_shared<TruncatedPipeline>(
                build_truncated(model_path, cut, Pooling::mean, load_probe(head_path)));
            return std::make_unique<LambdaRunner>(
                "pipeline", [pipeline](const std::vector<std::string>& batch) {
                    classify(*pipeline, batch);
                });
        };
    };
    const auto shallow = measure_efficiency(pipeline_factory(1), sample, 2, 10, 1, "cpu",
                                            "truncated");
    const auto deep = measure_efficiency(pipeline_factory(8), sample, 2, 10, 1, "cpu", "full");
    note(strfmt("truncated peak %.1f MB, full peak %.1f MB",
                static_cast<double>(shallow.peak_memory_bytes) / (1024.0 * 1024.0),
                static_cast<double>(deep.peak_memory_bytes) / (1024.0 * 1024.0)));
    expect(shallow.peak_memory_bytes < deep.peak_memory_bytes,
           "truncated pipeline does not save peak memory");
    expect(throughput_consistent(shallow) && throughput_consistent(deep),
           "pipeline throughput inconsistent with latency");
    return verdict(9, "stub timing within tolerance, truncated pipeline saves peak memory");
}

// ---------------------------------------------------------------------------
// 10. Real-weights comparison, gated on the hardware-dependent inputs.
// ---------------------------------------------------------------------------

int criterion10() {
    const char* model_env = std::getenv("PROBEKIT_REAL_MODEL");
    const char* slice_env = std::getenv("PROBEKIT_SST2_SLICE");
    if (!model_env || !slice_env) {
        note("skipped: set PROBEKIT_REAL_MODEL (weights file) and PROBEKIT_SST2_SLICE "
             "(labeled JSONL, ~500 rows) to run the probe-vs-prompting comparison");
        return verdict(10, "skipped (hardware-gated)");
    }

    const auto model = ToyTransformer::load(model_env);
    auto examples = load_jsonl(slice_env);
    expect(examples.size() >= 100, "slice has fewer than 100 examples");
    if (!g_failures.empty()) return verdict(10, "real-weights comparison");

    // Clip each text to the context window so tokenization cannot reject rows.
    const int max_words = model.config.max_seq_len;
    for (auto& ex : examples) {
        std::string clipped;
        int words = 0;
        bool in_word = false;
        for (char c : ex.text) {
            const bool space = std::isspace(static_cast<unsigned char>(c));
            if (!space && !in_word && ++words > max_words) break;
            in_word = !space;
            clipped += c;
        }
        ex.text = clipped;
    }

    const size_t n_train = examples.size() * 4 / 5;
    const std::vector<Example> train(examples.begin(), examples.begin() + n_train);
    const std::vector<Example> test(examples.begin() + n_train, examples.end());

    std::vector<std::string> train_texts, test_texts;
    std::vector<int32_t> train_labels, test_labels;
    for (const auto& ex : train) {
        train_texts.push_back(ex.text);
        train_labels.push_back(ex.label);
    }
    for (const auto& ex : test) {
        test_texts.push_back(ex.text);
        test_labels.push_back(ex.label);
    }

    const int L = model.config.num_layers;
    std::vector<int> layers;
    for (int l = 0; l <= L; l += std::max(1, L / 8)) layers.push_back(l);
    const TokenizerConfig tok{model.config.vocab_size, model.config.max_seq_len};
    const auto train_store = extract_activations(model, tokenize(train_texts, tok), layers,
                                                 train_labels, "sst2_slice", 42);
    const auto test_store = extract_activations(model, tokenize(test_texts, tok), layers,
                                                test_labels, "sst2_slice", 42);

    SweepGrid grid;
    grid.layers = layers;
    grid.poolings = {Pooling::mean, Pooling::concat};
    grid.classifiers = {ClassifierId::logistic_regression, ClassifierId::linear_svm};
    grid.trials = 3;
    grid.seed = 42;
    const auto report = run_sweep(train_store, test_store, grid);
    expect(report.best.has_value(), "sweep produced no best cell");
    if (!report.best.has_value()) return verdict(10, "real-weights comparison");

    std::vector<PromptExample> prompt_set;
    for (const auto& ex : test) prompt_set.push_back({ex.text, ex.label});
    ToyChatGenerator generator(model);
    const auto prompting = evaluate_prompting(generator, prompt_set, TemplateId::zs_binary);
    note(strfmt("best probe %.4f (layer %d) vs zero-shot prompting %.4f",
                report.best->accuracy, report.best->layer, prompting.accuracy));
    expect(report.best->accuracy > prompting.accuracy,
           "best probe does not beat zero-shot prompting");

    testutil::TempDir tmp;
    const auto feats = pool_store(train_store, report.best->layer, report.best->pooling);
    ProbeSpec spec = ProbeSpec::defaults(report.best->classifier_id, 42);
    save_probe(fit_probe(feats, train_labels, spec), tmp.sub("head.json"));
    const std::string model_path(model_env), head_path = tmp.sub("head.json");
    const Pooling pooling = report.best->pooling;
    const auto factory = [&](int cut) -> RunnerFactory {
        return [model_path, head_path, cut, pooling]() -> std::unique_ptr<BenchRunner> {
            auto pipeline = std::make_shared<TruncatedPipeline>(
                build_truncated(model_path, cut, pooling, load_probe(head_path)));
            return std::make_unique<LambdaRunner>(
                "pipeline", [pipeline](const std::vector<std::string>& batch) {
                    classify(*pipeline, batch);
                });
        };
    };
    const std::vector<std::string> sample(test_texts.begin(),
                                          test_texts.begin() + std::min<size_t>(8, test_texts.size()));
    const auto truncated = measure_efficiency(factory(report.best->layer), sample, 2, 10);
    const auto full = measure_efficiency(factory(L), sample, 2, 10);
    note(strfmt("truncated peak %.1f MB vs full peak %.1f MB",
                static_cast<double>(truncated.peak_memory_bytes) / (1024.0 * 1024.0),
                static_cast<double>(full.peak_memory_bytes) / (1024.0 * 1024.0)));
    expect(truncated.peak_memory_bytes < full.peak_memory_bytes,
           "truncation does not reduce peak memory");
    return verdict(10, "probe beats prompting and truncation saves memory on real weights");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: acceptance <criterion 1..10>\n");
        return 2;
    }
    const int n = std::atoi(argv[1]);
    switch (n) {
        case 1: return criterion1();
        case 2: return criterion2();
        case 3: return criterion3();
        case 4: return criterion4();
        case 5: return criterion5();
        case 6: return criterion6();
        case 7: return criterion7();
        case 8: return criterion8();
        case 9: return criterion9();
        case 10: return criterion10();
        default:
            std::fprintf(stderr, "usage: acceptance <criterion 1..10>\n");
            return 2;
    }
}
