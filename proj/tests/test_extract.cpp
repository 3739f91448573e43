#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace probekit;

namespace {

struct Setup {
    ToyTransformer model = ToyTransformer::random(testutil::tiny_config(2, 8, 64, 16), 13);
    std::vector<std::string> texts{"the cat sat", "dog", "a very long sentence here",
                                   "two words", "one", "short text again"};
    std::vector<int32_t> labels{0, 1, 0, 1, 1, 0};
    TokenizedBatch batch;

    Setup() {
        TokenizerConfig tc;
        tc.vocab_size = model.config.vocab_size;
        tc.max_seq_len = model.config.max_seq_len;
        batch = tokenize(texts, tc);
    }
};

}  // namespace

TEST_CASE("extraction is independent of batch grouping", "[extract]") {
    Setup s;
    const std::vector<int> layers{0, 1, 2};
    const auto one = extract_activations(s.model, s.batch, layers, s.labels, "d", 42, 1);
    const auto eight = extract_activations(s.model, s.batch, layers, s.labels, "d", 42, 8);
    const auto three = extract_activations(s.model, s.batch, layers, s.labels, "d", 42, 3);
    REQUIRE(stores_equal(one, eight));
    REQUIRE(stores_equal(one, three));
}

TEST_CASE("extracted values match a direct forward pass", "[extract]") {
    Setup s;
    const std::vector<int> layers{0, 2};
    const auto store = extract_activations(s.model, s.batch, layers, s.labels);
    const size_t plane = store.max_tokens * static_cast<size_t>(store.hidden_dim);
    for (size_t e = 0; e < s.batch.size(); ++e) {
        const int len = s.batch.lengths[e];
        const auto states = s.model.forward_residuals(s.batch.token_ids.row(e), len);
        for (int l : layers) {
            const float* got = store.layers.at(l).data() + e * plane;
            for (int t = 0; t < len; ++t)
                for (int j = 0; j < store.hidden_dim; ++j)
                    REQUIRE(got[t * store.hidden_dim + j] ==
                            states[static_cast<size_t>(l)].at(static_cast<size_t>(t),
                                                              static_cast<size_t>(j)));
        }
    }
}

TEST_CASE("padded tail stays exactly zero", "[extract]") {
    Setup s;
    const auto store = extract_activations(s.model, s.batch, {0, 1, 2}, s.labels);
    const size_t plane = store.max_tokens * static_cast<size_t>(store.hidden_dim);
    bool saw_padding = false;
    for (size_t e = 0; e < s.batch.size(); ++e) {
        for (int64_t t = s.batch.lengths[e]; t < store.max_tokens; ++t) {
            saw_padding = true;
            for (const auto& [l, flat] : store.layers)
                for (int j = 0; j < store.hidden_dim; ++j)
                    REQUIRE(flat[e * plane + static_cast<size_t>(t) * store.hidden_dim + j] == 0.0f);
        }
    }
    REQUIRE(saw_padding);  // the corpus must actually exercise padding
}

TEST_CASE("store metadata mirrors its inputs", "[extract]") {
    Setup s;
    const auto store = extract_activations(s.model, s.batch, {1}, s.labels, "sst2_small", 99);
    REQUIRE(store.model_id == s.model.config.model_id);
    REQUIRE(store.dataset_id == "sst2_small");
    REQUIRE(store.creation_seed == 99);
    REQUIRE(store.num_examples == static_cast<int64_t>(s.texts.size()));
    REQUIRE(store.max_tokens == static_cast<int64_t>(s.batch.max_len()));
    REQUIRE(store.hidden_dim == s.model.config.hidden_dim);
    REQUIRE(store.labels == s.labels);
    REQUIRE(store.layer_ids() == std::vector<int>{1});

    // mask rows agree with true lengths
    for (size_t e = 0; e < s.batch.size(); ++e)
        for (size_t t = 0; t < s.batch.max_len(); ++t)
            REQUIRE(store.mask.at(e, t) ==
                    (static_cast<int32_t>(t) < s.batch.lengths[e] ? 1 : 0));
}

TEST_CASE("extraction rejects bad requests", "[extract]") {
    Setup s;
    REQUIRE_THROWS_AS(extract_activations(s.model, s.batch, {3}, s.labels), LayerOutOfRange);
    REQUIRE_THROWS_AS(extract_activations(s.model, s.batch, {-1}, s.labels), LayerOutOfRange);
    REQUIRE_THROWS_AS(extract_activations(s.model, s.batch, {}, s.labels), LayerOutOfRange);
    REQUIRE_THROWS_AS(extract_activations(s.model, s.batch, {0}, {0, 1}), ShapeMismatch);
    REQUIRE_THROWS_AS(extract_activations(s.model, s.batch, {0}, s.labels, "", 0, 0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(extract_activations(s.model, TokenizedBatch{}, {0}, {}), EmptyInput);
}

TEST_CASE("a truncated model extracts the same early layers", "[extract]") {
    Setup s;
    testutil::TempDir tmp;
    const std::string path = tmp.sub("m.bin");
    s.model.save(path);
    const auto prefix = ToyTransformer::load_prefix(path, 1);

    const auto full = extract_activations(s.model, s.batch, {0, 1}, s.labels, "d", 1);
    const auto part = extract_activations(prefix, s.batch, {0, 1}, s.labels, "d", 1);
    REQUIRE(stores_equal(full, part));
    REQUIRE_THROWS_AS(extract_activations(prefix, s.batch, {2}, s.labels), LayerOutOfRange);
}
