#pragma once

#include <string>
#include <vector>

#include "probekit/extract.hpp"
#include "probekit/model.hpp"
#include "probekit/pooling.hpp"
#include "probekit/probe.hpp"

namespace probekit {

// Parameter bookkeeping for a decoder-only stack: total splits exactly into
// embedding + per-block + LM head (0 when the head is tied to the embedding).
struct ArchitectureConstants {
    std::string model_id;
    int64_t vocab_size = 0;
    int64_t hidden_dim = 0;
    int64_t num_layers = 0;
    int64_t per_block_params = 0;
    int64_t embed_params = 0;
    int64_t lm_head_params = 0;
    bool tied_embeddings = true;

    int64_t total() const {
        return embed_params + num_layers * per_block_params + lm_head_params;
    }

    static ArchitectureConstants from_dims(const std::string& model_id, int64_t vocab,
                                           int64_t d, int64_t n_layers, int64_t n_heads,
                                           int64_t n_kv_heads, int64_t ffn, bool tied) {
        ArchitectureConstants a;
        a.model_id = model_id;
        a.vocab_size = vocab;
        a.hidden_dim = d;
        a.num_layers = n_layers;
        a.tied_embeddings = tied;
        const int64_t head_dim = d / n_heads;
        const int64_t kv_dim = n_kv_heads * head_dim;
        a.per_block_params = d * d * 2      // wq, wo
                             + d * kv_dim * 2  // wk, wv
                             + d * ffn * 3     // gate, up, down
                             + d * 2;          // two norms
        a.embed_params = vocab * d;
        a.lm_head_params = tied ? 0 : d * vocab;
        return a;
    }

    static ArchitectureConstants from_model(const ToyTransformer& m) {
        return from_dims(m.config.model_id, m.config.vocab_size, m.config.hidden_dim,
                         m.config.num_layers, m.config.num_heads, m.config.num_kv_heads,
                         m.config.ffn_dim, m.config.tied_embeddings);
    }

    nlohmann::json to_json() const {
        return {{"model_id", model_id},
                {"vocab_size", vocab_size},
                {"hidden_dim", hidden_dim},
                {"num_layers", num_layers},
                {"per_block_params", per_block_params},
                {"embed_params", embed_params},
                {"lm_head_params", lm_head_params},
                {"tied_embeddings", tied_embeddings}};
    }

    static ArchitectureConstants from_json(const nlohmann::json& j) {
        ArchitectureConstants a;
        a.model_id = j.at("model_id").get<std::string>();
        a.vocab_size = j.at("vocab_size").get<int64_t>();
        a.hidden_dim = j.at("hidden_dim").get<int64_t>();
        a.num_layers = j.at("num_layers").get<int64_t>();
        a.per_block_params = j.at("per_block_params").get<int64_t>();
        a.embed_params = j.at("embed_params").get<int64_t>();
        a.lm_head_params = j.at("lm_head_params").get<int64_t>();
        a.tied_embeddings = j.at("tied_embeddings").get<bool>();
        return a;
    }
};

struct TruncationPlan {
    int cut_layer = 0;
    Pooling pooling = Pooling::mean;
    int64_t head_params = 0;
    int64_t kept_params = 0;
    int64_t full_params = 0;
    double reduction_pct = 0.0;
};

// Pure arithmetic: keeping the embedding, cut_layer blocks, and a fresh
// classification head, how much of the original model goes away.
inline TruncationPlan count_parameters(const ArchitectureConstants& arch, int cut_layer,
                                       int64_t head_params, Pooling pooling = Pooling::mean) {
    if (cut_layer < 0 || cut_layer > arch.num_layers)
        throw CutLayerOutOfRange(strfmt("cut layer %d, model has %lld blocks", cut_layer,
                                        static_cast<long long>(arch.num_layers)));
    TruncationPlan plan;
    plan.cut_layer = cut_layer;
    plan.pooling = pooling;
    plan.head_params = head_params;
    plan.kept_params = arch.embed_params + cut_layer * arch.per_block_params + head_params;
    plan.full_params = arch.total();
    plan.reduction_pct =
        100.0 * (1.0 - static_cast<double>(plan.kept_params) /
                           static_cast<double>(plan.full_params));
    return plan;
}

// The deployable artifact: model prefix + pooling + classification head.
struct TruncatedPipeline {
    ToyTransformer prefix;  // loaded_blocks == plan.cut_layer
    TruncationPlan plan;
    TrainedProbe head;
    std::vector<std::string> label_names;
    TokenizerConfig tokenizer;

    // Pooled layer-i features for a batch, exactly as the sweep computes
    // them. With an identity head this IS the pipeline output.
    PooledFeatures pooled(const std::vector<std::string>& texts) const {
        const auto batch = tokenize(texts, tokenizer);
        std::vector<int32_t> dummy_labels(texts.size(), 0);
        const auto store = extract_activations(prefix, batch, {plan.cut_layer}, dummy_labels,
                                               "inference", 0);
        return pool_store(store, plan.cut_layer, plan.pooling);
    }
};

inline std::vector<std::string> default_label_names(const std::vector<int32_t>& label_set) {
    std::vector<std::string> names;
    for (int32_t l : label_set) names.push_back(std::to_string(l));
    return names;
}

// Loads only the prefix weights from the model file; the dropped blocks and
// LM head are skipped at read time, so they never occupy memory.
inline TruncatedPipeline build_truncated(const std::string& model_path, int cut_layer,
                                         Pooling pooling, TrainedProbe head,
                                         std::vector<std::string> label_names = {}) {
    TruncatedPipeline p;
    p.prefix = ToyTransformer::load_prefix(model_path, cut_layer);
    const size_t expect = pooled_dim(static_cast<size_t>(p.prefix.config.hidden_dim), pooling);
    if (static_cast<size_t>(head.input_dim) != expect)
        throw HeadDimensionMismatch(strfmt("head expects dim %lld, %s pooling at d=%d gives %zu",
                                           static_cast<long long>(head.input_dim),
                                           to_string(pooling).c_str(),
                                           p.prefix.config.hidden_dim, expect));
    const auto arch = ArchitectureConstants::from_model(p.prefix);
    p.plan = count_parameters(arch, cut_layer,
                              static_cast<int64_t>(head.model->fitted_param_count()), pooling);
    p.label_names =
        label_names.empty() ? default_label_names(head.label_set) : std::move(label_names);
    p.head = std::move(head);
    p.tokenizer = TokenizerConfig{p.prefix.config.vocab_size, p.prefix.config.max_seq_len};
    return p;
}

inline std::vector<int32_t> classify(const TruncatedPipeline& pipeline,
                                     const std::vector<std::string>& texts) {
    if (texts.empty()) throw EmptyInput("no texts to classify");
    return predict_probe(pipeline.head, pipeline.pooled(texts));
}

inline std::vector<std::string> classify_names(const TruncatedPipeline& pipeline,
                                               const std::vector<std::string>& texts) {
    const auto labels = classify(pipeline, texts);
    std::vector<std::string> out;
    for (int32_t l : labels) {
        size_t pos = 0;
        while (pos < pipeline.head.label_set.size() && pipeline.head.label_set[pos] != l) ++pos;
        out.push_back(pipeline.label_names[pos]);
    }
    return out;
}

// True iff the pipeline's layer-i activations are bit-identical to the full
// model's at every valid position, for every text.
inline bool verify_prefix_equivalence(const ToyTransformer& full,
                                      const TruncatedPipeline& pipeline,
                                      const std::vector<std::string>& texts) {
    const int cut = pipeline.plan.cut_layer;
    if (cut > full.loaded_blocks) throw LayerOutOfRange("full model is shorter than the cut");
    const auto batch = tokenize(texts, pipeline.tokenizer);
    for (size_t e = 0; e < batch.size(); ++e) {
        const int len = batch.lengths[e];
        const auto a = full.forward_residuals(batch.token_ids.row(e), len, cut);
        const auto b = pipeline.prefix.forward_residuals(batch.token_ids.row(e), len, cut);
        if (std::memcmp(a[cut].data.data(), b[cut].data.data(),
                        a[cut].data.size() * sizeof(float)) != 0)
            return false;
    }
    return true;
}

inline bool verify_prefix_equivalence(const std::string& full_model_path,
                                      const TruncatedPipeline& pipeline,
                                      const std::vector<std::string>& texts) {
    return verify_prefix_equivalence(ToyTransformer::load(full_model_path), pipeline, texts);
}

// ---------------------------------------------------------------------------
// Pipeline artifact directory: manifest + prefix weights + head file.
// ---------------------------------------------------------------------------

inline void save_pipeline(const TruncatedPipeline& p, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputNotWritable(dir);
    p.prefix.save_partial(dir + "/prefix.bin", p.plan.cut_layer);
    save_probe(p.head, dir + "/head.json");
    nlohmann::json manifest{
        {"cut_layer", p.plan.cut_layer},
        {"pooling", to_string(p.plan.pooling)},
        {"head_params", p.plan.head_params},
        {"kept_params", p.plan.kept_params},
        {"full_params", p.plan.full_params},
        {"reduction_pct", p.plan.reduction_pct},
        {"label_names", p.label_names},
        {"arch", ArchitectureConstants::from_model(p.prefix).to_json()},
        {"model_config", p.prefix.config.to_json()},
    };
    write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

inline TruncatedPipeline load_pipeline(const std::string& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    } catch (const std::exception& e) {
        throw CorruptManifest(std::string("pipeline manifest: ") + e.what());
    }
    TruncatedPipeline p;
    try {
        const int cut = manifest.at("cut_layer").get<int>();
        p.prefix = ToyTransformer::load_prefix(dir + "/prefix.bin", cut);
        p.head = load_probe(dir + "/head.json");
        p.plan.cut_layer = cut;
        p.plan.pooling = pooling_from_string(manifest.at("pooling").get<std::string>());
        p.plan.head_params = manifest.at("head_params").get<int64_t>();
        p.plan.kept_params = manifest.at("kept_params").get<int64_t>();
        p.plan.full_params = manifest.at("full_params").get<int64_t>();
        p.plan.reduction_pct = manifest.at("reduction_pct").get<double>();
        p.label_names = manifest.at("label_names").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptManifest(std::string("pipeline manifest: ") + e.what());
    }
    p.tokenizer = TokenizerConfig{p.prefix.config.vocab_size, p.prefix.config.max_seq_len};
    return p;
}

}  // namespace probekit
