#pragma once

#include <string>
#include <vector>

#include "probekit/common.hpp"
#include "probekit/model.hpp"
#include "probekit/store.hpp"
#include "probekit/tokenizer.hpp"

namespace probekit {

// Runs the model over a tokenized batch and keeps the residual stream at the
// requested layers. Layer 0 is the embedding output; layer l is the stream
// right after block l. Each sequence is processed at its true length, so the
// padded tail stays exactly zero and results do not depend on batch grouping.
inline ActivationStore extract_activations(const ToyTransformer& model,
                                           const TokenizedBatch& batch,
                                           const std::vector<int>& layer_ids,
                                           const std::vector<int32_t>& labels,
                                           const std::string& dataset_id = "",
                                           uint64_t creation_seed = 0,
                                           int batch_size = 8) {
    if (batch.size() == 0) throw EmptyInput("empty batch");
    if (labels.size() != batch.size())
        throw ShapeMismatch(strfmt("%zu labels for %zu examples", labels.size(), batch.size()));
    if (layer_ids.empty()) throw LayerOutOfRange("no layers requested");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    int deepest = 0;
    for (int l : layer_ids) {
        if (l < 0 || l > model.loaded_blocks)
            throw LayerOutOfRange(strfmt("layer %d, model has %d blocks", l,
                                         model.loaded_blocks));
        deepest = std::max(deepest, l);
    }

    ActivationStore store;
    store.model_id = model.config.model_id;
    store.dataset_id = dataset_id;
    store.num_examples = static_cast<int64_t>(batch.size());
    store.max_tokens = static_cast<int64_t>(batch.max_len());
    store.hidden_dim = model.config.hidden_dim;
    store.creation_seed = creation_seed;
    const size_t plane = batch.max_len() * static_cast<size_t>(model.config.hidden_dim);
    for (int l : layer_ids) store.layers.emplace(l, std::vector<float>(batch.size() * plane, 0.0f));
    store.mask = batch.attention_mask;
    store.labels = labels;

    // batch_size only controls how work is chunked; each row is independent.
    for (size_t start = 0; start < batch.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(batch.size(), start + static_cast<size_t>(batch_size));
        for (size_t e = start; e < end; ++e) {
            const int len = batch.lengths[e];
            const auto states = model.forward_residuals(batch.token_ids.row(e), len, deepest);
            for (int l : layer_ids) {
                float* dst = store.layers[l].data() + e * plane;
                const MatF& src = states[l];
                std::copy(src.data.begin(), src.data.end(), dst);
            }
        }
    }
    store.validate_shapes();
    return store;
}

}  // namespace probekit
