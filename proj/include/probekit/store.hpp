#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "probekit/common.hpp"
#include "probekit/mat.hpp"

namespace probekit {

namespace fs = std::filesystem;
using nlohmann::json;

// Per-example token matrix handed to the pooling kernels: values are the
// hidden states for every (padded) position, mask marks the real tokens.
struct TokenMatrix {
    MatD values;                 // num_tokens x hidden_dim
    std::vector<uint8_t> mask;   // num_tokens, 1 = real token

    size_t num_tokens() const { return values.rows; }
    size_t hidden_dim() const { return values.cols; }
};

// Activations for one dataset split: one (num_examples x max_tokens x
// hidden_dim) float array per extracted layer, plus the shared attention
// mask and labels.
struct ActivationStore {
    std::string model_id;
    std::string dataset_id;
    int64_t num_examples = 0;
    int64_t max_tokens = 0;
    int64_t hidden_dim = 0;
    uint64_t creation_seed = 0;
    std::string dtype = "f32";

    std::map<int, std::vector<float>> layers;  // layer id -> flat array
    Mat<uint8_t> mask;                         // num_examples x max_tokens
    std::vector<int32_t> labels;               // num_examples

    std::vector<int> layer_ids() const {
        std::vector<int> ids;
        ids.reserve(layers.size());
        for (const auto& [id, _] : layers) ids.push_back(id);
        return ids;
    }

    std::set<int32_t> label_set() const { return {labels.begin(), labels.end()}; }

    bool has_layer(int layer) const { return layers.count(layer) != 0; }

    // Slice one example out of a layer array as a double-precision matrix.
    TokenMatrix token_matrix(int layer, size_t example) const {
        auto it = layers.find(layer);
        if (it == layers.end())
            throw LayerNotInStore("layer " + std::to_string(layer) + " not in store");
        TokenMatrix m;
        m.values = MatD(static_cast<size_t>(max_tokens), static_cast<size_t>(hidden_dim));
        const float* src = it->second.data() +
                           example * static_cast<size_t>(max_tokens * hidden_dim);
        for (size_t i = 0; i < m.values.data.size(); ++i)
            m.values.data[i] = static_cast<double>(src[i]);
        m.mask.assign(mask.row(example), mask.row(example) + max_tokens);
        return m;
    }

    void validate_shapes() const {
        const size_t plane = static_cast<size_t>(max_tokens * hidden_dim);
        for (const auto& [id, arr] : layers) {
            if (arr.size() != static_cast<size_t>(num_examples) * plane)
                throw ShapeMismatch("layer " + std::to_string(id) + " array size");
        }
        if (mask.rows != static_cast<size_t>(num_examples) ||
            mask.cols != static_cast<size_t>(max_tokens))
            throw ShapeMismatch("mask shape");
        if (labels.size() != static_cast<size_t>(num_examples))
            throw ShapeMismatch("labels length");
    }
};

inline void save_store(const ActivationStore& store, const std::string& dir) {
    store.validate_shapes();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputNotWritable(dir);

    auto write_bin = [&](const std::string& name, const void* data, size_t bytes) {
        const std::string path = dir + "/" + name;
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw OutputNotWritable(path);
        os.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
        if (!os) throw OutputNotWritable(path);
    };

    for (const auto& [id, arr] : store.layers)
        write_bin("layer_" + std::to_string(id) + ".bin", arr.data(), arr.size() * 4);
    write_bin("mask.bin", store.mask.data.data(), store.mask.data.size());
    write_bin("labels.bin", store.labels.data(), store.labels.size() * 4);

    json manifest{
        {"model_id", store.model_id},
        {"dataset_id", store.dataset_id},
        {"layer_ids", store.layer_ids()},
        {"dtype", store.dtype},
        {"num_examples", store.num_examples},
        {"max_tokens", store.max_tokens},
        {"hidden_dim", store.hidden_dim},
        {"creation_seed", store.creation_seed},
    };
    // Manifest goes last so a crash mid-write never leaves a "complete"
    // looking store with missing arrays.
    write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

inline ActivationStore load_store(const std::string& dir) {
    const std::string mpath = dir + "/manifest.json";
    if (!fs::exists(mpath)) throw CorruptManifest("missing manifest.json in " + dir);

    json manifest;
    try {
        manifest = json::parse(read_text_file(mpath));
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("manifest.json: ") + e.what());
    }

    ActivationStore store;
    try {
        store.model_id = manifest.at("model_id").get<std::string>();
        store.dataset_id = manifest.at("dataset_id").get<std::string>();
        store.num_examples = manifest.at("num_examples").get<int64_t>();
        store.max_tokens = manifest.at("max_tokens").get<int64_t>();
        store.hidden_dim = manifest.at("hidden_dim").get<int64_t>();
        store.creation_seed = manifest.at("creation_seed").get<uint64_t>();
        store.dtype = manifest.at("dtype").get<std::string>();
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("manifest.json: ") + e.what());
    }
    if (store.dtype != "f32")
        throw CorruptManifest("unsupported store dtype: " + store.dtype);
    if (store.num_examples < 0 || store.max_tokens <= 0 || store.hidden_dim <= 0)
        throw CorruptManifest("non-positive shape field");

    auto read_bin = [&](const std::string& name, void* data, size_t bytes, bool size_is_shape) {
        const std::string path = dir + "/" + name;
        if (!fs::exists(path)) throw CorruptManifest("missing " + name + " in " + dir);
        const auto actual = fs::file_size(path);
        if (actual != bytes) {
            if (size_is_shape)
                throw ShapeMismatch(name + ": expected " + std::to_string(bytes) +
                                    " bytes, found " + std::to_string(actual));
            throw CorruptManifest(name + ": unexpected size");
        }
        std::ifstream is(path, std::ios::binary);
        is.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
        if (!is) throw CorruptManifest("failed reading " + name);
    };

    const size_t n = static_cast<size_t>(store.num_examples);
    const size_t plane = static_cast<size_t>(store.max_tokens * store.hidden_dim);
    for (int id : manifest.at("layer_ids").get<std::vector<int>>()) {
        std::vector<float> arr(n * plane);
        read_bin("layer_" + std::to_string(id) + ".bin", arr.data(), arr.size() * 4, true);
        store.layers.emplace(id, std::move(arr));
    }
    store.mask = Mat<uint8_t>(n, static_cast<size_t>(store.max_tokens));
    read_bin("mask.bin", store.mask.data.data(), store.mask.data.size(), true);
    store.labels.resize(n);
    read_bin("labels.bin", store.labels.data(), store.labels.size() * 4, true);
    return store;
}

inline bool stores_equal(const ActivationStore& a, const ActivationStore& b) {
    return a.model_id == b.model_id && a.dataset_id == b.dataset_id &&
           a.num_examples == b.num_examples && a.max_tokens == b.max_tokens &&
           a.hidden_dim == b.hidden_dim && a.creation_seed == b.creation_seed &&
           a.layers == b.layers && a.mask == b.mask && a.labels == b.labels;
}

}  // namespace probekit
