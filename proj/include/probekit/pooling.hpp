#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "probekit/common.hpp"
#include "probekit/store.hpp"

namespace probekit {

enum class Pooling { mean, last, max, min, concat, attention };

inline const std::vector<Pooling>& all_poolings() {
    static const std::vector<Pooling> v{Pooling::mean,   Pooling::last,  Pooling::max,
                                        Pooling::min,    Pooling::concat, Pooling::attention};
    return v;
}

inline std::string to_string(Pooling p) {
    switch (p) {
        case Pooling::mean: return "mean";
        case Pooling::last: return "last";
        case Pooling::max: return "max";
        case Pooling::min: return "min";
        case Pooling::concat: return "concat";
        case Pooling::attention: return "attention";
    }
    throw std::invalid_argument("bad pooling enum");
}

inline Pooling pooling_from_string(const std::string& s) {
    for (Pooling p : all_poolings())
        if (to_string(p) == s) return p;
    throw std::invalid_argument("unknown pooling: " + s);
}

// Names used in rendered tables and plot legends.
inline std::string display_name(Pooling p) {
    switch (p) {
        case Pooling::mean: return "Mean";
        case Pooling::last: return "Last-Token";
        case Pooling::max: return "Max";
        case Pooling::min: return "Min";
        case Pooling::concat: return "Concat";
        case Pooling::attention: return "Attn";
    }
    throw std::invalid_argument("bad pooling enum");
}

inline size_t pooled_dim(size_t hidden_dim, Pooling p) {
    return p == Pooling::concat ? 3 * hidden_dim : hidden_dim;
}

namespace detail {
inline std::vector<size_t> valid_indices(const TokenMatrix& m) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < m.mask.size(); ++i)
        if (m.mask[i]) idx.push_back(i);
    if (idx.empty()) throw AllMasked("no valid tokens to pool");
    return idx;
}
}  // namespace detail

inline std::vector<double> pool_mean(const TokenMatrix& m) {
    const auto idx = detail::valid_indices(m);
    const size_t d = m.hidden_dim();
    std::vector<double> out(d, 0.0);
    for (size_t i : idx) {
        const double* row = m.values.row(i);
        for (size_t j = 0; j < d; ++j) out[j] += row[j];
    }
    // Plain division, not multiplication by a reciprocal: the f64 mean is
    // specified to match a naive reference bit for bit.
    const double n = static_cast<double>(idx.size());
    for (size_t j = 0; j < d; ++j) out[j] /= n;
    return out;
}

// Hidden state at the last *valid* token, so right padding cannot leak in.
inline std::vector<double> pool_last(const TokenMatrix& m) {
    const auto idx = detail::valid_indices(m);
    const double* row = m.values.row(idx.back());
    return std::vector<double>(row, row + m.hidden_dim());
}

inline std::vector<double> pool_max(const TokenMatrix& m) {
    const auto idx = detail::valid_indices(m);
    const size_t d = m.hidden_dim();
    std::vector<double> out(m.values.row(idx[0]), m.values.row(idx[0]) + d);
    for (size_t k = 1; k < idx.size(); ++k) {
        const double* row = m.values.row(idx[k]);
        for (size_t j = 0; j < d; ++j) out[j] = std::max(out[j], row[j]);
    }
    return out;
}

inline std::vector<double> pool_min(const TokenMatrix& m) {
    const auto idx = detail::valid_indices(m);
    const size_t d = m.hidden_dim();
    std::vector<double> out(m.values.row(idx[0]), m.values.row(idx[0]) + d);
    for (size_t k = 1; k < idx.size(); ++k) {
        const double* row = m.values.row(idx[k]);
        for (size_t j = 0; j < d; ++j) out[j] = std::min(out[j], row[j]);
    }
    return out;
}

inline std::vector<double> pool_extrema(const TokenMatrix& m, const std::string& mode) {
    if (mode == "max") return pool_max(m);
    if (mode == "min") return pool_min(m);
    throw std::invalid_argument("extrema mode must be max or min");
}

inline std::vector<double> pool_concat(const TokenMatrix& m) {
    std::vector<double> out = pool_mean(m);
    const auto mx = pool_max(m);
    const auto mn = pool_min(m);
    out.insert(out.end(), mx.begin(), mx.end());
    out.insert(out.end(), mn.begin(), mn.end());
    return out;
}

// Each valid token is scored by the mean of its own activations, the scores
// go through a softmax, and the result weights the token vectors. Padded
// positions get weight exactly 0.
inline std::vector<double> attention_weights(const TokenMatrix& m) {
    const auto idx = detail::valid_indices(m);
    const size_t d = m.hidden_dim();
    std::vector<double> scores(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) {
        const double* row = m.values.row(idx[k]);
        double s = 0.0;
        for (size_t j = 0; j < d; ++j) s += row[j];
        scores[k] = s / static_cast<double>(d);
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) {
        s = std::exp(s - mx);
        z += s;
    }
    std::vector<double> w(m.mask.size(), 0.0);
    for (size_t k = 0; k < idx.size(); ++k) w[idx[k]] = scores[k] / z;
    return w;
}

inline std::vector<double> pool_attention(const TokenMatrix& m) {
    const auto w = attention_weights(m);
    const size_t d = m.hidden_dim();
    std::vector<double> out(d, 0.0);
    for (size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        const double* row = m.values.row(i);
        for (size_t j = 0; j < d; ++j) out[j] += w[i] * row[j];
    }
    return out;
}

inline std::vector<double> pool(const TokenMatrix& m, Pooling p) {
    switch (p) {
        case Pooling::mean: return pool_mean(m);
        case Pooling::last: return pool_last(m);
        case Pooling::max: return pool_max(m);
        case Pooling::min: return pool_min(m);
        case Pooling::concat: return pool_concat(m);
        case Pooling::attention: return pool_attention(m);
    }
    throw std::invalid_argument("bad pooling enum");
}

// One pooled vector per example, ready to feed a classifier.
struct PooledFeatures {
    MatF values;  // num_examples x pooled_dim
    Pooling method = Pooling::mean;
    int layer = 0;
    std::string model_id;
    std::string dataset_id;
};

// Same on-disk convention as the activation store: manifest + raw array.
inline void save_features(const PooledFeatures& f, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputNotWritable(dir);
    {
        const std::string path = dir + "/features.bin";
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw OutputNotWritable(path);
        write_le(os, f.values.data.data(), f.values.data.size());
        if (!os) throw OutputNotWritable(path);
    }
    json manifest{
        {"model_id", f.model_id},
        {"dataset_id", f.dataset_id},
        {"layer", f.layer},
        {"pooling", to_string(f.method)},
        {"dtype", "f32"},
        {"num_examples", f.values.rows},
        {"feature_dim", f.values.cols},
    };
    write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

inline PooledFeatures load_features(const std::string& dir) {
    const std::string mpath = dir + "/manifest.json";
    if (!fs::exists(mpath)) throw CorruptManifest("missing manifest.json in " + dir);
    json manifest;
    try {
        manifest = json::parse(read_text_file(mpath));
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("manifest.json: ") + e.what());
    }
    PooledFeatures f;
    try {
        f.model_id = manifest.at("model_id").get<std::string>();
        f.dataset_id = manifest.at("dataset_id").get<std::string>();
        f.layer = manifest.at("layer").get<int>();
        f.method = pooling_from_string(manifest.at("pooling").get<std::string>());
        f.values = MatF(manifest.at("num_examples").get<size_t>(),
                        manifest.at("feature_dim").get<size_t>());
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("manifest.json: ") + e.what());
    }
    const std::string path = dir + "/features.bin";
    if (!fs::exists(path)) throw CorruptManifest("missing features.bin in " + dir);
    if (fs::file_size(path) != f.values.data.size() * 4)
        throw ShapeMismatch("features.bin size disagrees with manifest");
    std::ifstream is(path, std::ios::binary);
    read_le(is, f.values.data.data(), f.values.data.size());
    if (!is) throw CorruptManifest("failed reading features.bin");
    return f;
}

inline PooledFeatures pool_store(const ActivationStore& store, int layer, Pooling method) {
    if (!store.has_layer(layer))
        throw LayerNotInStore("layer " + std::to_string(layer) + " not in store");
    PooledFeatures out;
    out.method = method;
    out.layer = layer;
    out.model_id = store.model_id;
    out.dataset_id = store.dataset_id;
    const size_t n = static_cast<size_t>(store.num_examples);
    const size_t pd = pooled_dim(static_cast<size_t>(store.hidden_dim), method);
    out.values = MatF(n, pd);
    for (size_t e = 0; e < n; ++e) {
        const auto pooled = pool(store.token_matrix(layer, e), method);
        float* dst = out.values.row(e);
        for (size_t j = 0; j < pd; ++j) dst[j] = static_cast<float>(pooled[j]);
    }
    return out;
}

}  // namespace probekit
