#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "probekit/common.hpp"
#include "probekit/mat.hpp"
#include "probekit/tokenizer.hpp"

namespace probekit {

enum class Precision { f32, f16, bf16 };

inline std::string to_string(Precision p) {
    switch (p) {
        case Precision::f32: return "f32";
        case Precision::f16: return "f16";
        case Precision::bf16: return "bf16";
    }
    throw PrecisionUnsupported("bad precision enum");
}

inline Precision precision_from_string(const std::string& s) {
    if (s == "f32") return Precision::f32;
    if (s == "f16") return Precision::f16;
    if (s == "bf16") return Precision::bf16;
    throw PrecisionUnsupported(s);
}

struct ModelConfig {
    std::string model_id = "toy";
    int num_layers = 4;
    int hidden_dim = 32;
    int num_heads = 4;
    int num_kv_heads = 2;
    int ffn_dim = 96;
    int vocab_size = 256;
    int max_seq_len = 64;
    Precision precision = Precision::f32;
    std::string padding_side = "right";
    float rope_theta = 10000.0f;
    float rms_eps = 1e-5f;
    bool tied_embeddings = true;

    int head_dim() const { return hidden_dim / num_heads; }
    int kv_dim() const { return num_kv_heads * head_dim(); }

    void validate() const {
        if (num_layers < 1) throw std::invalid_argument("num_layers must be >= 1");
        if (hidden_dim < 1 || vocab_size <= kFirstWordId || max_seq_len < 1)
            throw std::invalid_argument("bad model dimensions");
        if (num_heads < 1 || hidden_dim % num_heads != 0)
            throw std::invalid_argument("hidden_dim must divide into heads");
        if (num_kv_heads < 1 || num_heads % num_kv_heads != 0)
            throw std::invalid_argument("num_heads must divide into kv heads");
        if (padding_side != "right" && padding_side != "left")
            throw std::invalid_argument("padding_side must be left or right");
    }

    nlohmann::json to_json() const {
        return {
            {"model_id", model_id},       {"num_layers", num_layers},
            {"hidden_dim", hidden_dim},   {"num_heads", num_heads},
            {"num_kv_heads", num_kv_heads}, {"ffn_dim", ffn_dim},
            {"vocab_size", vocab_size},   {"max_seq_len", max_seq_len},
            {"precision", to_string(precision)}, {"padding_side", padding_side},
            {"rope_theta", rope_theta},   {"rms_eps", rms_eps},
            {"tied_embeddings", tied_embeddings},
        };
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.model_id = j.at("model_id").get<std::string>();
        c.num_layers = j.at("num_layers").get<int>();
        c.hidden_dim = j.at("hidden_dim").get<int>();
        c.num_heads = j.at("num_heads").get<int>();
        c.num_kv_heads = j.at("num_kv_heads").get<int>();
        c.ffn_dim = j.at("ffn_dim").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.max_seq_len = j.at("max_seq_len").get<int>();
        c.precision = precision_from_string(j.at("precision").get<std::string>());
        c.padding_side = j.at("padding_side").get<std::string>();
        c.rope_theta = j.at("rope_theta").get<float>();
        c.rms_eps = j.at("rms_eps").get<float>();
        c.tied_embeddings = j.at("tied_embeddings").get<bool>();
        return c;
    }
};

struct BlockWeights {
    MatF wq, wk, wv, wo;        // d x d, d x kv, d x kv, d x d
    MatF w_gate, w_up, w_down;  // d x ffn, d x ffn, ffn x d
    std::vector<float> attn_norm, ffn_norm;  // d

    bool operator==(const BlockWeights&) const = default;

    size_t param_count() const {
        return wq.data.size() + wk.data.size() + wv.data.size() + wo.data.size() +
               w_gate.data.size() + w_up.data.size() + w_down.data.size() +
               attn_norm.size() + ffn_norm.size();
    }
};

namespace detail {

inline void rmsnorm(const float* x, const float* w, float* out, int d, float eps) {
    double ss = 0.0;
    for (int j = 0; j < d; ++j) ss += static_cast<double>(x[j]) * static_cast<double>(x[j]);
    const float scale = static_cast<float>(1.0 / std::sqrt(ss / d + static_cast<double>(eps)));
    for (int j = 0; j < d; ++j) out[j] = x[j] * scale * w[j];
}

// Rotary embedding, half-split pairing: dims (j, j + hd/2) rotate together.
inline void rope(float* v, int head_dim, int pos, float theta_base) {
    const int half = head_dim / 2;
    for (int j = 0; j < half; ++j) {
        const double freq = std::pow(static_cast<double>(theta_base),
                                     -2.0 * static_cast<double>(j) / head_dim);
        const double a = static_cast<double>(pos) * freq;
        const float c = static_cast<float>(std::cos(a));
        const float s = static_cast<float>(std::sin(a));
        const float v0 = v[j];
        const float v1 = v[j + half];
        v[j] = v0 * c - v1 * s;
        v[j + half] = v0 * s + v1 * c;
    }
}

inline float silu(float x) { return x / (1.0f + std::exp(-x)); }

inline void quantize_roundtrip(std::vector<float>& v, Precision p) {
    if (p == Precision::f32) return;
    for (float& x : v)
        x = (p == Precision::f16) ? f16_to_f32(f32_to_f16(x)) : bf16_to_f32(f32_to_bf16(x));
}

}  // namespace detail

// Small Llama-shaped decoder: RMSNorm + causal GQA attention with rotary
// positions, then RMSNorm + SwiGLU feed-forward, each added back onto the
// residual stream. Big enough to exercise every code path, small enough to
// run the whole grid in a test suite.
class ToyTransformer {
public:
    ModelConfig config;
    MatF embed;                       // vocab x d
    std::vector<BlockWeights> blocks; // config.num_layers when complete
    std::vector<float> final_norm;    // d
    MatF lm_head;                     // d x vocab, empty when tied
    int loaded_blocks = 0;            // < num_layers for a truncated load

    static ToyTransformer random(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        ToyTransformer m;
        m.config = cfg;
        Rng rng(seed);
        const int d = cfg.hidden_dim;
        auto mat = [&](size_t r, size_t c) {
            MatF w(r, c);
            const float scale = 1.0f / std::sqrt(static_cast<float>(r));
            for (auto& x : w.data) x = static_cast<float>(rng.gaussian()) * scale;
            detail::quantize_roundtrip(w.data, cfg.precision);
            return w;
        };
        m.embed = MatF(cfg.vocab_size, d);
        for (auto& x : m.embed.data) x = static_cast<float>(rng.gaussian());
        detail::quantize_roundtrip(m.embed.data, cfg.precision);
        for (int i = 0; i < cfg.num_layers; ++i) {
            BlockWeights b;
            b.wq = mat(d, d);
            b.wk = mat(d, cfg.kv_dim());
            b.wv = mat(d, cfg.kv_dim());
            b.wo = mat(d, d);
            b.w_gate = mat(d, cfg.ffn_dim);
            b.w_up = mat(d, cfg.ffn_dim);
            b.w_down = mat(cfg.ffn_dim, d);
            b.attn_norm.assign(d, 1.0f);
            b.ffn_norm.assign(d, 1.0f);
            m.blocks.push_back(std::move(b));
        }
        m.final_norm.assign(d, 1.0f);
        if (!cfg.tied_embeddings) m.lm_head = mat(d, cfg.vocab_size);
        m.loaded_blocks = cfg.num_layers;
        return m;
    }

    size_t embed_param_count() const { return embed.data.size(); }
    size_t head_param_count() const { return lm_head.data.size(); }
    size_t param_count() const {
        size_t n = embed.data.size() + final_norm.size() + lm_head.data.size();
        for (const auto& b : blocks) n += b.param_count();
        return n;
    }

    // Hidden states for one unpadded sequence: out[0] is the embedding
    // output, out[l] the residual stream after block l. Only the first
    // `upto_layer` blocks run when requested (0 = embeddings only,
    // -1 = all loaded blocks).
    std::vector<MatF> forward_residuals(const int32_t* ids, int len, int upto_layer = -1) const {
        if (len < 1) throw EmptyInput("empty token sequence");
        if (len > config.max_seq_len)
            throw TextTooLong(strfmt("%d tokens, limit %d", len, config.max_seq_len));
        const int run = upto_layer < 0 ? loaded_blocks : upto_layer;
        if (run > loaded_blocks)
            throw LayerOutOfRange(strfmt("layer %d, model has %d blocks", run, loaded_blocks));
        const int d = config.hidden_dim;

        std::vector<MatF> out;
        out.reserve(run + 1);
        MatF x(len, d);
        for (int t = 0; t < len; ++t) {
            const int32_t id = ids[t];
            if (id < 0 || id >= config.vocab_size)
                throw std::invalid_argument("token id out of vocab");
            std::copy(embed.row(id), embed.row(id) + d, x.row(t));
        }
        out.push_back(x);
        for (int l = 0; l < run; ++l) {
            run_block(blocks[l], x);
            out.push_back(x);
        }
        return out;
    }

    // Logits at the last position, for greedy decoding.
    std::vector<float> logits_last(const int32_t* ids, int len) const {
        if (loaded_blocks < config.num_layers)
            throw LayerOutOfRange("truncated model cannot produce logits");
        auto states = forward_residuals(ids, len);
        const int d = config.hidden_dim;
        std::vector<float> h(d);
        detail::rmsnorm(states.back().row(len - 1), final_norm.data(), h.data(), d,
                        config.rms_eps);
        std::vector<float> logits(config.vocab_size, 0.0f);
        if (config.tied_embeddings) {
            for (int v = 0; v < config.vocab_size; ++v)
                logits[v] = static_cast<float>(dot(h.data(), embed.row(v), d));
        } else {
            vec_mat_mul(h.data(), lm_head, logits.data());
        }
        return logits;
    }

    // Greedy decode; ties go to the lowest token id. Returns only the newly
    // generated ids, without the terminating eos.
    std::vector<int32_t> generate(std::vector<int32_t> ids, int max_new_tokens) const {
        std::vector<int32_t> fresh;
        for (int step = 0; step < max_new_tokens; ++step) {
            if (static_cast<int>(ids.size()) >= config.max_seq_len) break;
            const auto logits = logits_last(ids.data(), static_cast<int>(ids.size()));
            int32_t best = 0;
            for (int v = 1; v < config.vocab_size; ++v)
                if (logits[v] > logits[best]) best = v;
            if (best == kEosId) break;
            ids.push_back(best);
            fresh.push_back(best);
        }
        return fresh;
    }

    void save(const std::string& path) const;
    // Writes embed + the first n_blocks blocks only (no final norm or head);
    // the pipeline artifact uses this for its prefix blob.
    void save_partial(const std::string& path, int n_blocks) const;
    static ToyTransformer load(const std::string& path);
    // Loads only the tensors needed to produce hidden states up to
    // `cut_layer`; the rest of the file is skipped, never allocated.
    static ToyTransformer load_prefix(const std::string& path, int cut_layer);

private:
    void run_block(const BlockWeights& b, MatF& x) const {
        const int len = static_cast<int>(x.rows);
        const int d = config.hidden_dim;
        const int hd = config.head_dim();
        const int kvd = config.kv_dim();
        const int group = config.num_heads / config.num_kv_heads;
        const float att_scale = 1.0f / std::sqrt(static_cast<float>(hd));

        MatF q(len, d), k(len, kvd), v(len, kvd);
        std::vector<float> normed(d);
        for (int t = 0; t < len; ++t) {
            detail::rmsnorm(x.row(t), b.attn_norm.data(), normed.data(), d, config.rms_eps);
            vec_mat_mul(normed.data(), b.wq, q.row(t));
            vec_mat_mul(normed.data(), b.wk, k.row(t));
            vec_mat_mul(normed.data(), b.wv, v.row(t));
            for (int h = 0; h < config.num_heads; ++h)
                detail::rope(q.row(t) + h * hd, hd, t, config.rope_theta);
            for (int h = 0; h < config.num_kv_heads; ++h)
                detail::rope(k.row(t) + h * hd, hd, t, config.rope_theta);
        }

        std::vector<float> att_out(d);
        std::vector<double> scores;
        for (int t = 0; t < len; ++t) {
            std::fill(att_out.begin(), att_out.end(), 0.0f);
            for (int h = 0; h < config.num_heads; ++h) {
                const float* qh = q.row(t) + h * hd;
                const int kv_off = (h / group) * hd;
                scores.assign(t + 1, 0.0);
                double mx = -1e300;
                for (int j = 0; j <= t; ++j) {
                    scores[j] = dot(qh, k.row(j) + kv_off, hd) * att_scale;
                    mx = std::max(mx, scores[j]);
                }
                double z = 0.0;
                for (int j = 0; j <= t; ++j) {
                    scores[j] = std::exp(scores[j] - mx);
                    z += scores[j];
                }
                float* oh = att_out.data() + h * hd;
                for (int j = 0; j <= t; ++j) {
                    const float w = static_cast<float>(scores[j] / z);
                    const float* vh = v.row(j) + kv_off;
                    for (int c = 0; c < hd; ++c) oh[c] += w * vh[c];
                }
            }
            std::vector<float> proj(d);
            vec_mat_mul(att_out.data(), b.wo, proj.data());
            for (int c = 0; c < d; ++c) x.at(t, c) += proj[c];
        }

        std::vector<float> gate(config.ffn_dim), up(config.ffn_dim), down(d);
        for (int t = 0; t < len; ++t) {
            detail::rmsnorm(x.row(t), b.ffn_norm.data(), normed.data(), d, config.rms_eps);
            vec_mat_mul(normed.data(), b.w_gate, gate.data());
            vec_mat_mul(normed.data(), b.w_up, up.data());
            for (int c = 0; c < config.ffn_dim; ++c) gate[c] = detail::silu(gate[c]) * up[c];
            vec_mat_mul(gate.data(), b.w_down, down.data());
            for (int c = 0; c < d; ++c) x.at(t, c) += down[c];
        }
    }
};

// ---------------------------------------------------------------------------
// Model file format: magic, little-endian u64 header length, JSON header
// (config + tensor table), then raw tensor bytes in the configured precision.
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kModelMagic[8] = {'P', 'K', 'M', 'D', '0', '0', '0', '1'};

struct TensorRecord {
    std::string name;
    std::vector<size_t> shape;
    uint64_t offset = 0;  // bytes past the end of the header
};

inline size_t dtype_bytes(Precision p) { return p == Precision::f32 ? 4 : 2; }

inline void write_tensor(std::ostream& os, const float* data, size_t count, Precision p) {
    if (p == Precision::f32) {
        write_le(os, data, count);
        return;
    }
    std::vector<uint16_t> packed(count);
    for (size_t i = 0; i < count; ++i)
        packed[i] = (p == Precision::f16) ? f32_to_f16(data[i]) : f32_to_bf16(data[i]);
    write_le(os, packed.data(), count);
}

inline void read_tensor(std::istream& is, float* data, size_t count, Precision p) {
    if (p == Precision::f32) {
        read_le(is, data, count);
        return;
    }
    std::vector<uint16_t> packed(count);
    read_le(is, packed.data(), count);
    for (size_t i = 0; i < count; ++i)
        data[i] = (p == Precision::f16) ? f16_to_f32(packed[i]) : bf16_to_f32(packed[i]);
}

}  // namespace detail

inline void ToyTransformer::save(const std::string& path) const {
    if (loaded_blocks < config.num_layers)
        throw ModelLoadFailure("refusing to save a partially loaded model");
    save_partial(path, config.num_layers);
}

inline void ToyTransformer::save_partial(const std::string& path, int n_blocks) const {
    if (n_blocks > loaded_blocks)
        throw ModelLoadFailure("cannot save more blocks than are loaded");
    std::vector<detail::TensorRecord> records;
    std::vector<std::pair<const float*, size_t>> payloads;
    uint64_t offset = 0;
    auto add = [&](const std::string& name, const float* data,
                   std::vector<size_t> shape) {
        size_t count = 1;
        for (size_t s : shape) count *= s;
        records.push_back({name, std::move(shape), offset});
        payloads.emplace_back(data, count);
        offset += count * detail::dtype_bytes(config.precision);
    };
    add("embed", embed.data.data(), {embed.rows, embed.cols});
    for (size_t i = 0; i < static_cast<size_t>(n_blocks); ++i) {
        const auto& b = blocks[i];
        const std::string p = "blocks." + std::to_string(i) + ".";
        add(p + "wq", b.wq.data.data(), {b.wq.rows, b.wq.cols});
        add(p + "wk", b.wk.data.data(), {b.wk.rows, b.wk.cols});
        add(p + "wv", b.wv.data.data(), {b.wv.rows, b.wv.cols});
        add(p + "wo", b.wo.data.data(), {b.wo.rows, b.wo.cols});
        add(p + "w_gate", b.w_gate.data.data(), {b.w_gate.rows, b.w_gate.cols});
        add(p + "w_up", b.w_up.data.data(), {b.w_up.rows, b.w_up.cols});
        add(p + "w_down", b.w_down.data.data(), {b.w_down.rows, b.w_down.cols});
        add(p + "attn_norm", b.attn_norm.data(), {b.attn_norm.size()});
        add(p + "ffn_norm", b.ffn_norm.data(), {b.ffn_norm.size()});
    }
    if (n_blocks == config.num_layers) {
        add("final_norm", final_norm.data(), {final_norm.size()});
        if (!config.tied_embeddings)
            add("lm_head", lm_head.data.data(), {lm_head.rows, lm_head.cols});
    }

    nlohmann::json header{{"config", config.to_json()}, {"tensors", nlohmann::json::array()}};
    for (const auto& r : records)
        header["tensors"].push_back(
            {{"name", r.name}, {"shape", r.shape}, {"offset", r.offset}});
    const std::string hbytes = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw OutputNotWritable(path);
        os.write(detail::kModelMagic, 8);
        const uint64_t hlen = hbytes.size();
        write_le(os, &hlen, 1);
        os.write(hbytes.data(), static_cast<std::streamsize>(hbytes.size()));
        for (const auto& [data, count] : payloads)
            detail::write_tensor(os, data, count, config.precision);
        if (!os) throw OutputNotWritable(path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw OutputNotWritable(path);
}

namespace detail {

struct ModelReader {
    std::ifstream is;
    ModelConfig config;
    std::vector<TensorRecord> records;
    uint64_t data_start = 0;

    explicit ModelReader(const std::string& path) : is(path, std::ios::binary) {
        if (!is) throw ModelLoadFailure("cannot open " + path);
        char magic[8];
        is.read(magic, 8);
        if (!is || std::memcmp(magic, kModelMagic, 8) != 0)
            throw ModelLoadFailure("bad magic in " + path);
        uint64_t hlen = 0;
        read_le(is, &hlen, 1);
        std::string hbytes(hlen, '\0');
        is.read(hbytes.data(), static_cast<std::streamsize>(hlen));
        if (!is) throw ModelLoadFailure("truncated header in " + path);
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(hbytes);
            config = ModelConfig::from_json(header.at("config"));
            for (const auto& t : header.at("tensors"))
                records.push_back({t.at("name").get<std::string>(),
                                   t.at("shape").get<std::vector<size_t>>(),
                                   t.at("offset").get<uint64_t>()});
        } catch (const nlohmann::json::exception& e) {
            throw ModelLoadFailure(std::string("bad header: ") + e.what());
        }
        data_start = 16 + hlen;
    }

    const TensorRecord* find(const std::string& name) const {
        for (const auto& r : records)
            if (r.name == name) return &r;
        return nullptr;
    }

    void fetch(const std::string& name, float* out, size_t r, size_t c) {
        const TensorRecord* rec = find(name);
        if (!rec) throw ModelLoadFailure("missing tensor " + name);
        std::vector<size_t> want = c ? std::vector<size_t>{r, c} : std::vector<size_t>{r};
        if (rec->shape != want) throw ModelLoadFailure("shape mismatch for " + name);
        is.seekg(static_cast<std::streamoff>(data_start + rec->offset));
        read_tensor(is, out, c ? r * c : r, config.precision);
        if (!is) throw ModelLoadFailure("truncated tensor " + name);
    }
};

inline BlockWeights read_block(ModelReader& rd, int i, const ModelConfig& cfg) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    BlockWeights b;
    const size_t d = cfg.hidden_dim, kv = cfg.kv_dim(), f = cfg.ffn_dim;
    b.wq = MatF(d, d);
    rd.fetch(p + "wq", b.wq.data.data(), d, d);
    b.wk = MatF(d, kv);
    rd.fetch(p + "wk", b.wk.data.data(), d, kv);
    b.wv = MatF(d, kv);
    rd.fetch(p + "wv", b.wv.data.data(), d, kv);
    b.wo = MatF(d, d);
    rd.fetch(p + "wo", b.wo.data.data(), d, d);
    b.w_gate = MatF(d, f);
    rd.fetch(p + "w_gate", b.w_gate.data.data(), d, f);
    b.w_up = MatF(d, f);
    rd.fetch(p + "w_up", b.w_up.data.data(), d, f);
    b.w_down = MatF(f, d);
    rd.fetch(p + "w_down", b.w_down.data.data(), f, d);
    b.attn_norm.resize(d);
    rd.fetch(p + "attn_norm", b.attn_norm.data(), d, 0);
    b.ffn_norm.resize(d);
    rd.fetch(p + "ffn_norm", b.ffn_norm.data(), d, 0);
    return b;
}

}  // namespace detail

inline ToyTransformer ToyTransformer::load(const std::string& path) {
    detail::ModelReader rd(path);
    ToyTransformer m;
    m.config = rd.config;
    m.config.validate();
    const size_t d = m.config.hidden_dim;
    m.embed = MatF(m.config.vocab_size, d);
    rd.fetch("embed", m.embed.data.data(), m.config.vocab_size, d);
    for (int i = 0; i < m.config.num_layers; ++i)
        m.blocks.push_back(detail::read_block(rd, i, m.config));
    m.final_norm.resize(d);
    rd.fetch("final_norm", m.final_norm.data(), d, 0);
    if (!m.config.tied_embeddings) {
        m.lm_head = MatF(d, m.config.vocab_size);
        rd.fetch("lm_head", m.lm_head.data.data(), d, m.config.vocab_size);
    }
    m.loaded_blocks = m.config.num_layers;
    return m;
}

inline ToyTransformer ToyTransformer::load_prefix(const std::string& path, int cut_layer) {
    detail::ModelReader rd(path);
    if (cut_layer < 0 || cut_layer > rd.config.num_layers)
        throw CutLayerOutOfRange(strfmt("cut layer %d, model has %d blocks", cut_layer,
                                        rd.config.num_layers));
    ToyTransformer m;
    m.config = rd.config;
    m.config.validate();
    const size_t d = m.config.hidden_dim;
    m.embed = MatF(m.config.vocab_size, d);
    rd.fetch("embed", m.embed.data.data(), m.config.vocab_size, d);
    for (int i = 0; i < cut_layer; ++i)
        m.blocks.push_back(detail::read_block(rd, i, m.config));
    m.loaded_blocks = cut_layer;
    return m;
}

}  // namespace probekit
