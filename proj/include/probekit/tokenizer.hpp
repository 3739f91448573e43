#pragma once

#include <string>
#include <vector>

#include "probekit/common.hpp"
#include "probekit/mat.hpp"

namespace probekit {

constexpr int32_t kPadId = 0;
constexpr int32_t kEosId = 1;
constexpr int32_t kFirstWordId = 2;

// Whitespace word tokenizer with a hashed vocabulary. Real subword
// tokenizers are interchangeable here; all the toolkit needs is a stable
// text -> id sequence and a padding convention.
struct TokenizerConfig {
    int32_t vocab_size = 4096;
    int32_t max_seq_len = 128;
};

struct TokenizedBatch {
    Mat<int32_t> token_ids;       // num_texts x max_len, right padded
    Mat<uint8_t> attention_mask;  // num_texts x max_len, 1 = real token
    std::vector<int32_t> lengths;
    int32_t pad_id = kPadId;

    size_t size() const { return token_ids.rows; }
    size_t max_len() const { return token_ids.cols; }
};

inline int32_t word_to_id(const std::string& word, int32_t vocab_size) {
    const uint64_t h = fnv1a64(word);
    return kFirstWordId + static_cast<int32_t>(h % static_cast<uint64_t>(vocab_size - kFirstWordId));
}

// Ids map back to lowercase-letter words so round-tripped text never
// contains digits or punctuation.
inline std::string id_to_word(int32_t id) {
    std::string s;
    uint32_t v = static_cast<uint32_t>(id);
    do {
        s.push_back(static_cast<char>('a' + v % 26));
        v /= 26;
    } while (v);
    return s;
}

inline std::vector<int32_t> encode(const std::string& text, const TokenizerConfig& cfg) {
    const std::string stripped = strip(text);
    if (stripped.empty()) throw EmptyInput("text is empty after whitespace stripping");
    std::vector<int32_t> ids;
    for (const auto& w : split_ws(stripped)) ids.push_back(word_to_id(w, cfg.vocab_size));
    if (static_cast<int32_t>(ids.size()) > cfg.max_seq_len)
        throw TextTooLong(strfmt("%zu tokens, limit %d", ids.size(), cfg.max_seq_len));
    return ids;
}

inline std::string decode(const std::vector<int32_t>& ids) {
    std::string out;
    for (int32_t id : ids) {
        if (id == kPadId || id == kEosId) continue;
        if (!out.empty()) out.push_back(' ');
        out += id_to_word(id);
    }
    return out;
}

// Batch is padded on the right to the longest member; every row keeps its
// true length so downstream consumers never have to rediscover it.
inline TokenizedBatch tokenize(const std::vector<std::string>& texts, const TokenizerConfig& cfg) {
    if (texts.empty()) throw EmptyInput("no texts to tokenize");
    std::vector<std::vector<int32_t>> rows;
    rows.reserve(texts.size());
    size_t max_len = 0;
    for (const auto& t : texts) {
        rows.push_back(encode(t, cfg));
        max_len = std::max(max_len, rows.back().size());
    }
    TokenizedBatch batch;
    batch.token_ids = Mat<int32_t>(texts.size(), max_len, kPadId);
    batch.attention_mask = Mat<uint8_t>(texts.size(), max_len, 0);
    for (size_t r = 0; r < rows.size(); ++r) {
        batch.lengths.push_back(static_cast<int32_t>(rows[r].size()));
        for (size_t c = 0; c < rows[r].size(); ++c) {
            batch.token_ids.at(r, c) = rows[r][c];
            batch.attention_mask.at(r, c) = 1;
        }
    }
    return batch;
}

}  // namespace probekit
