#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "probekit/common.hpp"
#include "probekit/model.hpp"
#include "probekit/tokenizer.hpp"

namespace probekit {

enum class TemplateId { zs_binary, zs_emotion, fs_binary, fs_emotion, cot_binary, cot_emotion };
enum class Task { binary, emotion };

inline const std::vector<TemplateId>& all_templates() {
    static const std::vector<TemplateId> v{TemplateId::zs_binary,  TemplateId::zs_emotion,
                                           TemplateId::fs_binary,  TemplateId::fs_emotion,
                                           TemplateId::cot_binary, TemplateId::cot_emotion};
    return v;
}

inline std::string to_string(TemplateId id) {
    switch (id) {
        case TemplateId::zs_binary: return "zs_binary";
        case TemplateId::zs_emotion: return "zs_emotion";
        case TemplateId::fs_binary: return "fs_binary";
        case TemplateId::fs_emotion: return "fs_emotion";
        case TemplateId::cot_binary: return "cot_binary";
        case TemplateId::cot_emotion: return "cot_emotion";
    }
    throw std::invalid_argument("bad template enum");
}

inline TemplateId template_from_string(const std::string& s) {
    for (TemplateId id : all_templates())
        if (to_string(id) == s) return id;
    throw std::invalid_argument("unknown template: " + s);
}

inline Task task_of(TemplateId id) {
    switch (id) {
        case TemplateId::zs_binary:
        case TemplateId::fs_binary:
        case TemplateId::cot_binary: return Task::binary;
        default: return Task::emotion;
    }
}

inline int num_labels(Task t) { return t == Task::binary ? 2 : 6; }

struct PromptTemplate {
    TemplateId id;
    std::string system;
    std::string user;  // contains the {text} slot
    std::string assistant;
};

inline const PromptTemplate& get_template(TemplateId id) {
    static const std::string kStrictSystem =
        "You are an assistant trained to perform strict sentiment and emotion "
        "classification.\n"
        "You MUST only respond with the numeric label corresponding to the classification.\n"
        "Do not provide any explanations, reasoning, or any text other than the required "
        "numeric value.";
    static const std::string kFewShotSystem =
        "You are an assistant trained for sentiment and emotion analysis.\n"
        "You MUST only respond with the correct numeric label.\n"
        "Do not provide explanations or any additional text.";
    static const std::string kCotSystem =
        "You are an assistant specialized in sentiment and emotion analysis.\n"
        "Think step-by-step through the reasoning process (chain-of-thought) privately, but "
        "provide only the final numeric classification as instructed.\n"
        "Do not include reasoning steps in the output.";
    static const std::string kBinaryAssistant =
        "If the sentiment is positive, respond with '1'. If the sentiment is negative, "
        "respond with '0'.\n"
        "No other text, explanation, or formatting.";

    static const std::map<TemplateId, PromptTemplate> kTemplates{
        {TemplateId::zs_binary,
         {TemplateId::zs_binary, kStrictSystem,
          "Classify the sentiment of the following text: '{text}'", kBinaryAssistant}},
        {TemplateId::zs_emotion,
         {TemplateId::zs_emotion, kStrictSystem,
          "Classify the sentiment of the following text: '{text}'",
          "Classify the text into one of the following emotions and respond only with the "
          "corresponding number:\n"
          "0: Sadness, 1: Joy, 2: Love, 3: Anger, 4: Fear, 5: Surprise.\n"
          "No explanation or additional text."}},
        {TemplateId::fs_binary,
         {TemplateId::fs_binary, kFewShotSystem,
          "Examples:\n"
          "'I love this product!' => 1\n"
          "'I am disappointed with the service.' => 0\n"
          "Classify the following text sentiment:'{text}'",
          kBinaryAssistant}},
        {TemplateId::fs_emotion,
         {TemplateId::fs_emotion, kFewShotSystem,
          "Examples:\n"
          "'This is the worst day of my life.' => 0\n"
          "'I feel so joyful and alive!' => 1\n"
          "'I feel so deeply connected and grateful for you in my life.' => 2\n"
          "'I am so angry right now.' => 3\n"
          "'I’m really scared and worried about what might happen next.' => 4\n"
          "'Wow, I didn't expect that at all! This is completely unexpected!' => 5\n"
          "Classify the following text emotion:'{text}'",
          "Respond only with one of the following numbers: 0: Sadness, 1: Joy, 2: Love, "
          "3: Anger, 4: Fear, 5: Surprise.\n"
          "No other text, explanation, or formatting."}},
        {TemplateId::cot_binary,
         {TemplateId::cot_binary, kCotSystem,
          "Analyze the sentiment of the following text: '{text}'\n"
          "Carefully reason step-by-step to determine the sentiment.\n"
          "Output only '1' for positive sentiment or '0' for negative sentiment as your "
          "final response.",
          "I will reason step-by-step internally to determine the sentiment.\n"
          "However, my final response will be '1' for positive sentiment or '0' for "
          "negative sentiment, with no explanation included in the output."}},
        {TemplateId::cot_emotion,
         {TemplateId::cot_emotion, kCotSystem,
          "Analyze the emotion of the following text: '{text}'\n"
          "Carefully reason step-by-step to identify the best-matching emotion.\n"
          "Output only the corresponding number as your final response: 0: Sadness, 1: Joy, "
          "2: Love, 3: Anger, 4: Fear, 5: Surprise.",
          "I will reason step-by-step internally to determine the most appropriate emotion.\n"
          "My final response will be one of the following numbers: 0: Sadness, 1: Joy, "
          "2: Love, 3: Anger, 4: Fear, 5: Surprise.\n"
          "No reasoning will be included in the output."}},
    };
    return kTemplates.at(id);
}

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

namespace detail {
inline std::string substitute_text(const std::string& tpl, const std::string& text) {
    std::string out;
    size_t pos = 0;
    while (true) {
        const size_t slot = tpl.find("{text}", pos);
        if (slot == std::string::npos) {
            out += tpl.substr(pos);
            return out;
        }
        out += tpl.substr(pos, slot - pos);
        out += text;
        pos = slot + 6;
    }
}
}  // namespace detail

inline std::vector<ChatMessage> render_prompt(const PromptTemplate& tpl,
                                              const std::string& text) {
    if (strip(text).empty()) throw EmptyText("prompt text is empty");
    return {{"system", detail::substitute_text(tpl.system, text)},
            {"user", detail::substitute_text(tpl.user, text)},
            {"assistant", detail::substitute_text(tpl.assistant, text)}};
}

// ---------------------------------------------------------------------------
// Strict label parsing: the first integer token decides, anything else is
// UNPARSEABLE. Total by construction, never throws.
// ---------------------------------------------------------------------------

constexpr int kUnparseable = -1000;

struct ParsedPrediction {
    std::string raw;
    int label = kUnparseable;  // kUnparseable when no usable integer found
    Task task = Task::binary;

    bool unparseable() const { return label == kUnparseable; }
};

inline ParsedPrediction parse_label(const std::string& raw, Task task) {
    ParsedPrediction out;
    out.raw = raw;
    out.task = task;
    const std::string s = strip(raw);
    for (size_t i = 0; i < s.size(); ++i) {
        const bool neg = s[i] == '-' && i + 1 < s.size() &&
                         std::isdigit(static_cast<unsigned char>(s[i + 1]));
        if (!neg && !std::isdigit(static_cast<unsigned char>(s[i]))) continue;
        size_t j = i + (neg ? 1 : 0);
        long long value = 0;
        bool overflow = false;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
            if (value > 1000000) overflow = true;  // anything this big is out of range anyway
            if (!overflow) value = value * 10 + (s[j] - '0');
            ++j;
        }
        if (neg) value = -value;
        const int hi = num_labels(task) - 1;
        if (!overflow && value >= 0 && value <= hi) out.label = static_cast<int>(value);
        return out;  // only the first integer counts, in range or not
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generation backends. Everything downstream only needs greedy text-out.
// ---------------------------------------------------------------------------

class ChatGenerator {
public:
    virtual ~ChatGenerator() = default;
    virtual std::string generate(const std::vector<ChatMessage>& messages,
                                 int max_new_tokens) = 0;
};

// Always answers the same string; handy for scoring-logic tests.
class StubConstantGenerator final : public ChatGenerator {
public:
    explicit StubConstantGenerator(std::string reply) : reply_(std::move(reply)) {}
    std::string generate(const std::vector<ChatMessage>&, int) override { return reply_; }

private:
    std::string reply_;
};

// Looks the gold label up by matching the stored text inside the rendered
// user message; an oracle for the accuracy-1.0 path.
class StubEchoGoldGenerator final : public ChatGenerator {
public:
    explicit StubEchoGoldGenerator(const std::vector<std::pair<std::string, int>>& data) {
        for (const auto& [text, label] : data) gold_.emplace_back(text, label);
    }

    std::string generate(const std::vector<ChatMessage>& messages, int) override {
        for (const auto& m : messages) {
            if (m.role != "user") continue;
            for (const auto& [text, label] : gold_)
                if (m.content.find(text) != std::string::npos) return std::to_string(label);
        }
        return "no match";
    }

private:
    std::vector<std::pair<std::string, int>> gold_;
};

// Drives the toy transformer: messages are flattened through a fixed chat
// frame, generation is greedy, output is detokenized text.
class ToyChatGenerator final : public ChatGenerator {
public:
    explicit ToyChatGenerator(const ToyTransformer& model)
        : model_(model), tok_{model.config.vocab_size, model.config.max_seq_len} {}

    static std::string format_chat(const std::vector<ChatMessage>& messages) {
        std::string flat;
        for (const auto& m : messages)
            flat += "<|" + m.role + "|> " + m.content + "\n";
        flat += "<|response|>";
        return flat;
    }

    std::string generate(const std::vector<ChatMessage>& messages, int max_new_tokens) override {
        std::vector<int32_t> ids = encode(format_chat(messages), tok_);
        const auto fresh = model_.generate(ids, max_new_tokens);
        return decode(fresh);
    }

private:
    const ToyTransformer& model_;
    TokenizerConfig tok_;
};

// ---------------------------------------------------------------------------
// Evaluation loop.
// ---------------------------------------------------------------------------

inline int default_max_new_tokens(TemplateId id) {
    return (id == TemplateId::cot_binary || id == TemplateId::cot_emotion) ? 256 : 8;
}

struct PromptExample {
    std::string text;
    int gold = 0;
};

struct PromptEvalResult {
    TemplateId template_id = TemplateId::zs_binary;
    double accuracy = 0.0;
    double unparseable_rate = 0.0;
    std::vector<ParsedPrediction> predictions;  // aligned with the dataset order
    std::vector<int> golds;
};

inline PromptEvalResult evaluate_prompting(ChatGenerator& generator,
                                           const std::vector<PromptExample>& dataset,
                                           TemplateId template_id, int max_new_tokens = 0) {
    if (dataset.empty()) throw EmptyDataset("no examples to evaluate");
    const Task task = task_of(template_id);
    for (const auto& ex : dataset)
        if (ex.gold < 0 || ex.gold >= num_labels(task))
            throw std::invalid_argument("gold label outside the template's task range");
    if (max_new_tokens <= 0) max_new_tokens = default_max_new_tokens(template_id);

    const PromptTemplate& tpl = get_template(template_id);
    PromptEvalResult result;
    result.template_id = template_id;
    int64_t correct = 0, unparseable = 0;
    for (const auto& ex : dataset) {
        const auto messages = render_prompt(tpl, ex.text);
        const std::string raw = generator.generate(messages, max_new_tokens);
        ParsedPrediction pred = parse_label(raw, task);
        if (pred.unparseable())
            unparseable += 1;  // scored as wrong
        else if (pred.label == ex.gold)
            correct += 1;
        result.predictions.push_back(std::move(pred));
        result.golds.push_back(ex.gold);
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    result.unparseable_rate =
        static_cast<double>(unparseable) / static_cast<double>(dataset.size());
    return result;
}

// One JSON object per example: {index, raw, label, gold}.
inline std::string prompt_log_jsonl(const PromptEvalResult& result) {
    std::string out;
    for (size_t i = 0; i < result.predictions.size(); ++i) {
        const auto& p = result.predictions[i];
        nlohmann::json line{{"index", i}, {"raw", p.raw}, {"gold", result.golds[i]}};
        if (p.unparseable())
            line["label"] = "UNPARSEABLE";
        else
            line["label"] = p.label;
        out += line.dump() + "\n";
    }
    return out;
}

}  // namespace probekit
