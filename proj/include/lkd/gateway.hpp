#pragma once

#include "lkd/errors.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace lkd {

struct ChatRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.1;
    int max_tokens = 1024;
};

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
};

/// Uniform access to a chat-completion model.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Deterministic test double: ordered substring rules over the user prompt,
/// first match wins, every call logged.
class ScriptedBackend : public ChatBackend {
public:
    struct Rule {
        std::string match;     // substring pattern over user_prompt
        std::string response;
    };

    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<Rule> rules, std::string default_response = "")
        : rules_(std::move(rules)), default_response_(std::move(default_response)) {}

    void add_rule(std::string match, std::string response) {
        rules_.push_back({std::move(match), std::move(response)});
    }
    void set_default_response(std::string response) { default_response_ = std::move(response); }

    ChatResponse complete(const ChatRequest& request) override;

    std::vector<ChatRequest> call_log() const;
    std::size_t call_count() const;

    /// Loads {"rules":[{"match":..., "response":...}], "default_response":...} from JSON text.
    static std::shared_ptr<ScriptedBackend> from_json(const std::string& json_text);

private:
    std::vector<Rule> rules_;
    std::string default_response_;
    mutable std::mutex mu_;
    std::vector<ChatRequest> call_log_;
};

struct RetryPolicy {
    int max_attempts = 5;
    int base_delay_ms = 1000;
    double factor = 2.0;
};

/// OpenAI-compatible chat-completions client. Transient transport failures and
/// rate-limit responses are retried with exponential backoff; credential
/// rejections and oversized-context rejections are surfaced immediately.
class HttpChatBackend : public ChatBackend {
public:
    HttpChatBackend(std::string base_url, std::string model, std::string api_key,
                    RetryPolicy retry = {});

    ChatResponse complete(const ChatRequest& request) override;

private:
    std::string base_url_;
    std::string model_;
    std::string api_key_;
    RetryPolicy retry_;
};

/// Issues a request and runs `parse` on the reply. On ParseError the request is
/// re-issued with an appended corrective instruction, at most `retries` extra
/// times (so at most retries+1 completions), then the last ParseError propagates.
template <typename T>
T complete_parsed(ChatBackend& backend, const ChatRequest& request,
                  const std::function<T(const std::string&)>& parse, int retries) {
    ChatRequest attempt = request;
    for (int round = 0;; ++round) {
        ChatResponse response = backend.complete(attempt);
        try {
            return parse(response.text);
        } catch (const ParseError& err) {
            if (round >= retries) throw;
            attempt.user_prompt = request.user_prompt +
                "\n\nYour previous reply could not be parsed (" + err.what() +
                "). Reply again using exactly the required format and nothing else.";
        }
    }
}

} // namespace lkd
