#include "lkd/gateway.hpp"

#include "lkd/util.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace lkd {

using json = nlohmann::json;

namespace {

void validate_request(const ChatRequest& request) {
    if (request.system_prompt.empty() || request.user_prompt.empty()) {
        throw InvalidRequestError("chat prompts must be nonempty");
    }
    if (request.temperature < 0.0 || request.temperature > 2.0) {
        throw InvalidRequestError("temperature out of [0,2]");
    }
    if (request.max_tokens <= 0) {
        throw InvalidRequestError("max_tokens must be positive");
    }
}

} // namespace

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    validate_request(request);
    std::lock_guard<std::mutex> lock(mu_);
    call_log_.push_back(request);
    for (const auto& rule : rules_) {
        if (request.user_prompt.find(rule.match) != std::string::npos) {
            return ChatResponse{rule.response, {}};
        }
    }
    return ChatResponse{default_response_, {}};
}

std::vector<ChatRequest> ScriptedBackend::call_log() const {
    std::lock_guard<std::mutex> lock(mu_);
    return call_log_;
}

std::size_t ScriptedBackend::call_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return call_log_.size();
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const std::string& json_text) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ConfigError("mock script is not a JSON object");
    }
    std::vector<Rule> rules;
    for (const auto& rule : doc.value("rules", json::array())) {
        rules.push_back({rule.at("match").get<std::string>(),
                         rule.at("response").get<std::string>()});
    }
    return std::make_shared<ScriptedBackend>(std::move(rules),
                                             doc.value("default_response", std::string{}));
}

namespace {

struct ParsedUrl {
    bool https = false;
    std::string host_port;  // host[:port]
    std::string path;       // path prefix, no trailing slash
};

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    std::string rest = url;
    if (rest.rfind("https://", 0) == 0) { out.https = true; rest = rest.substr(8); }
    else if (rest.rfind("http://", 0) == 0) { rest = rest.substr(7); }
    else throw ConfigError("endpoint base_url must start with http:// or https://: " + url);
    const std::size_t slash = rest.find('/');
    if (slash == std::string::npos) {
        out.host_port = rest;
    } else {
        out.host_port = rest.substr(0, slash);
        out.path = rest.substr(slash);
        while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    }
    if (out.host_port.empty()) throw ConfigError("endpoint base_url has no host: " + url);
    return out;
}

bool looks_like_context_overflow(const std::string& body) {
    const std::string lower = to_lower(body);
    return lower.find("context_length") != std::string::npos ||
           lower.find("context length") != std::string::npos ||
           lower.find("maximum context") != std::string::npos ||
           lower.find("too many tokens") != std::string::npos;
}

} // namespace

HttpChatBackend::HttpChatBackend(std::string base_url, std::string model,
                                 std::string api_key, RetryPolicy retry)
    : base_url_(std::move(base_url)), model_(std::move(model)),
      api_key_(std::move(api_key)), retry_(retry) {}

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
    validate_request(request);
    const ParsedUrl url = parse_url(base_url_);

    json body{
        {"model", model_},
        {"messages", json::array({
            json{{"role", "system"}, {"content", request.system_prompt}},
            json{{"role", "user"}, {"content", request.user_prompt}},
        })},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    const std::string payload = body.dump();
    const std::string endpoint = url.path + "/chat/completions";

    std::string last_error;
    for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(static_cast<long long>(
                retry_.base_delay_ms * std::pow(retry_.factor, attempt - 1)));
            std::this_thread::sleep_for(delay);
        }

        httplib::Client client(std::string(url.https ? "https://" : "http://") + url.host_port);
        client.set_connection_timeout(30);
        client.set_read_timeout(600);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto result = client.Post(endpoint, headers, payload, "application/json");
        if (!result) {
            last_error = "connection failure: " + httplib::to_string(result.error());
            continue;  // transient
        }
        const int status = result->status;
        if (status == 401 || status == 403) {
            throw AuthError("credential rejected by endpoint (HTTP " +
                            std::to_string(status) + ")");
        }
        if (status == 400 && looks_like_context_overflow(result->body)) {
            throw ContextOverflowError("request rejected as too long: " + result->body);
        }
        if (status == 429 || status == 408 || status >= 500) {
            last_error = "HTTP " + std::to_string(status);
            continue;  // rate limit / transient server failure
        }
        if (status != 200) {
            throw TransportError("endpoint returned HTTP " + std::to_string(status) + ": " +
                                 result->body);
        }

        json doc = json::parse(result->body, nullptr, false);
        if (doc.is_discarded()) throw TransportError("endpoint returned malformed JSON");
        try {
            ChatResponse response;
            response.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
            if (doc.contains("usage")) {
                response.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
                response.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
            }
            return response;
        } catch (const json::exception& err) {
            throw TransportError(std::string("unexpected completion payload: ") + err.what());
        }
    }
    throw TransportError("retries exhausted (" + std::to_string(retry_.max_attempts) +
                         " attempts): " + last_error);
}

} // namespace lkd
