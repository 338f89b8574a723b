#include "lkd/embedding.hpp"

#include "lkd/errors.hpp"
#include "lkd/util.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace lkd {

using json = nlohmann::json;

double l2_norm(const Embedding& v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

double cosine_distance(const Embedding& u, const Embedding& v) {
    if (u.size() != v.size()) throw DimensionMismatchError("cosine over mismatched dimensions");
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0) throw ZeroVectorError("cosine distance undefined for zero vector");
    return 1.0 - dot / (nu * nv);
}

Embedding EmbeddingProvider::embed_one(const std::string& text) {
    return embed({text}).front();
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw ProviderError("embedding dimension must be positive");
}

std::vector<Embedding> HashingEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ProviderError("cannot embed an empty batch");
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        if (text.empty()) throw ProviderError("cannot embed an empty string");
        Embedding v(dimension_, 0.0);
        for (std::size_t n = 1; n <= 3; ++n) {
            if (text.size() < n) break;
            for (std::size_t i = 0; i + n <= text.size(); ++i) {
                const std::uint64_t h = fnv1a64(std::string_view(text).substr(i, n));
                v[h % dimension_] += 1.0;
            }
        }
        const double norm = l2_norm(v);
        if (norm == 0.0) throw ZeroVectorError("text embedded to zero vector");
        for (double& x : v) x /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::string model, std::string api_key,
                               std::size_t dimension, RetryPolicy retry)
    : base_url_(std::move(base_url)), model_(std::move(model)),
      api_key_(std::move(api_key)), dimension_(dimension), retry_(retry) {
    if (dimension_ == 0) throw ProviderError("embedding dimension must be positive");
}

std::vector<Embedding> RemoteEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw ProviderError("cannot embed an empty batch");
    for (const auto& t : texts) {
        if (t.empty()) throw ProviderError("cannot embed an empty string");
    }

    std::string rest = base_url_;
    bool https = false;
    if (rest.rfind("https://", 0) == 0) { https = true; rest = rest.substr(8); }
    else if (rest.rfind("http://", 0) == 0) { rest = rest.substr(7); }
    else throw ProviderError("embedding base_url must start with http:// or https://");
    const std::size_t slash = rest.find('/');
    const std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
    std::string path = slash == std::string::npos ? "" : rest.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();

    json body{{"model", model_}, {"input", texts}};
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(
                retry_.base_delay_ms * std::pow(retry_.factor, attempt - 1))));
        }
        httplib::Client client(std::string(https ? "https://" : "http://") + host);
        client.set_read_timeout(600);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto result = client.Post(path + "/embeddings", headers, payload, "application/json");
        if (!result) { last_error = "connection failure"; continue; }
        if (result->status == 401 || result->status == 403) {
            throw ProviderError("embedding credential rejected (HTTP " +
                                std::to_string(result->status) + ")");
        }
        if (result->status == 429 || result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw ProviderError("embedding endpoint returned HTTP " +
                                std::to_string(result->status));
        }
        json doc = json::parse(result->body, nullptr, false);
        if (doc.is_discarded()) throw ProviderError("embedding endpoint returned malformed JSON");
        try {
            std::vector<Embedding> out(texts.size());
            for (const auto& item : doc.at("data")) {
                const std::size_t index = item.at("index").get<std::size_t>();
                if (index >= out.size()) throw ProviderError("embedding index out of range");
                out[index] = item.at("embedding").get<Embedding>();
                if (out[index].size() != dimension_) {
                    throw ProviderError("embedding dimension mismatch: expected " +
                                        std::to_string(dimension_) + ", got " +
                                        std::to_string(out[index].size()));
                }
                if (l2_norm(out[index]) == 0.0) throw ZeroVectorError("provider returned zero vector");
            }
            for (const auto& v : out) {
                if (v.empty()) throw ProviderError("embedding endpoint omitted a batch item");
            }
            return out;
        } catch (const json::exception& err) {
            throw ProviderError(std::string("unexpected embeddings payload: ") + err.what());
        }
    }
    throw ProviderError("embedding retries exhausted: " + last_error);
}

} // namespace lkd
