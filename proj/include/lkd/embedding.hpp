#pragma once

#include "lkd/gateway.hpp"

#include <string>
#include <vector>

namespace lkd {

using Embedding = std::vector<double>;

double l2_norm(const Embedding& v);
double cosine_distance(const Embedding& u, const Embedding& v);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;

    /// One embedding per text; same text always maps to the same vector within a
    /// run. Throws ProviderError for an empty batch or empty strings.
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;

    Embedding embed_one(const std::string& text);
};

/// Deterministic provider: hashes character n-grams (n = 1..3) into D buckets and
/// L2-normalizes. Any nonempty text yields a unit-norm vector.
class HashingEmbedder : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dimension = 64);
    std::size_t dimension() const override { return dimension_; }
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

private:
    std::size_t dimension_;
};

/// OpenAI-compatible embeddings endpoint client.
class RemoteEmbedder : public EmbeddingProvider {
public:
    RemoteEmbedder(std::string base_url, std::string model, std::string api_key,
                   std::size_t dimension, RetryPolicy retry = {});
    std::size_t dimension() const override { return dimension_; }
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;

private:
    std::string base_url_;
    std::string model_;
    std::string api_key_;
    std::size_t dimension_;
    RetryPolicy retry_;
};

} // namespace lkd
