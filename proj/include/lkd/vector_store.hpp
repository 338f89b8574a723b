#pragma once

#include "lkd/embedding.hpp"

#include <string>
#include <vector>

namespace lkd {

/// Exhaustive in-memory nearest-neighbor store over cosine distance. Entries are
/// immutable once inserted; insertion is the only mutation.
class VectorStore {
public:
    struct Entry {
        std::string id;
        std::string value;
        Embedding key;
    };

    struct Hit {
        std::string id;
        std::string value;
        double distance;
    };

    explicit VectorStore(std::size_t dimension);

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }

    /// Appends an entry. Rejects duplicate ids, mismatched dimensions, and
    /// zero-norm keys.
    void insert(const std::string& id, const std::string& value, const Embedding& key);

    /// min(k, size) nearest entries by cosine distance, ascending; ties broken by
    /// insertion order (earlier first). Empty store yields an empty result.
    std::vector<Hit> top_k(const Embedding& query, std::size_t k) const;

    /// JSONL persistence, one {"id","value","vector"} object per line.
    void save_jsonl(const std::string& path) const;
    static VectorStore load_jsonl(const std::string& path);

private:
    std::size_t dimension_;
    std::vector<Entry> entries_;
};

} // namespace lkd
