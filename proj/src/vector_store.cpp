#include "lkd/vector_store.hpp"

#include "lkd/errors.hpp"
#include "lkd/util.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lkd {

using json = nlohmann::json;

VectorStore::VectorStore(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw DimensionMismatchError("store dimension must be positive");
}

void VectorStore::insert(const std::string& id, const std::string& value, const Embedding& key) {
    if (key.size() != dimension_) {
        throw DimensionMismatchError("key dimension " + std::to_string(key.size()) +
                                     " != store dimension " + std::to_string(dimension_));
    }
    if (l2_norm(key) == 0.0) throw ZeroVectorError("zero-norm key rejected: " + id);
    for (const auto& entry : entries_) {
        if (entry.id == id) throw DuplicateIdError("duplicate id: " + id);
    }
    entries_.push_back({id, value, key});
}

std::vector<VectorStore::Hit> VectorStore::top_k(const Embedding& query, std::size_t k) const {
    if (k < 1) throw BadRangeError("k must be >= 1");
    if (query.size() != dimension_) {
        throw DimensionMismatchError("query dimension " + std::to_string(query.size()) +
                                     " != store dimension " + std::to_string(dimension_));
    }
    if (l2_norm(query) == 0.0) throw ZeroVectorError("zero-norm query rejected");

    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        scored.emplace_back(cosine_distance(query, entries_[i].key), i);
    }
    std::sort(scored.begin(), scored.end());  // (distance, insertion index)

    const std::size_t count = std::min(k, scored.size());
    std::vector<Hit> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& entry = entries_[scored[i].second];
        out.push_back({entry.id, entry.value, scored[i].first});
    }
    return out;
}

void VectorStore::save_jsonl(const std::string& path) const {
    std::ostringstream out;
    for (const auto& entry : entries_) {
        json line{{"id", entry.id}, {"value", entry.value}, {"vector", entry.key}};
        out << line.dump() << "\n";
    }
    write_file(path, out.str());
}

VectorStore VectorStore::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open store file: " + path);
    std::vector<Entry> entries;
    std::size_t dimension = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded()) throw IoError("malformed store line in " + path);
        Entry entry;
        entry.id = doc.at("id").get<std::string>();
        entry.value = doc.at("value").get<std::string>();
        entry.key = doc.at("vector").get<Embedding>();
        if (dimension == 0) dimension = entry.key.size();
        entries.push_back(std::move(entry));
    }
    if (dimension == 0) throw IoError("store file has no entries: " + path);
    VectorStore store(dimension);
    for (auto& entry : entries) store.insert(entry.id, entry.value, entry.key);
    return store;
}

} // namespace lkd
