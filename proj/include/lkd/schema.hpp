#pragma once

#include "lkd/clustering.hpp"
#include "lkd/dependency.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lkd {

struct TypedMention {
    std::string type_name;  // trimmed, nonempty
    std::string source_path;
};

/// Canonical entity types with one-sentence definitions, in insertion order,
/// plus the raw names merged into each canonical type.
struct EntitySchema {
    std::vector<std::pair<std::string, std::string>> entries;          // name -> definition
    std::map<std::string, std::vector<std::string>> provenance;        // name -> raw names

    bool empty() const { return entries.empty(); }
    /// Case-insensitive lookup; returns the canonical spelling or nullptr.
    const std::string* find_canonical(const std::string& name) const;
    const std::string* definition_of(const std::string& canonical) const;
};

struct ClusteringOptions {
    std::uint64_t seed = 42;
    int restarts = 10;
    std::size_t k_min = 2;
    std::size_t k_max = 0;  // 0: min(2 * ceil(sqrt(N)), N - 1)
};

/// Entity types mentioned by one document, extracted from its text plus its
/// context-enhanced summary. Deduplicated case-insensitively within the
/// document. Unusable model output (after the repair loop) skips the document
/// with a warning instead of failing the stage.
std::vector<TypedMention> extract_entity_types(const DocumentNode& doc,
                                               const SummaryRecord& summary,
                                               const StageContext& ctx);

/// Keeps mentions whose case-folded type name occurs at least twice across the
/// corpus (mentions are already deduplicated per document, so this is a
/// document count). Preserves input order.
std::vector<TypedMention> filter_singletons(const std::vector<TypedMention>& mentions);

/// Embeds each distinct surviving name once and clusters via the silhouette
/// sweep. Fewer than 3 distinct names short-circuit to a single cluster.
/// Clusters are returned in ascending order of their smallest member name.
std::vector<std::vector<std::string>> cluster_types(const std::vector<TypedMention>& mentions,
                                                    EmbeddingProvider& embedder,
                                                    const ClusteringOptions& options);

/// Asks the model to merge a cluster's names and define each merged type,
/// grounded in the top-k summaries retrieved for the cluster. Returns the
/// cluster's partial schema; raw names map to the case-fold-equal canonical
/// name when one exists, else to the nearest canonical by embedding.
EntitySchema canonicalize_cluster(const std::vector<std::string>& cluster,
                                  const VectorStore& store, const StageContext& ctx,
                                  EmbeddingProvider& embedder, std::size_t retrieval_k);

/// Full stage 2: extract -> filter -> cluster -> canonicalize -> merge.
/// Throws EmptySchemaError when no type survives singleton filtering.
EntitySchema build_schema(const CorpusTree& tree,
                          const std::vector<SummaryRecord>& context_summaries,
                          const VectorStore& store, const StageContext& ctx,
                          EmbeddingProvider& embedder, std::size_t retrieval_k,
                          const ClusteringOptions& options);

std::string schema_to_json(const EntitySchema& schema);
EntitySchema schema_from_json(const std::string& json_text);

/// Renders the schema the way extraction prompts expect it:
/// {"Name": definition, ...}
std::string schema_prompt_block(const EntitySchema& schema);

} // namespace lkd
