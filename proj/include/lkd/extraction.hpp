#pragma once

#include "lkd/schema.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lkd {

struct ExtractedEntity {
    std::string name;
    std::string entity_type;  // canonical schema name
    std::string source_path;
};

struct Triple {
    std::string subject;
    std::string predicate;  // free-form
    std::string object;
    std::string source_path;
    std::string subject_type;
    std::string object_type;
};

struct KnowledgeGraph {
    std::vector<Triple> triples;            // deduplicated
    std::vector<ExtractedEntity> entities;  // deduplicated by (folded name, type)
    EntitySchema schema;
};

/// Counters that reconcile parsed model output against the assembled graph:
/// kept triples = parsed_tuples - dangling_triples - duplicate_triples.
struct ExtractionStats {
    std::size_t parsed_tuples = 0;
    std::size_t malformed_tuples = 0;
    std::size_t off_schema_entities = 0;
    std::size_t dangling_triples = 0;
    std::size_t duplicate_triples = 0;

    ExtractionStats& operator+=(const ExtractionStats& other) {
        parsed_tuples += other.parsed_tuples;
        malformed_tuples += other.malformed_tuples;
        off_schema_entities += other.off_schema_entities;
        dangling_triples += other.dangling_triples;
        duplicate_triples += other.duplicate_triples;
        return *this;
    }
};

/// Bounds the schema block injected into extraction prompts. When the full
/// rendering exceeds char_budget, types are ranked by cosine similarity
/// between their definition embedding and the document-summary embedding and
/// the block is truncated to fit. A zero budget or missing embedder disables
/// truncation.
struct SchemaBudget {
    std::size_t char_budget = 0;
    EmbeddingProvider* embedder = nullptr;
    std::string doc_summary;  // ranking anchor; the document text when empty
};

std::string schema_block_for_doc(const EntitySchema& schema, const std::string& doc_text,
                                 const SchemaBudget& budget);

/// Schema-valid entities for one document. Claimed types that are not schema
/// keys are dropped and counted; names are deduplicated case-insensitively
/// within a type. Unusable model output (after the repair loop) contributes
/// zero entities with a warning.
std::vector<ExtractedEntity> extract_entities(const DocumentNode& doc,
                                              const EntitySchema& schema,
                                              const StageContext& ctx,
                                              ExtractionStats& stats,
                                              const SchemaBudget& budget = {});

/// Relation triples among one document's entities. Fewer than two entities
/// short-circuit to an empty result without a call. Triples whose subject or
/// object does not case-insensitively match one of the document's entity names
/// are dropped as dangling; exact duplicates are dropped. Endpoint types are
/// annotated from the first case-fold-matching entity of the document.
std::vector<Triple> extract_relations(const DocumentNode& doc,
                                      const std::vector<ExtractedEntity>& entities,
                                      const EntitySchema& schema, const StageContext& ctx,
                                      ExtractionStats& stats,
                                      const SchemaBudget& budget = {});

/// Deterministic fold of the per-document outputs into a graph: entities
/// deduplicated by (case-folded name, type), triples deduplicated by
/// case-folded (subject, predicate, object, source_path), endpoint types
/// re-annotated where missing.
KnowledgeGraph assemble_graph(const std::vector<std::vector<ExtractedEntity>>& per_doc_entities,
                              const std::vector<std::vector<Triple>>& per_doc_triples,
                              const EntitySchema& schema, ExtractionStats* stats = nullptr);

std::string entity_to_json_line(const ExtractedEntity& entity);
ExtractedEntity entity_from_json_line(const std::string& line);
std::string triple_to_json_line(const Triple& triple);
Triple triple_from_json_line(const std::string& line);

/// subject <tab> predicate <tab> object export for graph tools.
std::string graph_to_tsv(const KnowledgeGraph& graph);

} // namespace lkd
