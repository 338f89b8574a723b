#include "lkd/extraction.hpp"

#include "lkd/errors.hpp"
#include "lkd/parsing.hpp"
#include "lkd/util.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

namespace lkd {

using json = nlohmann::ordered_json;

namespace {

ChatRequest make_request(const StageContext& ctx, std::string user_prompt) {
    ChatRequest request;
    request.system_prompt = kSystemPrompt;
    request.user_prompt = std::move(user_prompt);
    request.temperature = ctx.temperature;
    request.max_tokens = ctx.max_tokens_extract;
    return request;
}

std::string entities_prompt_block(const std::vector<ExtractedEntity>& entities) {
    // grouped by type, in first-appearance order: {Type:[a, b], ...}
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;
    for (const auto& entity : entities) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return g.first == entity.entity_type; });
        if (it == groups.end()) {
            groups.push_back({entity.entity_type, {entity.name}});
        } else {
            it->second.push_back(entity.name);
        }
    }
    std::string out = "{";
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (g > 0) out += ", ";
        out += groups[g].first + ":[";
        for (std::size_t i = 0; i < groups[g].second.size(); ++i) {
            if (i > 0) out += ", ";
            out += groups[g].second[i];
        }
        out += "]";
    }
    out += "}";
    return out;
}

} // namespace

std::string schema_block_for_doc(const EntitySchema& schema, const std::string& doc_text,
                                 const SchemaBudget& budget) {
    const std::string full = schema_prompt_block(schema);
    if (budget.char_budget == 0 || !budget.embedder || full.size() <= budget.char_budget) {
        return full;
    }

    const std::string& anchor = budget.doc_summary.empty() ? doc_text : budget.doc_summary;
    const Embedding anchor_vec = budget.embedder->embed_one(anchor);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < schema.entries.size(); ++i) {
        const auto& [name, definition] = schema.entries[i];
        ranked.emplace_back(
            cosine_distance(anchor_vec, budget.embedder->embed_one(name + ": " + definition)),
            i);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::string out = "{";
    bool first = true;
    for (const auto& [distance, index] : ranked) {
        const auto& [name, definition] = schema.entries[index];
        const std::string piece =
            std::string(first ? "" : ", ") + "\"" + name + "\": " + definition;
        if (out.size() + piece.size() + 1 > budget.char_budget) break;
        out += piece;
        first = false;
    }
    out += "}";
    return out;
}

std::vector<ExtractedEntity> extract_entities(const DocumentNode& doc,
                                              const EntitySchema& schema,
                                              const StageContext& ctx,
                                              ExtractionStats& stats,
                                              const SchemaBudget& budget) {
    if (schema.empty()) throw EmptySchemaError("cannot extract entities without a schema");

    const std::string prompt = ctx.prompts.render(
        "extract_entities",
        {{"text", doc.text}, {"schema", schema_block_for_doc(schema, doc.text, budget)}});

    std::vector<NameMapEntry> parsed;
    try {
        parsed = complete_parsed<std::vector<NameMapEntry>>(
            ctx.gateway, make_request(ctx, prompt),
            [](const std::string& text) { return parse_name_map(text); }, ctx.retries);
    } catch (const Error& err) {
        ctx.warn("entity extraction skipped document '" + doc.path + "': " + err.what());
        return {};
    }

    std::vector<ExtractedEntity> entities;
    std::set<std::pair<std::string, std::string>> seen;  // (folded type, folded name)
    for (const auto& entry : parsed) {
        const std::string* canonical = schema.find_canonical(entry.key);
        std::vector<std::string> names =
            entry.is_list ? entry.items
                          : std::vector<std::string>{entry.scalar};
        for (const auto& raw : names) {
            const std::string name = trim(raw);
            if (name.empty()) continue;
            if (!canonical) {
                ++stats.off_schema_entities;
                continue;
            }
            if (!seen.insert({to_lower(*canonical), to_lower(name)}).second) continue;
            entities.push_back({name, *canonical, doc.path});
        }
    }
    return entities;
}

std::vector<Triple> extract_relations(const DocumentNode& doc,
                                      const std::vector<ExtractedEntity>& entities,
                                      const EntitySchema& schema, const StageContext& ctx,
                                      ExtractionStats& stats,
                                      const SchemaBudget& budget) {
    if (entities.size() < 2) return {};

    const std::string prompt = ctx.prompts.render(
        "extract_relations", {{"text", doc.text},
                              {"entities", entities_prompt_block(entities)},
                              {"schema", schema_block_for_doc(schema, doc.text, budget)}});

    std::vector<std::array<std::string, 3>> tuples;
    std::size_t malformed = 0;
    try {
        tuples = complete_parsed<std::vector<std::array<std::string, 3>>>(
            ctx.gateway, make_request(ctx, prompt),
            [&malformed](const std::string& text) {
                malformed = 0;
                return parse_triples(text, &malformed);
            },
            ctx.retries);
    } catch (const Error& err) {
        ctx.warn("relation extraction yielded no triples for '" + doc.path + "': " + err.what());
        stats.malformed_tuples += malformed;
        return {};
    }
    stats.malformed_tuples += malformed;
    stats.parsed_tuples += tuples.size();

    auto find_entity = [&](const std::string& name) -> const ExtractedEntity* {
        for (const auto& entity : entities) {
            if (iequals(entity.name, name)) return &entity;
        }
        return nullptr;
    };

    std::vector<Triple> triples;
    std::set<std::string> seen;
    for (const auto& tuple : tuples) {
        const ExtractedEntity* subject = find_entity(tuple[0]);
        const ExtractedEntity* object = find_entity(tuple[2]);
        if (!subject || !object) {
            ++stats.dangling_triples;
            continue;
        }
        const std::string key =
            to_lower(tuple[0]) + "\x1f" + to_lower(tuple[1]) + "\x1f" + to_lower(tuple[2]);
        if (!seen.insert(key).second) {
            ++stats.duplicate_triples;
            continue;
        }
        triples.push_back({tuple[0], trim(tuple[1]), tuple[2], doc.path,
                           subject->entity_type, object->entity_type});
    }
    return triples;
}

KnowledgeGraph assemble_graph(const std::vector<std::vector<ExtractedEntity>>& per_doc_entities,
                              const std::vector<std::vector<Triple>>& per_doc_triples,
                              const EntitySchema& schema, ExtractionStats* stats) {
    KnowledgeGraph graph;
    graph.schema = schema;

    std::set<std::pair<std::string, std::string>> entity_seen;
    for (const auto& doc_entities : per_doc_entities) {
        for (const auto& entity : doc_entities) {
            if (entity_seen.insert({to_lower(entity.name), entity.entity_type}).second) {
                graph.entities.push_back(entity);
            }
        }
    }

    // entity lookup per document for endpoint-type annotation
    auto type_of = [&](const std::string& doc, const std::string& name) -> const std::string* {
        for (const auto& doc_entities : per_doc_entities) {
            for (const auto& entity : doc_entities) {
                if (entity.source_path == doc && iequals(entity.name, name)) {
                    return &entity.entity_type;
                }
            }
        }
        return nullptr;
    };

    std::set<std::string> triple_seen;
    for (const auto& doc_triples : per_doc_triples) {
        for (const auto& triple : doc_triples) {
            const std::string key = to_lower(triple.subject) + "\x1f" +
                                    to_lower(triple.predicate) + "\x1f" +
                                    to_lower(triple.object) + "\x1f" + triple.source_path;
            if (!triple_seen.insert(key).second) {
                if (stats) ++stats->duplicate_triples;
                continue;
            }
            Triple annotated = triple;
            if (annotated.subject_type.empty()) {
                if (const auto* t = type_of(triple.source_path, triple.subject)) {
                    annotated.subject_type = *t;
                }
            }
            if (annotated.object_type.empty()) {
                if (const auto* t = type_of(triple.source_path, triple.object)) {
                    annotated.object_type = *t;
                }
            }
            graph.triples.push_back(std::move(annotated));
        }
    }
    return graph;
}

std::string entity_to_json_line(const ExtractedEntity& entity) {
    json line{{"name", entity.name},
              {"entity_type", entity.entity_type},
              {"source_path", entity.source_path}};
    return line.dump();
}

ExtractedEntity entity_from_json_line(const std::string& line) {
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw IoError("malformed entity record");
    return {doc.at("name").get<std::string>(), doc.at("entity_type").get<std::string>(),
            doc.at("source_path").get<std::string>()};
}

std::string triple_to_json_line(const Triple& triple) {
    json line{{"subject", triple.subject},       {"predicate", triple.predicate},
              {"object", triple.object},         {"source_path", triple.source_path},
              {"subject_type", triple.subject_type}, {"object_type", triple.object_type}};
    return line.dump();
}

Triple triple_from_json_line(const std::string& line) {
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw IoError("malformed triple record");
    return {doc.at("subject").get<std::string>(),     doc.at("predicate").get<std::string>(),
            doc.at("object").get<std::string>(),      doc.at("source_path").get<std::string>(),
            doc.value("subject_type", std::string{}), doc.value("object_type", std::string{})};
}

std::string graph_to_tsv(const KnowledgeGraph& graph) {
    std::string out;
    for (const auto& triple : graph.triples) {
        out += triple.subject + "\t" + triple.predicate + "\t" + triple.object + "\n";
    }
    return out;
}

} // namespace lkd
