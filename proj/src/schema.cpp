#include "lkd/schema.hpp"

#include "lkd/errors.hpp"
#include "lkd/parsing.hpp"
#include "lkd/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace lkd {

using ordered_json = nlohmann::ordered_json;

const std::string* EntitySchema::find_canonical(const std::string& name) const {
    for (const auto& [canonical, definition] : entries) {
        if (iequals(canonical, name)) return &canonical;
    }
    return nullptr;
}

const std::string* EntitySchema::definition_of(const std::string& canonical) const {
    for (const auto& [name, definition] : entries) {
        if (name == canonical) return &definition;
    }
    return nullptr;
}

namespace {

ChatRequest make_request(const StageContext& ctx, std::string user_prompt, int max_tokens) {
    ChatRequest request;
    request.system_prompt = kSystemPrompt;
    request.user_prompt = std::move(user_prompt);
    request.temperature = ctx.temperature;
    request.max_tokens = max_tokens;
    return request;
}

// Keeps everything through the first sentence terminator.
std::string first_sentence(const std::string& text) {
    const std::string trimmed = trim(text);
    for (std::size_t i = 0; i < trimmed.size(); ++i) {
        const char c = trimmed[i];
        if (c == '.' || c == '!' || c == '?') {
            return trimmed.substr(0, i + 1);
        }
    }
    return trimmed;
}

constexpr const char* kMissingDefinition = "definition unavailable";

} // namespace

std::vector<TypedMention> extract_entity_types(const DocumentNode& doc,
                                               const SummaryRecord& summary,
                                               const StageContext& ctx) {
    const std::string prompt = ctx.prompts.render(
        "extract_entity_types", {{"text", doc.text}, {"summary", summary.text}});

    std::vector<std::string> names;
    try {
        names = complete_parsed<std::vector<std::string>>(
            ctx.gateway, make_request(ctx, prompt, ctx.max_tokens_extract),
            [](const std::string& text) { return parse_string_list(text); }, ctx.retries);
    } catch (const Error& err) {
        ctx.warn("entity-type extraction skipped document '" + doc.path + "': " + err.what());
        return {};
    }

    std::vector<TypedMention> mentions;
    std::vector<std::string> seen;
    for (auto& name : names) {
        const std::string trimmed = trim(name);
        if (trimmed.empty()) continue;
        const std::string folded = to_lower(trimmed);
        if (std::find(seen.begin(), seen.end(), folded) != seen.end()) continue;
        seen.push_back(folded);
        mentions.push_back({trimmed, doc.path});
    }
    return mentions;
}

std::vector<TypedMention> filter_singletons(const std::vector<TypedMention>& mentions) {
    std::map<std::string, std::size_t> counts;
    for (const auto& mention : mentions) ++counts[to_lower(mention.type_name)];
    std::vector<TypedMention> kept;
    for (const auto& mention : mentions) {
        if (counts[to_lower(mention.type_name)] >= 2) kept.push_back(mention);
    }
    return kept;
}

std::vector<std::vector<std::string>> cluster_types(const std::vector<TypedMention>& mentions,
                                                    EmbeddingProvider& embedder,
                                                    const ClusteringOptions& options) {
    // distinct surviving names, first spelling wins
    std::vector<std::string> names;
    for (const auto& mention : mentions) {
        const bool known = std::any_of(names.begin(), names.end(), [&](const std::string& n) {
            return iequals(n, mention.type_name);
        });
        if (!known) names.push_back(mention.type_name);
    }
    if (names.empty()) return {};

    std::vector<std::vector<std::string>> clusters;
    if (names.size() < 3) {
        clusters.push_back(names);
    } else {
        const std::vector<Embedding> points = embedder.embed(names);
        const std::size_t n = names.size();
        const auto sqrt_bound =
            static_cast<std::size_t>(2.0 * std::ceil(std::sqrt(static_cast<double>(n))));
        const std::size_t k_max =
            options.k_max > 0 ? std::min(options.k_max, n - 1) : std::min(sqrt_bound, n - 1);
        const std::size_t k_min = std::min(options.k_min, k_max);

        const ModelSelection selection =
            select_k(points, k_min, k_max, options.seed, options.restarts);
        clusters.resize(selection.best_k);
        for (std::size_t i = 0; i < names.size(); ++i) {
            clusters[selection.partition.assignments[i]].push_back(names[i]);
        }
        clusters.erase(std::remove_if(clusters.begin(), clusters.end(),
                                      [](const auto& c) { return c.empty(); }),
                       clusters.end());
    }

    auto smallest = [](const std::vector<std::string>& cluster) {
        std::string best = to_lower(cluster.front());
        for (const auto& name : cluster) best = std::min(best, to_lower(name));
        return best;
    };
    std::sort(clusters.begin(), clusters.end(),
              [&](const auto& a, const auto& b) { return smallest(a) < smallest(b); });
    return clusters;
}

EntitySchema canonicalize_cluster(const std::vector<std::string>& cluster,
                                  const VectorStore& store, const StageContext& ctx,
                                  EmbeddingProvider& embedder, std::size_t retrieval_k) {
    if (cluster.empty()) return {};

    std::string joined;
    std::string bracketed = "[";
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        if (i > 0) { joined += ", "; bracketed += ", "; }
        joined += cluster[i];
        bracketed += cluster[i];
    }
    bracketed += "]";

    std::string reference;
    for (const auto& hit : store.top_k(embedder.embed_one(joined), retrieval_k)) {
        reference += "\"" + hit.id + "\": " + hit.value + "\n";
    }
    if (reference.empty()) reference = "(none)\n";

    const std::string prompt = ctx.prompts.render(
        "define_entity_types", {{"entity_types", bracketed}, {"reference", reference}});

    EntitySchema partial;
    bool fallback = false;
    try {
        const auto parsed = complete_parsed<std::vector<NameMapEntry>>(
            ctx.gateway, make_request(ctx, prompt, ctx.max_tokens_summary),
            [](const std::string& text) { return parse_name_map(text); }, ctx.retries);
        for (const auto& entry : parsed) {
            std::string definition =
                entry.is_list ? [&] {
                    std::string joined_items;
                    for (std::size_t i = 0; i < entry.items.size(); ++i) {
                        if (i > 0) joined_items += ", ";
                        joined_items += entry.items[i];
                    }
                    return joined_items;
                }() : entry.scalar;
            definition = first_sentence(definition);
            if (definition.empty()) {
                ctx.warn("empty definition for type '" + entry.key + "'");
                definition = kMissingDefinition;
            }
            if (!partial.find_canonical(entry.key)) {
                partial.entries.emplace_back(entry.key, definition);
            }
        }
        if (partial.entries.empty()) fallback = true;
    } catch (const Error& err) {
        ctx.warn("definition reply unusable for cluster [" + joined + "]: " + err.what());
        fallback = true;
    }

    if (fallback) {
        // identity mapping keeps the stage alive; definitions flagged missing
        partial = {};
        for (const auto& name : cluster) {
            if (!partial.find_canonical(name)) {
                partial.entries.emplace_back(name, kMissingDefinition);
                partial.provenance[name] = {name};
            }
        }
        return partial;
    }

    // provenance: case-fold match first, else nearest canonical by embedding
    std::vector<std::string> canonicals;
    for (const auto& [name, definition] : partial.entries) canonicals.push_back(name);
    const std::vector<Embedding> canonical_vecs = embedder.embed(canonicals);
    for (const auto& raw : cluster) {
        const std::string* target = partial.find_canonical(raw);
        if (!target) {
            const Embedding raw_vec = embedder.embed_one(raw);
            double best = std::numeric_limits<double>::max();
            std::size_t arg = 0;
            for (std::size_t j = 0; j < canonical_vecs.size(); ++j) {
                const double d = cosine_distance(raw_vec, canonical_vecs[j]);
                if (d < best) { best = d; arg = j; }
            }
            target = &canonicals[arg];
        }
        partial.provenance[*target].push_back(raw);
    }
    return partial;
}

EntitySchema build_schema(const CorpusTree& tree,
                          const std::vector<SummaryRecord>& context_summaries,
                          const VectorStore& store, const StageContext& ctx,
                          EmbeddingProvider& embedder, std::size_t retrieval_k,
                          const ClusteringOptions& options) {
    std::map<std::string, const SummaryRecord*> by_path;
    for (const auto& record : context_summaries) {
        if (record.phase == SummaryPhase::ContextEnhanced) by_path[record.node_path] = &record;
    }

    const auto leaves = collect_leaves(tree.root);
    std::vector<std::vector<TypedMention>> per_doc(leaves.size());
    std::vector<std::vector<std::string>> per_doc_warnings(leaves.size());
    auto produce = [&](std::size_t i) {
        const auto it = by_path.find(leaves[i]->path);
        if (it == by_path.end()) {
            throw Error("missing context summary for document: " + leaves[i]->path);
        }
        StageContext local = ctx;
        local.warnings = &per_doc_warnings[i];
        per_doc[i] = extract_entity_types(*leaves[i], *it->second, local);
    };
    auto commit = [&](std::size_t i) {
        for (auto& w : per_doc_warnings[i]) ctx.warn(w);
    };
    parallel_for_ordered(leaves.size(), ctx.parallelism, produce, commit);

    std::vector<TypedMention> mentions;
    for (auto& doc_mentions : per_doc) {
        mentions.insert(mentions.end(), doc_mentions.begin(), doc_mentions.end());
    }

    const auto surviving = filter_singletons(mentions);
    if (surviving.empty()) {
        throw EmptySchemaError("no entity type occurs in at least two documents");
    }

    const auto clusters = cluster_types(surviving, embedder, options);

    std::vector<EntitySchema> partials(clusters.size());
    std::vector<std::vector<std::string>> cluster_warnings(clusters.size());
    auto canonicalize = [&](std::size_t i) {
        StageContext local = ctx;
        local.warnings = &cluster_warnings[i];
        partials[i] = canonicalize_cluster(clusters[i], store, local, embedder, retrieval_k);
    };
    auto merge_warnings = [&](std::size_t i) {
        for (auto& w : cluster_warnings[i]) ctx.warn(w);
    };
    parallel_for_ordered(clusters.size(), ctx.parallelism, canonicalize, merge_warnings);

    EntitySchema schema;
    for (const auto& partial : partials) {
        for (const auto& [name, definition] : partial.entries) {
            const std::string* existing = schema.find_canonical(name);
            const std::string& canonical = existing ? *existing : name;
            if (!existing) schema.entries.emplace_back(name, definition);
            const auto prov = partial.provenance.find(name);
            if (prov != partial.provenance.end()) {
                auto& bucket = schema.provenance[canonical];
                for (const auto& raw : prov->second) {
                    if (std::find(bucket.begin(), bucket.end(), raw) == bucket.end()) {
                        bucket.push_back(raw);
                    }
                }
            }
        }
    }

    // Clustering works over one representative spelling per case-folded name;
    // the other surviving spellings still belong in the provenance of the same
    // canonical type.
    std::map<std::string, std::string> canonical_by_fold;
    for (const auto& [canonical, raws] : schema.provenance) {
        for (const auto& raw : raws) canonical_by_fold[to_lower(raw)] = canonical;
    }
    for (const auto& mention : surviving) {
        const auto it = canonical_by_fold.find(to_lower(mention.type_name));
        if (it == canonical_by_fold.end()) continue;
        auto& bucket = schema.provenance[it->second];
        if (std::find(bucket.begin(), bucket.end(), mention.type_name) == bucket.end()) {
            bucket.push_back(mention.type_name);
        }
    }
    return schema;
}

std::string schema_to_json(const EntitySchema& schema) {
    ordered_json entries = ordered_json::object();
    for (const auto& [name, definition] : schema.entries) entries[name] = definition;
    ordered_json provenance = ordered_json::object();
    for (const auto& [name, definition] : schema.entries) {
        const auto it = schema.provenance.find(name);
        provenance[name] =
            it != schema.provenance.end() ? it->second : std::vector<std::string>{};
    }
    ordered_json doc{{"entries", entries}, {"provenance", provenance}};
    return doc.dump(2) + "\n";
}

EntitySchema schema_from_json(const std::string& json_text) {
    ordered_json doc = ordered_json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw IoError("malformed schema JSON");
    EntitySchema schema;
    for (const auto& [name, definition] : doc.at("entries").items()) {
        schema.entries.emplace_back(name, definition.get<std::string>());
    }
    if (doc.contains("provenance")) {
        for (const auto& [name, raws] : doc.at("provenance").items()) {
            schema.provenance[name] = raws.get<std::vector<std::string>>();
        }
    }
    return schema;
}

std::string schema_prompt_block(const EntitySchema& schema) {
    std::string out = "{";
    bool first = true;
    for (const auto& [name, definition] : schema.entries) {
        if (!first) out += ", ";
        first = false;
        out += "\"" + name + "\": " + definition;
    }
    out += "}";
    return out;
}

} // namespace lkd
