#include "lkd/dependency.hpp"

#include "lkd/errors.hpp"
#include "lkd/parsing.hpp"
#include "lkd/util.hpp"

#include <algorithm>
#include <cctype>

namespace lkd {

const char* to_string(SummaryPhase phase) {
    switch (phase) {
        case SummaryPhase::Initial: return "Initial";
        case SummaryPhase::Directory: return "Directory";
        case SummaryPhase::ContextEnhanced: return "ContextEnhanced";
    }
    return "Initial";
}

SummaryPhase summary_phase_from_string(const std::string& s) {
    if (s == "Initial") return SummaryPhase::Initial;
    if (s == "Directory") return SummaryPhase::Directory;
    if (s == "ContextEnhanced") return SummaryPhase::ContextEnhanced;
    throw IoError("unknown summary phase: " + s);
}

namespace {

std::string base_name(const std::string& path) {
    const std::size_t slash = path.rfind('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

ChatRequest make_request(const StageContext& ctx, std::string user_prompt) {
    ChatRequest request;
    request.system_prompt = kSystemPrompt;
    request.user_prompt = std::move(user_prompt);
    request.temperature = ctx.temperature;
    request.max_tokens = ctx.max_tokens_summary;
    return request;
}

const SummaryRecord& summary_for(const std::map<std::string, SummaryRecord>& summaries,
                                 const std::string& path) {
    const auto it = summaries.find(path);
    if (it == summaries.end()) throw Error("missing summary for node: " + path);
    return it->second;
}

} // namespace

std::vector<SummaryRecord> summarize_leaves(const CorpusTree& tree, const StageContext& ctx,
                                            const std::map<std::string, SummaryRecord>& existing,
                                            const RecordSink& sink) {
    const auto leaves = collect_leaves(tree.root);
    std::vector<SummaryRecord> records(leaves.size());

    auto produce = [&](std::size_t i) {
        const DocumentNode& leaf = *leaves[i];
        if (const auto it = existing.find(leaf.path); it != existing.end()) {
            records[i] = it->second;
            return;
        }
        const std::string prompt = ctx.prompts.render(
            "summarize_document", {{"path", leaf.path}, {"text", leaf.text}});
        try {
            ChatResponse response = ctx.gateway.complete(make_request(ctx, prompt));
            records[i] = SummaryRecord{leaf.path, SummaryPhase::Initial, response.text, {}};
        } catch (const Error& err) {
            throw Error("initial summary failed for '" + leaf.path + "': " + err.what());
        }
    };
    auto commit = [&](std::size_t i) {
        if (sink && existing.find(records[i].node_path) == existing.end()) sink(records[i]);
    };
    parallel_for_ordered(leaves.size(), ctx.parallelism, produce, commit);
    return records;
}

std::vector<SummaryRecord> summarize_directories(
    const CorpusTree& tree, const std::map<std::string, SummaryRecord>& prior,
    const StageContext& ctx, const std::map<std::string, SummaryRecord>& existing,
    const RecordSink& sink) {
    const auto dirs = collect_directories_bottom_up(tree.root);

    // Summaries accumulate level by level so a parent prompt can use its
    // directory children's fresh summaries.
    std::map<std::string, SummaryRecord> known = prior;
    std::vector<SummaryRecord> records(dirs.size());

    // Group indices by depth to parallelize within a level only.
    std::vector<std::pair<std::size_t, std::size_t>> depth_of;  // (depth, index)
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        depth_of.emplace_back(std::count(dirs[i]->path.begin(), dirs[i]->path.end(), '/') +
                                  (dirs[i]->path.empty() ? 0 : 1),
                              i);
    }

    std::size_t start = 0;
    while (start < dirs.size()) {
        std::size_t end = start + 1;
        while (end < dirs.size() && depth_of[end].first == depth_of[start].first) ++end;

        auto produce = [&](std::size_t offset) {
            const std::size_t i = start + offset;
            const DocumentNode& dir = *dirs[i];
            if (const auto it = existing.find(dir.path); it != existing.end()) {
                records[i] = it->second;
                return;
            }
            std::string children_block;
            for (const auto& child : dir.children) {
                children_block += "- " + base_name(child.path) + ": " +
                                  summary_for(known, child.path).text + "\n";
            }
            const std::string prompt = ctx.prompts.render(
                "summarize_directory",
                {{"path", display_path(dir.path)}, {"children", children_block}});
            try {
                ChatResponse response = ctx.gateway.complete(make_request(ctx, prompt));
                records[i] =
                    SummaryRecord{dir.path, SummaryPhase::Directory, response.text, {}};
            } catch (const Error& err) {
                throw Error("directory summary failed for '" + display_path(dir.path) +
                            "': " + err.what());
            }
        };
        auto commit = [&](std::size_t offset) {
            const std::size_t i = start + offset;
            if (sink && existing.find(records[i].node_path) == existing.end()) sink(records[i]);
        };
        parallel_for_ordered(end - start, ctx.parallelism, produce, commit);
        for (std::size_t i = start; i < end; ++i) {
            known[records[i].node_path] = records[i];
        }
        start = end;
    }
    return records;
}

namespace {

std::optional<std::size_t> leading_index(const std::string& item) {
    std::size_t i = 0;
    while (i < item.size() && std::isdigit(static_cast<unsigned char>(item[i]))) ++i;
    if (i == 0 || i > 9) return std::nullopt;
    return static_cast<std::size_t>(std::stoul(item.substr(0, i)));
}

// Repairs a list of 1-based indices into a permutation of [0, n): first
// occurrences of valid indices keep their position, everything missing is
// appended in original order.
std::vector<std::size_t> repair_permutation(const std::vector<std::string>& items,
                                            std::size_t n) {
    std::vector<std::size_t> order;
    std::vector<char> seen(n, 0);
    for (const auto& item : items) {
        const auto idx = leading_index(item);
        if (!idx || *idx < 1 || *idx > n) continue;
        if (seen[*idx - 1]) continue;
        seen[*idx - 1] = 1;
        order.push_back(*idx - 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen[i]) order.push_back(i);
    }
    return order;
}

} // namespace

std::vector<std::size_t> order_children(const DocumentNode& parent,
                                        const std::map<std::string, SummaryRecord>& summaries,
                                        const StageContext& ctx) {
    const std::size_t n = parent.children.size();
    if (n == 0) return {};
    if (n == 1) return {0};  // nothing to order, no call

    std::string children_block;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& child = parent.children[i];
        children_block += std::to_string(i + 1) + ". " + base_name(child.path) + ": " +
                          summary_for(summaries, child.path).text + "\n";
    }
    const std::string prompt = ctx.prompts.render(
        "order_children",
        {{"path", display_path(parent.path)}, {"children", children_block}});

    try {
        const auto items = complete_parsed<std::vector<std::string>>(
            ctx.gateway, make_request(ctx, prompt),
            [](const std::string& text) { return parse_string_list(text); }, ctx.retries);
        return repair_permutation(items, n);
    } catch (const ParseError&) {
        ctx.warn("ordering reply unusable for directory '" + display_path(parent.path) +
                 "'; keeping original order");
    } catch (const Error& err) {
        ctx.warn("ordering failed for directory '" + display_path(parent.path) + "' (" +
                 err.what() + "); keeping original order");
    }
    std::vector<std::size_t> identity(n);
    for (std::size_t i = 0; i < n; ++i) identity[i] = i;
    return identity;
}

namespace {

void order_subtree(const DocumentNode& node,
                   const std::map<std::string, SummaryRecord>& summaries,
                   const StageContext& ctx, AccessOrder& out) {
    if (node.is_leaf()) {
        out.sequence.push_back(node.path);
        return;
    }
    const auto order = order_children(node, summaries, ctx);
    std::vector<std::string> names;
    names.reserve(order.size());
    for (std::size_t idx : order) names.push_back(base_name(node.children[idx].path));
    out.per_level_orders[node.path] = std::move(names);
    for (std::size_t idx : order) order_subtree(node.children[idx], summaries, ctx, out);
}

} // namespace

AccessOrder compute_access_order(const CorpusTree& tree,
                                 const std::map<std::string, SummaryRecord>& summaries,
                                 const StageContext& ctx) {
    AccessOrder order;
    order_subtree(tree.root, summaries, ctx, order);
    return order;
}

std::vector<SummaryRecord> walk_and_summarize(
    const CorpusTree& tree, const AccessOrder& order,
    const std::map<std::string, SummaryRecord>& initial_summaries, const StageContext& ctx,
    EmbeddingProvider& embedder, VectorStore& store, std::size_t retrieval_k,
    std::size_t context_char_budget, const std::vector<SummaryRecord>& resume,
    const RecordSink& sink) {
    std::vector<SummaryRecord> records;
    records.reserve(order.sequence.size());

    for (std::size_t pos = 0; pos < resume.size(); ++pos) {
        if (pos >= order.sequence.size() || resume[pos].node_path != order.sequence[pos]) {
            throw Error("resume records do not match the access order at position " +
                        std::to_string(pos));
        }
        records.push_back(resume[pos]);
        store.insert(resume[pos].node_path, resume[pos].text,
                     embedder.embed_one(resume[pos].text));
    }

    for (std::size_t pos = records.size(); pos < order.sequence.size(); ++pos) {
        const std::string& path = order.sequence[pos];
        const DocumentNode* leaf = find_node(tree.root, path);
        if (!leaf || !leaf->is_leaf()) throw Error("access order names a non-leaf: " + path);

        std::vector<std::string> refs;
        std::string context_block;
        if (pos > 0) {
            std::size_t total = 0;
            for (const auto& prior : records) total += prior.text.size();
            if (total <= context_char_budget) {
                for (const auto& prior : records) {
                    refs.push_back(prior.node_path);
                    context_block += prior.node_path + ": " + prior.text + "\n";
                }
            } else {
                const Embedding query =
                    embedder.embed_one(summary_for(initial_summaries, path).text);
                for (const auto& hit : store.top_k(query, retrieval_k)) {
                    refs.push_back(hit.id);
                    context_block += hit.id + ": " + hit.value + "\n";
                }
            }
        }
        if (context_block.empty()) context_block = "(none)\n";

        const std::string prompt = ctx.prompts.render(
            "summarize_with_context",
            {{"context", context_block}, {"path", path}, {"text", leaf->text}});
        SummaryRecord record;
        try {
            ChatResponse response = ctx.gateway.complete(make_request(ctx, prompt));
            record = SummaryRecord{path, SummaryPhase::ContextEnhanced, response.text,
                                   std::move(refs)};
        } catch (const Error& err) {
            throw Error("context summary failed for '" + path + "': " + err.what());
        }
        store.insert(path, record.text, embedder.embed_one(record.text));
        records.push_back(record);
        if (sink) sink(record);
    }
    return records;
}

} // namespace lkd
