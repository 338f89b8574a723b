#pragma once

#include "lkd/corpus.hpp"
#include "lkd/gateway.hpp"
#include "lkd/prompts.hpp"
#include "lkd/vector_store.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lkd {

enum class SummaryPhase { Initial, Directory, ContextEnhanced };

const char* to_string(SummaryPhase phase);
SummaryPhase summary_phase_from_string(const std::string& s);

struct SummaryRecord {
    std::string node_path;
    SummaryPhase phase = SummaryPhase::Initial;
    std::string text;
    std::vector<std::string> context_refs;  // empty except for ContextEnhanced
};

struct AccessOrder {
    std::vector<std::string> sequence;                            // leaf paths, traversal order
    std::map<std::string, std::vector<std::string>> per_level_orders;  // dir path -> child names
};

/// Shared knobs for every LLM-backed stage operation.
struct StageContext {
    ChatBackend& gateway;
    const PromptLibrary& prompts;
    double temperature = 0.1;
    int max_tokens_summary = 1024;
    int max_tokens_extract = 2048;
    int retries = 2;      // parse-repair retries per logical call
    int parallelism = 4;
    std::vector<std::string>* warnings = nullptr;

    void warn(const std::string& message) const {
        if (warnings) warnings->push_back(message);
    }
};

/// Callback fired in deterministic order as records complete; used for
/// checkpoint appends.
using RecordSink = std::function<void(const SummaryRecord&)>;

/// One Initial summary per leaf, prompts containing the document text only.
/// Leaves whose path is in `existing` are skipped (resume). Parallel across
/// leaves; records are emitted in tree order.
std::vector<SummaryRecord> summarize_leaves(
    const CorpusTree& tree, const StageContext& ctx,
    const std::map<std::string, SummaryRecord>& existing = {},
    const RecordSink& sink = nullptr);

/// One Directory summary per directory node, bottom-up: every record is produced
/// strictly after all of its children's summaries. `prior` must hold the Initial
/// record of every leaf (keyed by path) and may hold resumed Directory records.
std::vector<SummaryRecord> summarize_directories(
    const CorpusTree& tree, const std::map<std::string, SummaryRecord>& prior,
    const StageContext& ctx,
    const std::map<std::string, SummaryRecord>& existing = {},
    const RecordSink& sink = nullptr);

/// Asks the model for a reading order over `parent`'s children (shown as a
/// numbered list of name + summary) and repairs the reply to a valid
/// permutation: duplicate or out-of-range indices are dropped keeping the first
/// occurrence, missing children are appended in original order. A single child
/// short-circuits without any call; an unparseable reply (after the repair
/// loop) falls back to the original order with a warning.
std::vector<std::size_t> order_children(
    const DocumentNode& parent, const std::map<std::string, SummaryRecord>& summaries,
    const StageContext& ctx);

/// Runs order_children over every directory, top-down, and returns the
/// resulting AccessOrder (sequence = depth-first leaf order under the
/// per-level permutations).
AccessOrder compute_access_order(const CorpusTree& tree,
                                 const std::map<std::string, SummaryRecord>& summaries,
                                 const StageContext& ctx);

/// Autoregressive context-enhanced summarization along `order.sequence`. For
/// each leaf the context is every prior ContextEnhanced summary while their
/// total size fits `context_char_budget`, else the top-k retrieval keyed by the
/// embedding of the leaf's Initial summary. Each new summary is embedded and
/// inserted into `store` before the walk proceeds. `resume` records (a prefix
/// of the sequence) are re-inserted without regeneration.
std::vector<SummaryRecord> walk_and_summarize(
    const CorpusTree& tree, const AccessOrder& order,
    const std::map<std::string, SummaryRecord>& initial_summaries,
    const StageContext& ctx, EmbeddingProvider& embedder, VectorStore& store,
    std::size_t retrieval_k, std::size_t context_char_budget,
    const std::vector<SummaryRecord>& resume = {},
    const RecordSink& sink = nullptr);

} // namespace lkd
