#pragma once

#include "lkd/extraction.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lkd {

enum class Verdict { True, False, Unparseable };

const char* to_string(Verdict verdict);

struct JudgedTriple {
    Triple triple;
    Verdict verdict = Verdict::Unparseable;
    std::string judge_raw;  // the verdict text the judge produced for this triple
};

struct GoldTriple {
    std::string subject;
    std::string predicate;
    std::string object;
    std::string doc;  // optional provenance, unused by matching
};

struct GoldMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t matched = 0;
};

struct DocJudgeCounts {
    std::size_t judged = 0;  // True + False (Unparseable excluded)
    std::size_t true_count = 0;
};

struct EvalReport {
    std::optional<double> precision;  // absent when no triple was judgeable
    std::size_t recall_number = 0;
    double average_recall_number = 0.0;
    std::map<std::string, DocJudgeCounts> per_document;
    std::optional<GoldMetrics> gold_metrics;
    std::size_t unparseable = 0;
};

/// 2PR / (P + R), or 0 when P + R == 0.
double f1_score(double precision, double recall);

/// Compares a reported F1 against the formula value; returns a description of
/// the discrepancy when it exceeds the tolerance, otherwise nullopt.
std::optional<std::string> check_reported_f1(double precision, double recall,
                                             double reported_f1, double tolerance);

/// Judges every triple against its source document, batched one call per
/// document (all of a document's triples in one prompt, one verdict line each).
/// precision = true / (true + false); unparseable verdicts are excluded from
/// both sides but counted. Every leaf of the tree appears in per_document, so
/// documents without triples still weigh into average_recall_number.
std::pair<std::vector<JudgedTriple>, EvalReport> judge_precision(
    const KnowledgeGraph& graph, const CorpusTree& tree, const StageContext& judge_ctx);

/// Greedy one-to-one semantic matching in gold order. Exact case-fold matches
/// pair up without a judge call; otherwise the judge sees the gold triple and
/// the not-yet-matched candidates that share at least one case-folded token
/// with the gold subject or object.
GoldMetrics match_gold(const std::vector<Triple>& extracted,
                       const std::vector<GoldTriple>& gold, const StageContext& judge_ctx);

std::vector<GoldTriple> load_gold_jsonl(const std::string& path);

/// Deterministic JSON report file plus a human-readable table on stdout.
void write_report(const EvalReport& report, const std::string& path);

std::string report_to_json(const EvalReport& report);

} // namespace lkd
