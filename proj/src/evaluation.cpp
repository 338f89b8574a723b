#include "lkd/evaluation.hpp"

#include "lkd/errors.hpp"
#include "lkd/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lkd {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::True: return "True";
        case Verdict::False: return "False";
        case Verdict::Unparseable: return "Unparseable";
    }
    return "Unparseable";
}

double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

std::optional<std::string> check_reported_f1(double precision, double recall,
                                             double reported_f1, double tolerance) {
    const double formula = f1_score(precision, recall);
    if (std::fabs(formula - reported_f1) <= tolerance) return std::nullopt;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "reported F1 %.1f deviates from 2PR/(P+R) = %.4f for P=%.1f R=%.1f",
                  reported_f1, formula, precision, recall);
    return std::string(buf);
}

namespace {

ChatRequest make_judge_request(const StageContext& ctx, std::string user_prompt) {
    ChatRequest request;
    request.system_prompt = kSystemPrompt;
    request.user_prompt = std::move(user_prompt);
    request.temperature = ctx.temperature;
    request.max_tokens = ctx.max_tokens_extract;
    return request;
}

std::string render_triple(const Triple& t) {
    return "(" + t.subject + ", " + t.predicate + ", " + t.object + ")";
}

// Leading "true"/"yes" or "false"/"no" after optional punctuation.
std::optional<Verdict> verdict_token(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && !std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
    s = s.substr(i);
    auto starts = [&](std::string_view word) {
        return s.size() >= word.size() && iequals(s.substr(0, word.size()), word);
    };
    if (starts("true") || starts("yes")) return Verdict::True;
    if (starts("false") || starts("no")) return Verdict::False;
    return std::nullopt;
}

struct VerdictLine {
    Verdict verdict;
    std::string raw;
};

// One verdict per line, either "N. True" or a bare verdict token (assigned to
// the next unanswered statement). Throws ParseError when nothing is usable.
std::map<std::size_t, VerdictLine> parse_verdicts(const std::string& reply, std::size_t count) {
    std::map<std::size_t, VerdictLine> verdicts;
    std::size_t cursor = 1;
    for (const auto& raw_line : split(reply, '\n')) {
        const std::string line = trim(raw_line);
        if (line.empty()) continue;
        std::size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t index = 0;
        if (i > 0 && i <= 9) {
            index = std::stoul(line.substr(0, i));
        }
        const auto verdict = verdict_token(std::string_view(line).substr(i));
        if (!verdict) continue;
        if (index == 0) {
            while (cursor <= count && verdicts.count(cursor)) ++cursor;
            if (cursor > count) continue;
            index = cursor;
        }
        if (index < 1 || index > count) continue;
        verdicts.emplace(index, VerdictLine{*verdict, line});
    }
    if (verdicts.empty()) throw ParseError("no verdict lines found");
    return verdicts;
}

} // namespace

std::pair<std::vector<JudgedTriple>, EvalReport> judge_precision(
    const KnowledgeGraph& graph, const CorpusTree& tree, const StageContext& judge_ctx) {
    const auto leaves = collect_leaves(tree.root);

    // group triples per document, preserving graph order
    std::map<std::string, std::vector<const Triple*>> by_doc;
    for (const auto& leaf : leaves) by_doc[leaf->path];
    for (const auto& triple : graph.triples) {
        const auto it = by_doc.find(triple.source_path);
        if (it == by_doc.end()) {
            throw Error("triple source does not resolve to a leaf: " + triple.source_path);
        }
        it->second.push_back(&triple);
    }

    std::vector<std::vector<JudgedTriple>> per_leaf(leaves.size());
    std::vector<std::vector<std::string>> per_leaf_warnings(leaves.size());

    auto produce = [&](std::size_t li) {
        const DocumentNode& leaf = *leaves[li];
        const auto& triples = by_doc[leaf.path];
        if (triples.empty()) return;

        std::string block;
        for (std::size_t i = 0; i < triples.size(); ++i) {
            block += std::to_string(i + 1) + ". " + render_triple(*triples[i]) + "\n";
        }
        const std::string prompt = judge_ctx.prompts.render(
            "judge_triples", {{"path", leaf.path}, {"text", leaf.text}, {"triples", block}});

        std::map<std::size_t, VerdictLine> verdicts;
        std::string reply_tail;
        try {
            verdicts = complete_parsed<std::map<std::size_t, VerdictLine>>(
                judge_ctx.gateway, make_judge_request(judge_ctx, prompt),
                [&](const std::string& reply) {
                    reply_tail = trim(reply);
                    return parse_verdicts(reply, triples.size());
                },
                judge_ctx.retries);
        } catch (const Error& err) {
            per_leaf_warnings[li].push_back("judging failed for '" + leaf.path +
                                            "': " + err.what());
        }
        for (std::size_t i = 0; i < triples.size(); ++i) {
            JudgedTriple judged;
            judged.triple = *triples[i];
            const auto it = verdicts.find(i + 1);
            if (it != verdicts.end()) {
                judged.verdict = it->second.verdict;
                judged.judge_raw = it->second.raw;
            } else {
                judged.verdict = Verdict::Unparseable;
                judged.judge_raw = reply_tail;
            }
            per_leaf[li].push_back(std::move(judged));
        }
    };
    auto commit = [&](std::size_t li) {
        for (auto& w : per_leaf_warnings[li]) judge_ctx.warn(w);
    };
    parallel_for_ordered(leaves.size(), judge_ctx.parallelism, produce, commit);

    std::vector<JudgedTriple> judged;
    EvalReport report;
    std::size_t total_true = 0;
    std::size_t total_judged = 0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        DocJudgeCounts counts;
        for (auto& item : per_leaf[li]) {
            if (item.verdict == Verdict::True) { ++counts.true_count; ++counts.judged; }
            else if (item.verdict == Verdict::False) { ++counts.judged; }
            else { ++report.unparseable; }
            judged.push_back(std::move(item));
        }
        total_true += counts.true_count;
        total_judged += counts.judged;
        report.per_document[leaves[li]->path] = counts;
    }
    report.recall_number = total_true;
    report.average_recall_number =
        leaves.empty() ? 0.0
                       : static_cast<double>(total_true) / static_cast<double>(leaves.size());
    if (total_judged > 0) {
        report.precision = static_cast<double>(total_true) / static_cast<double>(total_judged);
    }
    return {std::move(judged), std::move(report)};
}

namespace {

bool shares_token(const GoldTriple& gold, const Triple& candidate) {
    const auto gold_tokens = [&] {
        auto t = fold_tokens(gold.subject);
        const auto obj = fold_tokens(gold.object);
        t.insert(t.end(), obj.begin(), obj.end());
        return t;
    }();
    const auto probe = [&](const std::string& field) {
        for (const auto& token : fold_tokens(field)) {
            if (std::find(gold_tokens.begin(), gold_tokens.end(), token) != gold_tokens.end()) {
                return true;
            }
        }
        return false;
    };
    return probe(candidate.subject) || probe(candidate.object);
}

// "None"/"no"/"false" -> nullopt-by-0; "true"/"yes" -> first candidate; an
// integer picks that candidate (1-based).
std::size_t parse_equivalence_reply(const std::string& reply, std::size_t candidate_count) {
    const std::string t = trim(reply);
    if (t.empty()) throw ParseError("empty equivalence reply");
    std::size_t i = 0;
    while (i < t.size() && !std::isalnum(static_cast<unsigned char>(t[i]))) ++i;
    const std::string_view body = std::string_view(t).substr(i);
    auto starts = [&](std::string_view word) {
        return body.size() >= word.size() && iequals(body.substr(0, word.size()), word);
    };
    if (starts("none") || starts("no") || starts("false")) return 0;
    if (starts("true") || starts("yes")) return 1;
    std::size_t d = 0;
    while (d < body.size() && std::isdigit(static_cast<unsigned char>(body[d]))) ++d;
    if (d > 0 && d <= 9) {
        const std::size_t index = std::stoul(std::string(body.substr(0, d)));
        if (index >= 1 && index <= candidate_count) return index;
        throw ParseError("candidate index out of range");
    }
    throw ParseError("equivalence reply matched no accepted token");
}

} // namespace

GoldMetrics match_gold(const std::vector<Triple>& extracted,
                       const std::vector<GoldTriple>& gold, const StageContext& judge_ctx) {
    if (gold.empty()) throw Error("gold triple set is empty");

    std::vector<char> used(extracted.size(), 0);
    std::size_t matched = 0;

    for (const auto& g : gold) {
        // exact-match fast path, no judge call
        bool done = false;
        for (std::size_t i = 0; i < extracted.size() && !done; ++i) {
            if (used[i]) continue;
            if (iequals(extracted[i].subject, g.subject) &&
                iequals(extracted[i].predicate, g.predicate) &&
                iequals(extracted[i].object, g.object)) {
                used[i] = 1;
                ++matched;
                done = true;
            }
        }
        if (done) continue;

        // candidates share at least one token with the gold subject or object
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < extracted.size(); ++i) {
            if (!used[i] && shares_token(g, extracted[i])) candidates.push_back(i);
        }
        if (candidates.empty()) continue;

        std::string block;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            block += std::to_string(c + 1) + ". " + render_triple(extracted[candidates[c]]) + "\n";
        }
        const std::string gold_repr =
            "(" + g.subject + ", " + g.predicate + ", " + g.object + ")";
        const std::string prompt = judge_ctx.prompts.render(
            "judge_equivalence", {{"gold", gold_repr}, {"candidates", block}});

        try {
            const std::size_t pick = complete_parsed<std::size_t>(
                judge_ctx.gateway, make_judge_request(judge_ctx, prompt),
                [&](const std::string& reply) {
                    return parse_equivalence_reply(reply, candidates.size());
                },
                judge_ctx.retries);
            if (pick >= 1) {
                used[candidates[pick - 1]] = 1;
                ++matched;
            }
        } catch (const Error& err) {
            judge_ctx.warn("equivalence judging failed for gold " + gold_repr + ": " +
                           err.what());
        }
    }

    GoldMetrics metrics;
    metrics.matched = matched;
    metrics.precision = extracted.empty()
                            ? 0.0
                            : static_cast<double>(matched) / static_cast<double>(extracted.size());
    metrics.recall = static_cast<double>(matched) / static_cast<double>(gold.size());
    metrics.f1 = f1_score(metrics.precision, metrics.recall);
    return metrics;
}

std::vector<GoldTriple> load_gold_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open gold file: " + path);
    std::vector<GoldTriple> gold;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ordered_json doc = ordered_json::parse(line, nullptr, false);
        if (doc.is_discarded()) throw IoError("malformed gold record: " + line);
        gold.push_back({doc.at("subject").get<std::string>(),
                        doc.at("predicate").get<std::string>(),
                        doc.at("object").get<std::string>(),
                        doc.value("doc", std::string{})});
    }
    if (gold.empty()) throw IoError("gold file has no records: " + path);
    return gold;
}

std::string report_to_json(const EvalReport& report) {
    ordered_json doc = ordered_json::object();
    if (report.precision) doc["precision"] = *report.precision;
    doc["recall_number"] = report.recall_number;
    doc["average_recall_number"] = report.average_recall_number;
    doc["unparseable"] = report.unparseable;
    ordered_json per_doc = ordered_json::object();
    for (const auto& [path, counts] : report.per_document) {
        per_doc[path] = ordered_json{{"judged", counts.judged}, {"true", counts.true_count}};
    }
    doc["per_document"] = per_doc;
    if (report.gold_metrics) {
        doc["gold_metrics"] = ordered_json{{"precision", report.gold_metrics->precision},
                                           {"recall", report.gold_metrics->recall},
                                           {"f1", report.gold_metrics->f1},
                                           {"matched", report.gold_metrics->matched}};
    }
    return doc.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::string& path) {
    write_file(path, report_to_json(report));

    std::ostringstream table;
    table << "metric                    value\n";
    table << "------                    -----\n";
    if (report.precision) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", *report.precision);
        table << "precision                 " << buf << "\n";
    } else {
        table << "precision                 (no judgeable triples)\n";
    }
    table << "recall_number             " << report.recall_number << "\n";
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", report.average_recall_number);
        table << "average_recall_number     " << buf << "\n";
    }
    table << "unparseable               " << report.unparseable << "\n";
    if (report.gold_metrics) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "gold P/R/F1               %.4f / %.4f / %.4f\n",
                      report.gold_metrics->precision, report.gold_metrics->recall,
                      report.gold_metrics->f1);
        table << buf;
    }
    std::cout << table.str();
}

} // namespace lkd
