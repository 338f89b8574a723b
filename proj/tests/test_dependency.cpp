#include "lkd/dependency.hpp"
#include "lkd/errors.hpp"

#include <doctest.h>

#include <algorithm>

using namespace lkd;

namespace {

DocumentNode leaf(const std::string& path, const std::string& text) {
    DocumentNode node;
    node.path = path;
    node.kind = NodeKind::Leaf;
    node.text = text;
    return node;
}

DocumentNode dir(const std::string& path, std::vector<DocumentNode> children) {
    DocumentNode node;
    node.path = path;
    node.kind = NodeKind::Directory;
    node.children = std::move(children);
    return node;
}

CorpusTree small_tree() {
    CorpusTree tree;
    tree.root = dir("", {dir("a", {leaf("a/one.md", "text one"), leaf("a/two.md", "text two")}),
                         leaf("three.md", "text three")});
    tree.leaf_count = 3;
    return tree;
}

struct Env {
    ScriptedBackend backend;
    PromptLibrary prompts;
    std::vector<std::string> warnings;

    StageContext ctx() {
        StageContext c{backend, prompts};
        c.parallelism = 1;
        c.warnings = &warnings;
        return c;
    }
};

std::map<std::string, SummaryRecord> by_path(const std::vector<SummaryRecord>& records) {
    std::map<std::string, SummaryRecord> out;
    for (const auto& r : records) out[r.node_path] = r;
    return out;
}

} // namespace

TEST_CASE("summarize_leaves: one Initial record per leaf, document text in prompt") {
    Env env;
    env.backend.set_default_response("S");
    const auto tree = small_tree();
    const auto records = summarize_leaves(tree, env.ctx());

    REQUIRE(records.size() == 3);
    for (const auto& record : records) {
        CHECK(record.phase == SummaryPhase::Initial);
        CHECK(record.text == "S");
        CHECK(record.context_refs.empty());
    }
    CHECK(records[0].node_path == "a/one.md");
    const auto log = env.backend.call_log();
    REQUIRE(log.size() == 3);
    CHECK(log[0].user_prompt.find("text one") != std::string::npos);
}

TEST_CASE("summarize_leaves skips existing records on resume") {
    Env env;
    env.backend.set_default_response("fresh");
    const auto tree = small_tree();
    std::map<std::string, SummaryRecord> existing;
    existing["a/one.md"] = {"a/one.md", SummaryPhase::Initial, "old", {}};

    std::vector<std::string> sunk;
    const auto records = summarize_leaves(tree, env.ctx(), existing,
                                          [&](const SummaryRecord& r) { sunk.push_back(r.node_path); });
    CHECK(records[0].text == "old");
    CHECK(records[1].text == "fresh");
    CHECK(env.backend.call_count() == 2);               // resumed leaf not regenerated
    CHECK(std::find(sunk.begin(), sunk.end(), "a/one.md") == sunk.end());  // nor re-sunk
}

TEST_CASE("summarize_directories: bottom-up with child summaries in prompt") {
    Env env;
    env.backend.add_rule("The directory 'a' contains", "dir-a summary");
    env.backend.add_rule("The directory '.' contains", "root summary");
    const auto tree = small_tree();
    const auto initial = by_path(summarize_leaves(tree, env.ctx()));

    const auto records = summarize_directories(tree, initial, env.ctx());
    REQUIRE(records.size() == 2);
    CHECK(records[0].node_path == "a");       // deeper level first
    CHECK(records[1].node_path == "");
    CHECK(records[0].phase == SummaryPhase::Directory);

    const auto log = env.backend.call_log();
    // the prompt for 'a' carries both child names and their summaries
    const auto& dir_a_prompt = log[3].user_prompt;
    CHECK(dir_a_prompt.find("one.md") != std::string::npos);
    CHECK(dir_a_prompt.find("two.md") != std::string::npos);
    // the root prompt uses dir-a's fresh Directory summary, not a leaf one
    const auto& root_prompt = log[4].user_prompt;
    CHECK(root_prompt.find("dir-a summary") != std::string::npos);
}

TEST_CASE("order_children: scripted permutation is applied 1-based") {
    Env env;
    env.backend.set_default_response("[3, 1, 2]");
    const auto parent = dir("d", {leaf("d/x.md", "x"), leaf("d/y.md", "y"), leaf("d/z.md", "z")});
    std::map<std::string, SummaryRecord> summaries;
    for (const auto& child : parent.children) {
        summaries[child.path] = {child.path, SummaryPhase::Initial, "s-" + child.path, {}};
    }
    CHECK(order_children(parent, summaries, env.ctx()) ==
          std::vector<std::size_t>{2, 0, 1});
}

TEST_CASE("order_children repair rules") {
    const auto parent = dir("d", {leaf("d/x.md", "x"), leaf("d/y.md", "y"), leaf("d/z.md", "z")});
    std::map<std::string, SummaryRecord> summaries;
    for (const auto& child : parent.children) {
        summaries[child.path] = {child.path, SummaryPhase::Initial, "s", {}};
    }

    SUBCASE("duplicates keep first occurrence, missing appended") {
        Env env;
        env.backend.set_default_response("[2, 2]");
        CHECK(order_children(parent, summaries, env.ctx()) ==
              std::vector<std::size_t>{1, 0, 2});
        CHECK(env.warnings.empty());
    }
    SUBCASE("out-of-range dropped") {
        Env env;
        env.backend.set_default_response("[9, 3, 0]");
        CHECK(order_children(parent, summaries, env.ctx()) ==
              std::vector<std::size_t>{2, 0, 1});
    }
    SUBCASE("empty list falls back to original order without warning") {
        Env env;
        env.backend.set_default_response("[]");
        CHECK(order_children(parent, summaries, env.ctx()) ==
              std::vector<std::size_t>{0, 1, 2});
    }
    SUBCASE("garbage exhausts the repair loop and warns") {
        Env env;
        env.backend.set_default_response("I would rather not");
        CHECK(order_children(parent, summaries, env.ctx()) ==
              std::vector<std::size_t>{0, 1, 2});
        CHECK(env.backend.call_count() == 3);  // R+1 attempts with R=2
        REQUIRE(env.warnings.size() == 1);
        CHECK(env.warnings[0].find("'d'") != std::string::npos);
    }
}

TEST_CASE("order_children short-circuits a single child") {
    Env env;
    const auto parent = dir("solo", {leaf("solo/only.md", "text")});
    std::map<std::string, SummaryRecord> summaries;
    summaries["solo/only.md"] = {"solo/only.md", SummaryPhase::Initial, "s", {}};
    CHECK(order_children(parent, summaries, env.ctx()) == std::vector<std::size_t>{0});
    CHECK(env.backend.call_count() == 0);
}

TEST_CASE("compute_access_order produces the DFS under per-level orders") {
    Env env;
    env.backend.add_rule("entries of directory '.'", "[2, 1]");
    env.backend.add_rule("entries of directory 'a'", "[2, 1]");
    const auto tree = small_tree();
    auto summaries = by_path(summarize_leaves(tree, env.ctx()));
    for (const auto& record : summarize_directories(tree, summaries, env.ctx())) {
        summaries[record.node_path] = record;
    }

    const auto order = compute_access_order(tree, summaries, env.ctx());
    CHECK(order.sequence ==
          std::vector<std::string>{"three.md", "a/two.md", "a/one.md"});
    CHECK(order.per_level_orders.at("") == std::vector<std::string>{"three.md", "a"});
    CHECK(order.per_level_orders.at("a") ==
          std::vector<std::string>{"two.md", "one.md"});
}

TEST_CASE("walk_and_summarize: autoregressive context under budget") {
    Env env;
    env.backend.set_default_response("ctx summary");
    const auto tree = small_tree();
    const auto initial = by_path(summarize_leaves(tree, env.ctx()));

    AccessOrder order;
    order.sequence = {"a/one.md", "a/two.md", "three.md"};

    HashingEmbedder embedder(16);
    VectorStore store(16);
    const auto records = walk_and_summarize(tree, order, initial, env.ctx(), embedder, store,
                                            10, 24000);
    REQUIRE(records.size() == 3);
    CHECK(records[0].context_refs.empty());  // first leaf sees nothing
    CHECK(records[1].context_refs == std::vector<std::string>{"a/one.md"});
    CHECK(records[2].context_refs ==
          std::vector<std::string>{"a/one.md", "a/two.md"});
    CHECK(store.size() == 3);

    // the last prompt carries both prior summaries
    const auto log = env.backend.call_log();
    const auto& last = log.back().user_prompt;
    CHECK(last.find("a/one.md: ctx summary") != std::string::npos);
    CHECK(last.find("a/two.md: ctx summary") != std::string::npos);
}

TEST_CASE("walk_and_summarize: budget exceeded switches to top-k retrieval") {
    // 16 leaves; by the time the last leaf is processed, 15 summaries exceed
    // the tiny budget, so exactly k are retrieved and must match the oracle.
    Env env;
    const std::size_t n = 16;
    std::vector<DocumentNode> leaves;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string name = "doc-" + std::to_string(i) + ".md";
        leaves.push_back(leaf(name, "body " + std::to_string(i)));
        env.backend.add_rule("(" + name + ")", "summary about topic " + std::to_string(i % 5) +
                                                   " item " + std::to_string(i));
    }
    CorpusTree tree;
    tree.root = dir("", std::move(leaves));
    tree.leaf_count = n;

    const auto initial = by_path(summarize_leaves(tree, env.ctx()));
    AccessOrder order;
    for (std::size_t i = 0; i < n; ++i) order.sequence.push_back("doc-" + std::to_string(i) + ".md");

    HashingEmbedder embedder(32);
    VectorStore store(32);
    const std::size_t k = 10;
    const auto records =
        walk_and_summarize(tree, order, initial, env.ctx(), embedder, store, k, 50);

    const auto& last = records.back();
    REQUIRE(last.context_refs.size() == k);

    // oracle: exhaustive cosine ranking over the first 15 context summaries
    VectorStore oracle_store(32);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        oracle_store.insert(records[i].node_path, records[i].text,
                            embedder.embed_one(records[i].text));
    }
    const auto query = embedder.embed_one(initial.at(last.node_path).text);
    const auto expected = oracle_store.top_k(query, k);
    for (std::size_t i = 0; i < k; ++i) {
        CHECK(last.context_refs[i] == expected[i].id);
    }

    // causality: every ref precedes the record in the sequence
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < order.sequence.size(); ++i) position[order.sequence[i]] = i;
    for (const auto& record : records) {
        for (const auto& ref : record.context_refs) {
            CHECK(position.at(ref) < position.at(record.node_path));
        }
    }
}

TEST_CASE("walk_and_summarize resumes from a prefix without regenerating") {
    Env env;
    env.backend.set_default_response("new summary");
    const auto tree = small_tree();
    const auto initial = by_path(summarize_leaves(tree, env.ctx()));
    AccessOrder order;
    order.sequence = {"a/one.md", "a/two.md", "three.md"};

    std::vector<SummaryRecord> resume = {
        {"a/one.md", SummaryPhase::ContextEnhanced, "resumed one", {}}};
    HashingEmbedder embedder(16);
    VectorStore store(16);
    const std::size_t calls_before = env.backend.call_count();
    const auto records = walk_and_summarize(tree, order, initial, env.ctx(), embedder, store,
                                            10, 24000, resume);
    CHECK(records[0].text == "resumed one");
    CHECK(env.backend.call_count() == calls_before + 2);  // only the two remaining leaves
    CHECK(store.size() == 3);

    // mismatched prefix is rejected
    std::vector<SummaryRecord> wrong = {
        {"three.md", SummaryPhase::ContextEnhanced, "x", {}}};
    VectorStore store2(16);
    CHECK_THROWS_AS(walk_and_summarize(tree, order, initial, env.ctx(), embedder, store2, 10,
                                       24000, wrong),
                    Error);
}
