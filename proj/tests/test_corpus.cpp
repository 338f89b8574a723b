#include "lkd/corpus.hpp"
#include "lkd/errors.hpp"
#include "lkd/util.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

namespace fs = std::filesystem;
using namespace lkd;

namespace {

fs::path make_temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("lkd_corpus_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void put(const fs::path& file, const std::string& text) {
    fs::create_directories(file.parent_path());
    std::ofstream(file) << text;
}

} // namespace

TEST_CASE("ingest mirrors a documentation-shaped tree") {
    const auto root = make_temp_dir("shape");
    put(root / "Introduction/overview.md", "intro text");
    put(root / "Concepts/data-model.md", "data model");
    put(root / "Concepts/metric-types.md", "metric types");
    put(root / "Concepts/jobs-and-instances.md", "jobs");
    put(root / "Prometheus Server/server.md", "server");
    put(root / "Best Practices/naming.md", "naming");

    const CorpusTree tree = ingest_directory(root.string(), {"md", "txt"});
    CHECK(tree.leaf_count == 6);
    REQUIRE(tree.root.children.size() == 4);  // four directories under the root
    // lexical order at ingestion
    CHECK(tree.root.children[0].path == "Best Practices");
    CHECK(tree.root.children[1].path == "Concepts");
    CHECK(tree.root.children[2].path == "Introduction");
    CHECK(tree.root.children[3].path == "Prometheus Server");
    CHECK(tree.root.children[1].children.size() == 3);
    CHECK(tree.root.children[1].children[0].path == "Concepts/data-model.md");
    CHECK(tree.root.children[1].children[0].text == "data model");
}

TEST_CASE("ingest single file corpus") {
    const auto root = make_temp_dir("single");
    put(root / "a.md", "hello");
    const CorpusTree tree = ingest_directory(root.string(), {"md"});
    CHECK(tree.leaf_count == 1);
    REQUIRE(tree.root.children.size() == 1);
    CHECK(tree.root.children[0].path == "a.md");
    CHECK(tree.root.children[0].is_leaf());
}

TEST_CASE("ingest errors") {
    CHECK_THROWS_AS(ingest_directory("/nonexistent/nowhere", {"md"}), NotFoundError);

    const auto root = make_temp_dir("excluded");
    put(root / "a.pdf", "binary-ish");
    CHECK_THROWS_AS(ingest_directory(root.string(), {"md"}), EmptyCorpusError);

    const auto bad = make_temp_dir("nonutf8");
    std::ofstream(bad / "broken.md", std::ios::binary) << "ok\xFF\xFE broken";
    CHECK_THROWS_AS(ingest_directory(bad.string(), {"md"}), DecodeError);
}

TEST_CASE("ingest prunes empty directories and is deterministic") {
    const auto root = make_temp_dir("prune");
    put(root / "keep/doc.md", "content");
    fs::create_directories(root / "empty/nested");
    put(root / "skipped/only.pdf", "x");

    const CorpusTree a = ingest_directory(root.string(), {"md"});
    REQUIRE(a.root.children.size() == 1);
    CHECK(a.root.children[0].path == "keep");

    const CorpusTree b = ingest_directory(root.string(), {"md"});
    CHECK(collect_leaves(a.root).size() == collect_leaves(b.root).size());
    for (std::size_t i = 0; i < collect_leaves(a.root).size(); ++i) {
        CHECK(collect_leaves(a.root)[i]->path == collect_leaves(b.root)[i]->path);
    }
}

TEST_CASE("chunking: input shorter than chunk size") {
    const std::string text(100, 'x');
    const CorpusTree tree = chunk_flat_text(text, 1000);
    REQUIRE(tree.leaf_count == 1);
    CHECK(tree.root.children[0].text == text);
    CHECK(tree.root.children[0].path == "chunk-0001");
}

TEST_CASE("chunking: paragraph boundary preferred") {
    const std::string a(10, 'A');
    const std::string b(10, 'B');
    const std::string text = a + "\n\n" + b;
    const CorpusTree tree = chunk_flat_text(text, 12);
    REQUIRE(tree.leaf_count == 2);
    CHECK(tree.root.children[0].text == a + "\n\n");
    CHECK(tree.root.children[1].text == b);
    CHECK(tree.root.children[0].text + tree.root.children[1].text == text);
}

TEST_CASE("chunking: hard cut on an oversized paragraph") {
    const std::string text(2500, 'p');
    const CorpusTree tree = chunk_flat_text(text, 1000);
    REQUIRE(tree.leaf_count == 3);
    CHECK(tree.root.children[0].text.size() == 1000);
    CHECK(tree.root.children[1].text.size() == 1000);
    CHECK(tree.root.children[2].text.size() == 500);
}

TEST_CASE("chunking errors") {
    CHECK_THROWS_AS(chunk_flat_text("", 100), EmptyTextError);
}

TEST_CASE("chunking round-trips for random paragraph soup") {
    std::mt19937 rng(7);
    for (int iter = 0; iter < 50; ++iter) {
        std::string text;
        const int paragraphs = 1 + static_cast<int>(rng() % 12);
        for (int p = 0; p < paragraphs; ++p) {
            const int len = 1 + static_cast<int>(rng() % 400);
            text.append(static_cast<std::size_t>(len),
                        static_cast<char>('a' + (rng() % 26)));
            if (p + 1 < paragraphs) text += (rng() % 2) ? "\n\n" : "\n\n\n";
        }
        const std::size_t chunk_chars = 1 + rng() % 300;
        const CorpusTree tree = chunk_flat_text(text, chunk_chars);
        std::string reassembled;
        for (const auto* leaf : collect_leaves(tree.root)) reassembled += leaf->text;
        CHECK(reassembled == text);
        for (const auto* leaf : collect_leaves(tree.root)) {
            CHECK(leaf->text.size() <= chunk_chars);
        }
    }
}

TEST_CASE("helpers: collect_directories_bottom_up is postorder-compatible") {
    const auto root = make_temp_dir("depth3");
    put(root / "a/b/doc.md", "x");
    put(root / "a/doc2.md", "y");
    const CorpusTree tree = ingest_directory(root.string(), {"md"});
    const auto dirs = collect_directories_bottom_up(tree.root);
    REQUIRE(dirs.size() == 3);
    CHECK(dirs[0]->path == "a/b");
    CHECK(dirs[1]->path == "a");
    CHECK(dirs[2]->path == "");
    auto is_ancestor = [](const std::string& a, const std::string& b) {
        return a.empty() ? !b.empty() : b.starts_with(a + "/");
    };
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        for (std::size_t j = i + 1; j < dirs.size(); ++j) {
            // descendants always come before their ancestors
            CHECK_FALSE(is_ancestor(dirs[i]->path, dirs[j]->path));
        }
    }
}
