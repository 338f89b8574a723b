#include "lkd/corpus.hpp"

#include "lkd/errors.hpp"
#include "lkd/util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>

namespace fs = std::filesystem;

namespace lkd {

std::string display_path(const std::string& path) {
    return path.empty() ? "." : path;
}

std::vector<const DocumentNode*> collect_leaves(const DocumentNode& root) {
    std::vector<const DocumentNode*> out;
    std::vector<const DocumentNode*> stack{&root};
    // explicit stack keeps this iterative; children pushed in reverse for DFS order
    while (!stack.empty()) {
        const DocumentNode* node = stack.back();
        stack.pop_back();
        if (node->is_leaf()) {
            out.push_back(node);
            continue;
        }
        for (auto it = node->children.rbegin(); it != node->children.rend(); ++it) {
            stack.push_back(&*it);
        }
    }
    return out;
}

namespace {

void collect_dirs_by_depth(const DocumentNode& node, std::size_t depth,
                           std::vector<std::vector<const DocumentNode*>>& levels) {
    if (node.is_leaf()) return;
    if (levels.size() <= depth) levels.resize(depth + 1);
    levels[depth].push_back(&node);
    for (const auto& child : node.children) collect_dirs_by_depth(child, depth + 1, levels);
}

} // namespace

std::vector<const DocumentNode*> collect_directories_bottom_up(const DocumentNode& root) {
    std::vector<std::vector<const DocumentNode*>> levels;
    collect_dirs_by_depth(root, 0, levels);
    std::vector<const DocumentNode*> out;
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
        out.insert(out.end(), it->begin(), it->end());
    }
    return out;
}

const DocumentNode* find_node(const DocumentNode& root, const std::string& path) {
    if (root.path == path) return &root;
    for (const auto& child : root.children) {
        if (path.compare(0, child.path.size(), child.path) == 0 &&
            (path.size() == child.path.size() || path[child.path.size()] == '/')) {
            return find_node(child, path);
        }
    }
    return nullptr;
}

namespace {

bool extension_included(const fs::path& file, const std::set<std::string>& extensions) {
    std::string ext = file.extension().string();
    if (!ext.empty() && ext.front() == '.') ext.erase(0, 1);
    ext = to_lower(ext);
    for (const auto& e : extensions) {
        if (to_lower(e) == ext) return true;
    }
    return false;
}

std::optional<DocumentNode> build_node(const fs::path& fs_path, const std::string& rel_path,
                                       const std::set<std::string>& extensions,
                                       std::size_t& leaf_count) {
    if (fs::is_regular_file(fs_path)) {
        if (!extension_included(fs_path, extensions)) return std::nullopt;
        std::string bytes = read_file(fs_path.string());
        if (!is_valid_utf8(bytes)) {
            throw DecodeError("file is not valid UTF-8: " + rel_path);
        }
        DocumentNode leaf;
        leaf.path = rel_path;
        leaf.kind = NodeKind::Leaf;
        leaf.text = std::move(bytes);
        ++leaf_count;
        return leaf;
    }
    if (!fs::is_directory(fs_path)) return std::nullopt;

    std::vector<fs::path> entries;
    for (const auto& entry : fs::directory_iterator(fs_path)) {
        entries.push_back(entry.path());
    }
    std::sort(entries.begin(), entries.end(),
              [](const fs::path& a, const fs::path& b) {
                  return a.filename().string() < b.filename().string();
              });

    DocumentNode dir;
    dir.path = rel_path;
    dir.kind = NodeKind::Directory;
    for (const auto& entry : entries) {
        const std::string name = entry.filename().string();
        const std::string child_rel = rel_path.empty() ? name : rel_path + "/" + name;
        if (auto child = build_node(entry, child_rel, extensions, leaf_count)) {
            dir.children.push_back(std::move(*child));
        }
    }
    if (dir.children.empty()) return std::nullopt;  // prune empty directories
    return dir;
}

} // namespace

CorpusTree ingest_directory(const std::string& root_path,
                            const std::set<std::string>& include_extensions) {
    const fs::path root(root_path);
    if (!fs::exists(root)) throw NotFoundError("corpus path does not exist: " + root_path);
    if (!fs::is_directory(root)) throw NotFoundError("corpus path is not a directory: " + root_path);

    std::size_t leaf_count = 0;
    auto node = build_node(root, "", include_extensions, leaf_count);
    if (!node || leaf_count == 0) {
        throw EmptyCorpusError("no files with included extensions under: " + root_path);
    }
    return CorpusTree{std::move(*node), leaf_count};
}

CorpusTree chunk_flat_text(const std::string& text, std::size_t chunk_chars) {
    if (text.empty()) throw EmptyTextError("cannot chunk empty text");
    if (chunk_chars < 1) throw EmptyTextError("chunk_chars must be >= 1");

    // A cut candidate is the position just past a blank-line separator, so the
    // separator stays with the preceding chunk and concatenation round-trips.
    std::vector<std::string> chunks;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t remaining = text.size() - pos;
        if (remaining <= chunk_chars) {
            chunks.push_back(text.substr(pos));
            break;
        }
        std::size_t cut = 0;
        std::size_t scan = pos;
        while (true) {
            const std::size_t nl = text.find("\n\n", scan);
            if (nl == std::string::npos) break;
            std::size_t end = nl + 2;
            while (end < text.size() && text[end] == '\n') ++end;
            if (end - pos > chunk_chars) break;
            cut = end - pos;
            scan = end;
        }
        if (cut == 0) cut = chunk_chars;  // paragraph longer than the chunk: hard cut
        chunks.push_back(text.substr(pos, cut));
        pos += cut;
    }

    CorpusTree tree;
    tree.root.path = "";
    tree.root.kind = NodeKind::Directory;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "chunk-%04zu", i + 1);
        DocumentNode leaf;
        leaf.path = name;
        leaf.kind = NodeKind::Leaf;
        leaf.text = std::move(chunks[i]);
        tree.root.children.push_back(std::move(leaf));
    }
    tree.leaf_count = tree.root.children.size();
    return tree;
}

} // namespace lkd
