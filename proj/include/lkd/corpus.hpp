#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace lkd {

enum class NodeKind { Leaf, Directory };

/// One node of the repository tree. Leaves carry document text; directories
/// carry children in filesystem lexical order (until reordered later).
struct DocumentNode {
    std::string path;  // '/'-separated, relative to the root; "" for the root itself
    NodeKind kind = NodeKind::Directory;
    std::string text;  // nonempty for Leaf, empty for Directory
    std::vector<DocumentNode> children;

    bool is_leaf() const { return kind == NodeKind::Leaf; }
};

struct CorpusTree {
    DocumentNode root;  // kind == Directory
    std::size_t leaf_count = 0;
};

/// Path for display in prompts; the root's empty path renders as ".".
std::string display_path(const std::string& path);

/// Collects pointers to all leaves in depth-first child order.
std::vector<const DocumentNode*> collect_leaves(const DocumentNode& root);

/// Collects pointers to all directory nodes, deepest level first; nodes of equal
/// depth appear in depth-first order. Includes the root (last).
std::vector<const DocumentNode*> collect_directories_bottom_up(const DocumentNode& root);

const DocumentNode* find_node(const DocumentNode& root, const std::string& path);

/// Mirrors a directory of UTF-8 text files into a CorpusTree. Children are ordered
/// lexically by name; directories without any matching file are pruned.
/// Extensions are matched case-insensitively, without the leading dot.
CorpusTree ingest_directory(const std::string& root_path,
                            const std::set<std::string>& include_extensions);

/// Splits flat text into a single-layer tree of "chunk-NNNN" leaves. Chunks cut at
/// the last paragraph boundary (blank line) at or before chunk_chars, hard cut when
/// a paragraph exceeds chunk_chars. Concatenating leaf texts reproduces the input.
CorpusTree chunk_flat_text(const std::string& text, std::size_t chunk_chars);

} // namespace lkd
