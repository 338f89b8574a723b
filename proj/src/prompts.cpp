#include "lkd/prompts.hpp"

#include "lkd/errors.hpp"
#include "lkd/util.hpp"

#include <filesystem>

namespace fs = std::filesystem;

namespace lkd {

const char* const kSystemPrompt =
    "You are a precise assistant for building knowledge graphs from technical "
    "documentation. Follow the requested output format exactly.";

namespace {

const std::map<std::string, std::string>& builtin_templates() {
    static const std::map<std::string, std::string> templates = {
        {"summarize_document",
         "Summarize the following document in two or three sentences, covering its key "
         "entities and relationships.\n\n"
         "Document ({path}):\n{text}"},

        {"summarize_directory",
         "The directory '{path}' contains the entries below, each with a summary.\n\n"
         "{children}\n\n"
         "Write a two or three sentence summary of the directory as a whole, covering its "
         "key entities and relationships."},

        {"order_children",
         "A reader wants to study the entries of directory '{path}' in the order that "
         "builds understanding best, foundational material first.\n\n"
         "Entries:\n{children}\n\n"
         "Reply with a single list of the entry numbers in reading order, e.g. [2, 1, 3]."},

        {"summarize_with_context",
         "Background notes from previously read documents:\n{context}\n\n"
         "Using the background notes where they help, summarize the following document in "
         "two or three sentences, covering its key entities and relationships.\n\n"
         "Current document ({path}):\n{text}"},

        {"extract_entity_types",
         "Task: Some text and its summary will be provided. You need to refer to the "
         "summary and the content of the text to classify meaningful entities within the "
         "text, and return a list containing all the entity types.\n"
         "Text: {text}\n"
         "Summary: {summary}"},

        {"define_entity_types",
         "Task: Here are some entity types. First, merge types that have the same meaning. "
         "Then, briefly define each merged type in one sentence. These entity types come "
         "from the same knowledge base; you can refer to the reference knowledge below.\n"
         "Input entity types: {entity_types}\n"
         "Reference Knowledge: {reference}"},

        {"extract_entities",
         "Task: Here is a document. Please extract meaningful entities and their types "
         "which belongs to the given entity schema from the document.\n"
         "Document content: {text}\n"
         "Entity Schema: {schema}"},

        {"extract_relations",
         "Task: Below is a document and some entities extracted from it. What entities do "
         "you believe have clear and meaningful relationships? Give all relation triples "
         "in the format of [(Subject Entity, Predicate, Object Entity)].\n"
         "Document content: {text}\n"
         "Entities: {entities}\n"
         "Entity Schema: {schema}"},

        {"judge_triples",
         "Below is a document and a numbered list of (subject, predicate, object) "
         "statements extracted from it. For each statement decide whether the document "
         "supports it. Reply with one line per statement: the statement number followed "
         "by True or False.\n\n"
         "Source document ({path}):\n{text}\n\n"
         "Statements:\n{triples}"},

        {"judge_equivalence",
         "A gold statement and a numbered list of candidate statements are given. Decide "
         "whether any candidate expresses the same fact as the gold statement, allowing "
         "different wording for the same entities and relation.\n\n"
         "Gold statement: {gold}\n"
         "Candidates:\n{candidates}\n\n"
         "Reply with the number of the matching candidate, or None."},
    };
    return templates;
}

} // namespace

PromptLibrary::PromptLibrary() : templates_(builtin_templates()) {}

const std::map<std::string, std::string>& PromptLibrary::defaults() {
    return builtin_templates();
}

void PromptLibrary::load_overrides(const std::string& templates_dir) {
    if (!fs::is_directory(templates_dir)) {
        throw ConfigError("templates directory not found: " + templates_dir);
    }
    for (const auto& entry : fs::directory_iterator(templates_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        const std::string name = entry.path().stem().string();
        if (templates_.find(name) == templates_.end()) {
            throw ConfigError("unknown prompt template: " + name);
        }
        templates_[name] = read_file(entry.path().string());
    }
}

void PromptLibrary::write_defaults(const std::string& templates_dir) {
    fs::create_directories(templates_dir);
    for (const auto& [name, body] : builtin_templates()) {
        write_file((fs::path(templates_dir) / (name + ".txt")).string(), body);
    }
}

std::string PromptLibrary::render(
    const std::string& name,
    const std::vector<std::pair<std::string, std::string>>& values) const {
    return substitute(raw(name), values);
}

const std::string& PromptLibrary::raw(const std::string& name) const {
    const auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("no such prompt template: " + name);
    return it->second;
}

} // namespace lkd
