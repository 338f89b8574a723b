#include "lkd/pipeline.hpp"

#include "lkd/errors.hpp"
#include "lkd/util.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace lkd {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config

namespace {

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", value);
    return std::string(buf);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        return std::stoull(trim(value));
    } catch (...) {
        throw ConfigError("config key '" + key + "' expects an integer, got: " + value);
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        return std::stod(trim(value));
    } catch (...) {
        throw ConfigError("config key '" + key + "' expects a number, got: " + value);
    }
}

void apply_config_key(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "corpus_path") c.corpus_path = value;
    else if (key == "run_dir") c.run_dir = value;
    else if (key == "generator.base_url") c.generator.base_url = value;
    else if (key == "generator.model") c.generator.model = value;
    else if (key == "generator.api_key_env") c.generator.api_key_env = value;
    else if (key == "judge.base_url") c.judge.base_url = value;
    else if (key == "judge.model") c.judge.model = value;
    else if (key == "judge.api_key_env") c.judge.api_key_env = value;
    else if (key == "embedding.provider") c.embedding.provider = value;
    else if (key == "embedding.base_url") c.embedding.base_url = value;
    else if (key == "embedding.model") c.embedding.model = value;
    else if (key == "embedding.api_key_env") c.embedding.api_key_env = value;
    else if (key == "embedding.dimension") c.embedding.dimension = parse_u64(key, value);
    else if (key == "temperature") c.temperature = parse_double(key, value);
    else if (key == "retrieval_k") c.retrieval_k = parse_u64(key, value);
    else if (key == "context_char_budget") c.context_char_budget = parse_u64(key, value);
    else if (key == "schema_char_budget") c.schema_char_budget = parse_u64(key, value);
    else if (key == "chunk_chars") c.chunk_chars = parse_u64(key, value);
    else if (key == "kmeans_seed") c.kmeans_seed = parse_u64(key, value);
    else if (key == "kmeans_restarts") c.kmeans_restarts = static_cast<int>(parse_u64(key, value));
    else if (key == "sweep_k_min") c.sweep_k_min = parse_u64(key, value);
    else if (key == "sweep_k_max") c.sweep_k_max = parse_u64(key, value);
    else if (key == "parallelism") c.parallelism = static_cast<int>(parse_u64(key, value));
    else if (key == "retries") c.retries = static_cast<int>(parse_u64(key, value));
    else if (key == "max_tokens_summary") c.max_tokens_summary = static_cast<int>(parse_u64(key, value));
    else if (key == "max_tokens_extract") c.max_tokens_extract = static_cast<int>(parse_u64(key, value));
    else if (key == "include_extensions") c.include_extensions = value;
    else if (key == "templates_dir") c.templates_dir = value;
    else if (key == "mock_script") c.mock_script = value;
    else throw ConfigError("unknown config key: " + key);
}

} // namespace

void apply_config_text(RunConfig& config, const std::string& text) {
    std::string section;
    for (const auto& raw_line : split(text, '\n')) {
        const std::string line = trim(raw_line);
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line is not key = value: " + line);
        std::string key = trim(line.substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        apply_config_key(config, key, strip_quotes(line.substr(eq + 1)));
    }
}

RunConfig load_config_file(const std::string& path) {
    RunConfig config;
    apply_config_text(config, read_file(path));
    return config;
}

void validate_config(const RunConfig& config) {
    if (config.temperature < 0.0 || config.temperature > 2.0) {
        throw ConfigError("temperature must be in [0, 2]");
    }
    if (config.retrieval_k < 1) throw ConfigError("retrieval_k must be >= 1");
    if (config.chunk_chars < 1) throw ConfigError("chunk_chars must be >= 1");
    if (config.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (config.retries < 0) throw ConfigError("retries must be >= 0");
    if (config.max_tokens_summary < 1 || config.max_tokens_extract < 1) {
        throw ConfigError("max_tokens values must be positive");
    }
    if (config.embedding.dimension < 1) throw ConfigError("embedding.dimension must be >= 1");
    if (config.embedding.provider != "deterministic" && config.embedding.provider != "remote") {
        throw ConfigError("embedding.provider must be 'deterministic' or 'remote'");
    }
}

std::map<std::string, std::string> config_snapshot(const RunConfig& c) {
    return {
        {"corpus_path", c.corpus_path},
        {"run_dir", c.run_dir},
        {"generator.base_url", c.generator.base_url},
        {"generator.model", c.generator.model},
        {"generator.api_key_env", c.generator.api_key_env},
        {"judge.base_url", c.judge.base_url},
        {"judge.model", c.judge.model},
        {"judge.api_key_env", c.judge.api_key_env},
        {"embedding.provider", c.embedding.provider},
        {"embedding.base_url", c.embedding.base_url},
        {"embedding.model", c.embedding.model},
        {"embedding.api_key_env", c.embedding.api_key_env},
        {"embedding.dimension", std::to_string(c.embedding.dimension)},
        {"temperature", format_double(c.temperature)},
        {"retrieval_k", std::to_string(c.retrieval_k)},
        {"context_char_budget", std::to_string(c.context_char_budget)},
        {"schema_char_budget", std::to_string(c.schema_char_budget)},
        {"chunk_chars", std::to_string(c.chunk_chars)},
        {"kmeans_seed", std::to_string(c.kmeans_seed)},
        {"kmeans_restarts", std::to_string(c.kmeans_restarts)},
        {"sweep_k_min", std::to_string(c.sweep_k_min)},
        {"sweep_k_max", std::to_string(c.sweep_k_max)},
        {"parallelism", std::to_string(c.parallelism)},
        {"retries", std::to_string(c.retries)},
        {"max_tokens_summary", std::to_string(c.max_tokens_summary)},
        {"max_tokens_extract", std::to_string(c.max_tokens_extract)},
        {"include_extensions", c.include_extensions},
        {"templates_dir", c.templates_dir},
        {"mock_script", c.mock_script},
    };
}

// ---------------------------------------------------------------------------
// manifest

namespace {

const char* kManifestFile = "manifest.json";

std::string file_digest(const std::string& path) {
    return digest_hex(read_file(path));
}

} // namespace

bool RunManifest::stage_done(const std::string& stage, const std::string& run_dir) const {
    const auto it = stages.find(stage);
    if (it == stages.end() || it->second.status != "Done") return false;
    for (const auto& [file, digest] : it->second.digests) {
        const std::string full = run_dir + "/" + file;
        if (!fs::exists(full) || file_digest(full) != digest) return false;
    }
    return true;
}

RunManifest load_manifest(const std::string& run_dir) {
    RunManifest manifest;
    const std::string path = run_dir + "/" + kManifestFile;
    if (!fs::exists(path)) return manifest;
    ordered_json doc = ordered_json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) throw IoError("malformed manifest: " + path);
    const ordered_json config_obj = doc.value("config", ordered_json::object());
    for (const auto& [key, value] : config_obj.items()) {
        manifest.config[key] = value.get<std::string>();
    }
    const ordered_json stages_obj = doc.value("stages", ordered_json::object());
    for (const auto& [name, stage] : stages_obj.items()) {
        StageStatus status;
        status.status = stage.value("status", "Pending");
        const ordered_json digests_obj = stage.value("digests", ordered_json::object());
        for (const auto& [file, digest] : digests_obj.items()) {
            status.digests[file] = digest.get<std::string>();
        }
        manifest.stages[name] = status;
    }
    if (doc.contains("stats")) {
        const auto& s = doc["stats"];
        manifest.stats.parsed_tuples = s.value("parsed_tuples", 0u);
        manifest.stats.malformed_tuples = s.value("malformed_tuples", 0u);
        manifest.stats.off_schema_entities = s.value("off_schema_entities", 0u);
        manifest.stats.dangling_triples = s.value("dangling_triples", 0u);
        manifest.stats.duplicate_triples = s.value("duplicate_triples", 0u);
    }
    for (const auto& w : doc.value("warnings", ordered_json::array())) {
        manifest.warnings.push_back(w.get<std::string>());
    }
    return manifest;
}

void save_manifest(const RunManifest& manifest, const std::string& run_dir) {
    ordered_json stages = ordered_json::object();
    for (const auto& [name, stage] : manifest.stages) {
        ordered_json digests = ordered_json::object();
        for (const auto& [file, digest] : stage.digests) digests[file] = digest;
        stages[name] = ordered_json{{"status", stage.status}, {"digests", digests}};
    }
    ordered_json doc{
        {"config", manifest.config},
        {"stages", stages},
        {"stats",
         ordered_json{{"parsed_tuples", manifest.stats.parsed_tuples},
                      {"malformed_tuples", manifest.stats.malformed_tuples},
                      {"off_schema_entities", manifest.stats.off_schema_entities},
                      {"dangling_triples", manifest.stats.dangling_triples},
                      {"duplicate_triples", manifest.stats.duplicate_triples}}},
        {"warnings", manifest.warnings},
    };
    write_file(run_dir + "/" + kManifestFile, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// lock

RunLock::RunLock(const std::string& run_dir) : path_(run_dir + "/.lock") {
    fs::create_directories(run_dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw LockError("run_dir is locked by another process (remove " + path_ +
                        " if stale)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

// ---------------------------------------------------------------------------
// backends and corpus

Backends make_backends(const RunConfig& config) {
    Backends backends;
    if (!config.mock_script.empty()) {
        backends.scripted = ScriptedBackend::from_json(read_file(config.mock_script));
        backends.generator = backends.scripted;
        backends.judge = backends.scripted;
        backends.embedder = std::make_shared<HashingEmbedder>(config.embedding.dimension);
        return backends;
    }
    if (config.generator.base_url.empty()) {
        throw ConfigError("generator.base_url is required (or pass --mock)");
    }
    auto env_or_empty = [](const std::string& name) {
        const char* v = name.empty() ? nullptr : std::getenv(name.c_str());
        return v ? std::string(v) : std::string();
    };
    backends.generator = std::make_shared<HttpChatBackend>(
        config.generator.base_url, config.generator.model,
        env_or_empty(config.generator.api_key_env));
    const EndpointConfig& judge =
        config.judge.base_url.empty() ? config.generator : config.judge;
    backends.judge = std::make_shared<HttpChatBackend>(judge.base_url, judge.model,
                                                       env_or_empty(judge.api_key_env));
    if (config.embedding.provider == "remote") {
        if (config.embedding.base_url.empty()) {
            throw ConfigError("embedding.base_url is required for the remote provider");
        }
        backends.embedder = std::make_shared<RemoteEmbedder>(
            config.embedding.base_url, config.embedding.model,
            env_or_empty(config.embedding.api_key_env), config.embedding.dimension);
    } else {
        backends.embedder = std::make_shared<HashingEmbedder>(config.embedding.dimension);
    }
    return backends;
}

CorpusTree load_corpus(const RunConfig& config) {
    if (config.corpus_path.empty()) throw ConfigError("corpus_path is required");
    if (fs::is_regular_file(config.corpus_path)) {
        return chunk_flat_text(read_file(config.corpus_path), config.chunk_chars);
    }
    std::set<std::string> extensions;
    for (const auto& e : split(config.include_extensions, ',')) {
        const std::string t = trim(e);
        if (!t.empty()) extensions.insert(t);
    }
    return ingest_directory(config.corpus_path, extensions);
}

// ---------------------------------------------------------------------------
// artifact serialization

std::string summary_to_json_line(const SummaryRecord& record) {
    ordered_json line{{"node_path", record.node_path},
                      {"phase", to_string(record.phase)},
                      {"text", record.text},
                      {"context_refs", record.context_refs}};
    return line.dump();
}

SummaryRecord summary_from_json_line(const std::string& line) {
    ordered_json doc = ordered_json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw IoError("malformed summary record: " + line);
    SummaryRecord record;
    record.node_path = doc.at("node_path").get<std::string>();
    record.phase = summary_phase_from_string(doc.at("phase").get<std::string>());
    record.text = doc.at("text").get<std::string>();
    record.context_refs = doc.value("context_refs", std::vector<std::string>{});
    return record;
}

std::vector<SummaryRecord> load_summaries(const std::string& path) {
    std::vector<SummaryRecord> records;
    if (!fs::exists(path)) return records;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) records.push_back(summary_from_json_line(line));
    }
    return records;
}

std::string access_order_to_json(const AccessOrder& order) {
    ordered_json per_level = ordered_json::object();
    for (const auto& [dir, children] : order.per_level_orders) per_level[dir] = children;
    ordered_json doc{{"sequence", order.sequence}, {"per_level_orders", per_level}};
    return doc.dump(2) + "\n";
}

AccessOrder access_order_from_json(const std::string& json_text) {
    ordered_json doc = ordered_json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw IoError("malformed access order JSON");
    AccessOrder order;
    order.sequence = doc.at("sequence").get<std::vector<std::string>>();
    for (const auto& [dir, children] : doc.at("per_level_orders").items()) {
        order.per_level_orders[dir] = children.get<std::vector<std::string>>();
    }
    return order;
}

// ---------------------------------------------------------------------------
// stage runners

namespace {

class JsonlAppender {
public:
    explicit JsonlAppender(const std::string& path)
        : out_(path, std::ios::binary | std::ios::app) {
        if (!out_) throw IoError("cannot open for append: " + path);
    }
    void append(const std::string& line) {
        out_ << line << "\n";
        out_.flush();
    }

private:
    std::ofstream out_;
};

StageContext make_stage_context(const RunConfig& config, ChatBackend& backend,
                                const PromptLibrary& prompts, RunManifest& manifest) {
    StageContext ctx{backend, prompts};
    ctx.temperature = config.temperature;
    ctx.max_tokens_summary = config.max_tokens_summary;
    ctx.max_tokens_extract = config.max_tokens_extract;
    ctx.retries = config.retries;
    ctx.parallelism = config.parallelism;
    ctx.warnings = &manifest.warnings;
    return ctx;
}

void mark_done(RunManifest& manifest, const std::string& stage, const std::string& run_dir,
               const std::vector<std::string>& artifacts) {
    StageStatus status;
    status.status = "Done";
    for (const auto& file : artifacts) {
        status.digests[file] = file_digest(run_dir + "/" + file);
    }
    manifest.stages[stage] = status;
    save_manifest(manifest, run_dir);
}

PromptLibrary make_prompts(const RunConfig& config) {
    PromptLibrary prompts;
    if (!config.templates_dir.empty()) prompts.load_overrides(config.templates_dir);
    return prompts;
}

} // namespace

void run_stage_order(const RunConfig& config, const Backends& backends,
                     RunManifest& manifest) {
    if (manifest.stage_done("order", config.run_dir)) return;

    const CorpusTree tree = load_corpus(config);
    const PromptLibrary prompts = make_prompts(config);
    StageContext ctx = make_stage_context(config, *backends.generator, prompts, manifest);

    const std::string summaries_path = config.run_dir + "/summaries.jsonl";
    std::map<std::string, SummaryRecord> existing_initial;
    std::map<std::string, SummaryRecord> existing_dir;
    std::vector<SummaryRecord> existing_walk;
    for (auto& record : load_summaries(summaries_path)) {
        switch (record.phase) {
            case SummaryPhase::Initial: existing_initial[record.node_path] = record; break;
            case SummaryPhase::Directory: existing_dir[record.node_path] = record; break;
            case SummaryPhase::ContextEnhanced: existing_walk.push_back(record); break;
        }
    }

    JsonlAppender appender(summaries_path);
    const RecordSink sink = [&](const SummaryRecord& record) {
        appender.append(summary_to_json_line(record));
    };

    const auto initial = summarize_leaves(tree, ctx, existing_initial, sink);
    std::map<std::string, SummaryRecord> by_path;
    for (const auto& record : initial) by_path[record.node_path] = record;

    const auto directories = summarize_directories(tree, by_path, ctx, existing_dir, sink);
    for (const auto& record : directories) by_path[record.node_path] = record;

    const std::string order_path = config.run_dir + "/order.json";
    AccessOrder order;
    if (fs::exists(order_path)) {
        order = access_order_from_json(read_file(order_path));
    } else {
        order = compute_access_order(tree, by_path, ctx);
        write_file(order_path, access_order_to_json(order));
    }

    std::map<std::string, SummaryRecord> initial_only;
    for (const auto& record : initial) initial_only[record.node_path] = record;
    VectorStore store(backends.embedder->dimension());
    walk_and_summarize(tree, order, initial_only, ctx, *backends.embedder, store,
                       config.retrieval_k, config.context_char_budget, existing_walk, sink);
    store.save_jsonl(config.run_dir + "/store.jsonl");

    mark_done(manifest, "order", config.run_dir,
              {"summaries.jsonl", "order.json", "store.jsonl"});
}

void run_stage_schema(const RunConfig& config, const Backends& backends,
                      RunManifest& manifest) {
    if (manifest.stage_done("schema", config.run_dir)) return;

    const std::string summaries_path = config.run_dir + "/summaries.jsonl";
    const std::string store_path = config.run_dir + "/store.jsonl";
    if (!fs::exists(summaries_path) || !fs::exists(store_path)) {
        throw PrerequisiteMissingError("stage 'schema' requires stage 'order' artifacts");
    }

    const CorpusTree tree = load_corpus(config);
    const PromptLibrary prompts = make_prompts(config);
    StageContext ctx = make_stage_context(config, *backends.generator, prompts, manifest);

    const auto records = load_summaries(summaries_path);
    const VectorStore store = VectorStore::load_jsonl(store_path);

    ClusteringOptions options;
    options.seed = config.kmeans_seed;
    options.restarts = config.kmeans_restarts;
    options.k_min = config.sweep_k_min;
    options.k_max = config.sweep_k_max;

    const EntitySchema schema = build_schema(tree, records, store, ctx, *backends.embedder,
                                             config.retrieval_k, options);
    write_file(config.run_dir + "/schema.json", schema_to_json(schema));
    mark_done(manifest, "schema", config.run_dir, {"schema.json"});
}

namespace {

struct DocExtractProgress {
    std::string doc;
    ExtractionStats stats;
};

std::string progress_to_line(const DocExtractProgress& p) {
    ordered_json line{{"doc", p.doc},
                      {"parsed", p.stats.parsed_tuples},
                      {"malformed", p.stats.malformed_tuples},
                      {"off_schema", p.stats.off_schema_entities},
                      {"dangling", p.stats.dangling_triples},
                      {"duplicate", p.stats.duplicate_triples}};
    return line.dump();
}

DocExtractProgress progress_from_line(const std::string& line) {
    ordered_json doc = ordered_json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw IoError("malformed progress record");
    DocExtractProgress p;
    p.doc = doc.at("doc").get<std::string>();
    p.stats.parsed_tuples = doc.value("parsed", 0u);
    p.stats.malformed_tuples = doc.value("malformed", 0u);
    p.stats.off_schema_entities = doc.value("off_schema", 0u);
    p.stats.dangling_triples = doc.value("dangling", 0u);
    p.stats.duplicate_triples = doc.value("duplicate", 0u);
    return p;
}

std::vector<std::string> load_lines(const std::string& path) {
    std::vector<std::string> lines;
    if (!fs::exists(path)) return lines;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

} // namespace

void run_stage_extract(const RunConfig& config, const Backends& backends,
                       RunManifest& manifest) {
    if (manifest.stage_done("extract", config.run_dir)) return;

    const std::string schema_path = config.run_dir + "/schema.json";
    if (!fs::exists(schema_path)) {
        throw PrerequisiteMissingError("stage 'extract' requires stage 'schema' artifacts");
    }
    const EntitySchema schema = schema_from_json(read_file(schema_path));
    const CorpusTree tree = load_corpus(config);
    const PromptLibrary prompts = make_prompts(config);
    StageContext ctx = make_stage_context(config, *backends.generator, prompts, manifest);

    const std::string entities_path = config.run_dir + "/entities.jsonl";
    const std::string triples_path = config.run_dir + "/triples.jsonl";
    const std::string progress_path = config.run_dir + "/extract_progress.jsonl";

    // Per-document resume: keep only records of documents whose progress line
    // was written; a crash mid-document must not leave half-committed records.
    std::map<std::string, DocExtractProgress> done;
    for (const auto& line : load_lines(progress_path)) {
        auto p = progress_from_line(line);
        done[p.doc] = p;
    }
    std::map<std::string, std::vector<ExtractedEntity>> resumed_entities;
    std::map<std::string, std::vector<Triple>> resumed_triples;
    {
        std::string entity_lines;
        for (const auto& line : load_lines(entities_path)) {
            auto entity = entity_from_json_line(line);
            if (done.count(entity.source_path)) {
                resumed_entities[entity.source_path].push_back(entity);
                entity_lines += line + "\n";
            }
        }
        std::string triple_lines;
        for (const auto& line : load_lines(triples_path)) {
            auto triple = triple_from_json_line(line);
            if (done.count(triple.source_path)) {
                resumed_triples[triple.source_path].push_back(triple);
                triple_lines += line + "\n";
            }
        }
        if (fs::exists(entities_path)) write_file(entities_path, entity_lines);
        if (fs::exists(triples_path)) write_file(triples_path, triple_lines);
    }

    // context-enhanced summaries anchor schema truncation for oversized schemas
    std::map<std::string, std::string> summary_by_path;
    for (const auto& record : load_summaries(config.run_dir + "/summaries.jsonl")) {
        if (record.phase == SummaryPhase::ContextEnhanced) {
            summary_by_path[record.node_path] = record.text;
        }
    }

    const auto leaves = collect_leaves(tree.root);
    std::vector<std::vector<ExtractedEntity>> per_doc_entities(leaves.size());
    std::vector<std::vector<Triple>> per_doc_triples(leaves.size());
    std::vector<ExtractionStats> per_doc_stats(leaves.size());
    std::vector<std::vector<std::string>> per_doc_warnings(leaves.size());
    std::vector<char> fresh(leaves.size(), 0);

    auto produce = [&](std::size_t i) {
        const DocumentNode& leaf = *leaves[i];
        if (const auto it = done.find(leaf.path); it != done.end()) {
            per_doc_entities[i] = resumed_entities[leaf.path];
            per_doc_triples[i] = resumed_triples[leaf.path];
            per_doc_stats[i] = it->second.stats;
            return;
        }
        fresh[i] = 1;
        StageContext local = ctx;
        local.warnings = &per_doc_warnings[i];
        SchemaBudget budget;
        budget.char_budget = config.schema_char_budget;
        budget.embedder = backends.embedder.get();
        if (const auto it = summary_by_path.find(leaf.path); it != summary_by_path.end()) {
            budget.doc_summary = it->second;
        }
        per_doc_entities[i] = extract_entities(leaf, schema, local, per_doc_stats[i], budget);
        per_doc_triples[i] = extract_relations(leaf, per_doc_entities[i], schema, local,
                                               per_doc_stats[i], budget);
    };

    JsonlAppender entity_appender(entities_path);
    JsonlAppender triple_appender(triples_path);
    JsonlAppender progress_appender(progress_path);
    auto commit = [&](std::size_t i) {
        for (auto& w : per_doc_warnings[i]) ctx.warn(w);
        if (!fresh[i]) return;
        for (const auto& entity : per_doc_entities[i]) {
            entity_appender.append(entity_to_json_line(entity));
        }
        for (const auto& triple : per_doc_triples[i]) {
            triple_appender.append(triple_to_json_line(triple));
        }
        progress_appender.append(
            progress_to_line({leaves[i]->path, per_doc_stats[i]}));
    };
    parallel_for_ordered(leaves.size(), ctx.parallelism, produce, commit);

    ExtractionStats totals;
    for (const auto& s : per_doc_stats) totals += s;
    manifest.stats = totals;

    const KnowledgeGraph graph =
        assemble_graph(per_doc_entities, per_doc_triples, schema, nullptr);

    // closure and schema-validity invariants hold for every run
    for (const auto& triple : graph.triples) {
        if (triple.subject_type.empty() || triple.object_type.empty() ||
            !schema.definition_of(triple.subject_type) ||
            !schema.definition_of(triple.object_type)) {
            throw Error("graph invariant violated: unresolved endpoint in triple (" +
                        triple.subject + ", " + triple.predicate + ", " + triple.object + ")");
        }
    }

    write_file(config.run_dir + "/triples.tsv", graph_to_tsv(graph));
    mark_done(manifest, "extract", config.run_dir,
              {"entities.jsonl", "triples.jsonl", "triples.tsv"});
}

// ---------------------------------------------------------------------------
// commands

namespace {

void run_eval_inner(const RunConfig& config, const Backends& backends, RunManifest& manifest,
                    const std::string& gold_path) {
    const std::string triples_path = config.run_dir + "/triples.jsonl";
    if (!fs::exists(triples_path)) {
        throw MissingArtifactError("eval requires triples.jsonl (run build first)");
    }
    const CorpusTree tree = load_corpus(config);
    const PromptLibrary prompts = make_prompts(config);
    StageContext judge_ctx = make_stage_context(config, *backends.judge, prompts, manifest);

    EntitySchema schema;
    const std::string schema_path = config.run_dir + "/schema.json";
    if (fs::exists(schema_path)) schema = schema_from_json(read_file(schema_path));

    std::map<std::string, std::vector<ExtractedEntity>> entities_by_doc;
    for (const auto& line : load_lines(config.run_dir + "/entities.jsonl")) {
        auto entity = entity_from_json_line(line);
        entities_by_doc[entity.source_path].push_back(entity);
    }
    std::map<std::string, std::vector<Triple>> triples_by_doc;
    for (const auto& line : load_lines(triples_path)) {
        auto triple = triple_from_json_line(line);
        triples_by_doc[triple.source_path].push_back(triple);
    }
    std::vector<std::vector<ExtractedEntity>> per_doc_entities;
    for (auto& [doc, list] : entities_by_doc) per_doc_entities.push_back(list);
    std::vector<std::vector<Triple>> per_doc_triples;
    for (auto& [doc, list] : triples_by_doc) per_doc_triples.push_back(list);

    const KnowledgeGraph graph =
        assemble_graph(per_doc_entities, per_doc_triples, schema, nullptr);

    auto [judged, report] = judge_precision(graph, tree, judge_ctx);
    if (!gold_path.empty()) {
        report.gold_metrics = match_gold(graph.triples, load_gold_jsonl(gold_path), judge_ctx);
    }
    write_report(report, config.run_dir + "/eval_report.json");
    mark_done(manifest, "eval", config.run_dir, {"eval_report.json"});
}

int guarded(const RunConfig& config, const std::string& label,
            const std::function<void(RunManifest&)>& body) {
    try {
        validate_config(config);
        if (config.run_dir.empty()) throw ConfigError("run_dir is required");
        fs::create_directories(config.run_dir);
        RunLock lock(config.run_dir);
        RunManifest manifest = load_manifest(config.run_dir);
        manifest.config = config_snapshot(config);
        body(manifest);
        save_manifest(manifest, config.run_dir);
        return 0;
    } catch (const std::exception& err) {
        std::cerr << label << " failed: " << err.what() << "\n";
        return 1;
    }
}

} // namespace

int cmd_build(const RunConfig& config) {
    return guarded(config, "build", [&](RunManifest& manifest) {
        const Backends backends = make_backends(config);
        const std::vector<std::pair<std::string, void (*)(const RunConfig&, const Backends&,
                                                          RunManifest&)>>
            stages{{"order", run_stage_order},
                   {"schema", run_stage_schema},
                   {"extract", run_stage_extract}};
        for (const auto& [name, runner] : stages) {
            if (manifest.stage_done(name, config.run_dir)) {
                std::cout << "[skip] stage " << name << " (already done)\n";
                continue;
            }
            std::cout << "[run ] stage " << name << "\n";
            try {
                runner(config, backends, manifest);
            } catch (const std::exception& err) {
                manifest.stages[name].status = "Failed";
                save_manifest(manifest, config.run_dir);
                throw Error("stage '" + name + "': " + err.what());
            }
        }
    });
}

int cmd_eval(const RunConfig& config, const std::string& gold_path) {
    return guarded(config, "eval", [&](RunManifest& manifest) {
        const Backends backends = make_backends(config);
        run_eval_inner(config, backends, manifest, gold_path);
    });
}

int cmd_stage(const RunConfig& config, const std::string& stage) {
    return guarded(config, "stage " + stage, [&](RunManifest& manifest) {
        const Backends backends = make_backends(config);
        if (stage == "order") {
            run_stage_order(config, backends, manifest);
        } else if (stage == "schema") {
            if (!manifest.stage_done("order", config.run_dir)) {
                throw PrerequisiteMissingError("stage 'schema' requires stage 'order' to be Done");
            }
            run_stage_schema(config, backends, manifest);
        } else if (stage == "extract") {
            if (!manifest.stage_done("schema", config.run_dir)) {
                throw PrerequisiteMissingError("stage 'extract' requires stage 'schema' to be Done");
            }
            run_stage_extract(config, backends, manifest);
        } else {
            throw ConfigError("unknown stage: " + stage + " (expected order|schema|extract)");
        }
    });
}

} // namespace lkd
