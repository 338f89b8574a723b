#pragma once

#include "lkd/corpus.hpp"
#include "lkd/dependency.hpp"
#include "lkd/evaluation.hpp"
#include "lkd/extraction.hpp"
#include "lkd/schema.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lkd {

struct EndpointConfig {
    std::string base_url;
    std::string model;
    std::string api_key_env;
};

struct EmbeddingConfig {
    std::string provider = "deterministic";  // "deterministic" | "remote"
    std::string base_url;
    std::string model;
    std::string api_key_env = "LKD_EMBED_API_KEY";
    std::size_t dimension = 64;
};

struct RunConfig {
    std::string corpus_path;
    std::string run_dir;
    EndpointConfig generator{"", "", "LKD_API_KEY"};
    EndpointConfig judge{"", "", "LKD_JUDGE_API_KEY"};
    EmbeddingConfig embedding;
    double temperature = 0.1;
    std::size_t retrieval_k = 10;
    std::size_t context_char_budget = 24000;
    std::size_t schema_char_budget = 24000;
    std::size_t chunk_chars = 4000;
    std::uint64_t kmeans_seed = 42;
    int kmeans_restarts = 10;
    std::size_t sweep_k_min = 2;
    std::size_t sweep_k_max = 0;  // 0: derived from the number of points
    int parallelism = 4;
    int retries = 2;
    int max_tokens_summary = 1024;
    int max_tokens_extract = 2048;
    std::string include_extensions = "md,txt";
    std::string templates_dir;
    std::string mock_script;  // path to a scripted-backend JSON; empty for live endpoints
};

/// Applies "key = value" lines (TOML-style; [section] headers or dotted keys)
/// on top of the given config. Unknown keys are rejected.
void apply_config_text(RunConfig& config, const std::string& text);
RunConfig load_config_file(const std::string& path);
void validate_config(const RunConfig& config);

/// Flat key/value snapshot of the effective config, as stored in the manifest.
std::map<std::string, std::string> config_snapshot(const RunConfig& config);

struct StageStatus {
    std::string status = "Pending";  // Pending | Done | Failed
    std::map<std::string, std::string> digests;  // artifact file -> digest
};

struct RunManifest {
    std::map<std::string, std::string> config;
    std::map<std::string, StageStatus> stages;
    ExtractionStats stats;
    std::vector<std::string> warnings;

    bool stage_done(const std::string& stage, const std::string& run_dir) const;
};

RunManifest load_manifest(const std::string& run_dir);
void save_manifest(const RunManifest& manifest, const std::string& run_dir);

/// Holds run_dir/.lock for the lifetime of the object; throws LockError when
/// another process holds it.
class RunLock {
public:
    explicit RunLock(const std::string& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::string path_;
};

/// Backends materialized from the config (scripted when mock_script is set).
struct Backends {
    std::shared_ptr<ChatBackend> generator;
    std::shared_ptr<ChatBackend> judge;
    std::shared_ptr<EmbeddingProvider> embedder;
    std::shared_ptr<ScriptedBackend> scripted;  // set only in mock mode
};

Backends make_backends(const RunConfig& config);

CorpusTree load_corpus(const RunConfig& config);

/// Stage runners. Each is a no-op when the manifest already marks the stage
/// Done with matching artifact digests; partially written JSONL artifacts are
/// resumed record-by-record.
void run_stage_order(const RunConfig& config, const Backends& backends,
                     RunManifest& manifest);
void run_stage_schema(const RunConfig& config, const Backends& backends,
                      RunManifest& manifest);
void run_stage_extract(const RunConfig& config, const Backends& backends,
                       RunManifest& manifest);

/// build = stages order, schema, extract in sequence with resume.
int cmd_build(const RunConfig& config);

/// eval = judge precision over triples.jsonl (+ gold matching when given).
int cmd_eval(const RunConfig& config, const std::string& gold_path = "");

/// Runs exactly one named stage; prerequisites must already be Done.
int cmd_stage(const RunConfig& config, const std::string& stage);

// artifact helpers shared with tests
std::string summary_to_json_line(const SummaryRecord& record);
SummaryRecord summary_from_json_line(const std::string& line);
std::vector<SummaryRecord> load_summaries(const std::string& path);
std::string access_order_to_json(const AccessOrder& order);
AccessOrder access_order_from_json(const std::string& json_text);

} // namespace lkd
