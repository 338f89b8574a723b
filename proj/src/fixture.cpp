#include "lkd/fixture.hpp"

#include "lkd/errors.hpp"
#include "lkd/parsing.hpp"
#include "lkd/pipeline.hpp"
#include "lkd/util.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace lkd {

using ordered_json = nlohmann::ordered_json;

namespace {

struct FixtureDoc {
    std::string path;
    std::string text;
    std::string initial_summary;
    std::string context_summary;
    std::string entity_types_reply;
    std::string entities_reply;
    std::string relations_reply;
    std::string judge_reply;
};

const std::vector<FixtureDoc>& fixture_docs() {
    static const std::vector<FixtureDoc> docs = {
        {"Introduction/overview.md",
         "Prometheus is an open-source monitoring system built around a time series "
         "database. It scrapes numeric measurements from instrumented targets, stores them "
         "with timestamps, and evaluates alerting rules against the collected data. This "
         "overview introduces the main moving parts and how the concept guides fit "
         "together.\n",
         "Prometheus is an open-source monitoring system that scrapes metrics from "
         "targets, stores time series, and evaluates alerting rules.",
         "Prometheus is an open-source monitoring system; it scrapes instrumented "
         "targets, stores the results as time series, and drives alerting from the "
         "collected data.",
         "[Prometheus, Monitoring System, Time Series, Alerting]",
         "{Prometheus: [Prometheus], Alert: [alerting rules], Time Series: [time series]}",
         "[(Prometheus, Stores, time series), (Prometheus, Evaluates, alerting rules)]",
         "1. True\n2. True"},

        {"Concepts/data-model.md",
         "Every measurement in Prometheus is stored as a time series: a stream of "
         "timestamped values identified by a metric name and a set of key-value labels. "
         "Labels let one logical metric fan out into many dimensions, and a single sample "
         "is the value of one series at one instant. Choosing label values with unbounded "
         "cardinality is the most common modelling mistake.\n",
         "Prometheus stores measurements as time series identified by a metric name and "
         "labels; each sample is one timestamped value of a series.",
         "Building on the system overview, the data model names every time series with a "
         "metric name plus labels, and a sample is a single timestamped value in one "
         "series.",
         "[Time Series, Label, Sample, Metric Name]",
         "{Time Series: [time series], Metric Name: [metric name], Label: [labels], "
         "Sample: [sample]}",
         "[(time series, Identified by, metric name), (time series, Carries, labels), "
         "(sample, Belongs to, time series)]",
         "1. True\n2. False\n3. True"},

        {"Concepts/metric-types.md",
         "A counter is a cumulative metric whose value only ever rises, such as a count of "
         "served requests; it resets to zero when the process restarts. A gauge represents "
         "a value that can go up or down, like current memory usage. A histogram samples "
         "observations into configurable buckets, while a summary calculates streaming "
         "quantiles on the client side. Client libraries expose all four, though the "
         "server stores them as plain series.\n",
         "Prometheus client libraries offer four core metric types: Counter, Gauge, "
         "Histogram, and Summary. These types are differentiated in client libraries and "
         "the wire protocol, but the Prometheus server currently flattens all data into "
         "untyped time series.",
         "Against the label-based data model, client libraries expose four metric types - "
         "Counter, Gauge, Histogram, and Summary - which the server flattens into untyped "
         "time series.",
         "[Counter, Gauge, Histogram, Summary, Metric Type]",
         "{Counter: [Counter, counter], Gauge: [Gauge], Histogram: [Histogram], Summary: "
         "[Summary], Metric Type: [metric types]}",
         "[(Counter, Is a, metric types), (Gauge, Is a, metric types), (Histogram, Is a, "
         "metric types), (Summary, Is a, metric types)]",
         "1. True\n2. True\n3. True\n4. True"},

        {"Concepts/jobs-and-instances.md",
         "In Prometheus terms, an instance is a single endpoint that can be scraped, "
         "usually one host and port. A job is a collection of instances that share a "
         "purpose, such as all replicas of an API server. Scrape configuration in "
         "prometheus.yml defines which jobs exist; the server automatically attaches job "
         "and instance labels to every scraped series.\n",
         "An instance is one scrape endpoint and a job is a set of instances with the "
         "same purpose; scrape configuration wires them together and adds job and "
         "instance labels.",
         "Scrape configuration groups work into jobs made of instances; the server labels "
         "every collected series with its job and instance, tying the data model to "
         "deployment topology.",
         "[Job, Instance, Target, Prometheus, Configuration, Alerting]",
         "{Configuration: [Prometheus.yml, Scrape_configs], Job: [job], Instance: "
         "[instance], Prometheus: [Prometheus server]}",
         "[(Prometheus.yml, Defines, Scrape_configs), (job, Groups, instance), "
         "(Prometheus server, Scrapes, instance), (Ghost, Haunts, Prometheus.yml)]",
         "1. True\n2. True\n3. False"},

        {"Best Practices/naming.md",
         "Metric names should have a single-word application prefix and a unit suffix, as "
         "in http_request_duration_seconds. Base units are preferred: seconds rather than "
         "milliseconds, bytes rather than kilobytes. Labels should distinguish the "
         "characteristics of the thing being measured, never encode values that belong in "
         "the metric name itself.\n",
         "Metric names need an application prefix and base-unit suffix, and labels should "
         "capture dimensions rather than values that belong in the name.",
         "Given the data model and metric types, names should carry an application prefix "
         "and a base-unit suffix while labels hold genuine dimensions.",
         "[Metric Type, Label, Alert, Naming Convention, Metric Name]",
         "{Metric Name: [http_request_duration_seconds], Label: [labels], Exporter: "
         "[node_exporter]}",
         "[(http_request_duration_seconds, Uses, labels), "
         "(http_request_duration_seconds, Uses, labels)]",
         "1. True"},

        {"Best Practices/instrumentation.md",
         "Instrument services by choosing the metric type that matches each quantity: "
         "counters for totals, gauges for saturation levels, histograms or summaries for "
         "latency distributions. Every sample a service exposes costs storage, so prefer "
         "a small set of well-labelled series. Online-serving jobs should export request "
         "counts along with error counts and latency, one instance at a time.\n",
         "Pick the metric type that fits each quantity (counters, gauges, histograms, "
         "summaries), keep series counts modest, and export request, error, and latency "
         "metrics.",
         "Instrumentation guidance: match counters, gauges, histograms, and summaries to "
         "the quantity measured, watch series cardinality, and export request, error, and "
         "latency data per instance.",
         "[Counter, Gauge, Histogram, Summary, Job, Instance, Sample, Alert, "
         "Configuration]",
         "{Counter: [request count, error count], Gauge: [memory usage], Histogram: "
         "[latency histogram], Job: [online-serving job], Instance: [instance]}",
         "[(online-serving job, Exports, request count), (online-serving job, Exports, "
         "error count), (latency histogram, Measures, request count)]",
         "1. True\n2. True"},
    };
    return docs;
}

struct FixtureDir {
    std::string path;     // "" for the root
    std::string summary;
    std::string order_reply;  // empty when the directory has at most one child
};

const std::vector<FixtureDir>& fixture_dirs() {
    static const std::vector<FixtureDir> dirs = {
        {"",
         "A small Prometheus documentation set covering an introduction, core concepts, "
         "and best practices.",
         // lexical children: Best Practices, Concepts, Introduction
         "[3, 2, 1]"},
        {"Introduction",
         "Introduces the Prometheus monitoring system: scraping targets, storing time "
         "series, and alerting.",
         ""},
        {"Concepts",
         "Core Prometheus concepts: the label-based data model, the four metric types, "
         "and how jobs group scraped instances.",
         // lexical children: data-model.md, jobs-and-instances.md, metric-types.md
         "[1, 3, 2]"},
        {"Best Practices",
         "Guidance for using Prometheus well: naming metrics with units and prefixes, "
         "and instrumenting services with the right metric types.",
         // lexical children: instrumentation.md, naming.md
         "[2, 1]"},
    };
    return dirs;
}

const std::map<std::string, std::string>& definition_table() {
    static const std::map<std::string, std::string> table = {
        {"Prometheus",
         "Prometheus is the monitoring system that scrapes targets and stores their "
         "metrics."},
        {"Time Series",
         "A time series is a stream of timestamped values identified by a metric name "
         "and labels."},
        {"Alert", "An alert is a notification condition evaluated from collected metric data."},
        {"Label", "A label is a key-value pair that distinguishes the dimensions of a metric."},
        {"Sample", "A sample is a single timestamped value belonging to one time series."},
        {"Metric Name", "A metric name identifies what quantity a time series measures."},
        {"Counter",
         "A counter is a cumulative metric whose value only increases until a restart."},
        {"Gauge", "A gauge is a metric that represents a value which can rise and fall."},
        {"Histogram", "A histogram samples observations into configurable buckets."},
        {"Summary",
         "A summary calculates streaming quantiles of observations on the client side."},
        {"Metric Type",
         "A metric type is one of the kinds of metric a client library can expose."},
        {"Job", "A job is a collection of scraped instances that share a purpose."},
        {"Instance", "An instance is a single endpoint that Prometheus scrapes."},
        {"Configuration",
         "Configuration is the YAML that defines what Prometheus scrapes and how."},
    };
    return table;
}

// "Alerting" is scripted to merge into "Alert" during canonicalization.
std::string canonical_of(const std::string& raw) {
    return iequals(raw, "Alerting") ? "Alert" : raw;
}

std::string doc_head(const std::string& text, std::size_t chars = 40) {
    return text.substr(0, std::min(chars, text.size()));
}

// Mirrors the schema stage's per-document mention handling to learn which
// distinct names survive and how they cluster, so the definition rules can be
// keyed on the exact cluster prompts the pipeline will issue.
std::vector<std::vector<std::string>> compute_clusters(const CorpusTree& tree) {
    std::map<std::string, std::string> reply_by_path;
    for (const auto& doc : fixture_docs()) reply_by_path[doc.path] = doc.entity_types_reply;

    std::vector<TypedMention> mentions;
    for (const auto* leaf : collect_leaves(tree.root)) {
        std::vector<std::string> seen;
        for (const auto& raw : parse_string_list(reply_by_path.at(leaf->path))) {
            const std::string name = trim(raw);
            const std::string folded = to_lower(name);
            if (name.empty() ||
                std::find(seen.begin(), seen.end(), folded) != seen.end()) continue;
            seen.push_back(folded);
            mentions.push_back({name, leaf->path});
        }
    }
    HashingEmbedder embedder(64);
    return cluster_types(filter_singletons(mentions), embedder, ClusteringOptions{});
}

ordered_json build_script(const CorpusTree& tree) {
    ordered_json rules = ordered_json::array();
    auto add = [&rules](const std::string& match, const std::string& response) {
        rules.push_back(ordered_json{{"match", match}, {"response", response}});
    };

    for (const auto& doc : fixture_docs()) {
        add("Document (" + doc.path + "):", doc.initial_summary);
        add("Current document (" + doc.path + "):", doc.context_summary);
        add("Text: " + doc_head(doc.text), doc.entity_types_reply);
        add("the document.\nDocument content: " + doc_head(doc.text), doc.entities_reply);
        add("Object Entity)].\nDocument content: " + doc_head(doc.text), doc.relations_reply);
        add("Source document (" + doc.path + "):", doc.judge_reply);
    }
    for (const auto& dir : fixture_dirs()) {
        const std::string shown = display_path(dir.path);
        add("The directory '" + shown + "' contains", dir.summary);
        if (!dir.order_reply.empty()) {
            add("entries of directory '" + shown + "'", dir.order_reply);
        }
    }
    for (const auto& cluster : compute_clusters(tree)) {
        std::string joined;
        for (std::size_t i = 0; i < cluster.size(); ++i) {
            if (i > 0) joined += ", ";
            joined += cluster[i];
        }
        std::string reply = "{";
        std::vector<std::string> emitted;
        for (const auto& raw : cluster) {
            const std::string canonical = canonical_of(raw);
            const bool seen = std::any_of(emitted.begin(), emitted.end(),
                                          [&](const std::string& e) { return e == canonical; });
            if (seen) continue;
            emitted.push_back(canonical);
            if (emitted.size() > 1) reply += ", ";
            reply += "\"" + canonical + "\": " + definition_table().at(canonical);
        }
        reply += "}";
        add("Input entity types: [" + joined + "]", reply);
    }

    return ordered_json{{"rules", rules}, {"default_response", "UNMATCHED FIXTURE PROMPT"}};
}

} // namespace

const std::vector<std::string>& fixture_golden_files() {
    static const std::vector<std::string> files = {
        "summaries.jsonl", "order.json",   "schema.json",
        "entities.jsonl",  "triples.jsonl", "eval_report.json",
    };
    return files;
}

void generate_fixture(const std::string& out_dir) {
    const fs::path out(out_dir);
    fs::create_directories(out / "corpus");
    for (const auto& doc : fixture_docs()) {
        const fs::path file = out / "corpus" / doc.path;
        fs::create_directories(file.parent_path());
        write_file(file.string(), doc.text);
    }

    const CorpusTree tree = ingest_directory((out / "corpus").string(), {"md"});
    write_file((out / "script.json").string(), build_script(tree).dump(2) + "\n");

    // goldens come from an actual build + eval run over the fixture
    const fs::path run_dir = out / ".golden_build";
    fs::remove_all(run_dir);
    RunConfig config;
    config.corpus_path = (out / "corpus").string();
    config.run_dir = run_dir.string();
    config.mock_script = (out / "script.json").string();
    if (cmd_build(config) != 0) throw Error("fixture golden build failed");
    if (cmd_eval(config) != 0) throw Error("fixture golden eval failed");

    fs::create_directories(out / "golden");
    for (const auto& file : fixture_golden_files()) {
        fs::copy_file(run_dir / file, out / "golden" / file,
                      fs::copy_options::overwrite_existing);
    }
    fs::remove_all(run_dir);
}

} // namespace lkd
