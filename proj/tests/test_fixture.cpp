#include "lkd/fixture.hpp"
#include "lkd/pipeline.hpp"
#include "lkd/util.hpp"

#include <doctest.h>

#include <filesystem>

namespace fs = std::filesystem;
using namespace lkd;

namespace {

fs::path generated_fixture() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "lkd_fixture_check";
        fs::remove_all(d);
        generate_fixture(d.string());
        return d;
    }();
    return dir;
}

} // namespace

TEST_CASE("fixture tree has the documented shape") {
    const auto corpus = generated_fixture() / "corpus";
    CHECK(fs::exists(corpus / "Introduction/overview.md"));
    CHECK(fs::exists(corpus / "Concepts/data-model.md"));
    CHECK(fs::exists(corpus / "Concepts/metric-types.md"));
    CHECK(fs::exists(corpus / "Concepts/jobs-and-instances.md"));
    CHECK(fs::exists(corpus / "Best Practices/naming.md"));
    CHECK(fs::exists(corpus / "Best Practices/instrumentation.md"));

    std::size_t leaves = 0;
    for (const auto& entry : fs::recursive_directory_iterator(corpus)) {
        leaves += entry.is_regular_file() ? 1 : 0;
    }
    CHECK(leaves == 6);
}

TEST_CASE("golden schema carries the four metric types with definitions") {
    const auto schema = schema_from_json(
        read_file((generated_fixture() / "golden/schema.json").string()));
    for (const auto* name : {"Counter", "Gauge", "Histogram", "Summary"}) {
        const auto* canonical = schema.find_canonical(name);
        REQUIRE(canonical);
        CHECK_FALSE(schema.definition_of(*canonical)->empty());
    }
    // the scripted merge folded Alerting into Alert
    REQUIRE(schema.provenance.count("Alert") == 1);
    CHECK(schema.provenance.at("Alert") == std::vector<std::string>{"Alert", "Alerting"});
}

TEST_CASE("golden triples include the configuration example") {
    const auto triples = read_file((generated_fixture() / "golden/triples.jsonl").string());
    CHECK(triples.find("\"subject\":\"Prometheus.yml\"") != std::string::npos);
    CHECK(triples.find("\"predicate\":\"Defines\"") != std::string::npos);
    CHECK(triples.find("\"object\":\"Scrape_configs\"") != std::string::npos);
}

TEST_CASE("generated fixture matches the one committed to the repository") {
    const fs::path repo_fixture = fs::path(LKD_SOURCE_DIR) / "fixtures";
    REQUIRE(fs::exists(repo_fixture / "script.json"));

    std::vector<fs::path> rel_files;
    for (const auto& entry : fs::recursive_directory_iterator(generated_fixture())) {
        if (entry.is_regular_file()) {
            rel_files.push_back(fs::relative(entry.path(), generated_fixture()));
        }
    }
    CHECK(rel_files.size() >= 13);  // 6 docs + script + 6 goldens
    for (const auto& rel : rel_files) {
        REQUIRE_MESSAGE(fs::exists(repo_fixture / rel), rel.string());
        CHECK_MESSAGE(read_file((generated_fixture() / rel).string()) ==
                          read_file((repo_fixture / rel).string()),
                      "fixture file differs: " << rel.string());
    }
}
