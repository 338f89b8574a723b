#include "lkd/fixture.hpp"
#include "lkd/pipeline.hpp"
#include "lkd/prompts.hpp"

#include <iostream>
#include <string>

#include <CLI11.hpp>

namespace {

struct CommonArgs {
    std::string config_path;
    std::string corpus;
    std::string run_dir;
    std::string mock;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (key = value lines)");
    cmd->add_option("--corpus", args.corpus, "corpus directory (or flat text file)");
    cmd->add_option("--run-dir", args.run_dir, "run directory for artifacts");
    cmd->add_option("--mock", args.mock, "scripted-backend JSON (offline deterministic run)");
    cmd->add_option("--seed", args.seed, "k-means seed override");
}

lkd::RunConfig resolve_config(const CommonArgs& args) {
    lkd::RunConfig config;
    if (!args.config_path.empty()) config = lkd::load_config_file(args.config_path);
    if (!args.corpus.empty()) config.corpus_path = args.corpus;
    if (!args.run_dir.empty()) config.run_dir = args.run_dir;
    if (!args.mock.empty()) config.mock_script = args.mock;
    if (args.seed >= 0) config.kmeans_seed = static_cast<std::uint64_t>(args.seed);
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph construction pipeline"};
    app.require_subcommand(1);

    CommonArgs build_args;
    auto* build = app.add_subcommand("build", "run stages order -> schema -> extract");
    add_common(build, build_args);

    CommonArgs eval_args;
    std::string gold_path;
    auto* eval = app.add_subcommand("eval", "judge extracted triples (and optional gold set)");
    add_common(eval, eval_args);
    eval->add_option("--gold", gold_path, "gold triples JSONL: {subject,predicate,object,doc}");

    CommonArgs stage_args;
    std::string stage_name;
    auto* stage = app.add_subcommand("stage", "run exactly one stage");
    add_common(stage, stage_args);
    stage->add_option("name", stage_name, "order | schema | extract")->required();

    std::string fixture_out;
    auto* fixture = app.add_subcommand("fixture", "materialize the demo corpus, script, and goldens");
    fixture->add_option("--out", fixture_out, "output directory")->required();

    std::string templates_out;
    auto* templates = app.add_subcommand("templates", "write the default prompt templates");
    templates->add_option("--out", templates_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) return lkd::cmd_build(resolve_config(build_args));
        if (eval->parsed()) return lkd::cmd_eval(resolve_config(eval_args), gold_path);
        if (stage->parsed()) return lkd::cmd_stage(resolve_config(stage_args), stage_name);
        if (fixture->parsed()) {
            lkd::generate_fixture(fixture_out);
            std::cout << "fixture written to " << fixture_out << "\n";
            return 0;
        }
        if (templates->parsed()) {
            lkd::PromptLibrary::write_defaults(templates_out);
            std::cout << "templates written to " << templates_out << "\n";
            return 0;
        }
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
