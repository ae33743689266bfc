#include "secda_dse/cli.hpp"

#include <iostream>

#include "CLI11.hpp"
#include "secda_dse/service.hpp"

namespace secda_dse {

namespace {

std::filesystem::path db_path(const std::filesystem::path& workspace) {
    return workspace / "db" / "datapoints.ndjson";
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"secda-dse: FPGA accelerator design space exploration"};
    app.require_subcommand(1);

    std::string workspace = "workspace";

    auto* init = app.add_subcommand("init", "create a workspace directory");
    std::string init_dir;
    init->add_option("dir", init_dir, "workspace directory")->required();

    auto* index = app.add_subcommand("index", "index a retrieval corpus into <workspace>/index.json");
    std::string corpus;
    index->add_option("--corpus", corpus, "corpus directory")->required();
    index->add_option("--workspace", workspace, "workspace directory");

    auto* eval = app.add_subcommand("evaluate", "evaluate a design with the analytical model");
    std::string design_file, device_file, profile_file;
    eval->add_option("--design", design_file, "design.json")->required();
    eval->add_option("--device", device_file, "device profile JSON")->required();
    eval->add_option("--profile", profile_file, "calibration profile JSON")->required();

    auto* explore = app.add_subcommand("explore", "run a design space exploration");
    std::string workload_file, directives_file, strategy = "heuristic", explore_profile, external, explore_corpus;
    std::string endpoint, model;
    std::size_t iterations = 10, candidates = 4, diversity = 1;
    std::uint64_t seed = 0;
    explore->add_option("--workload", workload_file, "workload JSON")->required();
    explore->add_option("--device", device_file, "device profile JSON")->required();
    explore->add_option("--directives", directives_file, "directives JSON")->required();
    explore->add_option("--strategy", strategy, "exhaustive | heuristic | llm")
        ->check(CLI::IsMember({"exhaustive", "heuristic", "llm"}));
    explore->add_option("--iterations", iterations, "maximum iterations")->check(CLI::PositiveNumber);
    explore->add_option("--seed", seed, "random seed");
    explore->add_option("--candidates", candidates, "candidates per iteration")->check(CLI::PositiveNumber);
    explore->add_option("--diversity", diversity, "extra diverse frontier points");
    explore->add_option("--profile", explore_profile, "calibration profile JSON (default: built-in vecmul)");
    explore->add_option("--external-evaluator", external, "command run as <cmd> <run_folder>");
    explore->add_option("--corpus", explore_corpus, "retrieval corpus for the llm strategy");
    explore->add_option("--endpoint", endpoint, "chat endpoint URL for the llm strategy");
    explore->add_option("--model", model, "model name for the llm strategy");
    explore->add_option("--workspace", workspace, "workspace directory");

    auto* exp = app.add_subcommand("export", "export the fine-tuning dataset");
    std::string out_file, verdict, device_name, source;
    std::string feasible;
    exp->add_option("--out", out_file, "output .ndjson file")->required();
    exp->add_option("--workspace", workspace, "workspace directory");
    exp->add_option("--verdict", verdict, "filter by verdict");
    exp->add_option("--feasible", feasible, "filter by feasibility (true|false)")
        ->check(CLI::IsMember({"true", "false"}));
    exp->add_option("--device", device_name, "filter by device name");
    exp->add_option("--source", source, "filter by source");

    auto* srv = app.add_subcommand("serve", "serve the HTTP API");
    int port = 8080;
    srv->add_option("--port", port, "listen port")->check(CLI::Range(0, 65535));
    srv->add_option("--workspace", workspace, "workspace directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (init->parsed()) {
            init_workspace(init_dir);
            out << Json{{"workspace", init_dir}}.dump() << "\n";
        } else if (index->parsed()) {
            std::filesystem::create_directories(workspace);
            const auto built = load_or_build_index(corpus, std::filesystem::path(workspace) / "index.json");
            out << Json{{"documents", built.document_count()}}.dump() << "\n";
        } else if (eval->parsed()) {
            const auto design = load_design(read_json_file(design_file));
            const auto device = load_device(read_json_file(device_file));
            const auto profile = load_profile(read_json_file(profile_file));
            out << to_json(evaluate(design, device, profile)).dump(2) << "\n";
        } else if (explore->parsed()) {
            ExplorationConfig config{load_workload_file(workload_file), load_device(read_json_file(device_file)),
                                     load_directives(read_json_file(directives_file))};
            config.strategy = strategy_from_string(strategy);
            config.max_iterations = iterations;
            config.candidates_per_iteration = candidates;
            config.diversity_k = diversity;
            config.seed = seed;
            config.workspace = workspace;
            config.advisor.seed = seed;
            if (!explore_profile.empty()) config.profile = load_profile(read_json_file(explore_profile));
            if (!external.empty()) config.external_evaluator = external;
            if (!explore_corpus.empty()) config.corpus_dir = explore_corpus;
            if (!endpoint.empty()) config.advisor.endpoint_url = endpoint;
            if (!model.empty()) config.advisor.model_name = model;
            const auto result = run_exploration(config);
            out << result.report.dump(2) << "\n";
        } else if (exp->parsed()) {
            PointFilter filter;
            if (!verdict.empty()) filter.verdict = verdict_from_string(verdict);
            if (!feasible.empty()) filter.feasible = feasible == "true";
            if (!device_name.empty()) filter.device = device_name;
            if (!source.empty()) filter.source = source_from_string(source);
            CostDb db(db_path(workspace), CostDb::Mode::read_only);
            const auto count = export_finetune_dataset(db, filter, out_file);
            out << Json{{"count", count}, {"out", out_file}}.dump() << "\n";
        } else if (srv->parsed()) {
            Service service(workspace);
            const int bound = service.bind("127.0.0.1", port);
            err << "serving " << workspace << " on http://127.0.0.1:" << bound << "/api\n";
            service.listen();
        }
    } catch (const Error& e) {
        err << "error [" << e.code() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace secda_dse
