#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chiralflow/cli/config.hpp"
#include "chiralflow/cli/runner.hpp"

int main(int argc, char** argv) {
    namespace cli = chiralflow::cli;
    CLI::App app{"Disorder-averaged chiral transport: ensembles, closed forms and device checks"};
    app.set_version_flag("--version", cli::version());

    std::string experiment;
    std::string config_file;
    std::string inline_config;
    std::uint64_t seed = 0;
    std::string out_dir;
    unsigned threads = 0;
    std::string format;

    app.add_option("experiment", experiment, "Experiment to run")
        ->required()
        ->check(CLI::IsMember(cli::experiments()));
    auto* config_opt = app.add_option("--config", config_file, "JSON configuration file")->check(CLI::ExistingFile);
    auto* json_opt = app.add_option("--json", inline_config, "Inline JSON configuration document");
    config_opt->excludes(json_opt);
    auto* seed_opt = app.add_option("--seed", seed, "Master seed");
    auto* out_opt = app.add_option("--out", out_dir, "Output directory");
    auto* threads_opt = app.add_option("--threads", threads, "Worker threads (0: all cores)")
                            ->envname("CHIRALFLOW_THREADS");
    auto* format_opt = app.add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));

    CLI11_PARSE(app, argc, argv);

    cli::Overrides over;
    over.experiment = experiment;
    if (*seed_opt) over.seed = seed;
    if (*out_opt) over.output_dir = out_dir;
    if (*threads_opt) over.threads = threads;
    if (*format_opt) over.format = format;

    try {
        const cli::RunConfig cfg =
            *config_opt ? cli::parse_config_file(config_file, over) : cli::parse_config(inline_config, over);
        return cli::run_experiment(cfg, std::cerr);
    } catch (const chiralflow::ValidationError& e) {
        std::cerr << "chiralflow: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "chiralflow: " << e.what() << '\n';
        return 3;
    }
}
