// SPDX-License-Identifier: Apache-2.0
// Command-line driver for the memxbar pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "memxbar/config.hpp"
#include "memxbar/error.hpp"
#include "memxbar/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitAcceptance = 4;

void report_error(const std::filesystem::path& dir, std::string_view code, int exit_code,
                  const std::string& message, std::string_view stage)
{
    const auto text = memxbar::pipeline::error_json(code, exit_code, message, stage);
    std::cerr << text;
    try {
        memxbar::config::write_file(dir / "error.json", text);
    } catch (const std::exception&) {
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Memristor-crossbar perceptron simulator: dataset synthesis, training, "
                 "compilation, programming and Monte Carlo tolerance analysis."};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string stage_name = "all";
    std::optional<std::size_t> trials;
    unsigned threads = 0;
    std::optional<std::string> out;
    bool enforce = false;
    app.add_option("--config", config_path, "JSON run configuration (defaults apply when omitted)");
    app.add_option("--seed", seed, "Master seed (overrides the config)");
    app.add_option("--stage", stage_name,
                   "dataset | train | compile | program | analyze | synthesize | sweep | report | all")
        ->capture_default_str();
    app.add_option("--trials", trials, "Monte Carlo trials for the analyze stage");
    app.add_option("--threads", threads, "Worker threads for Monte Carlo trials (0 = auto)")->capture_default_str();
    app.add_option("--out", out, "Run directory (overrides the config)");
    app.add_flag("--enforce", enforce, "Exit with status 4 when the run misses the permitted error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    memxbar::config::RunConfig cfg;
    memxbar::pipeline::Stage stage{};
    try {
        cfg = config_path.empty() ? memxbar::config::default_config()
                                  : memxbar::config::load_config(config_path);
        if (seed) {
            cfg.seed = *seed;
        }
        if (out) {
            cfg.output_dir = *out;
        }
        cfg.validate();
        stage = memxbar::pipeline::stage_from_string(stage_name);
    } catch (const memxbar::Error& e) {
        report_error(out ? std::filesystem::path(*out) : std::filesystem::path("."), to_string(e.code()),
                     kExitConfig, e.what(), stage_name);
        return kExitConfig;
    }

    memxbar::pipeline::RunOptions options;
    options.trials = trials;
    options.threads = threads;
    options.enforce = enforce;
    try {
        const auto result = memxbar::pipeline::run_pipeline(cfg, stage, options);
        std::cout << result.summary;
        if (!result.accepted) {
            report_error(cfg.output_dir, "AcceptanceFailure", kExitAcceptance,
                         "test error exceeds the permitted level", stage_name);
            return kExitAcceptance;
        }
    } catch (const memxbar::Error& e) {
        const int code = e.code() == memxbar::ErrorCode::ConfigError ? kExitConfig : kExitStage;
        report_error(cfg.output_dir, to_string(e.code()), code, e.what(), stage_name);
        return code;
    } catch (const std::exception& e) {
        report_error(cfg.output_dir, "InternalError", kExitStage, e.what(), stage_name);
        return kExitStage;
    }
    return kExitOk;
}
