// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "memxbar/config.hpp"
#include "memxbar/error.hpp"
#include "memxbar/pipeline.hpp"
#include "memxbar/report.hpp"
#include "memxbar/rng.hpp"

namespace fs = std::filesystem;
using namespace memxbar;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("memxbar_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvalidArgument;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(MEMXBAR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

config::RunConfig small_config(const fs::path& out)
{
    auto c = config::default_config();
    c.output_dir = out;
    c.training.train.max_epochs = 150;
    c.analysis.trials = 200;
    c.analysis.x_p = 100.0;
    c.synthesis.trials = 50;
    c.synthesis.schedule = {0.1, 0.2};
    c.synthesis.resolution = 0.05;
    c.sweep.counts = {3, 4096};
    c.sweep.refit_epochs = 5;
    c.sweep.scratch_epochs = 5;
    return c;
}

}  // namespace

TEST_CASE("empty config document yields the defaults")
{
    const auto c = config::parse_config("{}");
    CHECK(config::config_json(c) == config::config_json(config::default_config()));
    CHECK(config::config_hash(c) == config::config_hash(config::default_config()));
    CHECK(config::config_hash(c).size() == 16);
    CHECK(c.analysis.x_p == 5.0);
    CHECK(c.analysis.trials == 10000);
}

TEST_CASE("config round trips through its canonical form")
{
    const auto c = config::parse_config(R"({"seed": 9, "analysis": {"x_p": 3.5, "trials": 123},
        "training": {"max_epochs": 77}, "sweep": {"counts": [4, 5]}})");
    CHECK(c.seed == 9);
    CHECK(c.analysis.x_p == 3.5);
    CHECK(c.training.train.max_epochs == 77);
    const auto again = config::parse_config(config::config_json(c));
    CHECK(config::config_json(again) == config::config_json(c));
    CHECK(config::config_hash(again) == config::config_hash(c));
    auto d = c;
    d.seed = 10;
    CHECK(config::config_hash(d) != config::config_hash(c));
}

TEST_CASE("config errors")
{
    CHECK(code_of([] { config::parse_config(R"({"sede": 1})"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config::parse_config(R"({"analysis": {"xp": 1}})"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config::parse_config(R"({"seed": "one"})"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config::parse_config("{not json"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { config::parse_config(R"({"analysis": {"trials": 0}})").validate(); }) ==
          ErrorCode::ConfigError);
    try {
        config::parse_config(R"({"profile": "/nonexistent/profile.json"})").validate();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        CHECK(std::string(e.what()).find("/nonexistent/profile.json") != std::string::npos);
    }
}

TEST_CASE("profile and parameter documents round trip")
{
    const auto p = dataset::default_profile();
    const auto q = config::parse_profile(config::profile_json(p));
    CHECK(q.means == p.means);
    CHECK(q.window == p.window);
    CHECK(q.deviation_bound == p.deviation_bound);

    Rng rng{1};
    netmodel::MlpParams m;
    auto v = m.flatten();
    for (auto& x : v) {
        x = uniform(rng, -3, 3);
    }
    m.assign(v);
    CHECK(config::parse_params(config::params_json(m)).flatten() == v);
    CHECK_THROWS_AS(config::parse_params("{}"), Error);
}

TEST_CASE("stage names")
{
    using pipeline::Stage;
    for (auto s : {Stage::Dataset, Stage::Train, Stage::Compile, Stage::Program, Stage::Analyze,
                   Stage::Synthesize, Stage::Sweep, Stage::Report, Stage::All}) {
        CHECK(pipeline::stage_from_string(pipeline::to_string(s)) == s);
    }
    CHECK(code_of([] { pipeline::stage_from_string("fit"); }) == ErrorCode::ConfigError);
    const auto j = json::parse(pipeline::error_json("ConfigError", 2, "bad", "dataset"));
    CHECK(j["exit_code"] == 2);
    CHECK(j["error"] == "ConfigError");
}

TEST_CASE("dataset stage is reproducible")
{
    const auto a = scratch("ds_a");
    const auto b = scratch("ds_b");
    auto c = config::default_config();
    c.output_dir = a;
    pipeline::run_pipeline(c, pipeline::Stage::Dataset);
    c.output_dir = b;
    pipeline::run_pipeline(c, pipeline::Stage::Dataset);
    for (const char* f : {"train.csv", "test.csv", "profile.json", "split.json"}) {
        CHECK(config::read_file(a / "dataset" / f) == config::read_file(b / "dataset" / f));
    }
    const auto split = json::parse(config::read_file(a / "dataset" / "split.json"));
    CHECK(split["train_total"] == 6000);
    CHECK(split["test_total"] == 2000);
    const auto manifest = json::parse(config::read_file(a / "manifest.json"));
    CHECK(manifest["config_hash"] == config::config_hash(c));
}

TEST_CASE("stages fail cleanly on missing inputs")
{
    auto c = config::default_config();
    c.output_dir = scratch("missing");
    CHECK(code_of([&] { pipeline::run_pipeline(c, pipeline::Stage::Train); }) ==
          ErrorCode::MissingArtifact);
    CHECK(code_of([&] { pipeline::run_pipeline(c, pipeline::Stage::Report); }) ==
          ErrorCode::MissingArtifact);
}

TEST_CASE("report rendering")
{
    CHECK(code_of([] { report::parse_table("trial,p_err,p_err_stimulus,p_err_extraneous\n", "trials"); }) ==
          ErrorCode::MissingArtifact);

    std::string csv = "trial,p_err,p_err_stimulus,p_err_extraneous\n";
    Rng rng{2};
    for (int i = 0; i < 10000; ++i) {
        const double s = uniform(rng, 0, 4);
        const double e = uniform(rng, 0, 3);
        csv += std::to_string(i) + "," + std::to_string((s + e) / 2) + "," + std::to_string(s) + "," +
               std::to_string(e) + "\n";
    }
    const auto t = report::parse_table(csv, "trials");
    CHECK(t.rows.size() == 10000);
    CHECK(t.numbers("p_err").size() == 10000);
    CHECK_THROWS_AS(static_cast<void>(t.column("nope")), Error);
    const auto svg = report::boxplot_svg(t, 5.0);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(report::boxplot_svg(report::parse_table(csv, "trials"), 5.0) == svg);
}

TEST_CASE("reduced end-to-end run")
{
    const auto dir = scratch("e2e");
    const auto c = small_config(dir);
    pipeline::RunOptions opt;
    opt.enforce = true;
    const auto r = pipeline::run_pipeline(c, pipeline::Stage::All, opt);
    CHECK(r.accepted);
    CHECK(r.stages.size() == 8);
    for (const char* f :
         {"dataset/train.csv", "train/learning_curve.csv", "train/params.json", "train/train.json",
          "compile/compilation.csv", "program/program_log.csv", "program/program.json",
          "analyze/report.json", "analyze/trials.csv", "analyze/weight_bounds.csv",
          "synthesize/synthesis.json", "sweep/sweep.csv", "sweep/sweep.json", "report/learning_curve.svg",
          "report/p_err_boxplot.svg", "report/weight_bounds.svg", "report/sweep.svg", "summary.json",
          "manifest.json"}) {
        CHECK_MESSAGE(fs::is_regular_file(dir / f), f);
    }
    const auto summary = json::parse(r.summary);
    CHECK(summary["pass"] == true);
    CHECK(summary["monte_carlo"]["trials"] == 200);
    CHECK(summary["config_hash"] == config::config_hash(c));
    const auto prog = json::parse(config::read_file(dir / "program" / "program.json"));
    CHECK(prog["failed"] == 0);

    const std::string before = config::read_file(dir / "report" / "p_err_boxplot.svg");
    pipeline::run_pipeline(c, pipeline::Stage::Report);
    CHECK(config::read_file(dir / "report" / "p_err_boxplot.svg") == before);

    const std::string trials = config::read_file(dir / "analyze" / "trials.csv");
    pipeline::RunOptions again;
    again.threads = 2;
    pipeline::run_pipeline(c, pipeline::Stage::Analyze, again);
    CHECK(config::read_file(dir / "analyze" / "trials.csv") == trials);
}

TEST_CASE("command line exit codes")
{
    const auto dir = scratch("cli");
    CHECK(run_cli("--stage dataset --out " + (dir / "ok").string()) == 0);
    CHECK(fs::is_regular_file(dir / "ok" / "dataset" / "train.csv"));

    config::write_file(dir / "bad.json", R"({"unknown_key": 1})");
    CHECK(run_cli("--config " + (dir / "bad.json").string() + " --out " + (dir / "bad").string()) == 2);
    const auto err = json::parse(config::read_file(dir / "bad" / "error.json"));
    CHECK(err["exit_code"] == 2);
    CHECK(err["error"] == "ConfigError");

    CHECK(run_cli("--stage nonsense --out " + (dir / "bad2").string()) == 2);
    CHECK(run_cli("--config " + (dir / "absent.json").string() + " --out " + (dir / "absent").string()) == 2);
    CHECK(run_cli("--stage report --out " + (dir / "empty").string()) == 3);

    config::write_file(dir / "strict.json",
                       R"({"analysis": {"x_p": 0.001}, "training": {"max_epochs": 3}})");
    const std::string strict = "--config " + (dir / "strict.json").string() + " --out " +
                               (dir / "strict").string();
    CHECK(run_cli(strict + " --stage dataset") == 0);
    CHECK(run_cli(strict + " --stage train") == 0);
    CHECK(run_cli(strict + " --stage train --enforce") == 4);
    const auto acc = json::parse(config::read_file(dir / "strict" / "error.json"));
    CHECK(acc["error"] == "AcceptanceFailure");
    CHECK(acc["exit_code"] == 4);
}
