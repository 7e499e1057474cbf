// SPDX-License-Identifier: Apache-2.0
#include "memxbar/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "memxbar/circuit.hpp"
#include "memxbar/compile.hpp"
#include "memxbar/error.hpp"
#include "memxbar/report.hpp"
#include "memxbar/rng.hpp"
#include "memxbar/tolerance.hpp"

namespace memxbar::pipeline {

namespace fs = std::filesystem;
using config::read_file;
using config::write_file;
using nlohmann::json;

namespace {

constexpr std::uint64_t kProgramTag = 0x70726f67;  // "prog"
constexpr std::uint64_t kRestartTag = 0x72737472;  // "rstr"

struct Context {
    const config::RunConfig& cfg;
    const RunOptions& opt;
    fs::path dir;

    [[nodiscard]] fs::path at(const char* stage, const char* file) const { return dir / stage / file; }
};

json read_json(const fs::path& path)
{
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j)
{
    write_file(path, j.dump(2) + "\n");
}

std::vector<dataset::SpikePattern> load_patterns(const Context& c, const char* file)
{
    return dataset::from_csv(read_file(c.at("dataset", file)));
}

netmodel::MlpParams load_params(const Context& c)
{
    return config::parse_params(read_file(c.at("train", "params.json")));
}

mapping::CompiledNetwork load_compiled(const Context& c)
{
    return mapping::compiled_from_csv(read_file(c.at("compile", "compilation.csv")), load_params(c),
                                      c.cfg.crossbar.r_f);
}

json counts_json(const dataset::ClassCounts& counts)
{
    json j;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        j[std::string(netmodel::to_string(static_cast<netmodel::Label>(k)))] = counts[k];
    }
    return j;
}

double test_error(const netmodel::MlpParams& p, std::span<const dataset::SpikePattern> test)
{
    return netmodel::p_err(netmodel::predict(p, dataset::inputs_of(test)), dataset::labels_of(test));
}

void stage_dataset(const Context& c)
{
    const auto profile = c.cfg.profile.empty() ? dataset::default_profile()
                                               : config::parse_profile(read_file(c.cfg.profile));
    const auto split = dataset::build_default_split(profile, c.cfg.seed);
    write_file(c.at("dataset", "train.csv"), dataset::to_csv(split.train));
    write_file(c.at("dataset", "test.csv"), dataset::to_csv(split.test));
    write_file(c.at("dataset", "profile.json"), config::profile_json(profile));
    write_json(c.at("dataset", "split.json"), {{"seed", c.cfg.seed},
                                               {"train", counts_json(split.train_counts)},
                                               {"test", counts_json(split.test_counts)},
                                               {"train_total", split.train.size()},
                                               {"test_total", split.test.size()}});
}

netmodel::TrainConfig training_config(const config::RunConfig& cfg, std::uint64_t seed)
{
    auto t = cfg.training.train;
    t.seed = seed;
    if (cfg.range.n_states) {
        t.discrete_states = tolerance::weight_states(*cfg.range.n_states, cfg.range, cfg.crossbar.r_f,
                                                     tolerance::StateRegime::Pairwise);
    }
    if (!cfg.stuck_cells.empty()) {
        t.stuck = mapping::stuck_constraints(cfg.stuck_cells, cfg.crossbar.r_f, cfg.range);
    }
    return t;
}

void stage_train(const Context& c)
{
    const auto train = load_patterns(c, "train.csv");
    const auto test = load_patterns(c, "test.csv");
    const auto data = dataset::to_training_set(train);

    struct Candidate {
        netmodel::TrainResult result;
        std::uint64_t seed = 0;
        double test_p_err = 0.0;
        double robust_p_err = 0.0;
    };
    std::vector<Candidate> candidates;
    for (int r = 0; r < c.cfg.training.restarts; ++r) {
        const std::uint64_t seed = r == 0 ? c.cfg.seed : substream(c.cfg.seed, r, kRestartTag)();
        const auto tc = training_config(c.cfg, seed);
        Candidate cand;
        cand.seed = seed;
        cand.result = netmodel::train_discrete(netmodel::init_params(seed, tc.init_range), data, tc);
        cand.test_p_err = test_error(cand.result.params, test);
        candidates.push_back(std::move(cand));
    }
    std::size_t best = 0;
    if (candidates.size() > 1) {
        for (auto& cand : candidates) {
            const auto net = mapping::compile_network(cand.result.params, c.cfg.crossbar.r_f, c.cfg.range,
                                                      c.cfg.inverse, c.cfg.stuck_cells);
            tolerance::AnalysisOptions ao;
            ao.trials = c.cfg.training.ranking_trials;
            ao.x_p = c.cfg.analysis.x_p;
            ao.seed = c.cfg.seed;
            ao.threads = c.opt.threads;
            ao.weight_bounds = false;
            cand.robust_p_err = tolerance::analyze_tolerances(net, c.cfg.analysis.tolerances, test, ao).summary.max;
        }
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            const auto& a = candidates[i];
            const auto& b = candidates[best];
            if (a.robust_p_err < b.robust_p_err ||
                (a.robust_p_err == b.robust_p_err && a.test_p_err < b.test_p_err)) {
                best = i;
            }
        }
    }
    const auto& chosen = candidates[best];
    std::string curve = "epoch,mse\n";
    char buf[64];
    for (std::size_t e = 0; e < chosen.result.curve.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, chosen.result.curve[e]);
        curve += buf;
    }
    write_file(c.at("train", "learning_curve.csv"), curve);
    write_file(c.at("train", "params.json"), config::params_json(chosen.result.params));
    json restarts = json::array();
    for (const auto& cand : candidates) {
        restarts.push_back({{"seed", cand.seed},
                            {"test_p_err", cand.test_p_err},
                            {"robust_max_p_err", cand.robust_p_err},
                            {"epochs", cand.result.curve.size()}});
    }
    write_json(c.at("train", "train.json"),
               {{"seed", chosen.seed},
                {"epochs", chosen.result.curve.size()},
                {"final_mse", chosen.result.curve.empty() ? 0.0 : chosen.result.curve.back()},
                {"converged", chosen.result.converged},
                {"train_p_err", test_error(chosen.result.params, train)},
                {"test_p_err", chosen.test_p_err},
                {"max_abs_weight", chosen.result.params.max_abs_weight()},
                {"restarts", restarts}});
}

void stage_compile(const Context& c)
{
    const auto params = load_params(c);
    const auto net = mapping::compile_network(params, c.cfg.crossbar.r_f, c.cfg.range, c.cfg.inverse,
                                              c.cfg.stuck_cells);
    write_file(c.at("compile", "compilation.csv"), mapping::compile_report_csv(net));
    double worst = 0.0;
    std::size_t stuck = 0;
    for (const auto& s : net.synapses) {
        worst = std::max(worst, std::abs(s.w_achieved - s.w_target));
        stuck += s.stuck ? 1 : 0;
    }
    const auto test = load_patterns(c, "test.csv");
    write_json(c.at("compile", "compile.json"), {{"synapses", net.synapses.size()},
                                                 {"stuck_synapses", stuck},
                                                 {"max_weight_deviation", worst},
                                                 {"realized_test_p_err", test_error(net.realized(), test)}});
}

void stage_program(const Context& c)
{
    const auto net = load_compiled(c);
    crossbar::CrossbarConfig xc = c.cfg.crossbar;
    crossbar::CircuitNetwork circuit{crossbar::Crossbar(xc, c.cfg.device), crossbar::Crossbar(xc, c.cfg.device),
                                     net.base.b_hidden, net.base.b_out};
    for (const auto& s : c.cfg.stuck_cells) {
        auto& xbar = s.layer == netmodel::Layer::Hidden ? circuit.hidden : circuit.output;
        xbar.cell(s.row, s.col) = device::MemristorCell::stuck_at(s.resistance);
    }
    const auto targets = crossbar::cell_targets(net);
    std::string log = "array,row,col," + device::program_log_csv_header() + "\n";
    std::size_t failed = 0;
    long long pulses = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& t = targets[i];
        auto& xbar = t.array == 0 ? circuit.hidden : circuit.output;
        Rng rng = substream(c.cfg.seed, i, kProgramTag);
        device::ProgramLog entry;
        try {
            entry = crossbar::program_cell(xbar, t.row, t.col, t.resistance, rng);
        } catch (const device::ProgrammingError& e) {
            entry = e.log();
            ++failed;
        }
        pulses += entry.pulses;
        log += (t.array == 0 ? "hidden," : "output,") + std::to_string(t.row) + "," + std::to_string(t.col) + "," +
               device::program_log_csv_row(entry) + "\n";
    }
    write_file(c.at("program", "program_log.csv"), log);
    write_file(c.at("program", "hidden_array.csv"), circuit.hidden.to_csv());
    write_file(c.at("program", "output_array.csv"), circuit.output.to_csv());

    const auto test = load_patterns(c, "test.csv");
    std::vector<netmodel::Label> predicted;
    predicted.reserve(test.size());
    for (const auto& p : test) {
        predicted.push_back(netmodel::classify(crossbar::circuit_forward(circuit, p.values)));
    }
    const double circuit_err = netmodel::p_err(predicted, dataset::labels_of(test));
    write_json(c.at("program", "program.json"), {{"cells", targets.size()},
                                                 {"failed", failed},
                                                 {"total_pulses", pulses},
                                                 {"circuit_test_p_err", circuit_err}});
    if (failed > 0) {
        throw Error(ErrorCode::ProgrammingFailed, std::to_string(failed) + " cells could not be programmed");
    }
}

void stage_analyze(const Context& c)
{
    const auto net = load_compiled(c);
    const auto test = load_patterns(c, "test.csv");
    tolerance::AnalysisOptions ao;
    ao.trials = c.opt.trials.value_or(c.cfg.analysis.trials);
    ao.x_p = c.cfg.analysis.x_p;
    ao.seed = c.cfg.seed;
    ao.threads = c.opt.threads;
    ao.percentiles = c.cfg.analysis.percentiles;
    const auto rep = tolerance::analyze_tolerances(net, c.cfg.analysis.tolerances, test, ao);
    write_file(c.at("analyze", "report.json"), tolerance::report_json(rep));
    write_file(c.at("analyze", "trials.csv"), tolerance::trials_csv(rep));
    write_file(c.at("analyze", "weight_bounds.csv"), tolerance::weight_bounds_csv(rep));
}

void stage_synthesize(const Context& c)
{
    const auto net = load_compiled(c);
    const auto test = load_patterns(c, "test.csv");
    const auto res = tolerance::synthesize_tolerances(net, test, c.cfg.analysis.x_p, c.cfg.synthesis, c.cfg.seed,
                                                      c.opt.threads);
    write_file(c.at("synthesize", "synthesis.json"), tolerance::synthesis_json(res));
}

void stage_sweep(const Context& c)
{
    dataset::DatasetSplit split;
    split.train = load_patterns(c, "train.csv");
    split.test = load_patterns(c, "test.csv");
    auto sc = c.cfg.sweep;
    sc.train = training_config(c.cfg, c.cfg.seed);
    const auto points = tolerance::discrete_state_sweep(load_params(c), split, c.cfg.range, c.cfg.crossbar.r_f, sc);
    write_file(c.at("sweep", "sweep.csv"), tolerance::sweep_csv(points));
    const auto n_star = tolerance::threshold_states(points, c.cfg.analysis.x_p);
    write_json(c.at("sweep", "sweep.json"),
               {{"x_p", c.cfg.analysis.x_p}, {"n_star", n_star ? json(*n_star) : json(nullptr)}});
}

void stage_report(const Context& c)
{
    report::emit_report(c.dir, c.dir / "report", c.cfg.analysis.x_p);
}

std::optional<json> maybe_json(const fs::path& path)
{
    if (!fs::exists(path)) {
        return std::nullopt;
    }
    return read_json(path);
}

json build_summary(const Context& c)
{
    json s;
    s["seed"] = c.cfg.seed;
    s["config_hash"] = config::config_hash(c.cfg);
    s["x_p"] = c.cfg.analysis.x_p;
    if (auto t = maybe_json(c.at("train", "train.json"))) {
        s["nominal_test_p_err"] = (*t)["test_p_err"];
    }
    if (auto p = maybe_json(c.at("program", "program.json"))) {
        s["circuit_test_p_err"] = (*p)["circuit_test_p_err"];
    }
    if (auto a = maybe_json(c.at("analyze", "report.json"))) {
        s["monte_carlo"] = {{"trials", (*a)["trials"]},
                            {"max_p_err", (*a)["summary"]["max"]},
                            {"max_p_err_stimulus", (*a)["summary_stimulus"]["max"]},
                            {"max_p_err_extraneous", (*a)["summary_extraneous"]["max"]},
                            {"pass", (*a)["pass"]}};
    }
    if (auto y = maybe_json(c.at("synthesize", "synthesis.json"))) {
        s["synthesized_tolerances"] = (*y)["tolerances"];
    }
    if (auto w = maybe_json(c.at("sweep", "sweep.json"))) {
        s["sweep_n_star"] = (*w)["n_star"];
    }
    bool pass = true;
    if (s.contains("nominal_test_p_err")) {
        pass = pass && s["nominal_test_p_err"].get<double>() <= c.cfg.analysis.x_p;
    }
    if (s.contains("monte_carlo")) {
        pass = pass && s["monte_carlo"]["pass"].get<bool>();
    }
    s["pass"] = pass;
    return s;
}

void write_manifest(const Context& c, const std::vector<Stage>& ran)
{
    const fs::path path = c.dir / "manifest.json";
    json m = fs::exists(path) ? read_json(path) : json::object();
    m["config_hash"] = config::config_hash(c.cfg);
    m["seed"] = c.cfg.seed;
    if (!m.contains("stages")) {
        m["stages"] = json::object();
    }
    for (Stage s : ran) {
        const std::string name(to_string(s));
        json files = json::array();
        const fs::path sub = c.dir / name;
        if (fs::exists(sub)) {
            std::vector<std::string> names;
            for (const auto& e : fs::directory_iterator(sub)) {
                names.push_back(e.path().filename().string());
            }
            std::sort(names.begin(), names.end());
            files = names;
        }
        m["stages"][name] = {{"config_hash", config::config_hash(c.cfg)}, {"files", files}};
    }
    write_json(path, m);
    write_file(c.dir / "config.json", config::config_json(c.cfg));
}

}  // namespace

std::string_view to_string(Stage s) noexcept
{
    switch (s) {
    case Stage::Dataset: return "dataset";
    case Stage::Train: return "train";
    case Stage::Compile: return "compile";
    case Stage::Program: return "program";
    case Stage::Analyze: return "analyze";
    case Stage::Synthesize: return "synthesize";
    case Stage::Sweep: return "sweep";
    case Stage::Report: return "report";
    case Stage::All: return "all";
    }
    return "?";
}

Stage stage_from_string(std::string_view name)
{
    for (auto s : {Stage::Dataset, Stage::Train, Stage::Compile, Stage::Program, Stage::Analyze, Stage::Synthesize,
                   Stage::Sweep, Stage::Report, Stage::All}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown stage '" + std::string(name) + "'");
}

RunResult run_pipeline(const config::RunConfig& cfg, Stage stage, const RunOptions& options)
{
    cfg.validate();
    Context c{cfg, options, cfg.output_dir};
    fs::create_directories(c.dir);

    RunResult result;
    result.stages = stage == Stage::All
                        ? std::vector<Stage>{Stage::Dataset, Stage::Train, Stage::Compile, Stage::Program,
                                             Stage::Analyze, Stage::Synthesize, Stage::Sweep, Stage::Report}
                        : std::vector<Stage>{stage};
    for (Stage s : result.stages) {
        switch (s) {
        case Stage::Dataset: stage_dataset(c); break;
        case Stage::Train: stage_train(c); break;
        case Stage::Compile: stage_compile(c); break;
        case Stage::Program: stage_program(c); break;
        case Stage::Analyze: stage_analyze(c); break;
        case Stage::Synthesize: stage_synthesize(c); break;
        case Stage::Sweep: stage_sweep(c); break;
        case Stage::Report: stage_report(c); break;
        case Stage::All: break;
        }
        write_manifest(c, {s});
    }
    const json summary = build_summary(c);
    result.summary = summary.dump(2) + "\n";
    write_file(c.dir / "summary.json", result.summary);
    result.accepted = !options.enforce || summary["pass"].get<bool>();
    return result;
}

std::string error_json(std::string_view code, int exit_code, std::string_view message, std::string_view stage)
{
    json j{{"error", code}, {"exit_code", exit_code}, {"message", message}, {"stage", stage}};
    return j.dump(2) + "\n";
}

}  // namespace memxbar::pipeline
