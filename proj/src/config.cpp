// SPDX-License-Identifier: Apache-2.0
#include "memxbar/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "memxbar/error.hpp"

namespace memxbar::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg)
{
    throw Error(ErrorCode::ConfigError, msg);
}

/// Reads keys from one JSON object and rejects the ones nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            fail(path_ + ": expected an object");
        }
    }

    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

    ~Section() noexcept(false)
    {
        if (std::uncaught_exceptions() > 0) {
            return;
        }
        for (const auto& [key, value] : j_.items()) {
            if (seen_.count(key) == 0) {
                fail(path_ + "." + key + ": unknown key");
            }
        }
    }

    template <typename T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            fail(path_ + "." + key + ": " + e.what());
        }
    }

    template <typename T>
    void get_optional(const char* key, std::optional<T>& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        if (it->is_null()) {
            out.reset();
            return;
        }
        T v{};
        get(key, v);
        out = v;
    }

    [[nodiscard]] const json* child(const char* key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    [[nodiscard]] std::string path(const char* key) const { return path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_tolerances(const json& j, const std::string& path, tolerance::ToleranceVector& t)
{
    Section s(j, path);
    s.get("r_f", t.r_f);
    s.get("r_m1", t.r_m1);
    s.get("r_m2", t.r_m2);
    s.get("per_cell", t.per_cell);
    s.get("input_dac", t.input_dac);
    s.get("sigmas", t.sigmas);
}

json tolerances_json(const tolerance::ToleranceVector& t)
{
    return {{"r_f", t.r_f},           {"r_m1", t.r_m1},           {"r_m2", t.r_m2},
            {"per_cell", t.per_cell}, {"input_dac", t.input_dac}, {"sigmas", t.sigmas}};
}

netmodel::Layer layer_from(const std::string& name, const std::string& path)
{
    if (name == "hidden") {
        return netmodel::Layer::Hidden;
    }
    if (name == "output") {
        return netmodel::Layer::Output;
    }
    fail(path + ": layer must be 'hidden' or 'output'");
}

const char* layer_name(netmodel::Layer l)
{
    return l == netmodel::Layer::Hidden ? "hidden" : "output";
}

template <typename T>
json optional_json(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

}  // namespace

void RunConfig::validate() const
{
    try {
        device.validate();
        crossbar.validate(device);
        range.validate();
        training.train.validate();
        analysis.tolerances.validate();
        synthesis.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
    if (training.restarts < 1) {
        fail("training.restarts must be at least 1");
    }
    if (analysis.trials < 1) {
        fail("analysis.trials must be at least 1");
    }
    if (!(analysis.x_p >= 0.0 && analysis.x_p <= 100.0)) {
        fail("analysis.x_p must lie in [0, 100]");
    }
    const auto& p = analysis.percentiles;
    if (!(p.low >= 0.0 && p.low < p.high && p.high <= 100.0)) {
        fail("analysis.percentiles must be ascending within [0, 100]");
    }
    for (int n : sweep.counts) {
        if (n < 2) {
            fail("sweep.counts entries must be at least 2");
        }
    }
    if (sweep.counts.empty()) {
        fail("sweep.counts must not be empty");
    }
    if (!profile.empty() && !std::filesystem::is_regular_file(profile)) {
        fail("profile file not found: " + profile.string());
    }
    if (range.n_states && *range.n_states < 2) {
        fail("range.n_states must be at least 2");
    }
}

RunConfig default_config()
{
    RunConfig c;
    c.training.train.max_epochs = 2000;
    c.training.train.weight_limit = mapping::w_max(c.crossbar.r_f, c.range);
    netmodel::WeightNoise noise;
    noise.sigma = 0.1;
    noise.offset = c.crossbar.r_f / c.range.r_max;
    noise.draws = 1;
    noise.redraw_every = 25;
    c.training.train.noise = noise;
    c.analysis.tolerances.r_f = 0.01;
    c.analysis.tolerances.r_m1 = 0.2;
    c.analysis.tolerances.r_m2 = 0.2;
    c.synthesis.base.r_f = 0.01;
    c.synthesis.direction.r_m1 = 1.0;
    c.synthesis.direction.r_m2 = 1.0;
    c.synthesis.schedule = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    c.synthesis.trials = 1000;
    c.synthesis.resolution = 0.01;
    return c;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c = default_config();
    std::optional<double> weight_limit;
    bool weight_limit_given = false;
    std::optional<double> noise_offset;
    bool noise_offset_given = false;
    {
        Section s(root, "config");
        s.get("seed", c.seed);
        std::string out = c.output_dir.string();
        s.get("output_dir", out);
        c.output_dir = out;
        std::string profile;
        s.get("profile", profile);
        if (!profile.empty()) {
            c.profile = std::filesystem::path(profile).is_absolute() ? std::filesystem::path(profile)
                                                                     : base_dir / profile;
        }
        if (const auto* j = s.child("device")) {
            Section d(*j, "device");
            auto& p = c.device;
            d.get("r_lrs", p.r_lrs_nominal);
            d.get("r_hrs", p.r_hrs_nominal);
            d.get("v_threshold", p.v_threshold);
            d.get("v_set", p.v_set);
            d.get("i_limit_set", p.i_limit_set);
            d.get("ramp_range", p.ramp_range);
            d.get("ramp_step", p.ramp_step);
            d.get("pulse_width", p.pulse_width);
            d.get("v_read", p.v_read);
            d.get("program_tolerance", p.program_tolerance);
            d.get("response_noise_sigma", p.response_noise_sigma);
            d.get("max_program_iterations", p.max_program_iterations);
            d.get("ramp_gamma", p.ramp_gamma);
        }
        if (const auto* j = s.child("crossbar")) {
            Section x(*j, "crossbar");
            auto& p = c.crossbar;
            x.get("rows", p.rows);
            x.get("cols", p.cols);
            x.get("r_f", p.r_f);
            x.get("r_1", p.r_1);
            x.get("r_2", p.r_2);
            x.get("r_3", p.r_3);
            x.get("r_4", p.r_4);
            x.get("u_sat", p.u_sat);
            x.get("u_rail", p.u_rail);
            x.get("u_in_max", p.u_in_max);
            x.get("resistor_tolerance", p.resistor_tolerance);
            x.get("adc_bits", p.adc.bits);
            x.get("adc_full_scale", p.adc.full_scale);
        }
        if (const auto* j = s.child("range")) {
            Section r(*j, "range");
            r.get("r_min", c.range.r_min);
            r.get("r_max", c.range.r_max);
            r.get_optional("n_states", c.range.n_states);
        }
        s.get_optional("inverse_reference", c.inverse.reference);
        if (const auto* j = s.child("stuck_cells")) {
            if (!j->is_array()) {
                fail("stuck_cells: expected an array");
            }
            for (std::size_t i = 0; i < j->size(); ++i) {
                const std::string path = "stuck_cells[" + std::to_string(i) + "]";
                Section e((*j)[i], path);
                std::string layer = "hidden";
                mapping::StuckCell cell;
                e.get("layer", layer);
                e.get("row", cell.row);
                e.get("col", cell.col);
                e.get("resistance", cell.resistance);
                cell.layer = layer_from(layer, path);
                c.stuck_cells.push_back(cell);
            }
        }
        if (const auto* j = s.child("training")) {
            Section t(*j, "training");
            auto& p = c.training.train;
            t.get("mse_target", p.mse_target);
            t.get("max_epochs", p.max_epochs);
            t.get("initial_step", p.initial_step);
            t.get("armijo_c", p.armijo_c);
            t.get("backtrack", p.backtrack);
            t.get("max_backtracks", p.max_backtracks);
            t.get("max_move", p.max_move);
            t.get("init_range", p.init_range);
            weight_limit_given = j->contains("weight_limit");
            t.get_optional("weight_limit", weight_limit);
            t.get("restarts", c.training.restarts);
            t.get("ranking_trials", c.training.ranking_trials);
            if (j->contains("noise") && (*j)["noise"].is_null()) {
                p.noise.reset();
            }
            if (const auto* nj = t.child("noise")) {
                Section n(*nj, "training.noise");
                auto& noise = *p.noise;
                n.get("sigma", noise.sigma);
                noise_offset_given = nj->contains("offset");
                n.get_optional("offset", noise_offset);
                n.get("draws", noise.draws);
                n.get("redraw_every", noise.redraw_every);
            }
        }
        if (const auto* j = s.child("analysis")) {
            Section a(*j, "analysis");
            if (const auto* tj = a.child("tolerances")) {
                read_tolerances(*tj, "analysis.tolerances", c.analysis.tolerances);
            }
            a.get("trials", c.analysis.trials);
            a.get("x_p", c.analysis.x_p);
            std::array<double, 2> pct{c.analysis.percentiles.low, c.analysis.percentiles.high};
            a.get("percentiles", pct);
            c.analysis.percentiles = {pct[0], pct[1]};
        }
        if (const auto* j = s.child("synthesis")) {
            Section y(*j, "synthesis");
            if (const auto* b = y.child("base")) {
                c.synthesis.base = {};
                read_tolerances(*b, "synthesis.base", c.synthesis.base);
            }
            if (const auto* d = y.child("direction")) {
                c.synthesis.direction = {};
                read_tolerances(*d, "synthesis.direction", c.synthesis.direction);
            }
            y.get("schedule", c.synthesis.schedule);
            y.get("resolution", c.synthesis.resolution);
            y.get("trials", c.synthesis.trials);
        }
        if (const auto* j = s.child("sweep")) {
            Section w(*j, "sweep");
            w.get("counts", c.sweep.counts);
            std::string regime = "pairwise";
            w.get("regime", regime);
            if (regime == "pairwise") {
                c.sweep.regime = tolerance::StateRegime::Pairwise;
            } else if (regime == "pinned") {
                c.sweep.regime = tolerance::StateRegime::Pinned;
            } else {
                fail("sweep.regime must be 'pairwise' or 'pinned'");
            }
            w.get("refit_epochs", c.sweep.refit_epochs);
            w.get("scratch_epochs", c.sweep.scratch_epochs);
        }
    }
    // Derived defaults follow the electrical parameters actually configured.
    c.training.train.weight_limit = weight_limit_given ? weight_limit : mapping::w_max(c.crossbar.r_f, c.range);
    if (c.training.train.noise) {
        c.training.train.noise->offset = noise_offset_given && noise_offset
                                             ? *noise_offset
                                             : c.crossbar.r_f / c.range.r_max;
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        fail(e.what());
    }
    return parse_config(text, path.parent_path());
}

std::string config_json(const RunConfig& c)
{
    json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir.string();
    j["profile"] = c.profile.string();
    const auto& d = c.device;
    j["device"] = {{"r_lrs", d.r_lrs_nominal},
                   {"r_hrs", d.r_hrs_nominal},
                   {"v_threshold", d.v_threshold},
                   {"v_set", d.v_set},
                   {"i_limit_set", d.i_limit_set},
                   {"ramp_range", d.ramp_range},
                   {"ramp_step", d.ramp_step},
                   {"pulse_width", d.pulse_width},
                   {"v_read", d.v_read},
                   {"program_tolerance", d.program_tolerance},
                   {"response_noise_sigma", d.response_noise_sigma},
                   {"max_program_iterations", d.max_program_iterations},
                   {"ramp_gamma", d.ramp_gamma}};
    const auto& x = c.crossbar;
    j["crossbar"] = {{"rows", x.rows},
                     {"cols", x.cols},
                     {"r_f", x.r_f},
                     {"r_1", x.r_1},
                     {"r_2", x.r_2},
                     {"r_3", x.r_3},
                     {"r_4", x.r_4},
                     {"u_sat", x.u_sat},
                     {"u_rail", x.u_rail},
                     {"u_in_max", x.u_in_max},
                     {"resistor_tolerance", x.resistor_tolerance},
                     {"adc_bits", x.adc.bits},
                     {"adc_full_scale", x.adc.full_scale}};
    j["range"] = {{"r_min", c.range.r_min}, {"r_max", c.range.r_max}, {"n_states", optional_json(c.range.n_states)}};
    j["inverse_reference"] = optional_json(c.inverse.reference);
    json stuck = json::array();
    for (const auto& s : c.stuck_cells) {
        stuck.push_back({{"layer", layer_name(s.layer)}, {"row", s.row}, {"col", s.col}, {"resistance", s.resistance}});
    }
    j["stuck_cells"] = stuck;
    const auto& t = c.training.train;
    j["training"] = {{"mse_target", t.mse_target},
                     {"max_epochs", t.max_epochs},
                     {"initial_step", t.initial_step},
                     {"armijo_c", t.armijo_c},
                     {"backtrack", t.backtrack},
                     {"max_backtracks", t.max_backtracks},
                     {"max_move", t.max_move},
                     {"init_range", t.init_range},
                     {"weight_limit", optional_json(t.weight_limit)},
                     {"restarts", c.training.restarts},
                     {"ranking_trials", c.training.ranking_trials}};
    if (t.noise) {
        j["training"]["noise"] = {{"sigma", t.noise->sigma},
                                  {"offset", t.noise->offset},
                                  {"draws", t.noise->draws},
                                  {"redraw_every", t.noise->redraw_every}};
    } else {
        j["training"]["noise"] = nullptr;
    }
    j["analysis"] = {{"tolerances", tolerances_json(c.analysis.tolerances)},
                     {"trials", c.analysis.trials},
                     {"x_p", c.analysis.x_p},
                     {"percentiles", {c.analysis.percentiles.low, c.analysis.percentiles.high}}};
    j["synthesis"] = {{"base", tolerances_json(c.synthesis.base)},
                      {"direction", tolerances_json(c.synthesis.direction)},
                      {"schedule", c.synthesis.schedule},
                      {"resolution", c.synthesis.resolution},
                      {"trials", c.synthesis.trials}};
    j["sweep"] = {{"counts", c.sweep.counts},
                  {"regime", c.sweep.regime == tolerance::StateRegime::Pairwise ? "pairwise" : "pinned"},
                  {"refit_epochs", c.sweep.refit_epochs},
                  {"scratch_epochs", c.sweep.scratch_epochs}};
    return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg)
{
    RunConfig keyed = cfg;
    keyed.output_dir.clear();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config_json(keyed)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

dataset::StimulusProfile parse_profile(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("profile is not valid JSON: ") + e.what());
    }
    dataset::StimulusProfile p;
    {
        Section s(root, "profile");
        s.get("deviation_bound", p.deviation_bound);
        s.get("window", p.window);
        std::vector<std::vector<std::vector<double>>> means;
        s.get("means", means);
        if (means.size() != dataset::kSites) {
            fail("profile.means: expected one entry per stimulus site");
        }
        for (std::size_t site = 0; site < dataset::kSites; ++site) {
            if (means[site].size() != dataset::kChannels) {
                fail("profile.means: expected one entry per channel");
            }
            for (std::size_t ch = 0; ch < dataset::kChannels; ++ch) {
                if (means[site][ch].size() != dataset::kSpikes) {
                    fail("profile.means: expected one mean per spike");
                }
                for (std::size_t k = 0; k < dataset::kSpikes; ++k) {
                    p.means[site][ch][k] = means[site][ch][k];
                }
            }
        }
        std::string version;
        s.get("version", version);
    }
    try {
        p.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
    return p;
}

std::string profile_json(const dataset::StimulusProfile& p)
{
    json j;
    j["version"] = "1";
    j["deviation_bound"] = p.deviation_bound;
    j["window"] = p.window;
    j["means"] = p.means;
    return j.dump(2) + "\n";
}

std::string params_json(const netmodel::MlpParams& p)
{
    auto act = [](const netmodel::Activation& a) {
        return json{{"slope", a.slope}, {"lower", a.lower}, {"upper", a.upper}};
    };
    json j;
    j["w_hidden"] = p.w_hidden;
    j["b_hidden"] = p.b_hidden;
    j["w_out"] = p.w_out;
    j["b_out"] = p.b_out;
    j["hidden_activation"] = act(p.hidden_activation);
    j["output_activation"] = act(p.output_activation);
    return j.dump(2) + "\n";
}

netmodel::MlpParams parse_params(const std::string& text)
{
    netmodel::MlpParams p;
    try {
        const json j = json::parse(text);
        p.w_hidden = j.at("w_hidden").get<decltype(p.w_hidden)>();
        p.b_hidden = j.at("b_hidden").get<netmodel::Hidden>();
        p.w_out = j.at("w_out").get<decltype(p.w_out)>();
        p.b_out = j.at("b_out").get<netmodel::Output>();
        auto act = [](const json& a, netmodel::Activation& out) {
            out.slope = a.at("slope").get<double>();
            out.lower = a.at("lower").get<double>();
            out.upper = a.at("upper").get<double>();
        };
        act(j.at("hidden_activation"), p.hidden_activation);
        act(j.at("output_activation"), p.output_activation);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, std::string("malformed parameter file: ") + e.what());
    }
    return p;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::MissingArtifact, "cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
}

}  // namespace memxbar::config
