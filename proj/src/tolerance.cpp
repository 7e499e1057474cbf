// SPDX-License-Identifier: Apache-2.0
#include "memxbar/tolerance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "memxbar/error.hpp"
#include "memxbar/parallel.hpp"

namespace memxbar::tolerance {

using netmodel::Label;
using netmodel::Layer;
using nlohmann::json;

std::string_view to_string(Component c) noexcept
{
    switch (c) {
    case Component::RF: return "r_f";
    case Component::RM1: return "r_m1";
    case Component::RM2: return "r_m2";
    case Component::PerCell: return "per_cell";
    case Component::InputDac: return "input_dac";
    }
    return "?";
}

Component component_from_string(std::string_view name)
{
    for (auto c : {Component::RF, Component::RM1, Component::RM2, Component::PerCell, Component::InputDac}) {
        if (to_string(c) == name) {
            return c;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown tolerance component '" + std::string(name) + "'");
}

void ToleranceSpec::validate() const
{
    if (!(limit >= 0.0 && limit < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "tolerance limit must lie in [0, 1)");
    }
    if (!(sigmas > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "tolerance sigmas must be positive");
    }
}

double sample_perturbed(double nominal, const ToleranceSpec& spec, Rng& rng)
{
    return nominal * (1.0 + truncated_normal(rng, spec.limit, spec.sigmas));
}

void ToleranceVector::validate() const
{
    for (const auto& s : specs()) {
        s.validate();
    }
}

ToleranceSpec ToleranceVector::spec(Component c) const
{
    switch (c) {
    case Component::RF: return {c, r_f, sigmas};
    case Component::RM1: return {c, r_m1, sigmas};
    case Component::RM2: return {c, r_m2, sigmas};
    case Component::PerCell: return {c, per_cell, sigmas};
    case Component::InputDac: return {c, input_dac, sigmas};
    }
    return {};
}

std::vector<ToleranceSpec> ToleranceVector::specs() const
{
    return {spec(Component::RF), spec(Component::RM1), spec(Component::RM2), spec(Component::PerCell),
            spec(Component::InputDac)};
}

double ToleranceVector::max_limit() const noexcept
{
    return std::max({r_f, r_m1, r_m2, per_cell, input_dac});
}

ToleranceVector ToleranceVector::along(const ToleranceVector& d, double scale) const
{
    ToleranceVector t = *this;
    t.r_f += scale * d.r_f;
    t.r_m1 += scale * d.r_m1;
    t.r_m2 += scale * d.r_m2;
    t.per_cell += scale * d.per_cell;
    t.input_dac += scale * d.input_dac;
    return t;
}

ToleranceVector ToleranceVector::from_specs(std::span<const ToleranceSpec> specs)
{
    ToleranceVector t;
    for (const auto& s : specs) {
        s.validate();
        switch (s.component) {
        case Component::RF: t.r_f = s.limit; break;
        case Component::RM1: t.r_m1 = s.limit; break;
        case Component::RM2: t.r_m2 = s.limit; break;
        case Component::PerCell: t.per_cell = s.limit; break;
        case Component::InputDac: t.input_dac = s.limit; break;
        }
        t.sigmas = s.sigmas;
    }
    return t;
}

double percentile(std::vector<double> values, double pct)
{
    if (values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "percentile of an empty sample");
    }
    if (!(pct >= 0.0 && pct <= 100.0)) {
        throw Error(ErrorCode::InvalidArgument, "percentile must lie in [0, 100]");
    }
    std::sort(values.begin(), values.end());
    const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

Summary summarize(std::span<const double> values, const Percentiles& pct)
{
    Summary s;
    if (values.empty()) {
        return s;
    }
    std::vector<double> v(values.begin(), values.end());
    s.low = percentile(v, pct.low);
    s.median = percentile(v, 50.0);
    s.high = percentile(v, pct.high);
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return s;
}

namespace {

WeightBounds bounds_from_samples(double nominal, std::vector<double> w, const Percentiles& pct)
{
    WeightBounds b;
    b.nominal_w = nominal;
    b.relative = nominal != 0.0;
    for (auto& x : w) {
        x = b.relative ? 100.0 * (x - nominal) / std::abs(nominal) : x - nominal;
    }
    b.low = percentile(w, pct.low);
    b.high = percentile(std::move(w), pct.high);
    return b;
}

double perturb(double nominal, double limit, double sigmas, Rng& rng)
{
    return nominal * (1.0 + truncated_normal(rng, limit, sigmas));
}

}  // namespace

WeightBounds weight_error_bounds(const mapping::SynapseNominals& syn, const ToleranceVector& tol,
                                 std::size_t trials, Rng& rng, const Percentiles& pct)
{
    tol.validate();
    if (trials < 1000) {
        throw Error(ErrorCode::InvalidArgument, "weight_error_bounds needs at least 1000 trials");
    }
    const double nominal = mapping::weight_from_resistances(syn);
    std::vector<double> w(trials);
    for (auto& x : w) {
        const double rf1 = perturb(syn.r_f, tol.r_f, tol.sigmas, rng);
        const double rf2 = perturb(syn.r_f, tol.r_f, tol.sigmas, rng);
        double m1 = perturb(syn.r_m1, tol.r_m1, tol.sigmas, rng);
        double m2 = perturb(syn.r_m2, tol.r_m2, tol.sigmas, rng);
        m1 = perturb(m1, tol.per_cell, tol.sigmas, rng);
        m2 = perturb(m2, tol.per_cell, tol.sigmas, rng);
        x = mapping::weight_from_resistances(rf1, m1, rf2, m2);
    }
    return bounds_from_samples(nominal, std::move(w), pct);
}

std::vector<double> perturbed_weights(const mapping::CompiledNetwork& net, const ToleranceVector& tol,
                                      Rng& rng, netmodel::Input* dac_gain)
{
    const double sg = tol.sigmas;
    std::array<double, 2 * netmodel::kHidden> rf_hidden{};
    std::array<double, 2 * netmodel::kOutputs> rf_out{};
    for (auto& r : rf_hidden) {
        r = perturb(net.r_f, tol.r_f, sg, rng);
    }
    for (auto& r : rf_out) {
        r = perturb(net.r_f, tol.r_f, sg, rng);
    }
    std::vector<double> w(net.synapses.size());
    for (std::size_t k = 0; k < net.synapses.size(); ++k) {
        const auto& s = net.synapses[k];
        const auto& rf = s.layer == Layer::Hidden ? std::span<const double>(rf_hidden)
                                                  : std::span<const double>(rf_out);
        double m1 = perturb(s.nominals.r_m1, tol.r_m1, sg, rng);
        double m2 = perturb(s.nominals.r_m2, tol.r_m2, sg, rng);
        m1 = perturb(m1, tol.per_cell, sg, rng);
        m2 = perturb(m2, tol.per_cell, sg, rng);
        // Rows scale with their own feedback resistor relative to the nominal.
        const double g1 = rf[2 * s.neuron] / net.r_f;
        const double g2 = rf[2 * s.neuron + 1] / net.r_f;
        w[k] = mapping::weight_from_resistances(s.nominals.r_f * g1, m1, s.nominals.r_f * g2, m2);
    }
    if (dac_gain != nullptr) {
        for (auto& g : *dac_gain) {
            g = 1.0 + truncated_normal(rng, tol.input_dac, sg);
        }
    }
    return w;
}

namespace {

struct TestSet {
    std::vector<netmodel::Input> x;
    std::vector<Label> y;
    std::size_t stimulus = 0;
    std::size_t extraneous = 0;
};

TestSet prepare(std::span<const dataset::SpikePattern> test)
{
    TestSet t;
    t.x = dataset::inputs_of(test);
    t.y = dataset::labels_of(test);
    for (auto l : t.y) {
        (l == Label::Sr ? t.extraneous : t.stimulus) += 1;
    }
    return t;
}

struct TrialErrors {
    double all = 0.0;
    double stimulus = 0.0;
    double extraneous = 0.0;
};

netmodel::MlpParams with_weights(const mapping::CompiledNetwork& net, std::span<const double> w)
{
    netmodel::MlpParams p = net.base;
    for (std::size_t k = 0; k < net.synapses.size(); ++k) {
        const auto& s = net.synapses[k];
        (s.layer == Layer::Hidden ? p.w_hidden[s.input][s.neuron] : p.w_out[s.input][s.neuron]) = w[k];
    }
    return p;
}

TrialErrors evaluate(const netmodel::MlpParams& p, const TestSet& t, const netmodel::Input& gain)
{
    std::size_t wrong = 0;
    std::size_t wrong_stim = 0;
    std::size_t wrong_sr = 0;
    for (std::size_t i = 0; i < t.x.size(); ++i) {
        netmodel::Input x = t.x[i];
        for (std::size_t c = 0; c < x.size(); ++c) {
            x[c] *= gain[c];
        }
        if (netmodel::classify(netmodel::forward(p, x)) != t.y[i]) {
            ++wrong;
            (t.y[i] == Label::Sr ? wrong_sr : wrong_stim) += 1;
        }
    }
    auto pct = [](std::size_t a, std::size_t n) {
        return n == 0 ? 0.0 : 100.0 * static_cast<double>(a) / static_cast<double>(n);
    };
    return {pct(wrong, t.x.size()), pct(wrong_stim, t.stimulus), pct(wrong_sr, t.extraneous)};
}

netmodel::Input unit_gain()
{
    netmodel::Input g;
    g.fill(1.0);
    return g;
}

}  // namespace

MonteCarloReport analyze_tolerances(const mapping::CompiledNetwork& net, const ToleranceVector& tol,
                                    std::span<const dataset::SpikePattern> test,
                                    const AnalysisOptions& options)
{
    tol.validate();
    if (options.trials < 1) {
        throw Error(ErrorCode::InvalidArgument, "analyze_tolerances needs at least one trial");
    }
    if (test.empty()) {
        throw Error(ErrorCode::InvalidArgument, "analyze_tolerances needs a test set");
    }
    const TestSet t = prepare(test);
    const std::size_t n = options.trials;
    const std::size_t syn = net.synapses.size();

    MonteCarloReport r;
    r.trials = n;
    r.master_seed = options.seed;
    r.x_p = options.x_p;
    r.tolerances = tol;
    r.percentiles = options.percentiles;
    r.nominal_p_err = evaluate(net.realized(), t, unit_gain()).all;
    r.p_err.resize(n);
    r.p_err_stimulus.resize(n);
    r.p_err_extraneous.resize(n);
    std::vector<double> weights(options.weight_bounds ? n * syn : 0);

    parallel_for(n, options.threads, [&](std::size_t trial) {
        Rng rng = substream(options.seed, trial);
        netmodel::Input gain{};
        const auto w = perturbed_weights(net, tol, rng, &gain);
        const auto e = evaluate(with_weights(net, w), t, gain);
        r.p_err[trial] = e.all;
        r.p_err_stimulus[trial] = e.stimulus;
        r.p_err_extraneous[trial] = e.extraneous;
        if (options.weight_bounds) {
            std::copy(w.begin(), w.end(), weights.begin() + static_cast<std::ptrdiff_t>(trial * syn));
        }
    });

    r.summary = summarize(r.p_err, r.percentiles);
    r.summary_stimulus = summarize(r.p_err_stimulus, r.percentiles);
    r.summary_extraneous = summarize(r.p_err_extraneous, r.percentiles);
    r.pass = r.summary.max <= options.x_p;
    r.pass_stimulus = r.summary_stimulus.max <= options.x_p;
    r.pass_extraneous = r.summary_extraneous.max <= options.x_p;

    if (options.weight_bounds) {
        r.weight_bounds.reserve(syn);
        std::vector<double> column(n);
        for (std::size_t k = 0; k < syn; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                column[i] = weights[i * syn + k];
            }
            const auto& s = net.synapses[k];
            r.weight_bounds.push_back(
                {s.layer, s.input, s.neuron, bounds_from_samples(s.w_achieved, column, r.percentiles)});
        }
    }
    return r;
}

namespace {

json tol_json(const ToleranceVector& t)
{
    return {{"r_f", t.r_f},           {"r_m1", t.r_m1},           {"r_m2", t.r_m2},
            {"per_cell", t.per_cell}, {"input_dac", t.input_dac}, {"sigmas", t.sigmas}};
}

json summary_json(const Summary& s)
{
    return {{"low", s.low}, {"median", s.median}, {"high", s.high},
            {"min", s.min}, {"max", s.max},       {"mean", s.mean}};
}

const char* layer_name(Layer l)
{
    return l == Layer::Hidden ? "hidden" : "output";
}

}  // namespace

std::string report_json(const MonteCarloReport& r)
{
    json j;
    j["trials"] = r.trials;
    j["master_seed"] = r.master_seed;
    j["x_p"] = r.x_p;
    j["tolerances"] = tol_json(r.tolerances);
    j["percentiles"] = {{"low", r.percentiles.low}, {"high", r.percentiles.high}};
    j["nominal_p_err"] = r.nominal_p_err;
    j["summary"] = summary_json(r.summary);
    j["summary_stimulus"] = summary_json(r.summary_stimulus);
    j["summary_extraneous"] = summary_json(r.summary_extraneous);
    j["pass"] = r.pass;
    j["pass_stimulus"] = r.pass_stimulus;
    j["pass_extraneous"] = r.pass_extraneous;
    double worst = 0.0;
    std::size_t absolute = 0;
    for (const auto& b : r.weight_bounds) {
        if (b.bounds.relative) {
            worst = std::max({worst, std::abs(b.bounds.low), std::abs(b.bounds.high)});
        } else {
            ++absolute;
        }
    }
    j["weight_bounds"] = {{"count", r.weight_bounds.size()},
                          {"worst_relative_percent", worst},
                          {"zero_nominal_count", absolute}};
    return j.dump(2) + "\n";
}

std::string trials_csv(const MonteCarloReport& r)
{
    std::string out = "trial,p_err,p_err_stimulus,p_err_extraneous\n";
    char buf[128];
    for (std::size_t i = 0; i < r.p_err.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, r.p_err[i], r.p_err_stimulus[i],
                      r.p_err_extraneous[i]);
        out += buf;
    }
    return out;
}

std::string weight_bounds_csv(const MonteCarloReport& r)
{
    std::string out = "layer,neuron,input,w_nominal,low,high,relative\n";
    char buf[192];
    for (const auto& b : r.weight_bounds) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.17g,%.17g,%.17g,%d\n", layer_name(b.layer), b.neuron,
                      b.input, b.bounds.nominal_w, b.bounds.low, b.bounds.high, b.bounds.relative ? 1 : 0);
        out += buf;
    }
    return out;
}

void ExperimentPlan::validate() const
{
    if (schedule.empty()) {
        throw Error(ErrorCode::InvalidArgument, "experiment plan has no points");
    }
    if (trials < 1) {
        throw Error(ErrorCode::InvalidArgument, "experiment plan needs at least one trial per point");
    }
    if (!(direction.max_limit() > 0.0) || !(resolution > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "experiment plan needs a nonzero direction and resolution");
    }
    base.validate();
    double prev = 0.0;
    for (double s : schedule) {
        if (!(s > prev)) {
            throw Error(ErrorCode::InvalidArgument, "experiment plan scales must be positive and ascending");
        }
        base.along(direction, s).validate();
        prev = s;
    }
}

SynthesisResult synthesize_tolerances(const mapping::CompiledNetwork& net,
                                      std::span<const dataset::SpikePattern> test, double x_p,
                                      const ExperimentPlan& plan, std::uint64_t seed, unsigned threads)
{
    plan.validate();
    const TestSet t = prepare(test);
    const double nominal = evaluate(net.realized(), t, unit_gain()).all;
    if (nominal > x_p) {
        throw Error(ErrorCode::NoPassingPoint, "nominal network error exceeds the permitted level");
    }

    SynthesisResult result;
    AnalysisOptions opt;
    opt.trials = plan.trials;
    opt.x_p = x_p;
    opt.seed = seed;
    opt.threads = threads;
    opt.weight_bounds = false;
    auto point = [&](double scale) {
        const auto tol = plan.base.along(plan.direction, scale);
        const auto rep = analyze_tolerances(net, tol, test, opt);
        result.evaluated.push_back({scale, tol, rep.summary.max, rep.pass});
        return rep.pass;
    };

    if (!point(0.0)) {
        throw Error(ErrorCode::NoPassingPoint, "the base tolerance point already fails");
    }
    double lo = 0.0;
    std::optional<double> hi;
    for (double s : plan.schedule) {
        if (!point(s)) {
            hi = s;
            break;
        }
        lo = s;
    }
    if (hi) {
        const double span = plan.direction.max_limit();
        while ((*hi - lo) * span > plan.resolution) {
            const double mid = 0.5 * (lo + *hi);
            if (point(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    result.scale = lo;
    result.tolerances = plan.base.along(plan.direction, lo);
    return result;
}

std::string synthesis_json(const SynthesisResult& r)
{
    json j;
    j["scale"] = r.scale;
    j["tolerances"] = tol_json(r.tolerances);
    json pts = json::array();
    for (const auto& p : r.evaluated) {
        pts.push_back({{"scale", p.scale},
                       {"tolerances", tol_json(p.tolerances)},
                       {"max_p_err", p.max_p_err},
                       {"pass", p.pass}});
    }
    j["evaluated"] = pts;
    return j.dump(2) + "\n";
}

namespace {

std::vector<double> conductance_levels(int n, const mapping::ResistanceRange& range, double r_f)
{
    if (n < 2) {
        throw Error(ErrorCode::InvalidArgument, "at least two resistance states are required");
    }
    std::vector<double> k(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double r = range.r_min + (range.r_max - range.r_min) * i / (n - 1);
        k[static_cast<std::size_t>(i)] = r_f / r;
    }
    std::sort(k.begin(), k.end());
    return k;
}

/// Nearest K_a - K_b to w over all pairs of a sorted level list.
double nearest_pairwise(double w, const std::vector<double>& k)
{
    double best = std::numeric_limits<double>::infinity();
    double best_d = std::numeric_limits<double>::infinity();
    auto consider = [&](double v) {
        const double d = std::abs(v - w);
        if (d < best_d || (d == best_d && std::abs(v) < std::abs(best))) {
            best = v;
            best_d = d;
        }
    };
    for (double a : k) {
        const auto it = std::lower_bound(k.begin(), k.end(), a - w);
        if (it != k.end()) {
            consider(a - *it);
        }
        if (it != k.begin()) {
            consider(a - *std::prev(it));
        }
    }
    return best;
}

template <typename Round>
netmodel::MlpParams round_weights(netmodel::MlpParams p, Round round)
{
    for (auto& row : p.w_hidden) {
        for (auto& w : row) {
            w = round(w);
        }
    }
    for (auto& row : p.w_out) {
        for (auto& w : row) {
            w = round(w);
        }
    }
    return p;
}

}  // namespace

std::vector<double> weight_states(int n, const mapping::ResistanceRange& range, double r_f,
                                  StateRegime regime)
{
    range.validate();
    const auto k = conductance_levels(n, range, r_f);
    std::vector<double> w;
    if (regime == StateRegime::Pairwise) {
        w.reserve(k.size() * k.size());
        for (double a : k) {
            for (double b : k) {
                w.push_back(a - b);
            }
        }
    } else {
        const double ref = r_f / range.r_max;
        for (double a : k) {
            w.push_back(a - ref);
            w.push_back(ref - a);
        }
    }
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    return w;
}

std::vector<SweepPoint> discrete_state_sweep(const netmodel::MlpParams& net,
                                             const dataset::DatasetSplit& data,
                                             const mapping::ResistanceRange& range, double r_f,
                                             const SweepConfig& config)
{
    const auto xs = dataset::inputs_of(data.test);
    const auto ys = dataset::labels_of(data.test);
    const auto train = dataset::to_training_set(data.train);
    auto test_err = [&](const netmodel::MlpParams& p) {
        return netmodel::p_err(netmodel::predict(p, xs), ys);
    };

    std::vector<SweepPoint> out;
    for (int n : config.counts) {
        if (n < 2) {
            throw Error(ErrorCode::InvalidArgument, "discrete_state_sweep: counts must be at least 2");
        }
        SweepPoint pt;
        pt.n_states = n;
        const auto nn = static_cast<std::size_t>(n);
        const bool dense = config.regime == StateRegime::Pairwise && nn * nn > config.max_refit_states;
        if (dense) {
            const auto k = conductance_levels(n, range, r_f);
            const auto q = round_weights(net, [&](double w) { return nearest_pairwise(w, k); });
            pt.weight_states = nn * (nn - 1) + 1;
            pt.p_err_rounded = test_err(q);
            pt.p_err = pt.p_err_rounded;
        } else {
            const auto states = weight_states(n, range, r_f, config.regime);
            const auto q = round_weights(net, [&](double w) { return mapping::quantize_weight(w, states); });
            pt.weight_states = states.size();
            pt.p_err_rounded = test_err(q);
            pt.p_err = pt.p_err_rounded;
            auto cfg = config.train;
            cfg.discrete_states = states;
            cfg.noise.reset();
            cfg.weight_limit.reset();
            std::optional<netmodel::MlpParams> chosen;
            double chosen_loss = netmodel::loss(q, train);
            if (config.refit_epochs > 0) {
                cfg.max_epochs = config.refit_epochs;
                chosen = netmodel::train_discrete(q, train, cfg).params;
                chosen_loss = netmodel::loss(*chosen, train);
            }
            if (config.scratch_epochs > 0) {
                cfg.max_epochs = config.scratch_epochs;
                auto fresh = netmodel::train_discrete(netmodel::init_params(cfg.seed, cfg.init_range, net),
                                                      train, cfg).params;
                const double fresh_loss = netmodel::loss(fresh, train);
                if (fresh_loss < chosen_loss) {
                    chosen = std::move(fresh);
                    chosen_loss = fresh_loss;
                    pt.from_scratch = true;
                }
            }
            if (chosen) {
                pt.p_err = test_err(*chosen);
            }
        }
        out.push_back(pt);
    }
    return out;
}

std::optional<int> threshold_states(std::span<const SweepPoint> points, double x_p)
{
    std::vector<SweepPoint> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const SweepPoint& a, const SweepPoint& b) { return a.n_states < b.n_states; });
    std::optional<int> n_star;
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
        if (it->p_err > x_p) {
            break;
        }
        n_star = it->n_states;
    }
    return n_star;
}

std::string sweep_csv(std::span<const SweepPoint> points)
{
    std::string out = "n_states,weight_states,p_err_rounded,p_err,from_scratch\n";
    char buf[128];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%d\n", p.n_states, p.weight_states, p.p_err_rounded,
                      p.p_err, p.from_scratch ? 1 : 0);
        out += buf;
    }
    return out;
}

}  // namespace memxbar::tolerance
