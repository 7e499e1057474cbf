// SPDX-License-Identifier: Apache-2.0
#include "memxbar/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "memxbar/error.hpp"
#include "memxbar/mapping.hpp"
#include "memxbar/rng.hpp"

namespace memxbar::netmodel {

std::string_view to_string(Label label) noexcept
{
    switch (label) {
    case Label::S1: return "S1";
    case Label::S2: return "S2";
    case Label::S3: return "S3";
    case Label::S4: return "S4";
    case Label::Sr: return "Sr";
    }
    return "?";
}

Label label_from_string(std::string_view name)
{
    for (std::size_t k = 0; k < kLabelCount; ++k) {
        const auto label = static_cast<Label>(k);
        if (to_string(label) == name) {
            return label;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown label '" + std::string(name) + "'");
}

double Activation::apply(double z) const noexcept
{
    return std::clamp(slope * z, lower, upper);
}

double Activation::derivative(double z) const noexcept
{
    const double u = slope * z;
    return (u >= lower && u <= upper) ? slope : 0.0;
}

MlpParams::Vector MlpParams::flatten() const noexcept
{
    Vector v{};
    std::size_t k = 0;
    for (const auto& row : w_hidden) {
        for (double w : row) {
            v[k++] = w;
        }
    }
    for (double b : b_hidden) {
        v[k++] = b;
    }
    for (const auto& row : w_out) {
        for (double w : row) {
            v[k++] = w;
        }
    }
    for (double b : b_out) {
        v[k++] = b;
    }
    return v;
}

void MlpParams::assign(const Vector& v) noexcept
{
    std::size_t k = 0;
    for (auto& row : w_hidden) {
        for (double& w : row) {
            w = v[k++];
        }
    }
    for (double& b : b_hidden) {
        b = v[k++];
    }
    for (auto& row : w_out) {
        for (double& w : row) {
            w = v[k++];
        }
    }
    for (double& b : b_out) {
        b = v[k++];
    }
}

double MlpParams::max_abs_weight() const noexcept
{
    double m = 0.0;
    for (const auto& row : w_hidden) {
        for (double w : row) {
            m = std::max(m, std::abs(w));
        }
    }
    for (const auto& row : w_out) {
        for (double w : row) {
            m = std::max(m, std::abs(w));
        }
    }
    return m;
}

namespace {

struct Activations {
    Hidden z1;
    Hidden h;
    Output z2;
    Output yhat;
};

inline void propagate(const MlpParams& p, const Input& x, Activations& a) noexcept
{
    a.z1 = p.b_hidden;
    for (std::size_t i = 0; i < kInputs; ++i) {
        const double xi = x[i];
        const auto& row = p.w_hidden[i];
        for (std::size_t j = 0; j < kHidden; ++j) {
            a.z1[j] += row[j] * xi;
        }
    }
    for (std::size_t j = 0; j < kHidden; ++j) {
        a.h[j] = p.hidden_activation.apply(a.z1[j]);
    }
    a.z2 = p.b_out;
    for (std::size_t j = 0; j < kHidden; ++j) {
        const double hj = a.h[j];
        const auto& row = p.w_out[j];
        for (std::size_t r = 0; r < kOutputs; ++r) {
            a.z2[r] += row[r] * hj;
        }
    }
    for (std::size_t r = 0; r < kOutputs; ++r) {
        a.yhat[r] = p.output_activation.apply(a.z2[r]);
    }
}

constexpr std::size_t kOffsetBHidden = kInputs * kHidden;
constexpr std::size_t kOffsetWOut = kOffsetBHidden + kHidden;
constexpr std::size_t kOffsetBOut = kOffsetWOut + kHidden * kOutputs;

constexpr std::size_t flat_index(Layer layer, std::size_t input, std::size_t neuron) noexcept
{
    return layer == Layer::Hidden ? input * kHidden + neuron
                                  : kOffsetWOut + input * kOutputs + neuron;
}

bool is_weight_index(std::size_t k) noexcept
{
    return k < kOffsetBHidden || (k >= kOffsetWOut && k < kOffsetBOut);
}

}  // namespace

Output forward(const MlpParams& p, const Input& x)
{
    Activations a;
    propagate(p, x, a);
    return a.yhat;
}

double mse(std::span<const Output> y, std::span<const Output> yhat)
{
    if (y.size() != yhat.size() || y.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "mse: target/prediction counts differ or are empty");
    }
    double sum = 0.0;
    for (std::size_t h = 0; h < y.size(); ++h) {
        for (std::size_t r = 0; r < kOutputs; ++r) {
            const double e = y[h][r] - yhat[h][r];
            sum += e * e;
        }
    }
    return sum / static_cast<double>(y.size());
}

double p_err(std::span<const Label> predictions, std::span<const Label> targets)
{
    if (predictions.size() != targets.size() || targets.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "p_err: prediction/target counts differ or are empty");
    }
    std::size_t errors = 0;
    for (std::size_t h = 0; h < targets.size(); ++h) {
        errors += predictions[h] != targets[h] ? 1 : 0;
    }
    return 100.0 * static_cast<double>(errors) / static_cast<double>(targets.size());
}

Label classify(const Output& yhat) noexcept
{
    std::size_t best = 0;
    for (std::size_t r = 1; r < kOutputs; ++r) {
        if (yhat[r] > yhat[best]) {
            best = r;
        }
    }
    if (yhat[best] <= 0.0) {
        return Label::Sr;
    }
    return static_cast<Label>(best);
}

namespace {

/// Squared error of one sample; adds scale * d(error)/d(params) to grad.
double accumulate_sample(const MlpParams& p, const Input& x, const Output& y, double scale,
                         MlpParams::Vector& grad) noexcept
{
    Activations a;
    propagate(p, x, a);
    double sum = 0.0;
    Output d2{};
    for (std::size_t r = 0; r < kOutputs; ++r) {
        const double e = a.yhat[r] - y[r];
        sum += e * e;
        d2[r] = scale * e * p.output_activation.derivative(a.z2[r]);
    }
    Hidden d1{};
    for (std::size_t j = 0; j < kHidden; ++j) {
        double back = 0.0;
        for (std::size_t r = 0; r < kOutputs; ++r) {
            grad[kOffsetWOut + j * kOutputs + r] += d2[r] * a.h[j];
            back += p.w_out[j][r] * d2[r];
        }
        d1[j] = back * p.hidden_activation.derivative(a.z1[j]);
    }
    for (std::size_t r = 0; r < kOutputs; ++r) {
        grad[kOffsetBOut + r] += d2[r];
    }
    for (std::size_t i = 0; i < kInputs; ++i) {
        const double xi = x[i];
        if (xi == 0.0) {
            continue;
        }
        double* g = &grad[i * kHidden];
        for (std::size_t j = 0; j < kHidden; ++j) {
            g[j] += d1[j] * xi;
        }
    }
    for (std::size_t j = 0; j < kHidden; ++j) {
        grad[kOffsetBHidden + j] += d1[j];
    }
    return sum;
}

}  // namespace

double loss_and_gradient(const MlpParams& p, const TrainingSet& data, MlpParams::Vector& grad)
{
    if (data.x.size() != data.y.size() || data.x.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "training set inputs/targets mismatch or empty");
    }
    grad.fill(0.0);
    const double scale = 2.0 / static_cast<double>(data.x.size());
    double sum = 0.0;
    for (std::size_t h = 0; h < data.x.size(); ++h) {
        sum += accumulate_sample(p, data.x[h], data.y[h], scale, grad);
    }
    return sum / static_cast<double>(data.x.size());
}

double loss(const MlpParams& p, const TrainingSet& data)
{
    if (data.x.size() != data.y.size() || data.x.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "training set inputs/targets mismatch or empty");
    }
    double sum = 0.0;
    Activations a;
    for (std::size_t h = 0; h < data.x.size(); ++h) {
        propagate(p, data.x[h], a);
        for (std::size_t r = 0; r < kOutputs; ++r) {
            const double e = a.yhat[r] - data.y[h][r];
            sum += e * e;
        }
    }
    return sum / static_cast<double>(data.x.size());
}

void TrainConfig::validate() const
{
    if (!(mse_target > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "train: mse_target must be positive");
    }
    if (max_epochs < 1) {
        throw Error(ErrorCode::InvalidArgument, "train: max_epochs must be >= 1");
    }
    if (discrete_states && discrete_states->empty()) {
        throw Error(ErrorCode::InvalidArgument, "train: discrete_states must be nonempty");
    }
    for (const auto& s : stuck) {
        const std::size_t inputs = s.layer == Layer::Hidden ? kInputs : kHidden;
        const std::size_t neurons = s.layer == Layer::Hidden ? kHidden : kOutputs;
        if (s.input >= inputs || s.neuron >= neurons || s.allowed.empty()) {
            throw Error(ErrorCode::InvalidArgument, "train: malformed stuck constraint");
        }
    }
}

MlpParams init_params(std::uint64_t seed, double range, const MlpParams& shape)
{
    MlpParams p = shape;
    Rng rng = substream(seed, 0, 0x1417);
    for (auto& row : p.w_hidden) {
        for (double& w : row) {
            w = uniform(rng, -range, range);
        }
    }
    for (auto& row : p.w_out) {
        for (double& w : row) {
            w = uniform(rng, -range, range);
        }
    }
    p.b_hidden.fill(0.0);
    p.b_out.fill(0.0);
    return p;
}

namespace {

using Vector = MlpParams::Vector;

/// Maps latent parameters onto the feasible set: box limit, discrete states,
/// stuck constraints.
class Projector {
public:
    explicit Projector(const TrainConfig& cfg) : cfg_(cfg)
    {
        frozen_.fill(false);
        for (const auto& s : cfg.stuck) {
            auto allowed = s.allowed;
            std::sort(allowed.begin(), allowed.end());
            const std::size_t k = flat_index(s.layer, s.input, s.neuron);
            restricted_.emplace_back(k, std::move(allowed));
            frozen_[k] = restricted_.back().second.size() == 1;
        }
    }

    [[nodiscard]] bool has_discrete() const noexcept
    {
        return cfg_.discrete_states.has_value() ||
               std::any_of(restricted_.begin(), restricted_.end(),
                           [](const auto& r) { return r.second.size() > 1; });
    }

    void clamp_box(Vector& v) const noexcept
    {
        if (!cfg_.weight_limit) {
            return;
        }
        const double lim = *cfg_.weight_limit;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (is_weight_index(k)) {
                v[k] = std::clamp(v[k], -lim, lim);
            }
        }
    }

    [[nodiscard]] Vector project(const Vector& latent) const
    {
        Vector v = latent;
        clamp_box(v);
        if (cfg_.discrete_states) {
            const auto& states = *cfg_.discrete_states;
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (is_weight_index(k)) {
                    v[k] = mapping::quantize_weight(v[k], states);
                }
            }
        }
        for (const auto& [k, allowed] : restricted_) {
            v[k] = mapping::quantize_weight(latent[k], allowed);
        }
        return v;
    }

    void mask(Vector& g) const noexcept
    {
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (frozen_[k]) {
                g[k] = 0.0;
            }
        }
    }

private:
    const TrainConfig& cfg_;
    std::vector<std::pair<std::size_t, std::vector<double>>> restricted_;
    std::array<bool, MlpParams::kParamCount> frozen_{};
};

double dot(const Vector& a, const Vector& b) noexcept
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double max_abs(const Vector& v) noexcept
{
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

void check_finite(double value)
{
    if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteLoss, "training diverged: non-finite loss");
    }
}

/// Nominal loss, or its expectation under weight noise. The expectation is
/// estimated with `draws` perturbations per sample taken from a pool that is
/// held fixed between redraws, so line searches see a deterministic function.
class Objective {
public:
    Objective(const TrainingSet& data, const TrainConfig& cfg) : data_(data), cfg_(cfg)
    {
        if (cfg.noise && cfg.noise->sigma > 0.0) {
            noise_ = *cfg.noise;
            redraw(0);
        }
    }

    [[nodiscard]] bool noisy() const noexcept { return noise_.has_value(); }

    /// Refreshes the perturbation pool; returns true when it changed.
    bool maybe_redraw(int epoch)
    {
        if (!noise_ || epoch == 0 || epoch % std::max(noise_->redraw_every, 1) != 0) {
            return false;
        }
        redraw(static_cast<std::uint64_t>(epoch));
        return true;
    }

    double value(const MlpParams& p) const
    {
        Vector unused{};
        return evaluate(p, unused, false);
    }

    double value_grad(const MlpParams& p, Vector& grad) const
    {
        return evaluate(p, grad, true);
    }

private:
    static constexpr std::size_t kPool = 1024;

    double evaluate(const MlpParams& p, Vector& grad, bool with_grad) const
    {
        if (!noise_) {
            return with_grad ? loss_and_gradient(p, data_, grad) : loss(p, data_);
        }
        const Vector base = p.flatten();
        std::vector<MlpParams> perturbed(kPool, p);
        std::vector<Vector> chains(kPool);
        for (std::size_t d = 0; d < kPool; ++d) {
            Vector v = base;
            for (std::size_t k = 0; k < v.size(); ++k) {
                chains[d][k] = 1.0;
                if (is_weight_index(k)) {
                    const double e1 = pool_e1_[d][k];
                    v[k] += (std::abs(base[k]) + noise_->offset) * e1 + noise_->offset * pool_e2_[d][k];
                    chains[d][k] = 1.0 + (base[k] < 0.0 ? -e1 : e1);
                }
            }
            perturbed[d].assign(v);
        }

        const std::size_t per_sample = static_cast<std::size_t>(std::max(noise_->draws, 1));
        const double n = static_cast<double>(data_.x.size() * per_sample);
        const double scale = 2.0 / n;
        double sum = 0.0;
        if (with_grad) {
            // Gradients are accumulated per pool entry, then mapped back
            // through the perturbation Jacobian once.
            std::vector<Vector> acc(kPool, Vector{});
            for (std::size_t h = 0; h < data_.x.size(); ++h) {
                for (std::size_t d = 0; d < per_sample; ++d) {
                    const std::size_t idx = (h * per_sample + d) % kPool;
                    sum += accumulate_sample(perturbed[idx], data_.x[h], data_.y[h], scale, acc[idx]);
                }
            }
            grad.fill(0.0);
            for (std::size_t d = 0; d < kPool; ++d) {
                for (std::size_t k = 0; k < grad.size(); ++k) {
                    grad[k] += acc[d][k] * chains[d][k];
                }
            }
        } else {
            Activations a;
            for (std::size_t h = 0; h < data_.x.size(); ++h) {
                for (std::size_t d = 0; d < per_sample; ++d) {
                    const std::size_t idx = (h * per_sample + d) % kPool;
                    propagate(perturbed[idx], data_.x[h], a);
                    for (std::size_t r = 0; r < kOutputs; ++r) {
                        const double e = a.yhat[r] - data_.y[h][r];
                        sum += e * e;
                    }
                }
            }
        }
        return sum / n;
    }

    void redraw(std::uint64_t index)
    {
        pool_e1_.assign(kPool, Vector{});
        pool_e2_.assign(kPool, Vector{});
        Rng rng = substream(cfg_.seed, index, 0x7015e);
        for (std::size_t d = 0; d < kPool; ++d) {
            for (std::size_t k = 0; k < MlpParams::kParamCount; ++k) {
                if (is_weight_index(k)) {
                    pool_e1_[d][k] = truncated_normal(rng, 3.0 * noise_->sigma);
                    pool_e2_[d][k] = truncated_normal(rng, 3.0 * noise_->sigma);
                }
            }
        }
    }

    const TrainingSet& data_;
    const TrainConfig& cfg_;
    std::optional<WeightNoise> noise_;
    std::vector<Vector> pool_e1_;
    std::vector<Vector> pool_e2_;
};

/// Continuous parameters: Polak-Ribiere conjugate gradient with Armijo
/// backtracking, restarting from steepest descent whenever the direction
/// stops descending.
TrainResult train_continuous(MlpParams model, const TrainingSet& data, const TrainConfig& cfg,
                             const Projector& proj)
{
    TrainResult result;
    Objective objective(data, cfg);
    Vector x = proj.project(model.flatten());
    model.assign(x);
    Vector g{};
    double f = objective.value_grad(model, g);
    check_finite(f);
    proj.mask(g);
    Vector dir{};
    for (std::size_t k = 0; k < dir.size(); ++k) {
        dir[k] = -g[k];
    }
    double step = cfg.initial_step;
    MlpParams trial = model;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (objective.maybe_redraw(epoch)) {
            f = objective.value_grad(model, g);
            check_finite(f);
            proj.mask(g);
            for (std::size_t k = 0; k < dir.size(); ++k) {
                dir[k] = -g[k];
            }
        }
        double slope = dot(g, dir);
        if (slope >= 0.0) {
            for (std::size_t k = 0; k < dir.size(); ++k) {
                dir[k] = -g[k];
            }
            slope = -dot(g, g);
        }
        if (slope == 0.0) {
            break;
        }

        double t = std::min(step * 2.0, cfg.max_move / max_abs(dir));
        bool accepted = false;
        Vector candidate{};
        double f_new = f;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
            for (std::size_t k = 0; k < x.size(); ++k) {
                candidate[k] = x[k] + t * dir[k];
            }
            candidate = proj.project(candidate);
            trial.assign(candidate);
            f_new = objective.value(trial);
            if (std::isfinite(f_new) && f_new <= f + cfg.armijo_c * t * slope) {
                accepted = true;
                break;
            }
            t *= cfg.backtrack;
        }
        if (!accepted) {
            check_finite(f_new);
            if (objective.noisy()) {
                // Stalled on this draw set; continue once new draws arrive.
                result.curve.push_back(result.curve.empty() ? loss(model, data) : result.curve.back());
                continue;
            }
            break;
        }
        step = t;
        x = candidate;
        model.assign(x);
        Vector g_new{};
        f = objective.value_grad(model, g_new);
        check_finite(f);
        proj.mask(g_new);
        const double nominal = objective.noisy() ? loss(model, data) : f;
        result.curve.push_back(nominal);
        if (!objective.noisy() && nominal <= cfg.mse_target) {
            result.converged = true;
            break;
        }
        const double denom = dot(g, g);
        double beta = 0.0;
        if (denom > 0.0) {
            Vector diff{};
            for (std::size_t k = 0; k < diff.size(); ++k) {
                diff[k] = g_new[k] - g[k];
            }
            beta = std::max(0.0, dot(g_new, diff) / denom);
        }
        for (std::size_t k = 0; k < dir.size(); ++k) {
            dir[k] = -g_new[k] + beta * dir[k];
        }
        g = g_new;
    }
    if (result.curve.empty()) {
        result.curve.push_back(loss(model, data));
    }
    result.converged = result.converged || result.curve.back() <= cfg.mse_target;
    result.params = model;
    return result;
}

/// Discrete parameters: latent weights move along the gradient evaluated at
/// their projection; the projected model is what gets scored and returned.
TrainResult train_projected(MlpParams model, const TrainingSet& data, const TrainConfig& cfg,
                            const Projector& proj)
{
    TrainResult result;
    Objective objective(data, cfg);
    Vector latent = model.flatten();
    proj.clamp_box(latent);
    MlpParams projected = model;
    projected.assign(proj.project(latent));
    Vector g{};
    double f = objective.value_grad(projected, g);
    check_finite(f);
    proj.mask(g);

    MlpParams best = projected;
    double best_f = loss(projected, data);
    double step = cfg.initial_step;
    MlpParams trial = model;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (objective.maybe_redraw(epoch)) {
            f = objective.value_grad(projected, g);
            check_finite(f);
            proj.mask(g);
        }
        double t = std::min(step * 1.5, cfg.max_move / std::max(max_abs(g), 1e-300));
        Vector candidate{};
        double f_new = f;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
            for (std::size_t k = 0; k < latent.size(); ++k) {
                candidate[k] = latent[k] - t * g[k];
            }
            proj.clamp_box(candidate);
            trial.assign(proj.project(candidate));
            f_new = objective.value(trial);
            if (std::isfinite(f_new) && f_new <= f) {
                break;
            }
            t *= cfg.backtrack;
        }
        check_finite(f_new);
        step = std::max(t, 1e-6);
        latent = candidate;
        projected = trial;
        f = objective.value_grad(projected, g);
        check_finite(f);
        proj.mask(g);
        const double nominal = objective.noisy() ? loss(projected, data) : f;
        result.curve.push_back(nominal);
        if (nominal < best_f) {
            best_f = nominal;
            best = projected;
        }
        if (nominal <= cfg.mse_target) {
            result.converged = true;
            break;
        }
    }
    if (result.curve.empty()) {
        result.curve.push_back(best_f);
    }
    result.params = best;
    return result;
}

}  // namespace

TrainResult train_discrete(const MlpParams& p0, const TrainingSet& data, const TrainConfig& cfg)
{
    cfg.validate();
    if (data.x.empty() || data.x.size() != data.y.size()) {
        throw Error(ErrorCode::ShapeMismatch, "train: empty or inconsistent training set");
    }
    const Projector proj(cfg);
    if (proj.has_discrete()) {
        return train_projected(p0, data, cfg, proj);
    }
    return train_continuous(p0, data, cfg, proj);
}

std::vector<Label> predict(const MlpParams& p, std::span<const Input> xs)
{
    std::vector<Label> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
        out.push_back(classify(forward(p, x)));
    }
    return out;
}

}  // namespace memxbar::netmodel
