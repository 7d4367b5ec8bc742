#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "inwin/dit_block.hpp"
#include "inwin/flops.hpp"
#include "inwin/latent.hpp"

namespace inwin {

struct ScheduleSpec {
    int num_steps = 50;
    double flow_shift = 9.0;
    double strength = 0.7;
    double guidance_scale = 5.0;

    void validate() const {
        if (num_steps < 1) {
            throw std::invalid_argument("ScheduleSpec: num_steps must be >= 1");
        }
        if (!(strength > 0.0 && strength <= 1.0)) {
            throw std::invalid_argument("ScheduleSpec: strength must be in (0, 1], got " +
                                        std::to_string(strength));
        }
        if (!(flow_shift > 0.0)) {
            throw std::invalid_argument("ScheduleSpec: flow_shift must be positive");
        }
        if (!(guidance_scale >= 0.0)) {
            throw std::invalid_argument("ScheduleSpec: guidance_scale must be non-negative");
        }
    }
};

// Shifted rectified-flow noise levels: sigma(u) = s*u / (1 + (s-1)*u) on a
// uniform u grid from 1 down to 0. num_steps+1 values, sigma_0 = 1,
// sigma_last = 0, strictly decreasing.
inline std::vector<double> sigma_schedule(const ScheduleSpec& spec) {
    spec.validate();
    std::vector<double> sigmas(std::size_t(spec.num_steps) + 1);
    const double s = spec.flow_shift;
    for (int i = 0; i <= spec.num_steps; ++i) {
        const double u = double(spec.num_steps - i) / double(spec.num_steps);
        sigmas[std::size_t(i)] = s * u / (1.0 + (s - 1.0) * u);
    }
    return sigmas;
}

// First schedule index of the refinement: round(num_steps * (1 - strength)).
inline int start_step(const ScheduleSpec& spec) {
    spec.validate();
    return int(std::lround(double(spec.num_steps) * (1.0 - spec.strength)));
}

// Flow-matching interpolation x = (1-sigma)*x0 + sigma*noise. The endpoints
// return the operand unchanged.
inline LatentField add_noise(const LatentField& x0, double sigma, const LatentField& noise) {
    if (!(sigma >= 0.0 && sigma <= 1.0)) {
        throw std::invalid_argument("add_noise: sigma must be in [0, 1], got " +
                                    std::to_string(sigma));
    }
    if (!(noise.grid == x0.grid) || noise.channels() != x0.channels()) {
        throw std::invalid_argument("add_noise: noise shape does not match latent");
    }
    if (sigma == 0.0) return x0;
    if (sigma == 1.0) return noise;
    return LatentField(x0.grid, (1.0 - sigma) * x0.values + sigma * noise.values);
}

// Refresh cadence, counted from the first refinement step so the cache is
// always populated before any reuse.
inline bool should_refresh(int step_offset, int period) {
    if (step_offset < 0 || period < 1) {
        throw std::invalid_argument("should_refresh: offset must be >= 0 and period >= 1");
    }
    return step_offset % period == 0;
}

enum class ScaleModeKind { inverse_sqrt_d, entropy };

struct ScaleMode {
    ScaleModeKind kind = ScaleModeKind::inverse_sqrt_d;
    std::int64_t native_count = 0;    // entropy log base: native token count
    std::optional<int> dim_override;  // entropy feature dim; defaults to head_dim
};

struct DualPathConfig {
    double lambda = 1.0;
    int cache_period = 2;
    bool dual_path_on_uncond = false;
    bool cache_enabled = true;  // off = recompute the full branch every step (ablation)
    WindowSpec window;
    ScaleMode scale_mode;

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) {
            throw std::invalid_argument("DualPathConfig: lambda must be in [0, 1]");
        }
        if (cache_period < 1) {
            throw std::invalid_argument("DualPathConfig: cache_period must be >= 1");
        }
    }
};

// Stored full-branch cross outputs plus the step they were refreshed at.
struct CacheState {
    std::optional<CrossOutputs> cached;
    std::optional<int> refreshed_at_step;
};

struct StepTrace {
    int step = 0;
    int offset = 0;
    bool cond_refreshed = false;
    int cond_staleness = 0;
    bool uncond_refreshed = false;
    int uncond_staleness = 0;
    double cond_full_ms = 0.0;
    double cond_window_ms = 0.0;
    double uncond_ms = 0.0;
};

struct RunTrace {
    int start_step = 0;
    int refinement_steps = 0;
    int cond_full_refreshes = 0;
    int uncond_full_refreshes = 0;
    double full_forward_flops = 0.0;    // theoretical self-attention FLOPs, one full forward
    double window_forward_flops = 0.0;  // same for one windowed forward
    std::vector<StepTrace> steps;
    double total_ms = 0.0;
};

struct DenoiseResult {
    LatentField latent;
    RunTrace trace;
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

inline AttentionScale resolve_self_scale(const ScaleMode& mode, const TokenGrid& target,
                                         int head_dim) {
    if (mode.kind == ScaleModeKind::inverse_sqrt_d) {
        return default_scale(head_dim);
    }
    return entropy_scale(mode.native_count, target.token_count(),
                         mode.dim_override.value_or(head_dim));
}

}  // namespace detail

// One CFG branch of the dual-path step: refresh the full-attention cross
// cache on cadence, then run the window forward overridden from it.
namespace detail {
struct BranchResult {
    Mat velocity;
    bool refreshed = false;
    int staleness = 0;
    double full_ms = 0.0;
    double window_ms = 0.0;
};

inline BranchResult dual_path_branch(const LatentField& x, const TextContext& text,
                                     const ModelWeights& weights, const DualPathConfig& config,
                                     const ForwardOptions& full_opt,
                                     const ForwardOptions& window_opt_base, int step, int offset,
                                     CacheState& cache) {
    BranchResult r;
    CrossOutputs fresh;  // holds the full outputs when the cache is disabled
    const CrossOutputs* source = nullptr;
    if (config.cache_enabled) {
        if (should_refresh(offset, config.cache_period)) {
            const auto t0 = std::chrono::steady_clock::now();
            cache.cached = model_forward(x, text, weights, full_opt).cross;
            cache.refreshed_at_step = step;
            r.full_ms = ms_since(t0);
            r.refreshed = true;
        }
        source = &*cache.cached;
        r.staleness = step - *cache.refreshed_at_step;
    } else {
        const auto t0 = std::chrono::steady_clock::now();
        fresh = model_forward(x, text, weights, full_opt).cross;
        r.full_ms = ms_since(t0);
        r.refreshed = true;
        source = &fresh;
        r.staleness = 0;
    }

    ForwardOptions window_opt = window_opt_base;
    window_opt.override_source = source;
    window_opt.lambda = config.lambda;
    const auto t1 = std::chrono::steady_clock::now();
    ForwardResult w = model_forward(x, text, weights, window_opt);
    r.window_ms = ms_since(t1);
    r.velocity = predict_velocity(weights, w.latent);
    return r;
}
}  // namespace detail

// The dual-path refinement loop. Per step: conditional pass through the
// window branch guided by (possibly cached) full-branch cross outputs, an
// unconditional pass (window-only unless dual_path_on_uncond), CFG combine,
// Euler update. The start latent must correspond to
// sigma_schedule(spec)[start_step(spec)].
inline DenoiseResult denoise_dual_path(const LatentField& noisy, const TextContext& text,
                                       const TextContext& null_text, const ScheduleSpec& spec,
                                       const DualPathConfig& config, const ModelWeights& weights) {
    spec.validate();
    config.validate();
    const auto run_t0 = std::chrono::steady_clock::now();
    const std::vector<double> sigmas = sigma_schedule(spec);
    const int first = start_step(spec);
    const ModelConfig& cfg = weights.config;

    const AttentionScale self_scale =
        detail::resolve_self_scale(config.scale_mode, noisy.grid, cfg.head_dim);
    const AttentionScale cross_scale = default_scale(cfg.head_dim);

    ForwardOptions full_opt;
    full_opt.self_scale = self_scale;
    full_opt.cross_scale = cross_scale;
    ForwardOptions window_opt = full_opt;
    window_opt.window = config.window;

    DenoiseResult result{noisy, {}};
    RunTrace& trace = result.trace;
    trace.start_step = first;
    trace.refinement_steps = spec.num_steps - first;
    const FlopsEstimate fl =
        flops_estimate(noisy.grid, config.window, cfg.head_dim, cfg.heads, cfg.blocks);
    trace.full_forward_flops = fl.full;
    trace.window_forward_flops = fl.windowed;

    CacheState cond_cache;
    CacheState uncond_cache;
    for (int step = first; step < spec.num_steps; ++step) {
        const int offset = step - first;
        StepTrace st;
        st.step = step;
        st.offset = offset;
        full_opt.sigma = sigmas[std::size_t(step)];
        window_opt.sigma = sigmas[std::size_t(step)];

        // conditional pass: dual path
        detail::BranchResult cond = detail::dual_path_branch(
            result.latent, text, weights, config, full_opt, window_opt, step, offset, cond_cache);
        st.cond_refreshed = cond.refreshed;
        st.cond_staleness = cond.staleness;
        st.cond_full_ms = cond.full_ms;
        st.cond_window_ms = cond.window_ms;
        if (cond.refreshed) ++trace.cond_full_refreshes;
        if (cond.staleness > config.cache_period - 1) {
            throw std::logic_error("denoise_dual_path: cache staleness exceeded P-1");
        }

        // unconditional pass: window-only unless configured otherwise
        Mat v_uncond;
        if (config.dual_path_on_uncond) {
            detail::BranchResult uncond =
                detail::dual_path_branch(result.latent, null_text, weights, config, full_opt,
                                         window_opt, step, offset, uncond_cache);
            st.uncond_refreshed = uncond.refreshed;
            st.uncond_staleness = uncond.staleness;
            st.uncond_ms = uncond.full_ms + uncond.window_ms;
            if (uncond.refreshed) ++trace.uncond_full_refreshes;
            v_uncond = std::move(uncond.velocity);
        } else {
            ForwardOptions plain = window_opt;
            plain.override_source = nullptr;
            const auto t0 = std::chrono::steady_clock::now();
            ForwardResult u = model_forward(result.latent, null_text, weights, plain);
            st.uncond_ms = detail::ms_since(t0);
            v_uncond = predict_velocity(weights, u.latent);
        }

        const double g = spec.guidance_scale;
        const Mat v = g == 0.0 ? std::move(v_uncond)
                               : Mat(v_uncond + g * (cond.velocity - v_uncond));
        const double dsigma = sigmas[std::size_t(step) + 1] - sigmas[std::size_t(step)];
        result.latent = LatentField(result.latent.grid, result.latent.values + dsigma * v);
        trace.steps.push_back(st);
    }
    trace.total_ms = detail::ms_since(run_t0);
    return result;
}

// Plain two-pass CFG denoiser with full attention on both branches. Stage-1
// generator and the reference the dual-path degeneracy checks compare to.
inline LatentField denoise_full_cfg(const LatentField& noisy, const TextContext& text,
                                    const TextContext& null_text, const ScheduleSpec& spec,
                                    const ModelWeights& weights, AttentionScale self_scale,
                                    int from_step) {
    spec.validate();
    if (from_step < 0 || from_step > spec.num_steps) {
        throw std::invalid_argument("denoise_full_cfg: from_step outside schedule");
    }
    const std::vector<double> sigmas = sigma_schedule(spec);
    ForwardOptions opt;
    opt.self_scale = self_scale;
    opt.cross_scale = default_scale(weights.config.head_dim);

    LatentField x = noisy;
    for (int step = from_step; step < spec.num_steps; ++step) {
        opt.sigma = sigmas[std::size_t(step)];
        const Mat v_cond = predict_velocity(weights, model_forward(x, text, weights, opt).latent);
        Mat v_uncond =
            predict_velocity(weights, model_forward(x, null_text, weights, opt).latent);
        const double g = spec.guidance_scale;
        const Mat v =
            g == 0.0 ? std::move(v_uncond) : Mat(v_uncond + g * (v_cond - v_uncond));
        const double dsigma = sigmas[std::size_t(step) + 1] - sigmas[std::size_t(step)];
        x = LatentField(x.grid, x.values + dsigma * v);
    }
    return x;
}

}  // namespace inwin
