#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "inwin/dit_block.hpp"
#include "inwin/flops.hpp"
#include "inwin/latent.hpp"
#include "inwin/scheduler.hpp"

namespace inwin {

enum class UpsampleMethod { nearest, trilinear };

// Spatial latent upsampling; the temporal axis always stays at its native
// length. Nearest replicates source tokens, trilinear interpolates per frame
// per channel with a half-pixel mapping.
inline LatentField upsample_latent(const LatentField& in, const TokenGrid& target,
                                   UpsampleMethod method) {
    const TokenGrid& src = in.grid;
    if (target.frames != src.frames) {
        throw std::invalid_argument("upsample_latent: frame counts must match, got " +
                                    src.to_string() + " -> " + target.to_string());
    }
    if (target.height < src.height || target.width < src.width) {
        throw std::invalid_argument("upsample_latent: target must be >= source per spatial axis, "
                                    "got " + src.to_string() + " -> " + target.to_string());
    }
    Mat out(target.token_count(), in.channels());
    for (int t = 0; t < target.frames; ++t) {
        for (int ty = 0; ty < target.height; ++ty) {
            for (int tx = 0; tx < target.width; ++tx) {
                const std::int64_t dst = flat_index(target, {t, ty, tx});
                if (method == UpsampleMethod::nearest) {
                    const int sy = int(std::int64_t(ty) * src.height / target.height);
                    const int sx = int(std::int64_t(tx) * src.width / target.width);
                    out.row(dst) = in.values.row(flat_index(src, {t, sy, sx}));
                } else {
                    const auto sample = [](int d, int dst_n, int src_n) {
                        const double s = (d + 0.5) * double(src_n) / double(dst_n) - 0.5;
                        return std::clamp(s, 0.0, double(src_n - 1));
                    };
                    const double sy = sample(ty, target.height, src.height);
                    const double sx = sample(tx, target.width, src.width);
                    const int y0 = int(sy);
                    const int x0 = int(sx);
                    const int y1 = std::min(y0 + 1, src.height - 1);
                    const int x1 = std::min(x0 + 1, src.width - 1);
                    const double fy = sy - y0;
                    const double fx = sx - x0;
                    const auto row = [&](int y, int x) {
                        return in.values.row(flat_index(src, {t, y, x}));
                    };
                    // lerp as a + w*(b-a): constants survive exactly
                    const Eigen::RowVectorXd r0 = row(y0, x0) + fx * (row(y0, x1) - row(y0, x0));
                    const Eigen::RowVectorXd r1 = row(y1, x0) + fx * (row(y1, x1) - row(y1, x0));
                    out.row(dst) = r0 + fy * (r1 - r0);
                }
            }
        }
    }
    return LatentField(target, std::move(out));
}

struct PipelineConfig {
    TokenGrid native{1, 1, 1};
    TokenGrid target{1, 1, 1};
    std::optional<WindowSpec> window;  // defaults to the native extents, floored to even
    ScheduleSpec schedule;
    double lambda = 1.0;
    int cache_period = 2;
    bool dual_path_on_uncond = false;
    bool cache_enabled = true;
    ScaleModeKind scale_mode = ScaleModeKind::inverse_sqrt_d;
    std::optional<std::int64_t> scale_native_count;  // entropy log base override
    std::optional<int> scale_dim;                    // entropy feature dim override
    ModelConfig model;
    std::uint64_t noise_seed = 0;
    UpsampleMethod upsample = UpsampleMethod::nearest;
    std::string report_path;
    bool bench_only = false;
};

// Window default: the native spatial extents themselves (the training-scale
// receptive field), floored to the nearest even value since extents must be
// even, and never below 2.
inline WindowSpec effective_window(const PipelineConfig& cfg) {
    if (cfg.window) return *cfg.window;
    const auto even_floor = [](int n) { return std::max(2, n - (n % 2)); };
    return WindowSpec(even_floor(cfg.native.width), even_floor(cfg.native.height));
}

inline void validate_config(const PipelineConfig& cfg) {
    cfg.schedule.validate();
    cfg.model.validate();
    if (cfg.target.frames != cfg.native.frames) {
        throw std::invalid_argument("config: target frames must equal native frames (temporal "
                                    "axis stays native)");
    }
    if (cfg.target.height < cfg.native.height || cfg.target.width < cfg.native.width) {
        throw std::invalid_argument("config: target grid must be >= native grid per spatial axis");
    }
    if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
        throw std::invalid_argument("config: lambda must be in [0, 1]");
    }
    if (cfg.cache_period < 1) {
        throw std::invalid_argument("config: cache-period must be >= 1");
    }
    effective_window(cfg);  // even/positive checks
    if (cfg.scale_mode == ScaleModeKind::entropy) {
        const std::int64_t base = cfg.scale_native_count.value_or(cfg.native.token_count());
        if (base < 2) {
            throw std::invalid_argument("config: entropy scale needs a native token count >= 2");
        }
    }
}

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t latent_checksum(const LatentField& latent) {
    static_assert(sizeof(double) == 8);
    return fnv1a64(reinterpret_cast<const unsigned char*>(latent.values.data()),
                   sizeof(double) * std::size_t(latent.values.size()));
}

// Machine-readable run summary: an ordered flat key/value document. Field
// names and units are pinned in docs/report-schema.md; keys ending in "_ms"
// are wall-clock and everything else is deterministic per (config, seeds).
struct Report {
    std::vector<std::pair<std::string, std::string>> entries;

    void push(std::string key, std::string value) {
        entries.emplace_back(std::move(key), std::move(value));
    }

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : entries) {
            if (k == key) return &v;
        }
        return nullptr;
    }

    std::string text() const {
        std::string out;
        for (const auto& [k, v] : entries) {
            out += k;
            out += " = ";
            out += v;
            out += "\n";
        }
        return out;
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    // shortest representation that round-trips, so echoes stay exact
    char buf[64];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fmt_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline std::string fmt_bool(bool b) { return b ? "true" : "false"; }

inline std::string fmt_checksum(std::uint64_t c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(c));
    return buf;
}

inline std::string fmt_window(const WindowSpec& w) {
    return std::to_string(w.w) + "x" + std::to_string(w.h);
}

inline void echo_config(Report& r, const PipelineConfig& cfg) {
    r.push("config.native_grid", cfg.native.to_string());
    r.push("config.target_grid", cfg.target.to_string());
    r.push("config.window", fmt_window(effective_window(cfg)));
    r.push("config.steps", std::to_string(cfg.schedule.num_steps));
    r.push("config.flow_shift", fmt_double(cfg.schedule.flow_shift));
    r.push("config.strength", fmt_double(cfg.schedule.strength));
    r.push("config.guidance_scale", fmt_double(cfg.schedule.guidance_scale));
    r.push("config.lambda", fmt_double(cfg.lambda));
    r.push("config.cache_period", std::to_string(cfg.cache_period));
    r.push("config.cache_enabled", fmt_bool(cfg.cache_enabled));
    r.push("config.dual_path_on_uncond", fmt_bool(cfg.dual_path_on_uncond));
    r.push("config.scale_mode",
           cfg.scale_mode == ScaleModeKind::entropy ? "entropy" : "default");
    if (cfg.scale_mode == ScaleModeKind::entropy) {
        r.push("config.scale_native_count",
               std::to_string(cfg.scale_native_count.value_or(cfg.native.token_count())));
        r.push("config.scale_dim",
               std::to_string(cfg.scale_dim.value_or(cfg.model.head_dim)));
    }
    r.push("config.model_dim", std::to_string(cfg.model.model_dim));
    r.push("config.head_dim", std::to_string(cfg.model.head_dim));
    r.push("config.heads", std::to_string(cfg.model.heads));
    r.push("config.blocks", std::to_string(cfg.model.blocks));
    r.push("config.text_len", std::to_string(cfg.model.text_len));
    r.push("config.text_dim", std::to_string(cfg.model.text_dim));
    r.push("config.ffn_dim", std::to_string(cfg.model.ffn_dim));
    r.push("config.weight_seed", std::to_string(cfg.model.weight_seed));
    r.push("config.noise_seed", std::to_string(cfg.noise_seed));
    r.push("config.upsample",
           cfg.upsample == UpsampleMethod::nearest ? "nearest" : "trilinear");
    r.push("config.bench_only", fmt_bool(cfg.bench_only));
}

}  // namespace detail

struct PipelineResult {
    Report report;
    LatentField final_latent;  // stage-2 output (empty grid in bench-only runs)
    RunTrace trace;
};

// Two-stage coarse-to-fine run: full-attention generation at the native
// grid, then upsample, re-noise at the strength sigma, and dual-path
// refinement at the target grid. bench_only stops after the mask and FLOPs
// sections.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
    validate_config(cfg);
    const WindowSpec window = effective_window(cfg);

    PipelineResult result;
    Report& report = result.report;
    report.push("schema_version", "1");
    detail::echo_config(report, cfg);

    const Fraction sp = sparsity(window, cfg.target);
    report.push("mask.sparsity", sp.to_string());
    report.push("mask.sparsity_value", detail::fmt_double(sp.value()));
    const FlopsEstimate fl =
        flops_estimate(cfg.target, window, cfg.model.head_dim, cfg.model.heads, cfg.model.blocks);
    report.push("flops.self_attention.full", detail::fmt_double(fl.full));
    report.push("flops.self_attention.windowed", detail::fmt_double(fl.windowed));
    report.push("flops.self_attention.ratio", fl.ratio.to_string());
    report.push("flops.self_attention.ratio_value", detail::fmt_double(fl.ratio.value()));
    if (cfg.bench_only) {
        return result;
    }

    const auto total_t0 = std::chrono::steady_clock::now();
    const ModelWeights weights = make_model_weights(cfg.model);
    Rng text_rng(cfg.model.weight_seed + 1);  // conditioning stream, distinct from weights
    const TextContext text = make_text_context(text_rng, cfg.model);
    const TextContext null_text = null_text_context(cfg.model);

    Rng noise_rng(cfg.noise_seed);
    const std::vector<double> sigmas = sigma_schedule(cfg.schedule);

    // stage 1: plain CFG generation from pure noise at the native grid
    const auto stage1_t0 = std::chrono::steady_clock::now();
    const LatentField init = random_latent(noise_rng, cfg.native, cfg.model.model_dim);
    const LatentField base = denoise_full_cfg(init, text, null_text, cfg.schedule, weights,
                                              default_scale(cfg.model.head_dim), 0);
    const double stage1_ms = detail::ms_since(stage1_t0);

    // stage 2: upsample, re-noise at the strength sigma, dual-path refine
    const auto stage2_t0 = std::chrono::steady_clock::now();
    const LatentField up = upsample_latent(base, cfg.target, cfg.upsample);
    const LatentField refine_noise = random_latent(noise_rng, cfg.target, cfg.model.model_dim);
    const LatentField noisy =
        add_noise(up, sigmas[std::size_t(start_step(cfg.schedule))], refine_noise);

    DualPathConfig dp;
    dp.lambda = cfg.lambda;
    dp.cache_period = cfg.cache_period;
    dp.dual_path_on_uncond = cfg.dual_path_on_uncond;
    dp.cache_enabled = cfg.cache_enabled;
    dp.window = window;
    dp.scale_mode.kind = cfg.scale_mode;
    dp.scale_mode.native_count = cfg.scale_native_count.value_or(cfg.native.token_count());
    dp.scale_mode.dim_override = cfg.scale_dim;

    DenoiseResult refined =
        denoise_dual_path(noisy, text, null_text, cfg.schedule, dp, weights);
    const double stage2_ms = detail::ms_since(stage2_t0);
    const double total_ms = detail::ms_since(total_t0);

    const RunTrace& tr = refined.trace;
    report.push("run.start_step", std::to_string(tr.start_step));
    report.push("run.refinement_steps", std::to_string(tr.refinement_steps));
    report.push("run.cond_full_refreshes", std::to_string(tr.cond_full_refreshes));
    report.push("run.uncond_full_refreshes", std::to_string(tr.uncond_full_refreshes));
    for (const StepTrace& st : tr.steps) {
        const std::string p = "run.step." + std::to_string(st.offset);
        report.push(p + ".refreshed", detail::fmt_bool(st.cond_refreshed));
        report.push(p + ".staleness", std::to_string(st.cond_staleness));
        report.push(p + ".cond_full_ms", detail::fmt_ms(st.cond_full_ms));
        report.push(p + ".cond_window_ms", detail::fmt_ms(st.cond_window_ms));
        report.push(p + ".uncond_ms", detail::fmt_ms(st.uncond_ms));
    }
    report.push("timing.stage1_ms", detail::fmt_ms(stage1_ms));
    report.push("timing.stage2_ms", detail::fmt_ms(stage2_ms));
    report.push("timing.total_ms", detail::fmt_ms(total_ms));
    report.push("latent.checksum", detail::fmt_checksum(latent_checksum(refined.latent)));

    result.final_latent = std::move(refined.latent);
    result.trace = std::move(refined.trace);
    return result;
}

// Writes the rendered report atomically: the target path either holds the
// complete document or is untouched.
inline void write_report_file(const Report& report, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) {
            throw std::runtime_error("report: cannot open " + tmp + " for writing");
        }
        os << report.text();
        if (!os.good()) {
            throw std::runtime_error("report: write failed for " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

// Grid strings are FxHxW, window strings are WxH (matching the CLI flags).
inline TokenGrid parse_grid(const std::string& s) {
    int f = 0, h = 0, w = 0;
    char sep1 = 0, sep2 = 0;
    std::istringstream is(s);
    if (!(is >> f >> sep1 >> h >> sep2 >> w) || sep1 != 'x' || sep2 != 'x' || !is.eof()) {
        throw std::invalid_argument("grid '" + s + "': expected FxHxW, e.g. 1x30x52");
    }
    return TokenGrid(f, h, w);
}

inline WindowSpec parse_window(const std::string& s) {
    int w = 0, h = 0;
    char sep = 0;
    std::istringstream is(s);
    if (!(is >> w >> sep >> h) || sep != 'x' || !is.eof()) {
        throw std::invalid_argument("window '" + s + "': expected WxH, e.g. 52x30");
    }
    return WindowSpec(w, h);
}

}  // namespace inwin
