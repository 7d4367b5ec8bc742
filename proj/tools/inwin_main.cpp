// inwin: coarse-to-fine latent refinement with inward sliding-window
// attention, dual-path cross-attention override, and full-branch caching.
// Emits a machine-readable report (see docs/report-schema.md).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "inwin/inwin.hpp"

namespace {

std::string default_report_path() {
    const char* dir = std::getenv("INWIN_REPORT_DIR");
    return std::string(dir != nullptr ? dir : ".") + "/inwin-report.txt";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training-free high-resolution refinement over a toy diffusion transformer"};
    app.set_config("--config", "", "read options from a key=value file");
    app.allow_config_extras(false);

    std::string native_str;
    std::string target_str;
    std::string window_str;
    std::string scale_mode_str = "default";
    std::string upsample_str = "nearest";
    std::string report_path;
    std::optional<std::int64_t> scale_native_count;
    std::optional<int> scale_dim;
    bool dual_path_on_uncond = false;
    bool no_cache = false;
    bool bench_only = false;

    inwin::PipelineConfig cfg;

    app.add_option("--native-grid", native_str, "native token grid, FxHxW")->required();
    app.add_option("--target-grid", target_str, "target token grid, FxHxW")->required();
    app.add_option("--window", window_str,
                   "window extents WxH in tokens (default: native extents floored to even)");
    app.add_option("--steps", cfg.schedule.num_steps, "number of inference steps")
        ->capture_default_str();
    app.add_option("--strength", cfg.schedule.strength, "refinement noise strength in (0,1]")
        ->capture_default_str();
    app.add_option("--guidance-scale", cfg.schedule.guidance_scale, "CFG guidance scale")
        ->capture_default_str();
    app.add_option("--flow-shift", cfg.schedule.flow_shift, "sigma schedule shift")
        ->capture_default_str();
    app.add_option("--lambda", cfg.lambda, "cross-attention override strength in [0,1]")
        ->capture_default_str();
    app.add_option("--cache-period", cfg.cache_period, "full-branch refresh period P")
        ->capture_default_str();
    app.add_flag("--dual-path-on-uncond", dual_path_on_uncond,
                 "apply the dual path to the unconditional CFG branch too");
    app.add_flag("--no-cache", no_cache, "recompute the full branch every step");
    app.add_option("--scale-mode", scale_mode_str, "attention scale: default | entropy")
        ->capture_default_str()
        ->check(CLI::IsMember({"default", "entropy"}));
    app.add_option("--scale-native-count", scale_native_count,
                   "entropy scale log base (default: native token count)");
    app.add_option("--scale-dim", scale_dim, "entropy scale feature dim (default: head dim)");
    app.add_option("--model-dim", cfg.model.model_dim, "model channel dim")
        ->capture_default_str();
    app.add_option("--head-dim", cfg.model.head_dim, "per-head dim")->capture_default_str();
    app.add_option("--heads", cfg.model.heads, "attention heads")->capture_default_str();
    app.add_option("--blocks", cfg.model.blocks, "transformer blocks")->capture_default_str();
    app.add_option("--text-len", cfg.model.text_len, "conditioning token count")
        ->capture_default_str();
    app.add_option("--text-dim", cfg.model.text_dim, "conditioning channel dim")
        ->capture_default_str();
    app.add_option("--ffn-dim", cfg.model.ffn_dim, "feed-forward hidden dim")
        ->capture_default_str();
    app.add_option("--weight-seed", cfg.model.weight_seed, "model weight seed")
        ->capture_default_str();
    app.add_option("--noise-seed", cfg.noise_seed, "noise seed")->capture_default_str();
    app.add_option("--upsample", upsample_str, "latent upsampling: nearest | trilinear")
        ->capture_default_str()
        ->check(CLI::IsMember({"nearest", "trilinear"}));
    app.add_option("--report", report_path,
                   "report output path (default: $INWIN_REPORT_DIR/inwin-report.txt)");
    app.add_flag("--bench-only", bench_only,
                 "emit mask statistics and FLOPs estimates without denoising");

    try {
        app.parse(argc, argv);
        cfg.native = inwin::parse_grid(native_str);
        cfg.target = inwin::parse_grid(target_str);
        if (!window_str.empty()) {
            cfg.window = inwin::parse_window(window_str);
        }
        cfg.dual_path_on_uncond = dual_path_on_uncond;
        cfg.cache_enabled = !no_cache;
        cfg.bench_only = bench_only;
        cfg.scale_mode = scale_mode_str == "entropy" ? inwin::ScaleModeKind::entropy
                                                     : inwin::ScaleModeKind::inverse_sqrt_d;
        cfg.scale_native_count = scale_native_count;
        cfg.scale_dim = scale_dim;
        cfg.upsample = upsample_str == "trilinear" ? inwin::UpsampleMethod::trilinear
                                                   : inwin::UpsampleMethod::nearest;
        cfg.report_path = report_path.empty() ? default_report_path() : report_path;
        inwin::validate_config(cfg);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ConversionError& e) {
        std::string msg = e.what();
        for (const CLI::Option* opt : app.get_options()) {
            if (!opt->get_name().empty() && msg.find(opt->get_name()) != std::string::npos) {
                msg += " (expected " + opt->get_type_name() + ")";
                break;
            }
        }
        std::cerr << "error: config: " << msg << "\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 1;
    }

    try {
        const inwin::PipelineResult result = inwin::run_pipeline(cfg);
        inwin::write_report_file(result.report, cfg.report_path);
        std::cout << "report written to " << cfg.report_path << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
