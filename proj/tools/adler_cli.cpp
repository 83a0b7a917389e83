#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adler/harness.hpp"
#include "adler/validate.hpp"

namespace {

// Resolves the run output directory: explicit flag, then config value,
// both made relative to ADLER_OUT_DIR when that is set and the path is
// relative.
std::string resolve_out(const std::string& from_config, const std::string& override_out) {
    std::string out = override_out.empty() ? from_config : override_out;
    if (out.empty() || out.front() == '/') return out;
    if (const char* base = std::getenv("ADLER_OUT_DIR"))
        return std::string(base) + "/" + out;
    return out;
}

adler::TrainConfig load_with_overrides(const std::string& path, std::optional<std::uint64_t> seed,
                                       std::optional<std::size_t> epochs,
                                       const std::string& out) {
    adler::TrainConfig cfg = adler::load_config(path);
    if (seed) cfg.seed = *seed;
    if (epochs) cfg.epochs = *epochs;
    cfg.out = resolve_out(cfg.out, out);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ADLER optimization lab: adaptive learning-rate training and validation"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "Path to a JSON training config")->required();
        cmd->add_option("--seed", seed, "Override the config seed");
        cmd->add_option("--epochs", epochs, "Override the epoch count");
        cmd->add_option("--out", out_override, "Override the output directory");
    };

    CLI::App* train = app.add_subcommand("train", "Run one training job");
    add_common(train);

    CLI::App* grid = app.add_subcommand("grid-search", "Run the SGD learning-rate grid");
    add_common(grid);

    CLI::App* validate = app.add_subcommand("validate", "Run the oracle validation suite");
    bool quick = false;
    validate->add_flag("--quick", quick, "Reduced trial counts");

    CLI::App* export_cmd = app.add_subcommand("export-plot-data",
                                              "Flatten step metrics into a plot-ready CSV");
    std::vector<std::string> metrics;
    std::string csv_out;
    export_cmd->add_option("metrics", metrics, "steps.jsonl files")->required();
    export_cmd->add_option("--out", csv_out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*train) {
            adler::TrainConfig cfg = load_with_overrides(config_path, seed, epochs, out_override);
            adler::RunResult res = adler::run_training(cfg);
            const auto& last = res.epochs.back();
            std::cout << "final train_loss=" << last.train_loss << " test_loss=" << last.test_loss
                      << " train_acc=" << last.train_acc << " test_acc=" << last.test_acc
                      << " wall_ms=" << res.total_wall_ms << "\n";
            if (!res.steps_path.empty()) std::cout << "metrics: " << res.steps_path << "\n";
            return 0;
        }
        if (*grid) {
            adler::TrainConfig cfg = load_with_overrides(config_path, seed, epochs, out_override);
            adler::GridResult res = adler::grid_search(cfg, adler::default_lr_grid());
            for (const auto& arm : res.arms) {
                std::cout << "lr=" << arm.lr << " train_loss=" << arm.final_train_loss
                          << " test_loss=" << arm.final_test_loss << " test_acc=" << arm.test_acc
                          << (arm.diverged ? " (diverged)" : "") << "\n";
            }
            std::cout << "best by train loss: lr=" << res.arms[res.best_by_train_loss].lr
                      << "; best by test acc: lr=" << res.arms[res.best_by_test_acc].lr << "\n";
            return 0;
        }
        if (*validate) {
            auto results = adler::run_validation(quick);
            bool all_ok = true;
            for (const auto& r : results) {
                std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail
                          << ")\n";
                all_ok = all_ok && r.passed;
            }
            return all_ok ? 0 : 1;
        }
        if (*export_cmd) {
            adler::export_plot_data(metrics, csv_out);
            std::cout << "wrote " << csv_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
