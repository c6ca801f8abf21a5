// difface: train, sample, evaluate and ablate speech-driven facial motion diffusion models.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "difface/commands.hpp"
#include "difface/errors.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config;
    std::string preset;
    std::optional<long long> seed;
    std::optional<int> epochs;
    std::optional<int> steps;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_epochs) {
    cmd->add_option("--config", o.config, "JSON config file (dotted or nested keys)");
    cmd->add_option("--preset", o.preset, "Named preset applied before the config file");
    cmd->add_option("--seed", o.seed, "Root seed");
    if (with_epochs) cmd->add_option("--epochs", o.epochs, "Override train.epochs");
    cmd->add_option("--steps", o.steps, "Override diffusion.steps");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--set", o.overrides, "key=value override (repeatable)");
}

// Preset, then file, then --set, then dedicated flags.
difface::RunConfig resolve(const CommonOptions& o) {
    difface::RunConfig rc;
    if (!o.preset.empty()) rc.apply_preset(o.preset);
    if (!o.config.empty()) rc.merge_file(o.config);
    for (const auto& s : o.overrides) rc.set_override(s);
    if (o.seed) rc.set("seed", *o.seed);
    if (o.epochs) rc.set("train.epochs", *o.epochs);
    if (o.steps) rc.set("diffusion.steps", *o.steps);
    if (!o.out.empty()) rc.set("output.dir", o.out);
    rc.validate();
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Speech-driven facial motion diffusion"};
    app.require_subcommand(1);

    CommonOptions train_opts;
    std::string resume;
    auto* train = app.add_subcommand("train", "Train a model");
    add_common(train, train_opts, true);
    train->add_option("--resume", resume, "Checkpoint to resume from");

    difface::SampleRequest sample_req;
    std::optional<int> sample_style;
    long long sample_seed = 0;
    auto* sample = app.add_subcommand("sample", "Generate motion for an audio file");
    sample->add_option("--checkpoint", sample_req.checkpoint, "Trained checkpoint")->required();
    sample->add_option("--audio", sample_req.audio, "WAV file")->required();
    sample->add_option("--out", sample_req.out, "Output motion file (.csv for rig CSV)")->required();
    sample->add_option("--style", sample_style, "Training-subject style id");
    sample->add_option("--seed", sample_seed, "Sampling seed");
    sample->add_option("--steps", sample_req.steps, "Denoising evaluations (0 = all levels)");

    std::string pred_dir, gt_dir, mask_path, eval_out = "eval";
    std::vector<int> controls;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
    evaluate->add_option("--pred", pred_dir, "Prediction directory")->required();
    evaluate->add_option("--gt", gt_dir, "Ground-truth directory")->required();
    evaluate->add_option("--mask", mask_path, "Region mask JSON");
    evaluate->add_option("--out", eval_out, "Report directory");
    evaluate->add_option("--controls", controls, "Rig controls exported as animation graphs");

    CommonOptions ablate_opts;
    std::vector<std::string> grids = {"steps"};
    auto* ablate = app.add_subcommand("ablate", "Train and score ablation grids");
    add_common(ablate, ablate_opts, true);
    ablate->add_option("--grid", grids, "steps | decoder | noise-encoder | diffusion | encoder");

    CommonOptions synth_opts;
    auto* synth = app.add_subcommand("synth-data", "Write the synthetic dataset to disk");
    add_common(synth, synth_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(difface::ExitCode::kConfig);
    }

    try {
        if (*train) {
            const auto rc = resolve(train_opts);
            const fs::path out = rc.get_string("output.dir");
            std::optional<fs::path> from;
            if (!resume.empty()) from = resume;
            const auto r = difface::cmd_train(rc, out, from);
            std::cout << "best checkpoint: " << r.best_checkpoint.string() << '\n'
                      << "last checkpoint: " << r.last_checkpoint.string() << '\n'
                      << "log: " << r.log.string() << '\n';
        } else if (*sample) {
            sample_req.style = sample_style;
            if (sample_seed < 0) throw difface::ConfigError("--seed must be non-negative");
            sample_req.seed = static_cast<std::uint64_t>(sample_seed);
            if (sample_req.steps < 0) throw difface::ConfigError("--steps must be >= 0");
            const auto stats = difface::cmd_sample(sample_req);
            std::cout << "wrote " << sample_req.out.string() << " (" << stats.evaluations
                      << " evaluations)\n";
        } else if (*evaluate) {
            std::optional<fs::path> mask;
            if (!mask_path.empty()) mask = mask_path;
            const auto r = difface::cmd_evaluate(pred_dir, gt_dir, mask, eval_out, controls);
            std::cout << r.aggregate.human_readable() << "sequences: " << r.per_sequence.size()
                      << ", skipped: " << r.skipped.size() << '\n';
        } else if (*ablate) {
            const auto rc = resolve(ablate_opts);
            const auto rows = difface::cmd_ablate(rc, grids, rc.get_string("output.dir"));
            int failed = 0;
            for (const auto& row : rows) failed += row.ok ? 0 : 1;
            std::cout << "ablation rows: " << rows.size() << ", failed: " << failed << '\n'
                      << "table: " << (fs::path(rc.get_string("output.dir")) / "ablation.csv").string()
                      << '\n';
        } else if (*synth) {
            const auto rc = resolve(synth_opts);
            const auto manifest = difface::cmd_synth_data(rc, rc.get_string("output.dir"));
            std::cout << "manifest: " << manifest.string() << '\n';
        }
    } catch (const difface::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(difface::ExitCode::kData);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
