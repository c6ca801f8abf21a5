#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "difface/config.hpp"
#include "difface/metrics.hpp"
#include "difface/trainer.hpp"

namespace difface {

// Dataset encoded and split into training examples.
struct PreparedData {
    MotionKind kind = MotionKind::kRig;
    double fps = 25.0;
    int output_dim = 0;
    int audio_dim = 0;
    std::vector<std::string> styles;  // training subjects; index = style id
    std::vector<Example> train, val, test_a, test_b;
    RegionMask mask;
};

// Loads (or generates) the configured dataset, encodes audio, aligns it to the
// motion frames and applies the split. Split "all" puts everything in train.
PreparedData prepare_data(const RunConfig& rc);

// Model and schedule rebuilt from a checkpoint's embedded config.
struct LoadedModel {
    std::unique_ptr<FaceDecoder> model;
    NoiseSchedule schedule;
    RunConfig config;
    std::vector<std::string> styles;
    bool diffusion_enabled = true;
    // Per-control range observed in training (rig data); exports are clamped to it.
    std::vector<double> export_min, export_max;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

// Trains with rc; writes config.json, train_log.csv, best.ckpt and last.ckpt into out_dir.
FitResult cmd_train(const RunConfig& rc, const std::filesystem::path& out_dir,
                    const std::optional<std::filesystem::path>& resume = std::nullopt);

struct SampleRequest {
    std::filesystem::path checkpoint;
    std::filesystem::path audio;
    std::filesystem::path out;  // ".csv" for rig CSV, otherwise the motion container
    std::optional<int> style;
    std::uint64_t seed = 0;
    int steps = 0;  // 0 = full schedule
};

// Writes the motion file plus `<out>.json` metadata (seed, steps, evaluations, style).
// Rig exports are clamped to the training range stored in the checkpoint.
SampleStats cmd_sample(const SampleRequest& req);

struct EvaluateResult {
    MetricReport aggregate;
    std::vector<std::pair<std::string, MetricReport>> per_sequence;
    std::vector<std::string> skipped;
};

// Pairs `<pred_dir>/<name>` (or `<pred_dir>/<style>/<name>`) with `<gt_dir>/<name>`.
// Writes per_sequence.json, aggregate.json, report.txt, skipped.txt and
// motion-statistics CSVs into out_dir. Throws DataError if every file was skipped.
EvaluateResult cmd_evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                            const std::optional<std::filesystem::path>& mask_path,
                            const std::filesystem::path& out_dir,
                            const std::vector<int>& graph_controls = {});

struct AblationRow {
    std::string grid;
    std::string setting;
    bool ok = false;
    double mve = 0.0, lve = 0.0, fdd = 0.0;
    std::optional<double> diversity;
    double minutes = 0.0;
    std::string message;
};

// Grids: steps, decoder, noise-encoder, diffusion, encoder. Each setting is
// trained and evaluated on the base config's data in its own directory;
// failures are recorded and the rest continue. Writes ablation.csv.
std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::vector<std::string>& grids,
                                    const std::filesystem::path& out_dir);

// Settings enumerated by a grid name as (label, key=value overrides).
std::vector<std::pair<std::string, std::vector<std::string>>> ablation_grid(const std::string& grid,
                                                                            const RunConfig& base);

// Samples every example of `subset` with its own style and scores it; with two
// or more styles, diversity is the mean over examples of the diversity across styles.
MetricReport score_model(const FaceDecoder& model, const NoiseSchedule& sched, bool diffusion_enabled,
                         const PreparedData& data, const std::vector<Example>& subset,
                         std::uint64_t seed, int steps);

// Writes the synthetic dataset as wav/motion/template files plus manifest.csv
// and mask.json. Returns the manifest path.
std::filesystem::path cmd_synth_data(const RunConfig& rc, const std::filesystem::path& out_dir);

}  // namespace difface
