#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "difface/seq_data.hpp"

namespace difface {

// Mean over frames of the largest per-element L2 error (MVE for vertices, MBE for rigs).
double mve(const AnimationSequence& pred, const AnimationSequence& gt);

// mve restricted to mask.lip. Empty lip set -> ConfigError.
double lve(const AnimationSequence& pred, const AnimationSequence& gt, const RegionMask& mask);

// Mean over mask.upper_face of (std_gt - std_pred), where std is the population
// standard deviation over frames of the element's motion magnitude. N < 2 -> DataError.
double fdd(const AnimationSequence& pred, const AnimationSequence& gt, const RegionMask& mask);

// Mean over unordered pairs of the mean per-frame, per-element Euclidean distance.
// Fewer than two samples -> ConfigError.
double diversity(const std::vector<AnimationSequence>& samples);

// Per-element mean / std (population) over frames of ||x^{n+1}_v - x^n_v||.
struct MotionStats {
    std::vector<double> mean;
    std::vector<double> std;
};
MotionStats mean_motion_stats(const AnimationSequence& seq);
// Pools the displacement magnitudes of all samples.
MotionStats mean_motion_stats(const std::vector<AnimationSequence>& samples);

// Long-format rows (sample_id, control, frame, value). Rig kind only.
struct GraphRow {
    std::string sample_id;
    int control = 0;
    int frame = 0;
    double value = 0.0;
};
std::vector<GraphRow> animation_graphs(const std::vector<AnimationSequence>& samples,
                                       const std::vector<std::string>& sample_ids,
                                       const std::vector<int>& controls,
                                       const AnimationSequence* gt = nullptr);

void write_motion_stats_csv(const std::filesystem::path& path, const MotionStats& stats);
void write_animation_graphs_csv(const std::filesystem::path& path, const std::vector<GraphRow>& rows);

// Display scale factors used by the published tables (values are divided by these).
inline constexpr double kMveScale = 1e-3;
inline constexpr double kLveScale = 1e-4;
inline constexpr double kFddScale = 1e-5;
inline constexpr double kDiversityScale = 1e-3;

struct MetricReport {
    double mve = 0.0;
    double lve = 0.0;
    double fdd = 0.0;
    std::optional<double> diversity;
    std::string mask_id;
    std::string dataset_id;
    MotionKind kind = MotionKind::kVertex;

    double fdd_abs() const { return fdd < 0 ? -fdd : fdd; }
    // {"raw": {...}, "scaled": {...}, "scale": {...}, "mask_id", "dataset_id", "kind"}.
    nlohmann::json to_json() const;
    // Table-style text: MVE/MBE x10^-3, LVE/LBE x10^-4, FDD x10^-5, Diversity x10^-3.
    std::string human_readable() const;
};

MetricReport evaluate_pair(const AnimationSequence& pred, const AnimationSequence& gt,
                           const RegionMask& mask, const std::string& dataset_id = {});

}  // namespace difface
