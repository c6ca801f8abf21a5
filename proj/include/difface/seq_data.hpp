#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "difface/audio.hpp"

namespace difface {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class MotionKind : std::uint8_t {
    kVertex = 0,    // per-frame vertex displacements, D = 3V
    kRig = 1,       // per-frame rig-control / blendshape values, D = C
    kFeatures = 2,  // cached speech features (same container)
};

std::string to_string(MotionKind kind);
MotionKind motion_kind_from_string(const std::string& s);

// Number of values per vertex/control for the given kind (3 for vertex, else 1).
inline int element_width(MotionKind kind) { return kind == MotionKind::kVertex ? 3 : 1; }

// N x D temporal motion matrix with its provenance.
struct AnimationSequence {
    Matrix frames;
    MotionKind kind = MotionKind::kRig;
    double fps = 25.0;
    std::string subject;
    std::string sentence;

    Eigen::Index num_frames() const { return frames.rows(); }
    Eigen::Index dims() const { return frames.cols(); }
    // Number of vertices (vertex kind) or controls (rig kind).
    Eigen::Index num_elements() const { return frames.cols() / element_width(kind); }

    // Throws DataError when N < 1, fps <= 0, values are non-finite or D is not 3V for vertex data.
    void validate() const;
};

// Neutral-pose mesh, V x 3.
struct TemplateMesh {
    Matrix vertices;
    std::string topology;
};

// Lip / upper-face index sets over vertices (vertex kind) or controls (rig kind).
struct RegionMask {
    std::vector<int> lip;
    std::vector<int> upper_face;
    std::string id;

    // All indices must be < count and both sets non-empty.
    void validate(Eigen::Index count) const;
    // Mask with every index in both sets.
    static RegionMask full(Eigen::Index count);
};

RegionMask read_region_mask(const std::filesystem::path& path);
void write_region_mask(const std::filesystem::path& path, const RegionMask& mask);

// One paired item of a dataset. `template_mesh` is set for vertex data only.
struct DatasetItem {
    AudioClip audio;
    AnimationSequence motion;
    std::optional<TemplateMesh> template_mesh;
};

using Dataset = std::vector<DatasetItem>;

// (subject, sentence) plus the style condition for test-B style expansions.
struct SplitEntry {
    std::string subject;
    std::string sentence;
    std::optional<std::string> condition;

    bool operator==(const SplitEntry&) const = default;
};

struct DatasetSplit {
    std::vector<SplitEntry> train;
    std::vector<SplitEntry> val;
    std::vector<SplitEntry> test_a;
    std::vector<SplitEntry> test_b;

    // Training subjects in first-appearance order; index = style id.
    std::vector<std::string> train_subjects() const;
};

// ---------------------------------------------------------------------------
// Manifest

enum class MotionRepr { kDisplacement, kAbsolute };

struct ManifestEntry {
    std::filesystem::path audio_path;
    std::filesystem::path motion_path;
    std::filesystem::path template_path;  // empty for rig data
    std::string subject;
    std::string sentence;
    double fps = 0.0;
    MotionRepr repr = MotionRepr::kDisplacement;
};

// CSV with header audio_path,motion_path,template_path,subject,sentence,fps[,motion_repr].
// Relative paths are resolved against `root`.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root,
                                         const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries);

// Audio is resampled to 16 kHz; the audio duration must match N / fps within one frame.
Dataset load_vertex_dataset(const std::filesystem::path& root, const std::filesystem::path& manifest);
Dataset load_rig_dataset(const std::filesystem::path& root, const std::filesystem::path& manifest);

// Throws AlignmentError when |duration * fps - N| > 1.
void check_alignment(const AudioClip& clip, const AnimationSequence& seq, const std::string& what);

TemplateMesh read_template(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Splits

enum class SplitPolicy { kBiwi, kVocaset, kMultiface, kRatio801010 };

SplitPolicy split_policy_from_string(const std::string& s);

// Split by policy. Named policies follow the published subject/sentence layout
// and expand test_b by one condition per training subject.
DatasetSplit make_split(const Dataset& dataset, SplitPolicy policy);

// Same, operating on bare (subject, sentence) keys.
DatasetSplit make_split(const std::vector<SplitEntry>& keys, SplitPolicy policy);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticOptions {
    MotionKind kind = MotionKind::kRig;
    int subjects = 2;
    double fps = 25.0;
};

// Deterministic toy dataset: motion is a smooth subject-dependent function of
// a synthetic audio envelope, values in [-1, 1]. Subjects are assigned
// round-robin ("S0", "S1", ...).
Dataset generate_synthetic_dataset(int n_sequences, int n_frames, int dims, std::uint64_t seed,
                                   const SyntheticOptions& options = {});

// Lip = first third of the elements, upper face = last third.
RegionMask synthetic_region_mask(Eigen::Index num_elements);

}  // namespace difface
