#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "difface/errors.hpp"
#include "difface/motion_io.hpp"
#include "difface/seq_data.hpp"
#include "test_util.hpp"

namespace difface {
namespace {

using testing::TempDir;

// One-vertex template at (0.5, -1, 2).
Matrix one_vertex_template() {
    Matrix t(1, 3);
    t << 0.5, -1.0, 2.0;
    return t;
}

void write_obj(const std::filesystem::path& path, const Matrix& verts) {
    std::ofstream out(path);
    for (Eigen::Index v = 0; v < verts.rows(); ++v) {
        out << "v " << format_double(verts(v, 0)) << ' ' << format_double(verts(v, 1)) << ' '
            << format_double(verts(v, 2)) << '\n';
    }
    out << "f 1 1 1\n";
}

AudioClip clip_for_frames(int n_frames, double fps) {
    return testing::silent_clip(n_frames / fps);
}

ManifestEntry entry(const std::string& audio, const std::string& motion, const std::string& tmpl,
                    const std::string& subject, const std::string& sentence, double fps,
                    MotionRepr repr = MotionRepr::kDisplacement) {
    ManifestEntry e;
    e.audio_path = audio;
    e.motion_path = motion;
    e.template_path = tmpl;
    e.subject = subject;
    e.sentence = sentence;
    e.fps = fps;
    e.repr = repr;
    return e;
}

// ---- Vertex loading -----------------------------------------------------------

TEST(VertexDataset, AbsolutePositionsEqualToTemplateGiveZeroDisplacement) {
    TempDir dir("vtx_zero");
    const Matrix tmpl = one_vertex_template();
    write_obj(dir / "F1.obj", tmpl);
    AnimationSequence abs;
    abs.kind = MotionKind::kVertex;
    abs.fps = 25.0;
    abs.frames = tmpl.replicate(5, 1);
    write_motion(dir / "m.dfm", abs);
    write_wav(dir / "a.wav", clip_for_frames(5, 25.0));
    write_manifest(dir / "manifest.csv",
                   {entry("a.wav", "m.dfm", "F1.obj", "F1", "e01", 25.0, MotionRepr::kAbsolute)});

    const auto ds = load_vertex_dataset(dir.path(), dir / "manifest.csv");
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds[0].motion.kind, MotionKind::kVertex);
    EXPECT_EQ(ds[0].motion.frames.rows(), 5);
    EXPECT_TRUE(ds[0].motion.frames.isZero(0.0));
}

TEST(VertexDataset, TwoFrameToyFileSubtractsTemplate) {
    TempDir dir("vtx_toy");
    const Matrix tmpl = one_vertex_template();
    write_obj(dir / "F1.obj", tmpl);
    AnimationSequence abs;
    abs.kind = MotionKind::kVertex;
    abs.fps = 25.0;
    abs.frames.resize(2, 3);
    abs.frames.row(0) = tmpl.row(0);
    abs.frames.row(1) = tmpl.row(0);
    abs.frames(1, 0) += 1.0;
    write_motion(dir / "m.dfm", abs);
    write_wav(dir / "a.wav", clip_for_frames(2, 25.0));
    write_manifest(dir / "manifest.csv",
                   {entry("a.wav", "m.dfm", "F1.obj", "F1", "e01", 25.0, MotionRepr::kAbsolute)});

    const auto ds = load_vertex_dataset(dir.path(), dir / "manifest.csv");
    ASSERT_EQ(ds.size(), 1u);
    const Matrix& d = ds[0].motion.frames;
    EXPECT_TRUE(d.row(0).isZero(0.0));
    EXPECT_EQ(d(1, 0), 1.0);
    EXPECT_EQ(d(1, 1), 0.0);
    EXPECT_EQ(d(1, 2), 0.0);
}

TEST(VertexDataset, AddingTemplateBackRecoversPositions) {
    TempDir dir("vtx_roundtrip");
    std::mt19937_64 rng(3);
    const Matrix tmpl = testing::as_float_values(testing::random_matrix(4, 3, rng));
    write_obj(dir / "M1.obj", tmpl);
    AnimationSequence abs;
    abs.kind = MotionKind::kVertex;
    abs.fps = 30.0;
    abs.frames = testing::as_float_values(testing::random_matrix(6, 12, rng));
    write_motion(dir / "m.dfm", abs);
    write_wav(dir / "a.wav", clip_for_frames(6, 30.0));
    write_manifest(dir / "manifest.csv",
                   {entry("a.wav", "m.dfm", "M1.obj", "M1", "s1", 30.0, MotionRepr::kAbsolute)});

    const auto ds = load_vertex_dataset(dir.path(), dir / "manifest.csv");
    Matrix restored = ds[0].motion.frames;
    for (Eigen::Index v = 0; v < 4; ++v) {
        restored.middleCols(3 * v, 3).rowwise() += tmpl.row(v);
    }
    EXPECT_LT((restored - abs.frames).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(VertexDataset, BiwiLayoutManifestEnumeratesAllEntries) {
    TempDir dir("vtx_biwi");
    write_obj(dir / "t.obj", one_vertex_template());
    AnimationSequence seq;
    seq.kind = MotionKind::kVertex;
    seq.fps = 25.0;
    seq.frames = Matrix::Zero(2, 3);
    write_motion(dir / "m.dfm", seq);
    write_wav(dir / "a.wav", clip_for_frames(2, 25.0));

    const std::vector<std::string> subjects = {"F1", "F2", "F3", "F4", "F5", "F6", "F7",
                                               "F8", "M1", "M2", "M3", "M4", "M5", "M6"};
    std::vector<ManifestEntry> entries;
    for (const auto& s : subjects) {
        for (int k = 1; k <= 40; ++k) {
            for (const char* cond : {"e", "n"}) {
                char sent[8];
                std::snprintf(sent, sizeof(sent), "%s%02d", cond, k);
                entries.push_back(entry("a.wav", "m.dfm", "t.obj", s, sent, 25.0));
            }
        }
    }
    write_manifest(dir / "manifest.csv", entries);
    EXPECT_EQ(read_manifest(dir.path(), dir / "manifest.csv").size(), 1120u);
    const auto ds = load_vertex_dataset(dir.path(), dir / "manifest.csv");
    EXPECT_EQ(ds.size(), 1120u);
    std::set<std::pair<std::string, std::string>> unique;
    for (const auto& item : ds) unique.insert({item.motion.subject, item.motion.sentence});
    EXPECT_EQ(unique.size(), 1120u);
}

TEST(VertexDataset, MissingFileNamesTheEntry) {
    TempDir dir("vtx_missing");
    write_obj(dir / "t.obj", one_vertex_template());
    write_wav(dir / "a.wav", clip_for_frames(2, 25.0));
    write_manifest(dir / "manifest.csv", {entry("a.wav", "nope.dfm", "t.obj", "F7", "e13", 25.0)});
    try {
        load_vertex_dataset(dir.path(), dir / "manifest.csv");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("F7"), std::string::npos) << msg;
        EXPECT_NE(msg.find("e13"), std::string::npos) << msg;
        EXPECT_NE(msg.find("nope.dfm"), std::string::npos) << msg;
    }
}

TEST(VertexDataset, DurationMismatchBeyondOneFrameIsAlignmentError) {
    TempDir dir("vtx_align");
    write_obj(dir / "t.obj", one_vertex_template());
    AnimationSequence seq;
    seq.kind = MotionKind::kVertex;
    seq.fps = 25.0;
    seq.frames = Matrix::Zero(10, 3);
    write_motion(dir / "m.dfm", seq);
    write_wav(dir / "short.wav", clip_for_frames(8, 25.0));
    write_wav(dir / "close.wav", clip_for_frames(9, 25.0));
    write_manifest(dir / "bad.csv", {entry("short.wav", "m.dfm", "t.obj", "F1", "e01", 25.0)});
    write_manifest(dir / "ok.csv", {entry("close.wav", "m.dfm", "t.obj", "F1", "e01", 25.0)});
    EXPECT_THROW(load_vertex_dataset(dir.path(), dir / "bad.csv"), AlignmentError);
    EXPECT_NO_THROW(load_vertex_dataset(dir.path(), dir / "ok.csv"));
}

// ---- Rig loading ------------------------------------------------------------------

TEST(RigDataset, ArkitWidthSixtyFpsTenSeconds) {
    TempDir dir("rig_arkit");
    std::mt19937_64 rng(5);
    AnimationSequence seq;
    seq.kind = MotionKind::kRig;
    seq.fps = 60.0;
    seq.frames = testing::random_matrix(600, 52, rng, 0.0, 1.0);
    write_rig_csv(dir / "m.csv", seq);
    write_wav(dir / "a.wav", testing::silent_clip(10.0));
    write_manifest(dir / "manifest.csv", {entry("a.wav", "m.csv", "", "spk1", "take1", 60.0)});

    const auto ds = load_rig_dataset(dir.path(), dir / "manifest.csv");
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds[0].motion.kind, MotionKind::kRig);
    EXPECT_EQ(ds[0].motion.dims(), 52);
    EXPECT_EQ(ds[0].motion.num_frames(), 600);
    EXPECT_EQ(ds[0].motion.fps, 60.0);
    EXPECT_EQ(ds[0].motion.subject, "spk1");
    EXPECT_FALSE(ds[0].template_mesh.has_value());
    // Rig values are used as is: no template subtraction.
    EXPECT_EQ(ds[0].motion.frames, seq.frames);
}

TEST(RigDataset, SingleZeroFrameIsValid) {
    TempDir dir("rig_zero");
    AnimationSequence seq;
    seq.kind = MotionKind::kRig;
    seq.fps = 60.0;
    seq.frames = Matrix::Zero(1, 52);
    write_rig_csv(dir / "m.csv", seq);
    write_wav(dir / "a.wav", clip_for_frames(1, 60.0));
    write_manifest(dir / "manifest.csv", {entry("a.wav", "m.csv", "", "spk1", "take1", 60.0)});
    const auto ds = load_rig_dataset(dir.path(), dir / "manifest.csv");
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds[0].motion.num_frames(), 1);
    EXPECT_TRUE(ds[0].motion.frames.isZero(0.0));
}

TEST(RigDataset, RaggedRowIsFormatError) {
    TempDir dir("rig_ragged");
    {
        std::ofstream out(dir / "m.csv");
        out << "a,b,c\n0,0,0\n0,0\n";
    }
    write_wav(dir / "a.wav", clip_for_frames(2, 60.0));
    write_manifest(dir / "manifest.csv", {entry("a.wav", "m.csv", "", "spk1", "take1", 60.0)});
    EXPECT_THROW(read_rig_csv(dir / "m.csv"), DataError);
    EXPECT_THROW(load_rig_dataset(dir.path(), dir / "manifest.csv"), DataError);
}

TEST(RigDataset, NonFiniteValueIsValidationError) {
    TempDir dir("rig_nan");
    {
        std::ofstream out(dir / "m.csv");
        out << "a,b\n0,0\nnan,0\n";
    }
    write_wav(dir / "a.wav", clip_for_frames(2, 60.0));
    write_manifest(dir / "manifest.csv", {entry("a.wav", "m.csv", "", "spk1", "take1", 60.0)});
    try {
        load_rig_dataset(dir.path(), dir / "manifest.csv");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("take1"), std::string::npos) << e.what();
    }
}

TEST(RigDataset, MissingMotionFileNamesTheEntry) {
    TempDir dir("rig_missing");
    write_wav(dir / "a.wav", clip_for_frames(2, 60.0));
    write_manifest(dir / "manifest.csv", {entry("a.wav", "gone.csv", "", "spk9", "take4", 60.0)});
    try {
        load_rig_dataset(dir.path(), dir / "manifest.csv");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("spk9"), std::string::npos) << msg;
        EXPECT_NE(msg.find("gone.csv"), std::string::npos) << msg;
    }
}

// ---- Splits ------------------------------------------------------------------------

std::vector<SplitEntry> keys_for(const std::vector<std::string>& subjects, int sentences) {
    std::vector<SplitEntry> keys;
    for (const auto& s : subjects) {
        for (int k = 0; k < sentences; ++k) {
            char sent[16];
            std::snprintf(sent, sizeof(sent), "sentence%02d", k);
            keys.push_back({s, sent, std::nullopt});
        }
    }
    return keys;
}

void expect_disjoint(const DatasetSplit& split) {
    const std::vector<const std::vector<SplitEntry>*> parts = {&split.train, &split.val,
                                                               &split.test_a, &split.test_b};
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::set<std::pair<std::string, std::string>> a;
        for (const auto& e : *parts[i]) a.insert({e.subject, e.sentence});
        for (std::size_t j = i + 1; j < parts.size(); ++j) {
            for (const auto& e : *parts[j]) {
                EXPECT_FALSE(a.count({e.subject, e.sentence}))
                    << "split parts " << i << " and " << j << " share " << e.subject << "/"
                    << e.sentence;
            }
        }
    }
    std::set<std::string> train_subjects;
    for (const auto& e : split.train) train_subjects.insert(e.subject);
    for (const auto& e : split.test_b) EXPECT_FALSE(train_subjects.count(e.subject)) << e.subject;
}

TEST(Split, BiwiSizes) {
    const auto keys = keys_for({"F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "M1", "M2", "M3",
                                "M4", "M5", "M6"},
                               40);
    const auto split = make_split(keys, SplitPolicy::kBiwi);
    EXPECT_EQ(split.train.size(), 192u);
    EXPECT_EQ(split.val.size(), 24u);
    EXPECT_EQ(split.test_a.size(), 24u);
    EXPECT_EQ(split.test_b.size(), 192u);
    EXPECT_EQ(split.train_subjects().size(), 6u);
    expect_disjoint(split);
}

TEST(Split, VocasetSizes) {
    const auto keys =
        keys_for({"FaceTalk_170728_03272_TA", "FaceTalk_170904_00128_TA", "FaceTalk_170725_00137_TA",
                  "FaceTalk_170915_00223_TA", "FaceTalk_170811_03274_TA", "FaceTalk_170913_03279_TA",
                  "FaceTalk_170904_03276_TA", "FaceTalk_170912_03278_TA", "FaceTalk_170811_03275_TA",
                  "FaceTalk_170908_03277_TA", "FaceTalk_170809_00138_TA", "FaceTalk_170731_00024_TA"},
                 40);
    const auto split = make_split(keys, SplitPolicy::kVocaset);
    EXPECT_EQ(split.train.size(), 320u);
    EXPECT_EQ(split.val.size(), 40u);
    EXPECT_EQ(split.test_a.size(), 0u);
    EXPECT_EQ(split.test_b.size(), 320u);
    expect_disjoint(split);
}

TEST(Split, MultifaceSizes) {
    std::vector<std::string> subjects;
    for (int i = 0; i < 13; ++i) subjects.push_back("subject" + std::to_string(10 + i));
    const auto split = make_split(keys_for(subjects, 50), SplitPolicy::kMultiface);
    EXPECT_EQ(split.train.size(), 360u);
    EXPECT_EQ(split.val.size(), 45u);
    EXPECT_EQ(split.test_a.size(), 45u);
    EXPECT_EQ(split.test_b.size(), 180u);
    expect_disjoint(split);
}

TEST(Split, RatioOnTenSequences) {
    const auto split = make_split(keys_for({"A", "B"}, 5), SplitPolicy::kRatio801010);
    EXPECT_EQ(split.train.size(), 8u);
    EXPECT_EQ(split.val.size(), 1u);
    EXPECT_EQ(split.test_a.size(), 1u);
    EXPECT_EQ(split.test_b.size(), 0u);
    expect_disjoint(split);
    // Deterministic regardless of input order.
    auto shuffled = keys_for({"A", "B"}, 5);
    std::reverse(shuffled.begin(), shuffled.end());
    const auto again = make_split(shuffled, SplitPolicy::kRatio801010);
    EXPECT_EQ(again.train, split.train);
    EXPECT_EQ(again.val, split.val);
    EXPECT_EQ(again.test_a, split.test_a);
}

TEST(Split, DisjointOnSyntheticDatasetsOfVariousSizes) {
    for (int n : {3, 10, 17, 40}) {
        const auto ds = generate_synthetic_dataset(n, 2, 3, 11, {});
        expect_disjoint(make_split(ds, SplitPolicy::kRatio801010));
    }
}

TEST(Split, AbsentSubjectIsConfigError) {
    const auto keys = keys_for({"F1", "F2", "F3"}, 40);
    EXPECT_THROW(make_split(keys, SplitPolicy::kBiwi), ConfigError);
    EXPECT_THROW(make_split(keys_for({"a", "b"}, 50), SplitPolicy::kMultiface), ConfigError);
    EXPECT_THROW(split_policy_from_string("random"), ConfigError);
}

// ---- Synthetic data ------------------------------------------------------------------

TEST(Synthetic, SameSeedIsBitIdentical) {
    const auto a = generate_synthetic_dataset(4, 20, 30, 7);
    const auto b = generate_synthetic_dataset(4, 20, 30, 7);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].motion.frames, b[i].motion.frames);
        EXPECT_EQ(a[i].audio.samples, b[i].audio.samples);
        EXPECT_EQ(a[i].motion.subject, b[i].motion.subject);
    }
    const auto c = generate_synthetic_dataset(4, 20, 30, 8);
    EXPECT_NE(a[0].motion.frames, c[0].motion.frames);
}

TEST(Synthetic, SingleFrameSequences) {
    const auto ds = generate_synthetic_dataset(3, 1, 6, 1);
    ASSERT_EQ(ds.size(), 3u);
    for (const auto& item : ds) {
        EXPECT_EQ(item.motion.num_frames(), 1);
        EXPECT_NO_THROW(item.motion.validate());
        EXPECT_NO_THROW(check_alignment(item.audio, item.motion, "synthetic"));
    }
}

TEST(Synthetic, ShapeAndBounds) {
    const auto ds = generate_synthetic_dataset(8, 20, 30, 42);
    ASSERT_EQ(ds.size(), 8u);
    for (const auto& item : ds) {
        EXPECT_EQ(item.motion.frames.rows(), 20);
        EXPECT_EQ(item.motion.frames.cols(), 30);
        EXPECT_LE(item.motion.frames.cwiseAbs().maxCoeff(), 1.0);
        EXPECT_NO_THROW(check_alignment(item.audio, item.motion, "synthetic"));
    }
}

TEST(Synthetic, RejectsZeroCounts) {
    EXPECT_THROW(generate_synthetic_dataset(0, 1, 1, 0), ConfigError);
    EXPECT_THROW(generate_synthetic_dataset(1, 0, 1, 0), ConfigError);
    EXPECT_THROW(generate_synthetic_dataset(1, 1, 0, 0), ConfigError);
}

// ---- Containers -----------------------------------------------------------------------

TEST(MotionIo, ContainerRoundTripIsBitExact) {
    TempDir dir("io_container");
    std::mt19937_64 rng(9);
    AnimationSequence seq;
    seq.kind = MotionKind::kVertex;
    seq.fps = 29.97;
    seq.subject = "F3";
    seq.sentence = "e07";
    seq.frames = testing::as_float_values(testing::random_matrix(17, 21, rng, -5.0, 5.0));
    write_motion(dir / "m.dfm", seq);
    const auto back = read_motion(dir / "m.dfm");
    EXPECT_EQ(back.frames, seq.frames);
    EXPECT_EQ(back.kind, seq.kind);
    EXPECT_EQ(back.fps, seq.fps);
    EXPECT_EQ(back.subject, seq.subject);
    EXPECT_EQ(back.sentence, seq.sentence);
}

TEST(MotionIo, RigCsvRoundTripIsBitExact) {
    TempDir dir("io_csv");
    std::mt19937_64 rng(10);
    AnimationSequence seq;
    seq.kind = MotionKind::kRig;
    seq.frames = testing::random_matrix(9, 52, rng);
    seq.frames(0, 0) = 1e-300;
    seq.frames(1, 1) = -0.1;
    write_rig_csv(dir / "m.csv", seq);
    EXPECT_EQ(read_rig_csv(dir / "m.csv").frames, seq.frames);
}

TEST(MotionIo, CorruptContainerIsDataError) {
    TempDir dir("io_corrupt");
    {
        std::ofstream out(dir / "bad.dfm", std::ios::binary);
        out << "DFMO\x01";
    }
    EXPECT_THROW(read_motion(dir / "bad.dfm"), DataError);
    EXPECT_THROW(read_motion(dir / "absent.dfm"), DataError);
}

TEST(RegionMaskIo, JsonRoundTripAndValidation) {
    TempDir dir("mask");
    RegionMask m;
    m.id = "test-mask";
    m.lip = {0, 1, 2};
    m.upper_face = {7, 8};
    write_region_mask(dir / "mask.json", m);
    const auto back = read_region_mask(dir / "mask.json");
    EXPECT_EQ(back.lip, m.lip);
    EXPECT_EQ(back.upper_face, m.upper_face);
    EXPECT_NO_THROW(back.validate(9));
    EXPECT_THROW(back.validate(8), ConfigError);
    RegionMask empty;
    empty.upper_face = {0};
    EXPECT_THROW(empty.validate(4), ConfigError);
}

TEST(AnimationSequenceValidate, RejectsBadShapes) {
    AnimationSequence seq;
    seq.kind = MotionKind::kVertex;
    seq.frames = Matrix::Zero(2, 4);
    EXPECT_THROW(seq.validate(), DataError);
    seq.frames = Matrix::Zero(0, 3);
    EXPECT_THROW(seq.validate(), DataError);
    seq.frames = Matrix::Zero(2, 3);
    seq.frames(1, 2) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(seq.validate(), DataError);
    seq.frames(1, 2) = 0.0;
    seq.fps = 0.0;
    EXPECT_THROW(seq.validate(), DataError);
}

}  // namespace
}  // namespace difface
