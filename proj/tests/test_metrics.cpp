#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "difface/errors.hpp"
#include "difface/metrics.hpp"
#include "metric_oracle.hpp"
#include "test_util.hpp"

namespace difface {
namespace {

AnimationSequence seq_of(const Matrix& frames, MotionKind kind = MotionKind::kVertex) {
    AnimationSequence s;
    s.frames = frames;
    s.kind = kind;
    return s;
}

RegionMask mask_of(std::vector<int> lip, std::vector<int> upper) {
    RegionMask m;
    m.lip = std::move(lip);
    m.upper_face = std::move(upper);
    m.id = "test";
    return m;
}

// ---- Hand cases -----------------------------------------------------------------------

TEST(Mve, HandCases) {
    const auto gt = seq_of(Matrix::Zero(1, 6));
    auto pred = gt;
    EXPECT_EQ(mve(pred, gt), 0.0);
    pred.frames << 1, 0, 0, 0, 2, 0;
    EXPECT_DOUBLE_EQ(mve(pred, gt), 2.0);

    const double c = 0.7;
    const auto gt2 = seq_of(Matrix::Zero(2, 6));
    auto pred2 = gt2;
    pred2.frames.block(1, 3, 1, 3).setConstant(c);
    EXPECT_NEAR(mve(pred2, gt2), c * std::sqrt(3.0) / 2.0, 1e-15);
}

TEST(Mve, ShapeAndKindMismatch) {
    EXPECT_THROW(mve(seq_of(Matrix::Zero(2, 6)), seq_of(Matrix::Zero(3, 6))), ContractError);
    EXPECT_THROW(mve(seq_of(Matrix::Zero(2, 6), MotionKind::kRig), seq_of(Matrix::Zero(2, 6))),
                 ContractError);
}

TEST(Lve, HandCases) {
    const auto gt = seq_of(Matrix::Zero(1, 9));
    auto pred = gt;
    const auto mask = mask_of({0}, {2});
    EXPECT_EQ(lve(pred, gt, mask), 0.0);
    pred.frames(0, 4) = 10.0;  // vertex 1 is not a lip vertex
    EXPECT_EQ(lve(pred, gt, mask), 0.0);
    pred.frames(0, 0) = 3.0;
    pred.frames(0, 1) = 4.0;
    EXPECT_DOUBLE_EQ(lve(pred, gt, mask), 5.0);
    EXPECT_THROW(lve(pred, gt, mask_of({}, {2})), ConfigError);
    EXPECT_THROW(lve(pred, gt, mask_of({3}, {2})), ConfigError);
}

TEST(Fdd, HandCases) {
    Matrix g(2, 1);
    g << 0, 2;
    const auto gt = seq_of(g, MotionKind::kRig);
    const auto pred = seq_of(Matrix::Zero(2, 1), MotionKind::kRig);
    const auto mask = mask_of({0}, {0});
    EXPECT_DOUBLE_EQ(fdd(pred, gt, mask), 1.0);
    EXPECT_EQ(fdd(gt, gt, mask), 0.0);

    Matrix osc(6, 3);
    for (int n = 0; n < 6; ++n) osc.row(n) << std::sin(n), std::cos(2 * n), 0.1 * n;
    const auto constant = seq_of(Matrix::Constant(6, 3, 0.5));
    EXPECT_GT(fdd(constant, seq_of(osc), mask_of({0}, {0})), 0.0);
    EXPECT_THROW(fdd(seq_of(Matrix::Zero(1, 3)), seq_of(Matrix::Zero(1, 3)), mask_of({0}, {0})),
                 DataError);
}

TEST(Diversity, HandCases) {
    std::vector<AnimationSequence> s;
    for (double x : {0.0, 1.0, 2.0}) {
        Matrix f(1, 3);
        f << x, 0, 0;
        s.push_back(seq_of(f));
    }
    EXPECT_EQ(diversity(s), 4.0 / 3.0);
    const std::vector<AnimationSequence> same(3, s[1]);
    EXPECT_EQ(diversity(same), 0.0);
    EXPECT_THROW(diversity({s[0]}), ConfigError);
}

TEST(Diversity, CopiesPlusOutlierDecreaseWithK) {
    std::mt19937_64 rng(3);
    const auto base = seq_of(testing::random_matrix(4, 6, rng));
    const auto outlier = seq_of(testing::random_matrix(4, 6, rng));
    double prev = HUGE_VAL;
    for (int k = 1; k <= 6; ++k) {
        std::vector<AnimationSequence> s(static_cast<std::size_t>(k), base);
        s.push_back(outlier);
        const double d = diversity(s);
        EXPECT_GT(d, 0.0);
        EXPECT_LT(d, prev);
        prev = d;
    }
}

TEST(MotionStats, HandCases) {
    const auto still = mean_motion_stats(seq_of(Matrix::Constant(5, 6, 0.3)));
    for (double m : still.mean) EXPECT_EQ(m, 0.0);
    Matrix walk(4, 3);
    for (int n = 0; n < 4; ++n) walk.row(n) << n, 0, 0;
    const auto s = mean_motion_stats(seq_of(walk));
    ASSERT_EQ(s.mean.size(), 1u);
    EXPECT_DOUBLE_EQ(s.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(s.std[0], 0.0);
    EXPECT_THROW(mean_motion_stats(seq_of(Matrix::Zero(1, 3))), DataError);
}

// ---- Properties ----------------------------------------------------------------------

struct Instance {
    AnimationSequence pred, gt;
    RegionMask mask;
    std::vector<AnimationSequence> samples;
};

Instance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> kind_pick(0, 1), frames(2, 8), verts(1, 6), controls(1, 10),
        nsamples(2, 5);
    const MotionKind kind = kind_pick(rng) ? MotionKind::kVertex : MotionKind::kRig;
    const int n = frames(rng);
    const int e = kind == MotionKind::kVertex ? verts(rng) : controls(rng);
    const int d = e * element_width(kind);
    Instance in;
    in.pred = seq_of(testing::random_matrix(n, d, rng), kind);
    in.gt = seq_of(testing::random_matrix(n, d, rng), kind);
    std::uniform_int_distribution<int> idx(0, e - 1);
    for (int k = 0; k < 1 + e / 2; ++k) {
        in.mask.lip.push_back(idx(rng));
        in.mask.upper_face.push_back(idx(rng));
    }
    const int m = nsamples(rng);
    for (int k = 0; k < m; ++k) in.samples.push_back(seq_of(testing::random_matrix(n, d, rng), kind));
    return in;
}

TEST(MetricProperties, MatchBruteForceOracle) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 50; ++i) {
        const auto in = random_instance(rng);
        EXPECT_NEAR(mve(in.pred, in.gt), oracle::mve(in.pred, in.gt), 1e-9);
        EXPECT_NEAR(lve(in.pred, in.gt, in.mask), oracle::lve(in.pred, in.gt, in.mask), 1e-9);
        EXPECT_NEAR(fdd(in.pred, in.gt, in.mask), oracle::fdd(in.pred, in.gt, in.mask), 1e-9);
        EXPECT_NEAR(diversity(in.samples), oracle::diversity(in.samples), 1e-9);
        const auto stats = mean_motion_stats(in.samples);
        const auto ref = oracle::motion_stats(in.samples);
        ASSERT_EQ(stats.mean.size(), ref.size());
        for (std::size_t v = 0; v < ref.size(); ++v) {
            EXPECT_NEAR(stats.mean[v], ref[v].first, 1e-9);
            EXPECT_NEAR(stats.std[v], ref[v].second, 1e-9);
        }
    }
}

TEST(MetricProperties, SymmetryAndFullMask) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 20; ++i) {
        auto in = random_instance(rng);
        EXPECT_EQ(mve(in.pred, in.gt), mve(in.gt, in.pred));
        const auto full = RegionMask::full(in.pred.num_elements());
        EXPECT_EQ(lve(in.pred, in.gt, full), mve(in.pred, in.gt));
        EXPECT_NEAR(fdd(in.pred, in.gt, in.mask), -fdd(in.gt, in.pred, in.mask), 1e-15);
        const double d = diversity(in.samples);
        std::reverse(in.samples.begin(), in.samples.end());
        EXPECT_NEAR(diversity(in.samples), d, 1e-12);
    }
}

TEST(MetricProperties, Homogeneity) {
    std::mt19937_64 rng(8);
    const auto in = random_instance(rng);
    for (double k : {0.5, 2.0, 10.0}) {
        auto scaled = in.samples;
        for (auto& s : scaled) s.frames *= k;
        EXPECT_NEAR(diversity(scaled), k * diversity(in.samples), 1e-12);
        auto p = in.pred, g = in.gt;
        p.frames *= k;
        g.frames *= k;
        EXPECT_NEAR(mve(p, g), k * mve(in.pred, in.gt), 1e-12);
    }
}

// ---- Graphs and reports -------------------------------------------------------------------

TEST(AnimationGraphs, RowCountsAndTags) {
    std::mt19937_64 rng(9);
    const auto a = seq_of(testing::random_matrix(3, 5, rng), MotionKind::kRig);
    EXPECT_EQ(animation_graphs({a}, {"s0"}, {2}).size(), 3u);
    const auto b = seq_of(testing::random_matrix(3, 5, rng), MotionKind::kRig);
    const auto rows = animation_graphs({a, b}, {"s0", "s1"}, {0, 4}, &a);
    EXPECT_EQ(rows.size(), 3u * 2u * 3u);
    int gt_rows = 0;
    for (const auto& r : rows) {
        if (r.sample_id == "gt") {
            ++gt_rows;
            EXPECT_EQ(r.value, a.frames(r.frame, r.control));
        }
    }
    EXPECT_EQ(gt_rows, 6);
    EXPECT_THROW(animation_graphs({seq_of(Matrix::Zero(3, 3))}, {"v"}, {0}), ContractError);
    EXPECT_THROW(animation_graphs({a}, {"s0"}, {5}), ContractError);
}

TEST(MetricReport, ScalesAndNames) {
    MetricReport r;
    r.mve = 2e-3;
    r.lve = 3e-4;
    r.fdd = -4e-5;
    r.diversity = 5e-3;
    r.kind = MotionKind::kRig;
    const auto j = r.to_json();
    EXPECT_NEAR(j["scaled"]["mve"].get<double>(), 2.0, 1e-12);
    EXPECT_NEAR(j["scaled"]["lve"].get<double>(), 3.0, 1e-12);
    EXPECT_NEAR(j["scaled"]["fdd"].get<double>(), -4.0, 1e-12);
    EXPECT_NEAR(j["scaled"]["diversity"].get<double>(), 5.0, 1e-12);
    EXPECT_EQ(j["raw"]["mve"].get<double>(), 2e-3);
    EXPECT_EQ(r.fdd_abs(), 4e-5);
    const auto text = r.human_readable();
    EXPECT_NE(text.find("MBE"), std::string::npos) << text;
    EXPECT_NE(text.find("LBE"), std::string::npos) << text;
    r.kind = MotionKind::kVertex;
    EXPECT_NE(r.human_readable().find("MVE"), std::string::npos);
}

TEST(MetricReport, CsvWriters) {
    testing::TempDir dir("metrics_csv");
    MotionStats s{{0.5, 1.0}, {0.0, 0.25}};
    write_motion_stats_csv(dir / "stats.csv", s);
    std::ifstream in(dir / "stats.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), "element,mean,std\n0,0.5,0\n1,1,0.25\n");
}

}  // namespace
}  // namespace difface
