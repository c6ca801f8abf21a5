#include "difface/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "difface/errors.hpp"
#include "difface/motion_io.hpp"

namespace difface {

namespace {

void check_pair(const AnimationSequence& pred, const AnimationSequence& gt) {
    if (pred.kind != gt.kind) throw ContractError("metric inputs have different kinds");
    if (pred.num_frames() != gt.num_frames() || pred.dims() != gt.dims()) {
        throw ContractError("metric inputs differ in shape: " + std::to_string(pred.num_frames()) +
                            "x" + std::to_string(pred.dims()) + " vs " +
                            std::to_string(gt.num_frames()) + "x" + std::to_string(gt.dims()));
    }
    if (pred.num_frames() < 1) throw ContractError("metric inputs have no frames");
    if (pred.dims() % element_width(pred.kind) != 0) {
        throw ContractError("vertex data width is not a multiple of 3");
    }
}

void check_indices(const std::vector<int>& idx, Eigen::Index count, const char* what) {
    if (idx.empty()) throw ConfigError(std::string("region mask has an empty ") + what + " set");
    for (int i : idx) {
        if (i < 0 || i >= count) {
            throw ConfigError(std::string("region mask ") + what + " index " + std::to_string(i) +
                              " out of range [0, " + std::to_string(count) + ")");
        }
    }
}

// Norm of element v in frame n of (a - b), or of a alone when b is null.
double element_norm(const Matrix& a, const Matrix* b, Eigen::Index n, Eigen::Index v, int w) {
    if (b == nullptr) return a.block(n, v * w, 1, w).norm();
    return (a.block(n, v * w, 1, w) - b->block(n, v * w, 1, w)).norm();
}

double masked_max_error(const AnimationSequence& pred, const AnimationSequence& gt,
                        const std::vector<int>* subset) {
    const int w = element_width(pred.kind);
    const Eigen::Index elems = pred.num_elements();
    double total = 0.0;
    for (Eigen::Index n = 0; n < pred.num_frames(); ++n) {
        double worst = 0.0;
        if (subset) {
            for (int v : *subset) worst = std::max(worst, element_norm(pred.frames, &gt.frames, n, v, w));
        } else {
            for (Eigen::Index v = 0; v < elems; ++v) {
                worst = std::max(worst, element_norm(pred.frames, &gt.frames, n, v, w));
            }
        }
        total += worst;
    }
    return total / static_cast<double>(pred.num_frames());
}

double magnitude_std(const Matrix& frames, Eigen::Index v, int w) {
    const Eigen::Index n = frames.rows();
    Eigen::VectorXd mag(n);
    for (Eigen::Index i = 0; i < n; ++i) mag(i) = element_norm(frames, nullptr, i, v, w);
    const double mean = mag.mean();
    return std::sqrt((mag.array() - mean).square().sum() / static_cast<double>(n));
}

}  // namespace

double mve(const AnimationSequence& pred, const AnimationSequence& gt) {
    check_pair(pred, gt);
    return masked_max_error(pred, gt, nullptr);
}

double lve(const AnimationSequence& pred, const AnimationSequence& gt, const RegionMask& mask) {
    check_pair(pred, gt);
    check_indices(mask.lip, pred.num_elements(), "lip");
    return masked_max_error(pred, gt, &mask.lip);
}

double fdd(const AnimationSequence& pred, const AnimationSequence& gt, const RegionMask& mask) {
    check_pair(pred, gt);
    if (pred.num_frames() < 2) throw DataError("fdd needs at least 2 frames to define dynamics");
    check_indices(mask.upper_face, pred.num_elements(), "upper_face");
    const int w = element_width(pred.kind);
    double total = 0.0;
    for (int v : mask.upper_face) {
        total += magnitude_std(gt.frames, v, w) - magnitude_std(pred.frames, v, w);
    }
    return total / static_cast<double>(mask.upper_face.size());
}

double diversity(const std::vector<AnimationSequence>& samples) {
    if (samples.size() < 2) throw ConfigError("diversity needs at least two samples");
    for (std::size_t i = 1; i < samples.size(); ++i) check_pair(samples[i], samples[0]);
    const int w = element_width(samples[0].kind);
    const Eigen::Index n = samples[0].num_frames();
    const Eigen::Index elems = samples[0].num_elements();
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            double d = 0.0;
            for (Eigen::Index f = 0; f < n; ++f) {
                for (Eigen::Index v = 0; v < elems; ++v) {
                    d += element_norm(samples[i].frames, &samples[j].frames, f, v, w);
                }
            }
            total += d / static_cast<double>(n * elems);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

MotionStats mean_motion_stats(const std::vector<AnimationSequence>& samples) {
    if (samples.empty()) throw ContractError("mean_motion_stats needs at least one sequence");
    const int w = element_width(samples[0].kind);
    const Eigen::Index elems = samples[0].num_elements();
    // Rows: displacement magnitudes of every consecutive frame pair, pooled over samples.
    std::vector<Eigen::RowVectorXd> steps;
    for (const auto& seq : samples) {
        if (seq.num_frames() < 2) throw DataError("mean_motion_stats needs at least 2 frames");
        if (seq.kind != samples[0].kind || seq.dims() != samples[0].dims()) {
            throw ContractError("mean_motion_stats inputs differ in shape");
        }
        for (Eigen::Index n = 0; n + 1 < seq.num_frames(); ++n) {
            Eigen::RowVectorXd d(elems);
            for (Eigen::Index v = 0; v < elems; ++v) {
                d(v) = (seq.frames.block(n + 1, v * w, 1, w) - seq.frames.block(n, v * w, 1, w)).norm();
            }
            steps.push_back(std::move(d));
        }
    }
    const double count = static_cast<double>(steps.size());
    MotionStats s;
    s.mean.assign(static_cast<std::size_t>(elems), 0.0);
    s.std.assign(static_cast<std::size_t>(elems), 0.0);
    for (Eigen::Index v = 0; v < elems; ++v) {
        double sum = 0.0;
        for (const auto& d : steps) sum += d(v);
        const double mean = sum / count;
        double var = 0.0;
        for (const auto& d : steps) var += (d(v) - mean) * (d(v) - mean);
        s.mean[static_cast<std::size_t>(v)] = mean;
        s.std[static_cast<std::size_t>(v)] = std::sqrt(var / count);
    }
    return s;
}

MotionStats mean_motion_stats(const AnimationSequence& seq) {
    return mean_motion_stats(std::vector<AnimationSequence>{seq});
}

std::vector<GraphRow> animation_graphs(const std::vector<AnimationSequence>& samples,
                                       const std::vector<std::string>& sample_ids,
                                       const std::vector<int>& controls,
                                       const AnimationSequence* gt) {
    if (sample_ids.size() != samples.size()) {
        throw ContractError("animation_graphs needs one id per sample");
    }
    std::vector<const AnimationSequence*> seqs;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        seqs.push_back(&samples[i]);
        ids.push_back(sample_ids[i]);
    }
    if (gt) {
        seqs.push_back(gt);
        ids.emplace_back("gt");
    }
    std::vector<GraphRow> rows;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        const auto& s = *seqs[i];
        if (s.kind != MotionKind::kRig) throw ContractError("animation graphs need rig data");
        for (int c : controls) {
            if (c < 0 || c >= s.dims()) {
                throw ContractError("control " + std::to_string(c) + " out of range");
            }
            for (Eigen::Index n = 0; n < s.num_frames(); ++n) {
                rows.push_back({ids[i], c, static_cast<int>(n), s.frames(n, c)});
            }
        }
    }
    return rows;
}

void write_motion_stats_csv(const std::filesystem::path& path, const MotionStats& stats) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "element,mean,std\n";
    for (std::size_t v = 0; v < stats.mean.size(); ++v) {
        out << v << ',' << format_double(stats.mean[v]) << ',' << format_double(stats.std[v]) << '\n';
    }
}

void write_animation_graphs_csv(const std::filesystem::path& path, const std::vector<GraphRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "sample_id,control,frame,value\n";
    for (const auto& r : rows) {
        out << r.sample_id << ',' << r.control << ',' << r.frame << ',' << format_double(r.value) << '\n';
    }
}

nlohmann::json MetricReport::to_json() const {
    const bool rig = kind == MotionKind::kRig;
    nlohmann::json raw = {{"mve", mve}, {"lve", lve}, {"fdd", fdd}, {"fdd_abs", fdd_abs()}};
    nlohmann::json scaled = {{"mve", mve / kMveScale},
                             {"lve", lve / kLveScale},
                             {"fdd", fdd / kFddScale},
                             {"fdd_abs", fdd_abs() / kFddScale}};
    if (diversity) {
        raw["diversity"] = *diversity;
        scaled["diversity"] = *diversity / kDiversityScale;
    } else {
        raw["diversity"] = nullptr;
        scaled["diversity"] = nullptr;
    }
    return {{"raw", raw},
            {"scaled", scaled},
            {"scale", {{"mve", kMveScale}, {"lve", kLveScale}, {"fdd", kFddScale}, {"diversity", kDiversityScale}}},
            {"names", {{"mve", rig ? "MBE" : "MVE"}, {"lve", rig ? "LBE" : "LVE"}}},
            {"mask_id", mask_id},
            {"dataset_id", dataset_id},
            {"kind", to_string(kind)}};
}

std::string MetricReport::human_readable() const {
    const bool rig = kind == MotionKind::kRig;
    std::ostringstream out;
    out << (rig ? "MBE" : "MVE") << " (x1e-3): " << format_double(mve / kMveScale) << '\n'
        << (rig ? "LBE" : "LVE") << " (x1e-4): " << format_double(lve / kLveScale) << '\n'
        << "FDD (x1e-5): " << format_double(fdd / kFddScale) << "  |FDD|: "
        << format_double(fdd_abs() / kFddScale) << '\n';
    if (diversity) out << "Diversity (x1e-3): " << format_double(*diversity / kDiversityScale) << '\n';
    if (!mask_id.empty()) out << "mask: " << mask_id << '\n';
    if (!dataset_id.empty()) out << "dataset: " << dataset_id << '\n';
    return out.str();
}

MetricReport evaluate_pair(const AnimationSequence& pred, const AnimationSequence& gt,
                           const RegionMask& mask, const std::string& dataset_id) {
    MetricReport r;
    r.kind = gt.kind;
    r.mve = mve(pred, gt);
    r.lve = lve(pred, gt, mask);
    r.fdd = fdd(pred, gt, mask);
    r.mask_id = mask.id;
    r.dataset_id = dataset_id;
    return r;
}

}  // namespace difface
