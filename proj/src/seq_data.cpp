#include "difface/seq_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "difface/errors.hpp"
#include "difface/motion_io.hpp"

namespace difface {

namespace fs = std::filesystem;

std::string to_string(MotionKind kind) {
    switch (kind) {
        case MotionKind::kVertex:
            return "vertex";
        case MotionKind::kRig:
            return "rig";
        case MotionKind::kFeatures:
            return "features";
    }
    return "unknown";
}

MotionKind motion_kind_from_string(const std::string& s) {
    if (s == "vertex") return MotionKind::kVertex;
    if (s == "rig") return MotionKind::kRig;
    if (s == "features") return MotionKind::kFeatures;
    throw ConfigError("unknown motion kind '" + s + "' (expected vertex or rig)");
}

void AnimationSequence::validate() const {
    const std::string who = "sequence " + subject + "/" + sentence;
    if (frames.rows() < 1) throw DataError(who + ": needs at least one frame");
    if (frames.cols() < 1) throw DataError(who + ": needs at least one value per frame");
    if (!(fps > 0.0)) throw DataError(who + ": fps must be positive");
    if (kind == MotionKind::kVertex && frames.cols() % 3 != 0) {
        throw DataError(who + ": vertex data width " + std::to_string(frames.cols()) +
                        " is not a multiple of 3");
    }
    if (!frames.allFinite()) throw DataError(who + ": contains non-finite values");
}

// ---------------------------------------------------------------------------
// Region masks

void RegionMask::validate(Eigen::Index count) const {
    auto check = [&](const std::vector<int>& idx, const char* name) {
        if (idx.empty()) throw ConfigError(std::string("region mask '") + name + "' is empty");
        for (int i : idx) {
            if (i < 0 || i >= count) {
                throw ConfigError(std::string("region mask '") + name + "' index " +
                                  std::to_string(i) + " out of range [0, " +
                                  std::to_string(count) + ")");
            }
        }
    };
    check(lip, "lip");
    check(upper_face, "upper_face");
}

RegionMask RegionMask::full(Eigen::Index count) {
    RegionMask m;
    m.lip.resize(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) m.lip[static_cast<std::size_t>(i)] = static_cast<int>(i);
    m.upper_face = m.lip;
    m.id = "full";
    return m;
}

RegionMask read_region_mask(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open region mask '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed region mask '" + path.string() + "': " + e.what());
    }
    if (!j.contains("lip") || !j.contains("upper_face")) {
        throw DataError("region mask '" + path.string() + "' needs 'lip' and 'upper_face' arrays");
    }
    RegionMask m;
    try {
        m.lip = j.at("lip").get<std::vector<int>>();
        m.upper_face = j.at("upper_face").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("region mask '" + path.string() + "': " + e.what());
    }
    m.id = j.value("id", path.stem().string());
    return m;
}

void write_region_mask(const fs::path& path, const RegionMask& mask) {
    nlohmann::json j;
    j["id"] = mask.id;
    j["lip"] = mask.lip;
    j["upper_face"] = mask.upper_face;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write region mask '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

std::vector<std::string> DatasetSplit::train_subjects() const {
    std::vector<std::string> out;
    for (const auto& e : train) {
        if (std::find(out.begin(), out.end(), e.subject) == out.end()) out.push_back(e.subject);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

fs::path resolve(const fs::path& root, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : root / path;
}

std::string entry_name(std::size_t index, const ManifestEntry& e) {
    return "manifest entry " + std::to_string(index + 1) + " (subject " + e.subject +
           ", sentence " + e.sentence + ")";
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const fs::path& root, const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open manifest '" + manifest.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest '" + manifest.string() + "' is empty");
    const auto header = split_fields(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* required : {"audio_path", "motion_path", "subject", "sentence", "fps"}) {
        if (!col.count(required)) {
            throw DataError("manifest '" + manifest.string() + "' lacks column '" + required + "'");
        }
    }
    std::vector<ManifestEntry> entries;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_fields(line);
        if (f.size() != header.size()) {
            throw DataError("manifest '" + manifest.string() + "' line " + std::to_string(line_no) +
                            " has " + std::to_string(f.size()) + " fields, expected " +
                            std::to_string(header.size()));
        }
        ManifestEntry e;
        e.audio_path = resolve(root, f[col["audio_path"]]);
        e.motion_path = resolve(root, f[col["motion_path"]]);
        if (col.count("template_path")) e.template_path = resolve(root, f[col["template_path"]]);
        e.subject = f[col["subject"]];
        e.sentence = f[col["sentence"]];
        try {
            e.fps = std::stod(f[col["fps"]]);
        } catch (const std::exception&) {
            throw DataError("manifest '" + manifest.string() + "' line " +
                            std::to_string(line_no) + ": bad fps '" + f[col["fps"]] + "'");
        }
        if (col.count("motion_repr")) {
            const auto& r = f[col["motion_repr"]];
            if (r == "absolute") {
                e.repr = MotionRepr::kAbsolute;
            } else if (r.empty() || r == "displacement") {
                e.repr = MotionRepr::kDisplacement;
            } else {
                throw DataError("manifest line " + std::to_string(line_no) +
                                ": motion_repr must be absolute or displacement");
            }
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const fs::path& manifest, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(manifest);
    if (!out) throw DataError("cannot write manifest '" + manifest.string() + "'");
    out << "audio_path,motion_path,template_path,subject,sentence,fps,motion_repr\n";
    for (const auto& e : entries) {
        out << e.audio_path.generic_string() << ',' << e.motion_path.generic_string() << ','
            << e.template_path.generic_string() << ',' << e.subject << ',' << e.sentence << ','
            << format_double(e.fps) << ','
            << (e.repr == MotionRepr::kAbsolute ? "absolute" : "displacement") << '\n';
    }
}

void check_alignment(const AudioClip& clip, const AnimationSequence& seq, const std::string& what) {
    const double expected = clip.duration() * seq.fps;
    const double n = static_cast<double>(seq.num_frames());
    if (std::abs(expected - n) > 1.0) {
        std::ostringstream msg;
        msg << what << ": audio lasts " << clip.duration() << " s (" << expected
            << " frames at " << seq.fps << " fps) but motion has " << seq.num_frames()
            << " frames";
        throw AlignmentError(msg.str());
    }
}

TemplateMesh read_template(const fs::path& path) {
    TemplateMesh mesh;
    mesh.topology = path.stem().string();
    if (path.extension() == ".obj") {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open template '" + path.string() + "'");
        std::vector<Eigen::Vector3d> verts;
        std::string line;
        while (std::getline(in, line)) {
            if (line.size() < 2 || line[0] != 'v' || line[1] != ' ') continue;
            std::istringstream ss(line.substr(2));
            Eigen::Vector3d v;
            if (!(ss >> v.x() >> v.y() >> v.z())) {
                throw DataError("malformed vertex line in '" + path.string() + "'");
            }
            verts.push_back(v);
        }
        mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
        for (std::size_t i = 0; i < verts.size(); ++i) {
            mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
        }
    } else {
        const auto seq = read_motion(path);
        if (seq.frames.cols() == 3) {
            mesh.vertices = seq.frames;
        } else if (seq.frames.rows() == 1 && seq.frames.cols() % 3 == 0) {
            // Single row of consecutive xyz triples.
            mesh.vertices.resize(seq.frames.cols() / 3, 3);
            for (Eigen::Index v = 0; v < mesh.vertices.rows(); ++v) {
                mesh.vertices.row(v) = seq.frames.block(0, 3 * v, 1, 3);
            }
        } else {
            throw DataError("template '" + path.string() + "' must be V x 3 or 1 x 3V");
        }
    }
    if (mesh.vertices.rows() == 0) throw DataError("template '" + path.string() + "' has no vertices");
    if (!mesh.vertices.allFinite()) throw DataError("template '" + path.string() + "' is non-finite");
    return mesh;
}

Dataset load_vertex_dataset(const fs::path& root, const fs::path& manifest) {
    const auto entries = read_manifest(root, manifest);
    Dataset out;
    out.reserve(entries.size());
    std::map<fs::path, TemplateMesh> templates;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto name = entry_name(i, e);
        for (const auto& p : {e.audio_path, e.motion_path}) {
            if (!fs::exists(p)) throw DataError(name + ": missing file '" + p.string() + "'");
        }
        if (e.template_path.empty()) throw DataError(name + ": vertex data needs a template_path");
        if (!fs::exists(e.template_path)) {
            throw DataError(name + ": missing file '" + e.template_path.string() + "'");
        }
        auto it = templates.find(e.template_path);
        if (it == templates.end()) {
            it = templates.emplace(e.template_path, read_template(e.template_path)).first;
        }
        const TemplateMesh& mesh = it->second;

        DatasetItem item;
        item.audio = read_wav(e.audio_path);
        item.motion = read_motion_any(e.motion_path);
        item.motion.kind = MotionKind::kVertex;
        if (e.fps > 0) item.motion.fps = e.fps;
        item.motion.subject = e.subject;
        item.motion.sentence = e.sentence;
        const Eigen::Index d = 3 * mesh.vertices.rows();
        if (item.motion.frames.cols() != d) {
            throw DataError(name + ": motion width " + std::to_string(item.motion.frames.cols()) +
                            " does not match template 3V = " + std::to_string(d));
        }
        if (e.repr == MotionRepr::kAbsolute) {
            RowVector flat(d);
            for (Eigen::Index v = 0; v < mesh.vertices.rows(); ++v) {
                flat.segment(3 * v, 3) = mesh.vertices.row(v);
            }
            item.motion.frames.rowwise() -= flat;
        }
        item.motion.validate();
        check_alignment(item.audio, item.motion, name);
        item.template_mesh = mesh;
        out.push_back(std::move(item));
    }
    return out;
}

Dataset load_rig_dataset(const fs::path& root, const fs::path& manifest) {
    const auto entries = read_manifest(root, manifest);
    Dataset out;
    out.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto name = entry_name(i, e);
        for (const auto& p : {e.audio_path, e.motion_path}) {
            if (!fs::exists(p)) throw DataError(name + ": missing file '" + p.string() + "'");
        }
        DatasetItem item;
        item.audio = read_wav(e.audio_path);
        try {
            item.motion = read_motion_any(e.motion_path);
        } catch (const DataError& err) {
            throw DataError(name + ": " + err.what());
        }
        item.motion.kind = MotionKind::kRig;
        if (e.fps > 0) item.motion.fps = e.fps;
        item.motion.subject = e.subject;
        item.motion.sentence = e.sentence;
        try {
            item.motion.validate();
        } catch (const DataError& err) {
            throw DataError(name + ": " + err.what());
        }
        item.motion.kind = MotionKind::kRig;
        if (e.fps > 0) item.motion.fps = e.fps;
        item.motion.subject = e.subject;
        item.motion.sentence = e.sentence;
        try {
            item.motion.validate();
        } catch (const DataError& err) {
            throw DataError(name + ": " + err.what());
        }
        check_alignment(item.audio, item.motion, name);
        out.push_back(std::move(item));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splits

namespace {

struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct NamedLayout {
    std::string name;
    std::vector<std::string> seen;         // training subjects
    std::vector<std::string> unseen_val;   // validation-only subjects
    std::vector<std::string> unseen_test;  // test-B subjects
    std::size_t positional_seen = 0;       // used when `seen` is empty
    std::size_t positional_unseen = 0;
    Range train, val_seen, test_a, val_unseen, test_b;
};

NamedLayout layout_for(SplitPolicy policy) {
    NamedLayout l;
    switch (policy) {
        case SplitPolicy::kBiwi:
            l.name = "biwi";
            l.seen = {"F2", "F3", "F4", "M3", "M4", "M5"};
            l.unseen_test = {"F1", "F5", "F6", "F7", "F8", "M1", "M2", "M6"};
            l.train = {0, 32};
            l.val_seen = {32, 36};
            l.test_a = {36, 40};
            l.test_b = {36, 40};
            break;
        case SplitPolicy::kVocaset:
            l.name = "vocaset";
            l.seen = {"FaceTalk_170728_03272_TA", "FaceTalk_170904_00128_TA",
                      "FaceTalk_170725_00137_TA", "FaceTalk_170915_00223_TA",
                      "FaceTalk_170811_03274_TA", "FaceTalk_170913_03279_TA",
                      "FaceTalk_170904_03276_TA", "FaceTalk_170912_03278_TA"};
            l.unseen_val = {"FaceTalk_170811_03275_TA", "FaceTalk_170908_03277_TA"};
            l.unseen_test = {"FaceTalk_170809_00138_TA", "FaceTalk_170731_00024_TA"};
            l.train = {0, 40};
            l.val_unseen = {20, 40};
            l.test_b = {20, 40};
            break;
        case SplitPolicy::kMultiface:
            l.name = "multiface";
            l.positional_seen = 9;
            l.positional_unseen = 4;
            l.train = {0, 40};
            l.val_seen = {40, 45};
            l.test_a = {45, 50};
            l.test_b = {45, 50};
            break;
        case SplitPolicy::kRatio801010:
            break;
    }
    return l;
}

DatasetSplit split_named(const std::vector<SplitEntry>& keys, SplitPolicy policy) {
    NamedLayout l = layout_for(policy);
    std::map<std::string, std::vector<std::string>> by_subject;
    for (const auto& k : keys) by_subject[k.subject].push_back(k.sentence);
    for (auto& [s, sentences] : by_subject) {
        std::sort(sentences.begin(), sentences.end());
        sentences.erase(std::unique(sentences.begin(), sentences.end()), sentences.end());
    }

    if (l.seen.empty()) {
        if (by_subject.size() < l.positional_seen + l.positional_unseen) {
            throw ConfigError(l.name + " split needs " +
                              std::to_string(l.positional_seen + l.positional_unseen) +
                              " subjects, dataset has " + std::to_string(by_subject.size()));
        }
        auto it = by_subject.begin();
        for (std::size_t i = 0; i < l.positional_seen; ++i, ++it) l.seen.push_back(it->first);
        for (std::size_t i = 0; i < l.positional_unseen; ++i, ++it) l.unseen_test.push_back(it->first);
    }

    auto sentences_of = [&](const std::string& subject, Range r) -> const std::vector<std::string>& {
        auto it = by_subject.find(subject);
        if (it == by_subject.end()) {
            throw ConfigError(l.name + " split references subject '" + subject +
                              "' which is absent from the dataset");
        }
        if (it->second.size() < r.end) {
            throw ConfigError(l.name + " split needs " + std::to_string(r.end) +
                              " sentences for subject '" + subject + "', dataset has " +
                              std::to_string(it->second.size()));
        }
        return it->second;
    };
    auto take = [&](std::vector<SplitEntry>& dst, const std::vector<std::string>& subjects,
                    Range r, const std::vector<std::string>* conditions) {
        if (r.end == r.begin) return;
        for (const auto& s : subjects) {
            const auto& sentences = sentences_of(s, r);
            for (std::size_t i = r.begin; i < r.end; ++i) {
                if (conditions) {
                    for (const auto& c : *conditions) dst.push_back({s, sentences[i], c});
                } else {
                    dst.push_back({s, sentences[i], std::nullopt});
                }
            }
        }
    };

    DatasetSplit split;
    take(split.train, l.seen, l.train, nullptr);
    take(split.val, l.seen, l.val_seen, nullptr);
    take(split.val, l.unseen_val, l.val_unseen, nullptr);
    take(split.test_a, l.seen, l.test_a, nullptr);
    take(split.test_b, l.unseen_test, l.test_b, &l.seen);
    return split;
}

DatasetSplit split_ratio(std::vector<SplitEntry> keys) {
    std::sort(keys.begin(), keys.end(), [](const SplitEntry& a, const SplitEntry& b) {
        return std::tie(a.subject, a.sentence) < std::tie(b.subject, b.sentence);
    });
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    const std::size_t n = keys.size();
    const auto tenth = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    const std::size_t n_train = n - 2 * tenth;
    DatasetSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        auto e = keys[i];
        e.condition.reset();
        if (i < n_train) {
            split.train.push_back(e);
        } else if (i < n_train + tenth) {
            split.val.push_back(e);
        } else {
            split.test_a.push_back(e);
        }
    }
    return split;
}

}  // namespace

SplitPolicy split_policy_from_string(const std::string& s) {
    if (s == "biwi") return SplitPolicy::kBiwi;
    if (s == "vocaset") return SplitPolicy::kVocaset;
    if (s == "multiface") return SplitPolicy::kMultiface;
    if (s == "ratio-80-10-10") return SplitPolicy::kRatio801010;
    throw ConfigError("unknown split policy '" + s +
                      "' (expected biwi, vocaset, multiface or ratio-80-10-10)");
}

DatasetSplit make_split(const std::vector<SplitEntry>& keys, SplitPolicy policy) {
    if (policy == SplitPolicy::kRatio801010) return split_ratio(keys);
    return split_named(keys, policy);
}

DatasetSplit make_split(const Dataset& dataset, SplitPolicy policy) {
    std::vector<SplitEntry> keys;
    keys.reserve(dataset.size());
    for (const auto& item : dataset) keys.push_back({item.motion.subject, item.motion.sentence, {}});
    return make_split(keys, policy);
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

struct Envelope {
    double f1, f2, p1, p2;
    double operator()(double tau) const {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        return 0.5 + 0.3 * std::sin(two_pi * f1 * tau + p1) + 0.2 * std::sin(two_pi * f2 * tau + p2);
    }
};

}  // namespace

Dataset generate_synthetic_dataset(int n_sequences, int n_frames, int dims, std::uint64_t seed,
                                   const SyntheticOptions& options) {
    if (n_sequences < 1 || n_frames < 1 || dims < 1) {
        throw ConfigError("synthetic dataset counts must all be >= 1");
    }
    if (options.subjects < 1) throw ConfigError("synthetic dataset needs at least one subject");
    if (options.kind == MotionKind::kVertex && dims % 3 != 0) {
        throw ConfigError("synthetic vertex data needs dims divisible by 3");
    }
    if (!(options.fps > 0)) throw ConfigError("synthetic fps must be positive");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    constexpr double two_pi = 2.0 * std::numbers::pi;

    // Per-dimension response: gain, lag (seconds), and per-subject bias / gain multiplier.
    const auto d = static_cast<std::size_t>(dims);
    std::vector<double> gain(d), lag(d);
    for (std::size_t j = 0; j < d; ++j) {
        gain[j] = (unit(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + 2.0 * unit(rng));
        lag[j] = 0.08 * unit(rng);
    }
    const auto n_subjects = static_cast<std::size_t>(options.subjects);
    std::vector<std::vector<double>> bias(n_subjects, std::vector<double>(d));
    std::vector<std::vector<double>> style_gain(n_subjects, std::vector<double>(d));
    for (std::size_t s = 0; s < n_subjects; ++s) {
        for (std::size_t j = 0; j < d; ++j) {
            bias[s][j] = 0.6 * (unit(rng) - 0.5);
            style_gain[s][j] = 0.6 + 0.8 * unit(rng);
        }
    }

    const int samples_per_frame = static_cast<int>(std::lround(kEncoderSampleRate / options.fps));
    Dataset out;
    out.reserve(static_cast<std::size_t>(n_sequences));
    for (int i = 0; i < n_sequences; ++i) {
        const std::size_t s = static_cast<std::size_t>(i) % n_subjects;
        const Envelope env{0.5 + 1.5 * unit(rng), 2.0 + 2.0 * unit(rng), two_pi * unit(rng),
                           two_pi * unit(rng)};
        const double carrier = 150.0 + 150.0 * unit(rng);

        DatasetItem item;
        item.audio.sample_rate = kEncoderSampleRate;
        item.audio.samples.resize(static_cast<std::size_t>(n_frames) * samples_per_frame);
        for (std::size_t k = 0; k < item.audio.samples.size(); ++k) {
            const double tau = static_cast<double>(k) / kEncoderSampleRate;
            item.audio.samples[k] = 0.8 * env(tau) * std::sin(two_pi * carrier * tau);
        }

        auto& m = item.motion;
        m.kind = options.kind;
        m.fps = options.fps;
        m.subject = "S" + std::to_string(s);
        char sentence[16];
        std::snprintf(sentence, sizeof(sentence), "sent%03d", i);
        m.sentence = sentence;
        item.audio.id = m.subject + "_" + m.sentence;
        m.frames.resize(n_frames, dims);
        for (int n = 0; n < n_frames; ++n) {
            const double tau = (n + 0.5) / options.fps;
            for (std::size_t j = 0; j < d; ++j) {
                const double e = env(std::max(0.0, tau - lag[j])) - 0.5;
                m.frames(n, static_cast<Eigen::Index>(j)) =
                    std::tanh(gain[j] * style_gain[s][j] * e * 2.0 + bias[s][j]);
            }
        }
        out.push_back(std::move(item));
    }
    return out;
}

RegionMask synthetic_region_mask(Eigen::Index num_elements) {
    RegionMask m;
    m.id = "synthetic";
    const Eigen::Index third = std::max<Eigen::Index>(1, num_elements / 3);
    for (Eigen::Index i = 0; i < third; ++i) m.lip.push_back(static_cast<int>(i));
    for (Eigen::Index i = std::max<Eigen::Index>(0, num_elements - third); i < num_elements; ++i) {
        m.upper_face.push_back(static_cast<int>(i));
    }
    return m;
}

}  // namespace difface
