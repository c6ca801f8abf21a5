#include "difface/motion_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "difface/errors.hpp"

namespace difface {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'M', 'O'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxString = 1 << 16;

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw DataError("truncated motion container '" + path.string() + "'");
    }
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::filesystem::path& path) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > kMaxString) throw DataError("corrupt string length in '" + path.string() + "'");
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) {
        throw DataError("truncated motion container '" + path.string() + "'");
    }
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& text, double& v) {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b == e) return false;
    const auto res = std::from_chars(text.data() + b, text.data() + e, v);
    return res.ec == std::errc() && res.ptr == text.data() + e;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_motion(const std::filesystem::path& path, const AnimationSequence& seq) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write motion file '" + path.string() + "'");
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint8_t>(seq.kind));
    const char pad[3] = {0, 0, 0};
    out.write(pad, 3);
    put(out, static_cast<std::uint32_t>(seq.frames.rows()));
    put(out, static_cast<std::uint32_t>(seq.frames.cols()));
    put(out, seq.fps);
    put_string(out, seq.subject);
    put_string(out, seq.sentence);
    std::vector<float> row(static_cast<std::size_t>(seq.frames.cols()));
    for (Eigen::Index n = 0; n < seq.frames.rows(); ++n) {
        for (Eigen::Index d = 0; d < seq.frames.cols(); ++d) {
            row[static_cast<std::size_t>(d)] = static_cast<float>(seq.frames(n, d));
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw DataError("error writing motion file '" + path.string() + "'");
}

AnimationSequence read_motion(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open motion file '" + path.string() + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("'" + path.string() + "' is not a motion container");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion) {
        throw DataError("unsupported motion container version in '" + path.string() + "'");
    }
    const auto kind = get<std::uint8_t>(in, path);
    if (kind > 2) throw DataError("unknown motion kind in '" + path.string() + "'");
    in.ignore(3);
    const auto n = get<std::uint32_t>(in, path);
    const auto d = get<std::uint32_t>(in, path);
    AnimationSequence seq;
    seq.kind = static_cast<MotionKind>(kind);
    seq.fps = get<double>(in, path);
    seq.subject = get_string(in, path);
    seq.sentence = get_string(in, path);
    seq.frames.resize(n, d);
    std::vector<float> row(d);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!in.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(d * sizeof(float)))) {
            throw DataError("truncated motion container '" + path.string() + "'");
        }
        for (std::uint32_t j = 0; j < d; ++j) seq.frames(i, j) = row[j];
    }
    return seq;
}

void write_rig_csv(const std::filesystem::path& path, const AnimationSequence& seq,
                   const std::vector<std::string>& control_names) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write rig CSV '" + path.string() + "'");
    const Eigen::Index c = seq.frames.cols();
    for (Eigen::Index j = 0; j < c; ++j) {
        if (j) out << ',';
        if (static_cast<std::size_t>(j) < control_names.size()) {
            out << control_names[static_cast<std::size_t>(j)];
        } else {
            out << "ctrl_" << j;
        }
    }
    out << '\n';
    for (Eigen::Index n = 0; n < seq.frames.rows(); ++n) {
        for (Eigen::Index j = 0; j < c; ++j) {
            if (j) out << ',';
            out << format_double(seq.frames(n, j));
        }
        out << '\n';
    }
}

AnimationSequence read_rig_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open rig CSV '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        std::vector<double> values(fields.size());
        bool numeric = true;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (!parse_double(fields[i], values[i])) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (rows.empty() && width == 0) {
                width = fields.size();  // header
                continue;
            }
            throw DataError("non-numeric value in '" + path.string() + "' line " +
                            std::to_string(line_no));
        }
        if (width == 0) width = values.size();
        if (values.size() != width) {
            throw DataError("ragged row in '" + path.string() + "' line " +
                            std::to_string(line_no) + ": expected " + std::to_string(width) +
                            " columns, got " + std::to_string(values.size()));
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw DataError("rig CSV '" + path.string() + "' has no frames");
    AnimationSequence seq;
    seq.kind = MotionKind::kRig;
    seq.frames.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            seq.frames(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return seq;
}

AnimationSequence read_motion_any(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return read_rig_csv(path);
    return read_motion(path);
}

void write_motion_any(const std::filesystem::path& path, const AnimationSequence& seq) {
    if (path.extension() == ".csv") {
        write_rig_csv(path, seq);
    } else {
        write_motion(path, seq);
    }
}

}  // namespace difface
