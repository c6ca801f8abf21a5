#include "difface/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "difface/errors.hpp"
#include "difface/face_decoder.hpp"

namespace difface {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw DataError("truncated checkpoint '" + path.string() + "'");
    }
    return v;
}

std::string get_string(std::istream& in, const std::filesystem::path& path) {
    const auto len = get<std::uint32_t>(in, path);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw DataError("truncated checkpoint '" + path.string() + "'");
    return s;
}

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, m] : tensors) {
        if (n == name) return &m;
    }
    return nullptr;
}

std::uint64_t config_hash(const nlohmann::json& config) {
    nlohmann::json arch = {{"model", config.value("model", nlohmann::json::object())},
                           {"diffusion", config.value("diffusion", nlohmann::json::object())}};
    const std::string text = arch.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ostringstream out(std::ios::binary);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, ckpt.config_hash);
    put(out, static_cast<std::int32_t>(ckpt.epoch));
    put(out, ckpt.step);
    put(out, ckpt.best_val);
    put(out, static_cast<std::uint8_t>(ckpt.has_optimizer ? 1 : 0));
    put(out, ckpt.optimizer_step);
    put_string(out, ckpt.config.dump());
    put_string(out, ckpt.rng_state);
    put(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, m] : ckpt.tensors) {
        put_string(out, name);
        put(out, static_cast<std::uint32_t>(m.rows()));
        put(out, static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) put(out, m(r, c));
        }
    }
    // Write to a sibling file first so a crash never leaves a half-written checkpoint.
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw DataError("cannot write checkpoint '" + path.string() + "'");
        const std::string bytes = out.str();
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw DataError("error writing checkpoint '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("'" + path.string() + "' is not a checkpoint");
    }
    if (get<std::uint32_t>(in, path) != kVersion) {
        throw DataError("unsupported checkpoint version in '" + path.string() + "'");
    }
    Checkpoint c;
    c.config_hash = get<std::uint64_t>(in, path);
    c.epoch = get<std::int32_t>(in, path);
    c.step = get<std::int64_t>(in, path);
    c.best_val = get<double>(in, path);
    c.has_optimizer = get<std::uint8_t>(in, path) != 0;
    c.optimizer_step = get<std::int64_t>(in, path);
    try {
        c.config = nlohmann::json::parse(get_string(in, path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint '" + path.string() + "' has a malformed config: " + e.what());
    }
    c.rng_state = get_string(in, path);
    const auto count = get<std::uint32_t>(in, path);
    c.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(in, path);
        const auto rows = get<std::uint32_t>(in, path);
        const auto cols = get<std::uint32_t>(in, path);
        Matrix m(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t k = 0; k < cols; ++k) m(r, k) = get<double>(in, path);
        }
        c.tensors.emplace_back(std::move(name), std::move(m));
    }
    if (config_hash(c.config) != c.config_hash) {
        throw DataError("checkpoint '" + path.string() + "' header hash does not match its config");
    }
    return c;
}

void load_parameters(FaceDecoder& model, const Checkpoint& ckpt, std::uint64_t expected_hash) {
    if (ckpt.config_hash != expected_hash) {
        throw ConfigError("checkpoint config hash mismatch: the checkpoint was trained with a "
                          "different model/diffusion configuration");
    }
    for (auto* p : model.parameters().all()) {
        const Matrix* m = ckpt.find(p->name);
        if (m == nullptr) throw ConfigError("checkpoint lacks parameter '" + p->name + "'");
        if (m->rows() != p->value.rows() || m->cols() != p->value.cols()) {
            throw ConfigError("checkpoint parameter '" + p->name + "' has the wrong shape");
        }
        p->value = *m;
    }
}

void store_parameters(const FaceDecoder& model, Checkpoint& ckpt) {
    for (const auto* p : model.parameters().all()) ckpt.tensors.emplace_back(p->name, p->value);
}

}  // namespace difface
