#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "difface/diffusion.hpp"
#include "difface/face_decoder.hpp"
#include "difface/speech_encoder.hpp"
#include "difface/trainer.hpp"

namespace difface {

// Environment variable that overrides data.root when set.
inline constexpr const char* kDataRootEnv = "DIFFACE_DATA_ROOT";

// Flat document of dotted keys ("model.hidden_size") with typed values.
// Every key has a default; unknown keys are rejected with ConfigError.
class RunConfig {
public:
    RunConfig();  // defaults, then the default preset

    static const std::vector<std::string>& preset_names();
    static const std::vector<std::string>& keys();

    // Replaces the preset-controlled keys with the named preset's values.
    void apply_preset(const std::string& name);

    // Merges a JSON file. Nested objects are flattened into dotted keys. A
    // "preset" key is applied before the file's other keys.
    void merge_file(const std::filesystem::path& path);
    void merge_json(const nlohmann::json& doc);

    // "key=value"; the value is parsed according to the key's type.
    void set_override(const std::string& assignment);
    void set(const std::string& key, const nlohmann::json& value);

    bool has(const std::string& key) const;
    const nlohmann::json& get(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t seed() const;

    const nlohmann::json& values() const { return values_; }
    std::string preset() const { return get_string("preset"); }

    // Cross-key checks (ranges, enum names). Throws ConfigError naming the key.
    void validate() const;

    // data.root after applying the environment override.
    std::filesystem::path data_root() const;

    void write(const std::filesystem::path& path) const;

private:
    nlohmann::json values_;
};

// Derives an independent seed for a named subsystem ("model", "train", "sample", ...).
std::uint64_t subsystem_seed(std::uint64_t root, const std::string& subsystem);

MotionKind data_kind(const RunConfig& rc);
NoiseSchedule schedule_from(const RunConfig& rc);
EncoderSettings encoder_settings_from(const RunConfig& rc);
TrainConfig train_config_from(const RunConfig& rc);
// output_dim and the number of training subjects come from the data.
DecoderConfig decoder_config_from(const RunConfig& rc, int output_dim, int num_styles);

}  // namespace difface
