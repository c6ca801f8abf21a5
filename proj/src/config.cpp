#include "difface/config.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <map>

#include "difface/errors.hpp"

namespace difface {

using nlohmann::json;

namespace {

// Every accepted key with its default value; the default's JSON type is the key's type.
const json& schema() {
    static const json s = {
        {"preset", "synthetic"},
        {"seed", 0},
        {"data.kind", "rig"},
        {"data.source", "synthetic"},  // synthetic | manifest
        {"data.root", ""},
        {"data.manifest", ""},
        {"data.split", "ratio-80-10-10"},  // biwi | vocaset | multiface | ratio-80-10-10 | all
        {"data.mask", ""},
        {"data.fps", 25.0},
        {"data.synthetic.n_sequences", 10},
        {"data.synthetic.n_frames", 20},
        {"data.synthetic.dims", 30},
        {"data.synthetic.subjects", 2},
        {"encoder.name", "stub"},
        {"encoder.feature_dim", 32},
        {"encoder.weights_path", ""},
        {"encoder.finetune", false},
        {"encoder.alignment", "linear"},
        {"diffusion.enabled", true},
        {"diffusion.steps", 1000},
        {"diffusion.beta_start", 1e-4},
        {"diffusion.beta_end", 0.02},
        {"diffusion.loss", "mse"},
        {"model.decoder", "gru"},
        {"model.noise_encoder", "none"},
        {"model.input_embedding_dim", 0},
        {"model.layers", 2},
        {"model.hidden_size", 256},
        {"model.dropout", 0.3},
        {"model.t_emb_dim", 128},
        {"model.heads", 4},
        {"model.style", true},
        {"model.style_every_layer", false},
        {"train.optimizer", "adam"},
        {"train.learning_rate", 1e-4},
        {"train.epochs", 100},
        {"train.batch_size", 1},
        {"train.device", "cpu"},
        {"sample.steps", 0},  // 0 = every level of the schedule
        {"sample.style", -1},  // -1 = no style conditioning
        {"sample.seed", -1},   // -1 = derive from the root seed
        {"output.dir", "runs"},
    };
    return s;
}

// Table 1 columns plus the data layout of each published configuration.
const std::map<std::string, json>& presets() {
    static const std::map<std::string, json> p = {
        {"biwi-vertex",
         {{"data.kind", "vertex"}, {"data.source", "manifest"}, {"data.split", "biwi"},
          {"data.fps", 25.0}, {"train.optimizer", "adam"}, {"train.learning_rate", 1e-4},
          {"train.epochs", 50}, {"diffusion.steps", 500}, {"diffusion.beta_start", 1e-4},
          {"diffusion.beta_end", 0.02}, {"model.input_embedding_dim", 512}, {"model.layers", 2},
          {"model.hidden_size", 512}, {"model.dropout", 0.3}, {"model.decoder", "gru"},
          {"model.noise_encoder", "conv-max"}}},
        {"vocaset-vertex",
         {{"data.kind", "vertex"}, {"data.source", "manifest"}, {"data.split", "vocaset"},
          {"data.fps", 60.0}, {"train.optimizer", "adam"}, {"train.learning_rate", 1e-4},
          {"train.epochs", 50}, {"diffusion.steps", 500}, {"diffusion.beta_start", 1e-4},
          {"diffusion.beta_end", 0.02}, {"model.input_embedding_dim", 256}, {"model.layers", 2},
          {"model.hidden_size", 512}, {"model.dropout", 0.3}, {"model.decoder", "gru"},
          {"model.noise_encoder", "conv-max"}}},
        {"multiface-vertex",
         {{"data.kind", "vertex"}, {"data.source", "manifest"}, {"data.split", "multiface"},
          {"data.fps", 30.0}, {"train.optimizer", "adam"}, {"train.learning_rate", 1e-4},
          {"train.epochs", 50}, {"diffusion.steps", 500}, {"diffusion.beta_start", 1e-4},
          {"diffusion.beta_end", 0.02}, {"model.input_embedding_dim", 256}, {"model.layers", 2},
          {"model.hidden_size", 512}, {"model.dropout", 0.3}, {"model.decoder", "gru"},
          {"model.noise_encoder", "conv-max"}}},
        {"beat-rig",
         {{"data.kind", "rig"}, {"data.source", "manifest"}, {"data.split", "ratio-80-10-10"},
          {"data.fps", 60.0}, {"train.optimizer", "adam"}, {"train.learning_rate", 1e-4},
          {"train.epochs", 100}, {"diffusion.steps", 1000}, {"diffusion.beta_start", 1e-4},
          {"diffusion.beta_end", 0.02}, {"model.input_embedding_dim", 0}, {"model.layers", 2},
          {"model.hidden_size", 256}, {"model.dropout", 0.3}, {"model.decoder", "gru"},
          {"model.noise_encoder", "none"}}},
        {"uudamm-rig",
         {{"data.kind", "rig"}, {"data.source", "manifest"}, {"data.split", "ratio-80-10-10"},
          {"data.fps", 60.0}, {"train.optimizer", "adam"}, {"train.learning_rate", 1e-4},
          {"train.epochs", 100}, {"diffusion.steps", 1000}, {"diffusion.beta_start", 1e-4},
          {"diffusion.beta_end", 0.02}, {"model.input_embedding_dim", 0}, {"model.layers", 4},
          {"model.hidden_size", 1024}, {"model.dropout", 0.3}, {"model.decoder", "gru"},
          {"model.noise_encoder", "none"}}},
        // Desk-scale rig configuration for smoke tests and ablations.
        {"synthetic",
         {{"data.kind", "rig"}, {"data.source", "synthetic"}, {"data.split", "ratio-80-10-10"},
          {"data.fps", 25.0}, {"data.synthetic.n_sequences", 10}, {"data.synthetic.n_frames", 20},
          {"data.synthetic.dims", 30}, {"data.synthetic.subjects", 2},
          {"train.optimizer", "adam"}, {"train.learning_rate", 2e-3}, {"train.epochs", 200},
          {"diffusion.steps", 100}, {"diffusion.beta_start", 1e-4}, {"diffusion.beta_end", 0.02},
          {"model.input_embedding_dim", 0}, {"model.layers", 2}, {"model.hidden_size", 256},
          {"model.dropout", 0.0}, {"model.decoder", "gru"}, {"model.noise_encoder", "none"},
          {"model.t_emb_dim", 32}}},
        {"synthetic-vertex",
         {{"data.kind", "vertex"}, {"data.source", "synthetic"}, {"data.split", "ratio-80-10-10"},
          {"data.fps", 25.0}, {"data.synthetic.n_sequences", 10}, {"data.synthetic.n_frames", 20},
          {"data.synthetic.dims", 30}, {"data.synthetic.subjects", 2},
          {"train.optimizer", "adam"}, {"train.learning_rate", 2e-3}, {"train.epochs", 200},
          {"diffusion.steps", 100}, {"diffusion.beta_start", 1e-4}, {"diffusion.beta_end", 0.02},
          {"model.input_embedding_dim", 16}, {"model.layers", 2}, {"model.hidden_size", 128},
          {"model.dropout", 0.0}, {"model.decoder", "gru"}, {"model.noise_encoder", "conv-max"},
          {"model.t_emb_dim", 32}}},
    };
    return p;
}

void flatten(const json& doc, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object()) {
            flatten(*it, key, out);
        } else {
            out.emplace_back(key, *it);
        }
    }
}

json coerce(const std::string& key, const json& value) {
    const json& def = schema().at(key);
    auto bad = [&](const char* want) {
        return ConfigError("config key '" + key + "' expects " + want + ", got " + value.dump());
    };
    if (def.is_boolean()) {
        if (!value.is_boolean()) throw bad("a boolean");
        return value;
    }
    if (def.is_number_integer()) {
        if (value.is_number_integer()) return value;
        if (value.is_number_float()) {
            const double d = value.get<double>();
            if (d == static_cast<double>(static_cast<long long>(d))) return static_cast<long long>(d);
        }
        throw bad("an integer");
    }
    if (def.is_number()) {
        if (!value.is_number()) throw bad("a number");
        return value.get<double>();
    }
    if (!value.is_string()) throw bad("a string");
    return value;
}

json parse_scalar(const std::string& key, const std::string& text) {
    const json& def = schema().at(key);
    if (def.is_string()) return text;
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' cannot parse value '" + text + "'");
    }
}

}  // namespace

RunConfig::RunConfig() : values_(schema()) { apply_preset(values_["preset"].get<std::string>()); }

const std::vector<std::string>& RunConfig::preset_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [k, v] : presets()) n.push_back(k);
        return n;
    }();
    return names;
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (auto it = schema().begin(); it != schema().end(); ++it) out.push_back(it.key());
        return out;
    }();
    return k;
}

void RunConfig::apply_preset(const std::string& name) {
    const auto it = presets().find(name);
    if (it == presets().end()) {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
    }
    const json keep_seed = values_.contains("seed") ? values_["seed"] : json(0);
    values_ = schema();
    values_["seed"] = keep_seed;
    values_["preset"] = name;
    for (auto kv = it->second.begin(); kv != it->second.end(); ++kv) set(kv.key(), kv.value());
}

void RunConfig::merge_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
    std::vector<std::pair<std::string, json>> flat;
    flatten(doc, "", flat);
    for (const auto& [k, v] : flat) {
        if (k == "preset") apply_preset(v.is_string() ? v.get<std::string>() : v.dump());
    }
    for (const auto& [k, v] : flat) {
        if (k != "preset") set(k, v);
    }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    merge_json(doc);
}

void RunConfig::set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' must look like key=value");
    }
    const std::string key = assignment.substr(0, eq);
    if (!schema().contains(key)) throw ConfigError("unknown config key '" + key + "'");
    if (key == "preset") {
        apply_preset(assignment.substr(eq + 1));
        return;
    }
    set(key, parse_scalar(key, assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const json& value) {
    if (!schema().contains(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = coerce(key, value);
}

bool RunConfig::has(const std::string& key) const { return values_.contains(key); }

const json& RunConfig::get(const std::string& key) const {
    if (!values_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    return values_.at(key);
}

std::string RunConfig::get_string(const std::string& key) const { return get(key).get<std::string>(); }
int RunConfig::get_int(const std::string& key) const { return get(key).get<int>(); }
double RunConfig::get_double(const std::string& key) const { return get(key).get<double>(); }
bool RunConfig::get_bool(const std::string& key) const { return get(key).get<bool>(); }

std::uint64_t RunConfig::seed() const {
    const auto s = get("seed").get<long long>();
    if (s < 0) throw ConfigError("config key 'seed' must be non-negative");
    return static_cast<std::uint64_t>(s);
}

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) throw ConfigError("config key '" + key + "' " + msg);
    };
    seed();
    const std::string source = get_string("data.source");
    require(source == "synthetic" || source == "manifest", "data.source", "must be synthetic or manifest");
    data_kind(*this);
    const std::string split = get_string("data.split");
    if (split != "all") split_policy_from_string(split);
    require(get_double("data.fps") > 0, "data.fps", "must be > 0");
    if (source == "synthetic") {
        require(get_int("data.synthetic.n_sequences") >= 1, "data.synthetic.n_sequences", "must be >= 1");
        require(get_int("data.synthetic.n_frames") >= 2, "data.synthetic.n_frames", "must be >= 2");
        require(get_int("data.synthetic.dims") >= 1, "data.synthetic.dims", "must be >= 1");
        require(get_int("data.synthetic.subjects") >= 1, "data.synthetic.subjects", "must be >= 1");
    } else {
        require(!get_string("data.manifest").empty(), "data.manifest", "is required for manifest data");
    }
    require(get_string("encoder.alignment") == "linear", "encoder.alignment", "only 'linear' is supported");
    require(get_int("encoder.feature_dim") >= 1, "encoder.feature_dim", "must be >= 1");
    require(get_int("diffusion.steps") >= 1, "diffusion.steps", "must be >= 1");
    loss_kind_from_string(get_string("diffusion.loss"));
    decoder_variant_from_string(get_string("model.decoder"));
    noise_encoder_from_string(get_string("model.noise_encoder"));
    require(get_int("model.layers") >= 1, "model.layers", "must be >= 1");
    require(get_int("model.hidden_size") >= 1, "model.hidden_size", "must be >= 1");
    const double dropout = get_double("model.dropout");
    require(dropout >= 0.0 && dropout < 1.0, "model.dropout", "must lie in [0, 1)");
    require(get_double("train.learning_rate") > 0.0, "train.learning_rate", "must be > 0");
    require(get_int("train.epochs") >= 1, "train.epochs", "must be >= 1");
    require(get_int("train.batch_size") >= 1, "train.batch_size", "must be >= 1");
    const int steps = get_int("sample.steps");
    require(steps >= 0 && steps <= get_int("diffusion.steps"), "sample.steps",
            "must lie in [0, diffusion.steps] (0 = all)");
    require(get_int("sample.style") >= -1, "sample.style", "must be >= -1");
    schedule_from(*this);
    train_config_from(*this).validate();
}

std::filesystem::path RunConfig::data_root() const {
    if (const char* env = std::getenv(kDataRootEnv); env != nullptr && *env != '\0') return env;
    return get_string("data.root");
}

void RunConfig::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config snapshot '" + path.string() + "'");
    out << values_.dump(2) << '\n';
}

std::uint64_t subsystem_seed(std::uint64_t root, const std::string& subsystem) {
    std::vector<std::uint32_t> material = {static_cast<std::uint32_t>(root),
                                           static_cast<std::uint32_t>(root >> 32)};
    for (unsigned char c : subsystem) material.push_back(c);
    std::seed_seq seq(material.begin(), material.end());
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

MotionKind data_kind(const RunConfig& rc) {
    const MotionKind k = motion_kind_from_string(rc.get_string("data.kind"));
    if (k == MotionKind::kFeatures) throw ConfigError("config key 'data.kind' must be vertex or rig");
    return k;
}

NoiseSchedule schedule_from(const RunConfig& rc) {
    return build_linear_schedule(rc.get_int("diffusion.steps"), rc.get_double("diffusion.beta_start"),
                                 rc.get_double("diffusion.beta_end"));
}

EncoderSettings encoder_settings_from(const RunConfig& rc) {
    EncoderSettings s;
    s.name = rc.get_string("encoder.name");
    s.feature_dim = rc.get_int("encoder.feature_dim");
    s.weights_path = rc.get_string("encoder.weights_path");
    s.finetune = rc.get_bool("encoder.finetune");
    return s;
}

TrainConfig train_config_from(const RunConfig& rc) {
    TrainConfig c;
    c.optimizer = rc.get_string("train.optimizer");
    c.learning_rate = rc.get_double("train.learning_rate");
    c.epochs = rc.get_int("train.epochs");
    c.batch_size = rc.get_int("train.batch_size");
    c.device = rc.get_string("train.device");
    c.seed = subsystem_seed(rc.seed(), "train");
    c.val_seed = subsystem_seed(rc.seed(), "validation");
    c.loss = loss_kind_from_string(rc.get_string("diffusion.loss"));
    c.diffusion_enabled = rc.get_bool("diffusion.enabled");
    return c;
}

DecoderConfig decoder_config_from(const RunConfig& rc, int output_dim, int num_styles) {
    DecoderConfig c;
    c.kind = data_kind(rc);
    c.output_dim = output_dim;
    c.audio_dim = rc.get_int("encoder.feature_dim");
    c.input_embedding_dim = rc.get_int("model.input_embedding_dim");
    c.layers = rc.get_int("model.layers");
    c.hidden_size = rc.get_int("model.hidden_size");
    c.dropout = rc.get_double("model.dropout");
    c.decoder = decoder_variant_from_string(rc.get_string("model.decoder"));
    c.noise_encoder = noise_encoder_from_string(rc.get_string("model.noise_encoder"));
    c.t_emb_dim = rc.get_int("model.t_emb_dim");
    c.heads = rc.get_int("model.heads");
    c.num_styles = rc.get_bool("model.style") ? num_styles : 0;
    c.style_every_layer = rc.get_bool("model.style_every_layer");
    c.validate();
    return c;
}

}  // namespace difface
