#include "difface/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "difface/errors.hpp"
#include "difface/motion_io.hpp"

namespace difface {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string example_id(const SplitEntry& e) {
    std::string id = e.subject + "/" + e.sentence;
    if (e.condition) id += "@" + *e.condition;
    return id;
}

bool is_motion_file(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext != ".json" && ext != ".txt" && ext != ".tmp";
}

std::vector<std::string> motion_files(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_motion_file(entry.path())) {
            names.push_back(entry.path().filename().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

AnimationSequence as_sequence(const Matrix& frames, MotionKind kind, double fps) {
    AnimationSequence s;
    s.frames = frames;
    s.kind = kind;
    s.fps = fps;
    return s;
}

void write_json(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------

PreparedData prepare_data(const RunConfig& rc) {
    rc.validate();
    PreparedData out;
    out.kind = data_kind(rc);
    out.fps = rc.get_double("data.fps");

    Dataset dataset;
    if (rc.get_string("data.source") == "synthetic") {
        SyntheticOptions opts;
        opts.kind = out.kind;
        opts.subjects = rc.get_int("data.synthetic.subjects");
        opts.fps = out.fps;
        dataset = generate_synthetic_dataset(rc.get_int("data.synthetic.n_sequences"),
                                             rc.get_int("data.synthetic.n_frames"),
                                             rc.get_int("data.synthetic.dims"),
                                             subsystem_seed(rc.seed(), "data"), opts);
    } else {
        const fs::path root = rc.data_root();
        fs::path manifest = rc.get_string("data.manifest");
        if (manifest.is_relative() && !root.empty()) manifest = root / manifest;
        dataset = out.kind == MotionKind::kVertex ? load_vertex_dataset(root, manifest)
                                                  : load_rig_dataset(root, manifest);
    }
    if (dataset.empty()) throw DataError("dataset is empty");
    out.output_dim = static_cast<int>(dataset.front().motion.dims());
    for (const auto& item : dataset) {
        if (item.motion.dims() != out.output_dim) {
            throw DataError("sequence " + item.motion.subject + "/" + item.motion.sentence +
                            " has a different motion width");
        }
    }

    const auto encoder = make_encoder(encoder_settings_from(rc));
    out.audio_dim = encoder->feature_dim();

    const Eigen::Index elements = out.output_dim / element_width(out.kind);
    const std::string mask_path = rc.get_string("data.mask");
    if (!mask_path.empty()) {
        fs::path p = mask_path;
        if (p.is_relative() && !rc.data_root().empty() && !fs::exists(p)) p = rc.data_root() / p;
        out.mask = read_region_mask(p);
    } else if (rc.get_string("data.source") == "synthetic") {
        out.mask = synthetic_region_mask(elements);
    } else {
        out.mask = RegionMask::full(elements);
    }
    out.mask.validate(elements);

    DatasetSplit split;
    const std::string split_name = rc.get_string("data.split");
    if (split_name == "all") {
        for (const auto& item : dataset) split.train.push_back({item.motion.subject, item.motion.sentence, {}});
    } else {
        split = make_split(dataset, split_policy_from_string(split_name));
    }
    out.styles = split.train_subjects();

    std::map<std::pair<std::string, std::string>, const DatasetItem*> by_key;
    for (const auto& item : dataset) by_key[{item.motion.subject, item.motion.sentence}] = &item;
    std::map<std::pair<std::string, std::string>, Matrix> features;

    auto style_of = [&](const std::string& name) -> std::optional<int> {
        const auto it = std::find(out.styles.begin(), out.styles.end(), name);
        if (it != out.styles.end()) return static_cast<int>(it - out.styles.begin());
        return out.styles.empty() ? std::nullopt : std::optional<int>(0);
    };
    auto build = [&](const std::vector<SplitEntry>& entries) {
        std::vector<Example> exs;
        for (const auto& e : entries) {
            const auto key = std::make_pair(e.subject, e.sentence);
            const auto it = by_key.find(key);
            if (it == by_key.end()) throw DataError("split references missing sequence " + example_id(e));
            auto f = features.find(key);
            if (f == features.end()) {
                const auto feats = encode_audio(it->second->audio, *encoder);
                f = features.emplace(key, align_to_frames(feats, it->second->motion.num_frames())).first;
            }
            Example ex;
            ex.id = example_id(e);
            ex.audio = f->second;
            ex.motion = it->second->motion.frames;
            ex.style = style_of(e.condition ? *e.condition : e.subject);
            exs.push_back(std::move(ex));
        }
        return exs;
    };
    out.train = build(split.train);
    out.val = build(split.val);
    out.test_a = build(split.test_a);
    out.test_b = build(split.test_b);
    return out;
}

LoadedModel load_model(const fs::path& checkpoint) {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    LoadedModel m;
    try {
        const json& run = ckpt.config.at("run");
        m.config.merge_json(run.at("config"));
        m.styles = run.at("styles").get<std::vector<std::string>>();
        if (run.contains("export_min")) {
            m.export_min = run.at("export_min").get<std::vector<double>>();
            m.export_max = run.at("export_max").get<std::vector<double>>();
        }
        const json& diff = ckpt.config.at("diffusion");
        const int steps = diff.at("steps").get<int>();
        const double b0 = diff.at("beta_start").get<double>();
        m.schedule = steps == 1 ? NoiseSchedule::from_betas({b0})
                                : build_linear_schedule(steps, b0, diff.at("beta_end").get<double>());
        m.diffusion_enabled = diff.at("enabled").get<bool>();
        m.model = std::make_unique<FaceDecoder>(DecoderConfig::from_json(ckpt.config.at("model")), 0);
    } catch (const json::exception& e) {
        throw DataError("checkpoint '" + checkpoint.string() + "' lacks run metadata: " + e.what());
    }
    load_parameters(*m.model, ckpt,
                    config_hash(model_config_json(m.model->config(), m.schedule, m.diffusion_enabled)));
    return m;
}

FitResult cmd_train(const RunConfig& rc, const fs::path& out_dir, const std::optional<fs::path>& resume) {
    const PreparedData data = prepare_data(rc);
    if (data.train.empty()) throw ConfigError("training split is empty");
    const DecoderConfig dcfg = decoder_config_from(rc, data.output_dim, static_cast<int>(data.styles.size()));
    if (dcfg.audio_dim != data.audio_dim) {
        throw ConfigError("config key 'encoder.feature_dim' does not match the encoder output width");
    }
    FaceDecoder model(dcfg, subsystem_seed(rc.seed(), "model"));
    const NoiseSchedule sched = schedule_from(rc);
    Trainer trainer(model, sched, train_config_from(rc));
    fs::create_directories(out_dir);
    rc.write(out_dir / "config.json");
    std::clog << "[train] preset=" << rc.preset() << " params=" << model.parameter_count()
              << " train=" << data.train.size() << " val=" << data.val.size() << '\n';
    trainer.set_epoch_callback([](int epoch, double train, double val) {
        std::clog << "[train] epoch " << epoch << " train_loss=" << format_double(train)
                  << " val_loss=" << (std::isnan(val) ? std::string("-") : format_double(val)) << '\n';
    });
    json run = {{"config", rc.values()}, {"styles", data.styles}};
    if (data.kind == MotionKind::kRig) {
        // Observed per-control range; sampling clamps rig exports to it.
        RowVector lo = data.train.front().motion.colwise().minCoeff();
        RowVector hi = data.train.front().motion.colwise().maxCoeff();
        for (const auto& ex : data.train) {
            lo = lo.cwiseMin(ex.motion.colwise().minCoeff());
            hi = hi.cwiseMax(ex.motion.colwise().maxCoeff());
        }
        run["export_min"] = std::vector<double>(lo.data(), lo.data() + lo.size());
        run["export_max"] = std::vector<double>(hi.data(), hi.data() + hi.size());
    }
    return trainer.fit(data.train, data.val, out_dir, run, resume);
}

SampleStats cmd_sample(const SampleRequest& req) {
    LoadedModel lm = load_model(req.checkpoint);
    const FaceDecoder& model = *lm.model;
    const auto& cfg = model.config();
    if (req.style) {
        if (cfg.num_styles == 0) throw ContractError("this checkpoint was trained without style conditioning");
        if (*req.style < 0 || *req.style >= cfg.num_styles) {
            throw ContractError("style id " + std::to_string(*req.style) + " out of range [0, " +
                                std::to_string(cfg.num_styles) + ")");
        }
    }
    const int steps = req.steps == 0 ? lm.schedule.steps() : req.steps;
    const bool csv = req.out.extension() == ".csv";
    if (csv && cfg.kind != MotionKind::kRig) {
        throw ContractError("CSV export needs a rig checkpoint; this one predicts vertices");
    }

    const double fps = lm.config.get_double("data.fps");
    const AudioClip clip = read_wav(req.audio);
    const auto encoder = make_encoder(encoder_settings_from(lm.config));
    const auto n = std::max<Eigen::Index>(1, std::llround(clip.duration() * fps));
    const Matrix audio = align_to_frames(encode_audio(clip, *encoder), n);

    Rng rng(subsystem_seed(req.seed, "sample"));
    SampleStats stats;
    AnimationSequence seq;
    seq.frames = sample_sequence(model, audio, req.style, lm.schedule, rng, steps,
                                 lm.diffusion_enabled, &stats);
    if (cfg.kind == MotionKind::kRig && lm.export_min.size() == static_cast<std::size_t>(seq.frames.cols())) {
        for (Eigen::Index c = 0; c < seq.frames.cols(); ++c) {
            const auto k = static_cast<std::size_t>(c);
            seq.frames.col(c) = seq.frames.col(c).cwiseMax(lm.export_min[k]).cwiseMin(lm.export_max[k]);
        }
    }
    seq.kind = cfg.kind;
    seq.fps = fps;
    seq.subject = req.style ? lm.styles.at(static_cast<std::size_t>(*req.style)) : "";
    seq.sentence = clip.id;
    if (!req.out.parent_path().empty()) fs::create_directories(req.out.parent_path());
    write_motion_any(req.out, seq);
    std::clog << "[sample] " << stats.evaluations << " denoising evaluation(s), " << n << " frames\n";

    const json meta = {{"checkpoint", req.checkpoint.string()},
                       {"audio", req.audio.string()},
                       {"seed", req.seed},
                       {"steps", steps},
                       {"evaluations", stats.evaluations},
                       {"style", req.style ? json(*req.style) : json(nullptr)},
                       {"style_subject", seq.subject},
                       {"frames", n},
                       {"fps", fps},
                       {"kind", to_string(cfg.kind)}};
    write_json(req.out.string() + ".json", meta);
    return stats;
}

// ---------------------------------------------------------------------------

EvaluateResult cmd_evaluate(const fs::path& pred_dir, const fs::path& gt_dir,
                            const std::optional<fs::path>& mask_path, const fs::path& out_dir,
                            const std::vector<int>& graph_controls) {
    if (!fs::is_directory(pred_dir)) throw DataError("prediction directory '" + pred_dir.string() + "' not found");
    if (!fs::is_directory(gt_dir)) throw DataError("ground-truth directory '" + gt_dir.string() + "' not found");
    std::optional<RegionMask> mask;
    if (mask_path) mask = read_region_mask(*mask_path);

    std::vector<fs::path> style_dirs;
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
        if (entry.is_directory()) style_dirs.push_back(entry.path());
    }
    std::sort(style_dirs.begin(), style_dirs.end());

    EvaluateResult result;
    std::vector<AnimationSequence> all_pred, all_gt;
    const auto gt_names = motion_files(gt_dir);
    const std::set<std::string> gt_set(gt_names.begin(), gt_names.end());
    for (const auto& name : motion_files(pred_dir)) {
        if (!gt_set.count(name)) result.skipped.push_back(name + ": no ground truth");
    }

    double sum_mve = 0, sum_lve = 0, sum_fdd = 0, sum_div = 0;
    int n_div = 0;
    for (const auto& name : gt_names) {
        std::vector<AnimationSequence> variants;
        const fs::path direct = pred_dir / name;
        if (fs::exists(direct)) variants.push_back(read_motion_any(direct));
        for (const auto& d : style_dirs) {
            if (fs::exists(d / name)) variants.push_back(read_motion_any(d / name));
        }
        if (variants.empty()) {
            result.skipped.push_back(name + ": no prediction");
            continue;
        }
        AnimationSequence gt = read_motion_any(gt_dir / name);
        for (auto& v : variants) v.kind = gt.kind;
        const RegionMask m = mask ? *mask : RegionMask::full(gt.num_elements());
        if (gt.num_frames() < 2 || variants.front().num_frames() != gt.num_frames() ||
            variants.front().dims() != gt.dims()) {
            result.skipped.push_back(name + ": shape mismatch or fewer than 2 frames");
            continue;
        }
        MetricReport r = evaluate_pair(variants.front(), gt, m, gt_dir.filename().string());
        bool same_shape = true;
        for (const auto& v : variants) {
            same_shape = same_shape && v.num_frames() == gt.num_frames() && v.dims() == gt.dims();
        }
        if (variants.size() >= 2 && same_shape) {
            r.diversity = diversity(variants);
            sum_div += *r.diversity;
            ++n_div;
        }
        sum_mve += r.mve;
        sum_lve += r.lve;
        sum_fdd += r.fdd;
        all_pred.push_back(variants.front());
        all_gt.push_back(gt);
        result.per_sequence.emplace_back(name, r);
    }

    fs::create_directories(out_dir);
    {
        std::ofstream skipped(out_dir / "skipped.txt");
        for (const auto& s : result.skipped) skipped << s << '\n';
    }
    if (result.per_sequence.empty()) {
        throw DataError("every sequence was skipped (see " + (out_dir / "skipped.txt").string() + ")");
    }

    const double k = static_cast<double>(result.per_sequence.size());
    MetricReport& agg = result.aggregate;
    agg.kind = all_gt.front().kind;
    agg.mve = sum_mve / k;
    agg.lve = sum_lve / k;
    agg.fdd = sum_fdd / k;
    if (n_div > 0) agg.diversity = sum_div / n_div;
    agg.mask_id = mask ? mask->id : "full";
    agg.dataset_id = gt_dir.filename().string();

    json per = json::array();
    for (const auto& [name, r] : result.per_sequence) {
        json j = r.to_json();
        j["name"] = name;
        per.push_back(j);
    }
    write_json(out_dir / "per_sequence.json", per);
    json aj = agg.to_json();
    aj["sequences"] = result.per_sequence.size();
    aj["skipped"] = result.skipped.size();
    write_json(out_dir / "aggregate.json", aj);
    {
        std::ofstream txt(out_dir / "report.txt");
        txt << agg.human_readable();
    }
    write_motion_stats_csv(out_dir / "motion_stats_pred.csv", mean_motion_stats(all_pred));
    write_motion_stats_csv(out_dir / "motion_stats_gt.csv", mean_motion_stats(all_gt));
    if (!graph_controls.empty() && agg.kind == MotionKind::kRig) {
        std::vector<GraphRow> rows;
        for (std::size_t i = 0; i < all_pred.size(); ++i) {
            const auto& name = result.per_sequence[i].first;
            auto part = animation_graphs({all_pred[i]}, {name}, graph_controls, &all_gt[i]);
            for (auto& row : part) {
                if (row.sample_id == "gt") row.sample_id = "gt:" + name;
            }
            rows.insert(rows.end(), part.begin(), part.end());
        }
        write_animation_graphs_csv(out_dir / "animation_graphs.csv", rows);
    }
    return result;
}

// ---------------------------------------------------------------------------

MetricReport score_model(const FaceDecoder& model, const NoiseSchedule& sched, bool diffusion_enabled,
                         const PreparedData& data, const std::vector<Example>& subset,
                         std::uint64_t seed, int steps) {
    if (subset.empty()) throw ConfigError("no sequences to evaluate");
    MetricReport agg;
    agg.kind = data.kind;
    agg.mask_id = data.mask.id;
    double div_sum = 0.0;
    int div_n = 0;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const Example& ex = subset[i];
        Rng rng(subsystem_seed(seed, ex.id));
        const AnimationSequence gt = as_sequence(ex.motion, data.kind, data.fps);
        const AnimationSequence pred = as_sequence(
            sample_sequence(model, ex.audio, ex.style, sched, rng, steps, diffusion_enabled), data.kind,
            data.fps);
        const MetricReport r = evaluate_pair(pred, gt, data.mask);
        agg.mve += r.mve;
        agg.lve += r.lve;
        agg.fdd += r.fdd;
        if (model.config().num_styles >= 2) {
            std::vector<AnimationSequence> per_style;
            for (int s = 0; s < model.config().num_styles; ++s) {
                per_style.push_back(as_sequence(
                    sample_sequence(model, ex.audio, s, sched, rng, steps, diffusion_enabled), data.kind,
                    data.fps));
            }
            div_sum += diversity(per_style);
            ++div_n;
        }
    }
    const double k = static_cast<double>(subset.size());
    agg.mve /= k;
    agg.lve /= k;
    agg.fdd /= k;
    if (div_n > 0) agg.diversity = div_sum / div_n;
    return agg;
}

std::vector<std::pair<std::string, std::vector<std::string>>> ablation_grid(const std::string& grid,
                                                                            const RunConfig& base) {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    if (grid == "steps") {
        for (int s : {100, 250, 500, 750, 1000}) {
            out.push_back({std::to_string(s), {"diffusion.steps=" + std::to_string(s)}});
        }
    } else if (grid == "decoder") {
        for (const char* d : {"gru", "rnn", "transformer-tf", "transformer-ar"}) {
            out.push_back({d, {std::string("model.decoder=") + d}});
        }
    } else if (grid == "noise-encoder") {
        const int e = base.get_int("model.input_embedding_dim") > 0 ? base.get_int("model.input_embedding_dim") : 16;
        int dims = base.get_int("data.synthetic.dims");
        dims -= dims % 3;
        for (const char* n : {"mlp", "conv-max", "conv-avg", "conv-max-x3", "conv-avg-x3"}) {
            std::vector<std::string> o = {"data.kind=vertex", std::string("model.noise_encoder=") + n,
                                          "model.input_embedding_dim=" + std::to_string(e)};
            if (base.get_string("data.source") == "synthetic") {
                o.push_back("data.synthetic.dims=" + std::to_string(std::max(3, dims)));
            }
            out.push_back({n, o});
        }
    } else if (grid == "diffusion") {
        out.push_back({"with-diffusion", {"diffusion.enabled=true"}});
        out.push_back({"without-diffusion", {"diffusion.enabled=false"}});
    } else if (grid == "encoder") {
        out.push_back({"stub", {"encoder.name=stub", "encoder.feature_dim=32"}});
        out.push_back({"reference-pretrained", {"encoder.name=reference-pretrained", "encoder.feature_dim=768"}});
        out.push_back({"alternate-pretrained", {"encoder.name=alternate-pretrained", "encoder.feature_dim=768"}});
    } else {
        throw ConfigError("unknown ablation grid '" + grid +
                          "' (expected steps, decoder, noise-encoder, diffusion or encoder)");
    }
    return out;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::vector<std::string>& grids,
                                    const fs::path& out_dir) {
    if (grids.empty()) throw ConfigError("no ablation grid requested");
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::vector<std::string>>>>> plan;
    for (const auto& g : grids) plan.emplace_back(g, ablation_grid(g, base));
    fs::create_directories(out_dir);

    std::vector<AblationRow> rows;
    const fs::path csv_path = out_dir / "ablation.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw DataError("cannot write '" + csv_path.string() + "'");
    csv << "grid,setting,status,mve,lve,fdd,diversity,minutes,message\n";
    for (const auto& [grid, settings] : plan) {
        for (const auto& [label, overrides] : settings) {
            AblationRow row;
            row.grid = grid;
            row.setting = label;
            const auto start = std::chrono::steady_clock::now();
            try {
                RunConfig rc = base;
                for (const auto& o : overrides) rc.set_override(o);
                if (rc.get_int("sample.steps") > rc.get_int("diffusion.steps")) rc.set("sample.steps", 0);
                const fs::path dir = out_dir / (grid + "-" + label);
                std::clog << "[ablate] " << grid << '=' << label << '\n';
                cmd_train(rc, dir);
                LoadedModel lm = load_model(dir / "best.ckpt");
                const PreparedData data = prepare_data(rc);
                const auto& subset = !data.test_a.empty() ? data.test_a
                                     : !data.test_b.empty() ? data.test_b
                                     : !data.val.empty()    ? data.val
                                                            : data.train;
                const int steps = rc.get_int("sample.steps") == 0 ? lm.schedule.steps() : rc.get_int("sample.steps");
                const MetricReport r = score_model(*lm.model, lm.schedule, lm.diffusion_enabled, data, subset,
                                                   subsystem_seed(rc.seed(), "ablate-sample"), steps);
                write_json(dir / "metrics.json", r.to_json());
                row.ok = true;
                row.mve = r.mve;
                row.lve = r.lve;
                row.fdd = r.fdd;
                row.diversity = r.diversity;
            } catch (const std::exception& e) {
                row.ok = false;
                row.message = e.what();
                std::clog << "[ablate] " << grid << '=' << label << " failed: " << e.what() << '\n';
            }
            row.minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
            std::string msg = row.message;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            csv << row.grid << ',' << row.setting << ',' << (row.ok ? "ok" : "failed") << ','
                << (row.ok ? format_double(row.mve) : "") << ',' << (row.ok ? format_double(row.lve) : "")
                << ',' << (row.ok ? format_double(row.fdd) : "") << ','
                << (row.ok && row.diversity ? format_double(*row.diversity) : "") << ','
                << format_double(row.minutes) << ',' << msg << '\n';
            csv.flush();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------

fs::path cmd_synth_data(const RunConfig& rc, const fs::path& out_dir) {
    rc.validate();
    const MotionKind kind = data_kind(rc);
    SyntheticOptions opts;
    opts.kind = kind;
    opts.subjects = rc.get_int("data.synthetic.subjects");
    opts.fps = rc.get_double("data.fps");
    const Dataset ds = generate_synthetic_dataset(rc.get_int("data.synthetic.n_sequences"),
                                                  rc.get_int("data.synthetic.n_frames"),
                                                  rc.get_int("data.synthetic.dims"),
                                                  subsystem_seed(rc.seed(), "data"), opts);
    fs::create_directories(out_dir / "audio");
    fs::create_directories(out_dir / "motion");
    std::vector<ManifestEntry> entries;
    std::set<std::string> templates_written;
    for (const auto& item : ds) {
        ManifestEntry e;
        e.subject = item.motion.subject;
        e.sentence = item.motion.sentence;
        e.fps = item.motion.fps;
        e.audio_path = fs::path("audio") / (item.audio.id + ".wav");
        e.motion_path = fs::path("motion") / (item.audio.id + (kind == MotionKind::kRig ? ".csv" : ".dfm"));
        write_wav(out_dir / e.audio_path, item.audio);
        write_motion_any(out_dir / e.motion_path, item.motion);
        if (kind == MotionKind::kVertex) {
            // Displacements are generated around a neutral mesh at the origin.
            e.template_path = fs::path("templates") / (e.subject + ".obj");
            if (templates_written.insert(e.subject).second) {
                fs::create_directories(out_dir / "templates");
                std::ofstream obj(out_dir / e.template_path);
                for (Eigen::Index v = 0; v < item.motion.num_elements(); ++v) obj << "v 0 0 0\n";
            }
        }
        entries.push_back(std::move(e));
    }
    const fs::path manifest = out_dir / "manifest.csv";
    write_manifest(manifest, entries);
    write_region_mask(out_dir / "mask.json", synthetic_region_mask(ds.front().motion.num_elements()));
    return manifest;
}

}  // namespace difface
