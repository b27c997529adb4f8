// vidrel: clip-based video visual relation detection toolkit.
//
// Verbs: synth, train, predict, associate, evaluate, gradcheck, ablate.
// Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "vidrel/association.hpp"
#include "vidrel/evaluation.hpp"
#include "vidrel/pipeline.hpp"
#include "vidrel/synthetic.hpp"

namespace fsys = std::filesystem;
using namespace vidrel;
using nlohmann::ordered_json;

namespace {

uint64_t file_digest(const fsys::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a(bytes.data(), bytes.size());
}

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_manifest(const fsys::path& out_dir, const std::string& verb, const ordered_json& config,
                    const std::vector<fsys::path>& inputs, uint64_t seed) {
    ordered_json m;
    m["verb"] = verb;
    m["seed"] = seed;
    m["config"] = config;
    m["inputs"] = ordered_json::object();
    for (const auto& p : inputs) {
        if (!fsys::exists(p)) continue;
        if (fsys::is_directory(p)) {
            uint64_t h = 0xcbf29ce484222325ULL;
            std::vector<fsys::path> files;
            for (const auto& e : fsys::recursive_directory_iterator(p))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) h ^= file_digest(f);
            m["inputs"][p.string()] = hex64(h);
        } else {
            m["inputs"][p.string()] = hex64(file_digest(p));
        }
    }
    fsys::create_directories(out_dir);
    write_json_file(out_dir / "run_manifest.json", m);
}

PipelineConfig load_pipeline_config(const std::string& config_path,
                                    const std::vector<std::string>& overrides) {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = pipeline_config_from_json(load_json_file(config_path));
    for (const auto& kv : overrides) apply_config_override(cfg, kv);
    cfg.validate();
    return cfg;
}

FeatureMap load_feature_file(const std::string& path, int* dim) {
    auto loaded = load_features(path);
    if (dim) *dim = loaded.dim;
    return std::move(loaded.features);
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out, int test_split,
              uint64_t seed_override, bool seed_set) {
    ScenarioSpec spec;
    if (!config_path.empty()) spec = scenario_from_json(load_json_file(config_path));
    if (seed_set) spec.seed = seed_override;
    spec.validate();
    if (test_split < 0 || test_split >= spec.video_count)
        throw ValidationError("--test-split must be in [0, video_count)");

    auto data = generate(spec);
    const fsys::path root(out);
    auto write_split = [&](const std::string& name, size_t begin, size_t end) {
        if (begin == end) return;
        std::vector<DatasetAnnotation> annos(data.annotations.begin() + static_cast<long>(begin),
                                             data.annotations.begin() + static_cast<long>(end));
        FeatureMap features;
        for (const auto& a : annos)
            for (const auto& t : a.trajectories)
                for (const auto& [frame, box] : t.boxes) {
                    auto key = feature_key(a.video_id, t.traj_id, frame);
                    features[key] = data.features.at(key);
                }
        fsys::create_directories(root / name);
        save_dataset(annos, root / name / "annotations");
        save_features(features, root / name / "features.bin", data.feature_dim);
    };
    size_t train_count = data.annotations.size() - static_cast<size_t>(test_split);
    write_split("train", 0, train_count);
    write_split("test", train_count, data.annotations.size());
    write_manifest(root, "synth", scenario_to_json(spec),
                   config_path.empty() ? std::vector<fsys::path>{}
                                       : std::vector<fsys::path>{config_path},
                   spec.seed);
    std::cout << "wrote " << train_count << " train / " << test_split << " test videos under "
              << out << "\n";
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& features_path,
              const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out) {
    PipelineConfig cfg = load_pipeline_config(config_path, overrides);
    auto annotations = load_dataset(data_dir);
    int dim = 0;
    auto features = load_feature_file(features_path, &dim);
    auto result = train(annotations, features, dim, cfg);

    const fsys::path out_dir(out);
    fsys::create_directories(out_dir);
    save_checkpoint(result.checkpoint, out_dir / "checkpoint");
    {
        std::ofstream curve(out_dir / "loss_curve.csv");
        curve << "epoch,step,loss\n";
        for (const auto& row : result.curve)
            curve << row.epoch << "," << row.step << "," << row.loss << "\n";
    }
    write_manifest(out_dir, "train", pipeline_config_to_json(cfg),
                   {fsys::path(data_dir), fsys::path(features_path)}, cfg.seed);
    std::cout << "trained " << cfg.epochs << " epochs, final mean loss "
              << result.epoch_mean_loss.back() << "; checkpoint at "
              << (out_dir / "checkpoint").string() << "\n";
    return 0;
}

int cmd_predict(const std::string& data_dir, const std::string& features_path,
                const std::string& params_prefix, const std::string& out, int jobs, int top_k) {
    auto ckpt = nn::load_checkpoint(params_prefix);
    auto annotations = load_dataset(data_dir);
    int dim = 0;
    auto features = load_feature_file(features_path, &dim);
    if (dim != ckpt.params.dims.feature_dim)
        throw ValidationError("feature dimension " + std::to_string(dim) +
                              " does not match checkpoint " +
                              std::to_string(ckpt.params.dims.feature_dim));
    int k = top_k > 0 ? top_k : ckpt.config.top_k_per_pair;

    std::vector<VideoClipPredictions> results(annotations.size());
    const int workers = std::max(1, jobs);
    std::atomic<size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = cursor.fetch_add(1);
            if (i >= annotations.size()) return;
            results[i] = predict_video(annotations[i], features, ckpt, k);
        }
    };
    std::vector<std::future<void>> pool;
    for (int w = 1; w < workers; ++w) pool.push_back(std::async(std::launch::async, worker));
    worker();
    for (auto& f : pool) f.get();

    const fsys::path out_dir(out);
    fsys::create_directories(out_dir);
    for (const auto& vp : results)
        write_json_file(out_dir / (vp.video_id + ".json"),
                        clip_predictions_to_json(vp, ckpt.predicates));
    write_manifest(out_dir, "predict", pipeline_config_to_json(ckpt.config),
                   {fsys::path(data_dir), fsys::path(features_path),
                    fsys::path(params_prefix + ".json"), fsys::path(params_prefix + ".bin")},
                   ckpt.seed);
    std::cout << "wrote clip predictions for " << results.size() << " videos to " << out << "\n";
    return 0;
}

int cmd_associate(const std::string& data_dir, const std::string& out, const std::string& mode,
                  double threshold) {
    AssocConfig cfg;
    cfg.mode = parse_assoc_mode(mode);
    cfg.overlap_threshold = threshold;
    cfg.validate();

    std::vector<fsys::path> files;
    for (const auto& e : fsys::directory_iterator(data_dir))
        if (e.path().extension() == ".json" && e.path().filename() != "run_manifest.json")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    const fsys::path out_dir(out);
    fsys::create_directories(out_dir);
    size_t total = 0;
    for (const auto& f : files) {
        auto loaded = clip_predictions_from_json(load_json_file(f));
        auto relations = associate(loaded.video.clips, loaded.video.relations, loaded.predicates, cfg);
        total += relations.size();
        write_predictions(relations, out_dir / (loaded.video.video_id + ".json"),
                          loaded.video.video_id);
    }
    ordered_json cfg_json;
    cfg_json["mode"] = to_string(cfg.mode);
    cfg_json["overlap_threshold"] = cfg.overlap_threshold;
    write_manifest(out_dir, "associate", cfg_json, {fsys::path(data_dir)}, 0);
    std::cout << "associated " << total << " video relations across " << files.size() << " videos\n";
    return 0;
}

int cmd_evaluate(const std::string& data_dir, const std::string& preds_dir, const std::string& out) {
    auto annotations = load_dataset(data_dir);
    std::map<std::string, std::vector<VideoRelation>> predictions;
    for (const auto& e : fsys::directory_iterator(preds_dir)) {
        if (e.path().extension() != ".json" || e.path().filename() == "run_manifest.json") continue;
        std::string vid;
        auto rels = predictions_from_json(load_json_file(e.path()), &vid);
        predictions[vid] = std::move(rels);
    }
    auto report = evaluate_dataset(annotations, predictions);
    std::cout << report_table({{"predictions", report}});
    if (!out.empty()) {
        const fsys::path out_dir(out);
        fsys::create_directories(out_dir);
        write_json_file(out_dir / "report.json", report_to_json(report));
        write_manifest(out_dir, "evaluate", ordered_json::object(),
                       {fsys::path(data_dir), fsys::path(preds_dir)}, 0);
    }
    return 0;
}

// 2 videos x 4 clips x 3 tubelets, every architecture variant.
int cmd_gradcheck(uint64_t seed) {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.video_count = 2;
    spec.frame_count = 75;
    spec.min_objects = 3;
    spec.max_objects = 3;
    spec.category_count = 8;
    spec.predicate_count = 6;
    spec.feature_dim = 6;
    spec.feature_noise = 0.05;
    auto data = generate(spec);

    double max_err = 0.0;
    for (auto arch : {Architecture::kHierarchical, Architecture::kParallel, Architecture::kReversed,
                      Architecture::kPureObject}) {
        PipelineConfig cfg;
        cfg.hidden_width = 6;
        cfg.depth = 3;
        cfg.architecture = arch;
        cfg.seed = seed;
        double err = pipeline_grad_check(data.annotations, data.features, data.feature_dim, cfg);
        std::cout << "gradcheck " << to_string(arch) << ": max relative error " << err << "\n";
        max_err = std::max(max_err, err);
    }
    std::cout << "gradcheck overall: max relative error " << max_err << "\n";
    if (!(max_err < 1e-4)) {
        std::cerr << "gradcheck failed: " << max_err << " >= 1e-4\n";
        return 2;
    }
    return 0;
}

struct AblateRow {
    std::string name;
    PipelineConfig cfg;
    AssocMode assoc = AssocMode::kGreedy;
};

int cmd_ablate(const std::string& data_root, const std::string& config_path,
               const std::vector<std::string>& overrides, const std::string& grid,
               const std::string& out) {
    PipelineConfig base = load_pipeline_config(config_path, overrides);
    auto train_annos = load_dataset(fsys::path(data_root) / "train" / "annotations");
    auto test_annos = load_dataset(fsys::path(data_root) / "test" / "annotations");
    int dim = 0;
    auto train_features =
        load_feature_file((fsys::path(data_root) / "train" / "features.bin").string(), &dim);
    auto test_features =
        load_feature_file((fsys::path(data_root) / "test" / "features.bin").string(), &dim);

    std::vector<AblateRow> rows;
    auto with = [&](const std::string& name, auto&& mutate) {
        AblateRow row{name, base, AssocMode::kGreedy};
        mutate(row);
        rows.push_back(std::move(row));
    };
    auto add_gcn_rows = [&]() {
        with("base", [](AblateRow& r) {
            r.cfg.spatial_mode = SpatialMode::kOff;
            r.cfg.temporal_mode = TemporalMode::kOff;
        });
        with("base+pos-gcn", [](AblateRow& r) {
            r.cfg.spatial_mode = SpatialMode::kPosOnly;
            r.cfg.temporal_mode = TemporalMode::kOff;
        });
        with("base+sem-gcn", [](AblateRow& r) {
            r.cfg.spatial_mode = SpatialMode::kSemOnly;
            r.cfg.temporal_mode = TemporalMode::kOff;
        });
        with("base+s-gcns", [](AblateRow& r) {
            r.cfg.spatial_mode = SpatialMode::kBoth;
            r.cfg.temporal_mode = TemporalMode::kOff;
        });
        with("base+s-gcns+t-gcn", [](AblateRow& r) {
            r.cfg.spatial_mode = SpatialMode::kBoth;
            r.cfg.temporal_mode = TemporalMode::kOn;
        });
    };
    auto add_affinity_rows = [&]() {
        with("full", [](AblateRow&) {});
        with("w/o spatial-aff", [](AblateRow& r) { r.cfg.spatial_affinity_weighted = false; });
        with("w/o temporal-aff",
             [](AblateRow& r) { r.cfg.temporal_mode = TemporalMode::kDenseUnweighted; });
        with("w/o both-aff", [](AblateRow& r) {
            r.cfg.spatial_affinity_weighted = false;
            r.cfg.temporal_mode = TemporalMode::kDenseUnweighted;
        });
    };
    auto add_arch_rows = [&]() {
        for (auto arch : {Architecture::kHierarchical, Architecture::kParallel,
                          Architecture::kReversed, Architecture::kPureObject})
            with(to_string(arch), [arch](AblateRow& r) { r.cfg.architecture = arch; });
    };
    auto add_direction_rows = [&]() {
        for (auto dir : {TemporalDirection::kForward, TemporalDirection::kBackward,
                         TemporalDirection::kBidirectional})
            with(to_string(dir), [dir](AblateRow& r) { r.cfg.temporal_direction = dir; });
    };
    auto add_loss_rows = [&]() {
        with("focal", [](AblateRow& r) { r.cfg.loss = LossKind::kFocal; });
        with("bce", [](AblateRow& r) { r.cfg.loss = LossKind::kBce; });
    };
    auto add_assoc_rows = [&]() {
        with("greedy", [](AblateRow& r) { r.assoc = AssocMode::kGreedy; });
        with("relaxed", [](AblateRow& r) { r.assoc = AssocMode::kRelaxed; });
        with("vlink", [](AblateRow& r) { r.assoc = AssocMode::kVlink; });
    };

    if (grid == "gcn") add_gcn_rows();
    else if (grid == "affinity") add_affinity_rows();
    else if (grid == "arch") add_arch_rows();
    else if (grid == "direction") add_direction_rows();
    else if (grid == "loss") add_loss_rows();
    else if (grid == "assoc") add_assoc_rows();
    else if (grid == "all") {
        add_gcn_rows();
        add_affinity_rows();
        add_arch_rows();
        add_direction_rows();
        add_loss_rows();
        add_assoc_rows();
    } else {
        throw ValidationError("unknown --grid '" + grid +
                              "' (gcn|affinity|arch|direction|loss|assoc|all)");
    }

    std::vector<std::pair<std::string, EvalReport>> table;
    ordered_json results = ordered_json::array();
    for (const auto& row : rows) {
        auto t0 = std::chrono::steady_clock::now();
        auto trained = train(train_annos, train_features, dim, row.cfg);
        auto preds = predict(test_annos, test_features, trained.checkpoint, row.cfg.top_k_per_pair);
        AssocConfig assoc_cfg;
        assoc_cfg.mode = row.assoc;
        std::map<std::string, std::vector<VideoRelation>> by_video;
        for (const auto& vp : preds)
            by_video[vp.video_id] =
                associate(vp.clips, vp.relations, trained.checkpoint.predicates, assoc_cfg);
        auto report = evaluate_dataset(test_annos, by_video);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "ablate row '" << row.name << "' done in " << secs << " s\n";
        table.push_back({row.name, report});
        ordered_json entry;
        entry["name"] = row.name;
        entry["config"] = pipeline_config_to_json(row.cfg);
        entry["association"] = to_string(row.assoc);
        entry["report"] = report_to_json(report);
        results.push_back(std::move(entry));
    }
    std::cout << report_table(table);
    if (!out.empty()) {
        const fsys::path out_dir(out);
        fsys::create_directories(out_dir);
        write_json_file(out_dir / "ablation.json", results);
        write_manifest(out_dir, "ablate", pipeline_config_to_json(base), {fsys::path(data_root)},
                       base.seed);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vidrel: clip-based video visual relation detection toolkit"};
    app.require_subcommand(1);

    std::string config_path, data_dir, features_path, params_prefix, out_dir, preds_dir;
    std::string mode = "greedy", grid = "gcn", arch, direction, loss;
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1, test_split = 0, top_k = 0;
    double threshold = 0.5;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--set", overrides, "config override key=value (repeatable)");
        sub->add_option("--seed", seed, "seed override")
            ->each([&](const std::string&) { seed_set = true; });
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--config", config_path, "scenario JSON");
    synth->add_option("--out", out_dir, "output root")->required();
    synth->add_option("--test-split", test_split, "videos reserved for the test split");
    add_common(synth);

    auto* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--data", data_dir, "annotation directory")->required();
    train_cmd->add_option("--features", features_path, "feature file")->required();
    train_cmd->add_option("--config", config_path, "pipeline config JSON");
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--arch", arch, "architecture override");
    train_cmd->add_option("--direction", direction, "temporal direction override");
    train_cmd->add_option("--loss", loss, "loss override (focal|bce)");
    add_common(train_cmd);

    auto* predict_cmd = app.add_subcommand("predict", "score clip pairs with a checkpoint");
    predict_cmd->add_option("--data", data_dir, "annotation directory")->required();
    predict_cmd->add_option("--features", features_path, "feature file")->required();
    predict_cmd->add_option("--params", params_prefix, "checkpoint prefix")->required();
    predict_cmd->add_option("--out", out_dir, "output directory")->required();
    predict_cmd->add_option("--jobs", jobs, "parallel videos");
    predict_cmd->add_option("--top-k", top_k, "predicates per pair");

    auto* assoc_cmd = app.add_subcommand("associate", "link clip relations into video relations");
    assoc_cmd->add_option("--data", data_dir, "clip prediction directory")->required();
    assoc_cmd->add_option("--out", out_dir, "output directory")->required();
    assoc_cmd->add_option("--mode", mode, "greedy|relaxed|vlink");
    assoc_cmd->add_option("--threshold", threshold, "tubelet overlap threshold");

    auto* eval_cmd = app.add_subcommand("evaluate", "detection and tagging metrics");
    eval_cmd->add_option("--data", data_dir, "ground-truth annotation directory")->required();
    eval_cmd->add_option("--preds", preds_dir, "prediction directory")->required();
    eval_cmd->add_option("--out", out_dir, "report directory");

    auto* grad_cmd = app.add_subcommand("gradcheck", "verify gradients against finite differences");
    grad_cmd->add_option("--seed", seed, "scenario seed");

    auto* ablate_cmd = app.add_subcommand("ablate", "run a configuration grid");
    ablate_cmd->add_option("--data", data_dir, "dataset root with train/ and test/")->required();
    ablate_cmd->add_option("--config", config_path, "pipeline config JSON");
    ablate_cmd->add_option("--grid", grid, "gcn|affinity|arch|direction|loss|assoc|all");
    ablate_cmd->add_option("--out", out_dir, "output directory");
    add_common(ablate_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (!arch.empty()) overrides.push_back("architecture=" + arch);
        if (!direction.empty()) overrides.push_back("temporal_direction=" + direction);
        if (!loss.empty()) overrides.push_back("loss=" + loss);
        if (seed_set) overrides.push_back("seed=" + std::to_string(seed));

        if (synth->parsed()) return cmd_synth(config_path, out_dir, test_split, seed, seed_set);
        if (train_cmd->parsed())
            return cmd_train(data_dir, features_path, config_path, overrides, out_dir);
        if (predict_cmd->parsed())
            return cmd_predict(data_dir, features_path, params_prefix, out_dir, jobs, top_k);
        if (assoc_cmd->parsed()) return cmd_associate(data_dir, out_dir, mode, threshold);
        if (eval_cmd->parsed()) return cmd_evaluate(data_dir, preds_dir, out_dir);
        if (grad_cmd->parsed()) return cmd_gradcheck(seed);
        if (ablate_cmd->parsed()) return cmd_ablate(data_dir, config_path, overrides, grid, out_dir);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
