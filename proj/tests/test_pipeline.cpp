#include <catch2/catch.hpp>
#include <filesystem>

#include "vidrel/pipeline.hpp"
#include "vidrel/synthetic.hpp"

using namespace vidrel;

namespace {

ScenarioSpec tiny_scenario(uint64_t seed, int videos, int frames = 90) {
    ScenarioSpec s;
    s.seed = seed;
    s.video_count = videos;
    s.frame_count = frames;
    s.min_objects = 3;
    s.max_objects = 3;
    s.category_count = 8;
    s.predicate_count = 8;
    s.feature_dim = 8;
    s.feature_noise = 0.02;
    return s;
}

PipelineConfig tiny_config(uint64_t seed = 1) {
    PipelineConfig cfg;
    cfg.hidden_width = 8;
    cfg.depth = 2;
    cfg.epochs = 2;
    cfg.seed = seed;
    cfg.learning_rate = 3e-3;
    return cfg;
}

DatasetAnnotation single_traj_video(int frame_count) {
    DatasetAnnotation a;
    a.video_id = "v";
    a.frame_count = frame_count;
    a.width = 200;
    a.height = 200;
    TrajectoryAnnotation t;
    t.traj_id = "t0";
    t.category = "dog";
    for (int f = 0; f < frame_count; ++f) t.boxes.push_back({f, BoundingBox{0, 0, 10, 10}});
    a.trajectories.push_back(t);
    return a;
}

}  // namespace

TEST_CASE("clip segmentation geometry", "[pipeline]") {
    PipelineConfig cfg;  // clip_length 30, stride 15

    SECTION("60-frame video yields clips [0,30) [15,45) [30,60)") {
        auto clips = segment_clips(single_traj_video(60), cfg);
        REQUIRE(clips.size() == 3);
        CHECK(clips[0].start_frame == 0);
        CHECK(clips[0].end_frame == 29);
        CHECK(clips[1].start_frame == 15);
        CHECK(clips[1].end_frame == 44);
        CHECK(clips[2].start_frame == 30);
        CHECK(clips[2].end_frame == 59);
    }

    SECTION("30-frame video yields exactly one clip") {
        auto clips = segment_clips(single_traj_video(30), cfg);
        REQUIRE(clips.size() == 1);
        CHECK(clips[0].end_frame - clips[0].start_frame + 1 == 30);
    }

    SECTION("short video yields one clip padded by final-frame repetition") {
        auto clips = segment_clips(single_traj_video(20), cfg);
        REQUIRE(clips.size() == 1);
        REQUIRE(clips[0].tubelets.size() == 1);
        const Tubelet& t = clips[0].tubelets[0];
        CHECK(t.boxes.size() == 30);
        CHECK(t.boxes.back().second == t.boxes[19].second);
    }

    SECTION("trajectory covering under half the clip is excluded") {
        DatasetAnnotation a = single_traj_video(30);
        a.trajectories[0].boxes.resize(10);  // 10 of 30 frames
        auto clips = segment_clips(a, cfg);
        REQUIRE(clips.size() == 1);
        CHECK(clips[0].tubelets.empty());
    }

    SECTION("half-coverage trajectory is kept and padded to full clip length") {
        DatasetAnnotation a = single_traj_video(30);
        a.trajectories[0].boxes.resize(15);
        auto clips = segment_clips(a, cfg);
        REQUIRE(clips[0].tubelets.size() == 1);
        CHECK(clips[0].tubelets[0].boxes.size() == 30);
        CHECK(clips[0].tubelets[0].boxes.front().first == 0);
        CHECK(clips[0].tubelets[0].boxes.back().first == 29);
    }
}

TEST_CASE("appearance encoding", "[pipeline]") {
    std::vector<double> a{0.0, 2.0}, b{2.0, 0.0};
    auto mean = encode_appearance({&a, &b});
    CHECK(mean[0] == Approx(1.0));
    CHECK(mean[1] == Approx(1.0));

    auto single = encode_appearance({&a});
    CHECK(single == a);

    std::vector<double> same{3.0, 4.0};
    auto rep = encode_appearance({&same, &same, &same});
    CHECK(rep == same);

    std::vector<double> bad{1.0};
    CHECK_THROWS_WITH(encode_appearance({&a, &bad}), Catch::Contains("dimension"));
}

TEST_CASE("target derivation", "[pipeline]") {
    PipelineConfig cfg;
    DatasetAnnotation a;
    a.video_id = "v";
    a.frame_count = 60;
    a.width = 100;
    a.height = 100;
    for (int i = 0; i < 2; ++i) {
        TrajectoryAnnotation t;
        t.traj_id = "t" + std::to_string(i);
        t.category = i == 0 ? "dog" : "ball";
        for (int f = 0; f < 60; ++f)
            t.boxes.push_back({f, BoundingBox{10.0 * i, 0, 10.0 * i + 10, 10}});
        a.trajectories.push_back(t);
    }
    Vocabulary preds = Vocabulary::from_names({"bites", "chases"});
    auto clips = segment_clips(a, cfg);
    REQUIRE(clips.size() == 3);

    SECTION("full-video relation is positive in every clip containing the pair") {
        a.relations = {{"t0", "t1", "chases", 0, 60}};
        auto targets = derive_targets(clips, a, preds, cfg);
        REQUIRE(targets.rows == 6);  // 2 ordered pairs per clip
        int chases = *preds.lookup("chases");
        for (int clip = 0; clip < 3; ++clip) {
            CHECK(targets.at(2 * clip + 0, chases) == 1.0);      // (t0, t1)
            CHECK(targets.at(2 * clip + 1, chases) == 0.0);      // (t1, t0) reversed
        }
    }

    SECTION("relation covering 10 of 30 clip frames is negative there") {
        a.relations = {{"t0", "t1", "chases", 0, 10}};
        auto targets = derive_targets(clips, a, preds, cfg);
        int chases = *preds.lookup("chases");
        CHECK(targets.at(0, chases) == 0.0);
    }

    SECTION("two predicates on one pair are both positive (multi-label)") {
        a.relations = {{"t0", "t1", "chases", 0, 60}, {"t0", "t1", "bites", 0, 60}};
        auto targets = derive_targets(clips, a, preds, cfg);
        CHECK(targets.at(0, *preds.lookup("chases")) == 1.0);
        CHECK(targets.at(0, *preds.lookup("bites")) == 1.0);
    }
}

TEST_CASE("forward output shape and ablation reduction", "[pipeline]") {
    auto data = generate(tiny_scenario(5, 2));
    PipelineConfig cfg = tiny_config();
    auto cooc = compute_cooccurrence(data.annotations);
    auto preds = predicate_vocabulary(data.annotations);

    for (auto arch : {Architecture::kHierarchical, Architecture::kParallel, Architecture::kReversed,
                      Architecture::kPureObject}) {
        cfg.architecture = arch;
        auto clips = segment_clips(data.annotations[0], cfg);
        attach_appearance(clips, data.annotations[0].video_id, data.features, data.feature_dim);
        auto batches = make_batches(data.annotations[0], std::move(clips), cooc, preds, cfg);
        REQUIRE(batches.size() == 1);
        auto params = nn::init_params(nn::model_dims(data.feature_dim, preds.size(), cfg), 3);
        auto pv = nn::make_param_vars(params, false);
        auto scores = forward(batches[0], pv, params.dims);
        int expected_pairs = 0;
        for (const auto& c : batches[0].clips) {
            int m = static_cast<int>(c.tubelets.size());
            expected_pairs += m * (m - 1);
        }
        CHECK(scores->value.rows == expected_pairs);
        CHECK(scores->value.cols == preds.size());
        for (double v : scores->value.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("temporal causality of the forward pass", "[pipeline]") {
    auto data = generate(tiny_scenario(9, 3));
    const auto& anno = data.annotations[0];
    auto cooc = compute_cooccurrence(data.annotations);
    auto preds = predicate_vocabulary(data.annotations);

    auto scores_with = [&](PipelineConfig& cfg, const std::vector<Clip>& clips) {
        auto batches = make_batches(anno, clips, cooc, preds, cfg);
        auto params = nn::init_params(nn::model_dims(data.feature_dim, preds.size(), cfg), 17);
        auto pv = nn::make_param_vars(params, false);
        return std::pair{forward(batches[0], pv, params.dims)->value, batches[0].pairs};
    };

    PipelineConfig cfg = tiny_config();
    auto clips = segment_clips(anno, cfg);
    attach_appearance(clips, anno.video_id, data.features, data.feature_dim);
    REQUIRE(clips.size() >= 3);
    const int k = 1;

    auto perturbed = clips;
    Rng noise(99);
    for (auto& clip : perturbed)
        if (clip.clip_index > k)
            for (auto& t : clip.tubelets)
                for (double& v : t.appearance) v += noise.uniform(0.5, 1.5);

    SECTION("forward mode: clips <= k are bit-identical under future perturbation") {
        cfg.temporal_direction = TemporalDirection::kForward;
        auto [base, pairs] = scores_with(cfg, clips);
        auto [mod, pairs2] = scores_with(cfg, perturbed);
        REQUIRE(pairs.size() == pairs2.size());
        bool future_changed = false;
        for (size_t r = 0; r < pairs.size(); ++r) {
            for (int c = 0; c < base.cols; ++c) {
                if (pairs[r].clip_index <= k) {
                    CHECK(base.at(static_cast<int>(r), c) == mod.at(static_cast<int>(r), c));
                } else if (base.at(static_cast<int>(r), c) != mod.at(static_cast<int>(r), c)) {
                    future_changed = true;
                }
            }
        }
        CHECK(future_changed);  // the perturbation itself was visible downstream
    }

    SECTION("temporal off: every clip is unaffected by other-clip perturbations") {
        cfg.temporal_mode = TemporalMode::kOff;
        auto [base, pairs] = scores_with(cfg, clips);
        auto [mod, pairs2] = scores_with(cfg, perturbed);
        for (size_t r = 0; r < pairs.size(); ++r)
            if (pairs[r].clip_index <= k)
                for (int c = 0; c < base.cols; ++c)
                    CHECK(base.at(static_cast<int>(r), c) == mod.at(static_cast<int>(r), c));
    }

    SECTION("bidirectional mode leaks future information") {
        cfg.temporal_direction = TemporalDirection::kBidirectional;
        auto [base, pairs] = scores_with(cfg, clips);
        auto [mod, pairs2] = scores_with(cfg, perturbed);
        bool changed = false;
        for (size_t r = 0; r < pairs.size(); ++r)
            if (pairs[r].clip_index <= k)
                for (int c = 0; c < base.cols; ++c)
                    if (base.at(static_cast<int>(r), c) != mod.at(static_cast<int>(r), c)) changed = true;
        CHECK(changed);
    }
}

TEST_CASE("training is deterministic and learns a separable set", "[pipeline]") {
    auto data = generate(tiny_scenario(21, 4));
    PipelineConfig cfg = tiny_config(7);
    cfg.epochs = 50;  // 4 batches per epoch -> 200 steps
    cfg.lr_drop_epoch = 40;

    auto result_a = train(data.annotations, data.features, data.feature_dim, cfg);
    auto result_b = train(data.annotations, data.features, data.feature_dim, cfg);

    SECTION("equal seeds produce bit-identical parameters") {
        auto na = result_a.checkpoint.params.named_tensors();
        auto nb = result_b.checkpoint.params.named_tensors();
        REQUIRE(na.size() == nb.size());
        for (size_t i = 0; i < na.size(); ++i)
            for (size_t j = 0; j < na[i].second->size(); ++j)
                CHECK(na[i].second->data[j] == nb[i].second->data[j]);
    }

    SECTION("loss collapses on the training set") {
        double initial = result_a.epoch_mean_loss.front();
        double last = result_a.epoch_mean_loss.back();
        CHECK(last < 0.1 * initial);
    }

    SECTION("loss curve rows carry epoch and step") {
        CHECK(result_a.curve.size() == static_cast<size_t>(cfg.epochs) * 4);
        CHECK(result_a.curve.front().epoch == 0);
        CHECK(result_a.curve.back().epoch == cfg.epochs - 1);
    }

    SECTION("learning rate after the drop epoch is exactly lr/10") {
        CHECK(result_a.final_learning_rate == cfg.learning_rate / 10.0);
    }
}

TEST_CASE("prediction emits sorted top-k predicates per pair", "[pipeline]") {
    auto data = generate(tiny_scenario(33, 3));
    PipelineConfig cfg = tiny_config(3);
    cfg.epochs = 2;
    auto result = train(data.annotations, data.features, data.feature_dim, cfg);

    const int p = result.checkpoint.predicates.size();
    auto preds = predict(data.annotations, data.features, result.checkpoint, p);
    REQUIRE(preds.size() == data.annotations.size());
    for (const auto& vp : preds) {
        // group by pair and check count == P and non-increasing scores
        std::map<std::tuple<int, int, int>, std::vector<double>> by_pair;
        for (const auto& r : vp.relations)
            by_pair[{r.pair.clip_index, r.pair.subject, r.pair.object}].push_back(r.score);
        for (const auto& [key, scores] : by_pair) {
            CHECK(static_cast<int>(scores.size()) == p);
            for (size_t i = 1; i < scores.size(); ++i) CHECK(scores[i] <= scores[i - 1]);
        }
    }
}

TEST_CASE("clip prediction files round-trip", "[pipeline]") {
    auto data = generate(tiny_scenario(41, 2));
    PipelineConfig cfg = tiny_config(4);
    auto result = train(data.annotations, data.features, data.feature_dim, cfg);
    auto preds = predict({data.annotations[0]}, data.features, result.checkpoint, 3);

    auto doc = clip_predictions_to_json(preds[0], result.checkpoint.predicates);
    auto loaded = clip_predictions_from_json(doc);
    CHECK(loaded.video.video_id == preds[0].video_id);
    REQUIRE(loaded.video.relations.size() == preds[0].relations.size());
    REQUIRE(loaded.video.clips.size() == preds[0].clips.size());
    for (size_t i = 0; i < preds[0].clips.size(); ++i) {
        REQUIRE(loaded.video.clips[i].tubelets.size() == preds[0].clips[i].tubelets.size());
        for (size_t t = 0; t < preds[0].clips[i].tubelets.size(); ++t)
            CHECK(loaded.video.clips[i].tubelets[t].boxes == preds[0].clips[i].tubelets[t].boxes);
    }
    for (size_t i = 0; i < preds[0].relations.size(); ++i) {
        const std::string want =
            result.checkpoint.predicates.name(preds[0].relations[i].predicate);
        CHECK(loaded.predicates.name(loaded.video.relations[i].predicate) == want);
        CHECK(loaded.video.relations[i].score == preds[0].relations[i].score);
    }
}

TEST_CASE("batches chunk consecutive clips by budget and never span videos", "[pipeline]") {
    auto data = generate(tiny_scenario(61, 2, 120));  // 7 clips per video
    PipelineConfig cfg = tiny_config();
    cfg.batch_clip_budget = 3;
    auto cooc = compute_cooccurrence(data.annotations);
    auto preds = predicate_vocabulary(data.annotations);
    for (const auto& anno : data.annotations) {
        auto clips = segment_clips(anno, cfg);
        attach_appearance(clips, anno.video_id, data.features, data.feature_dim);
        REQUIRE(clips.size() == 7);
        auto batches = make_batches(anno, std::move(clips), cooc, preds, cfg);
        REQUIRE(batches.size() == 3);  // 3 + 3 + 1
        CHECK(batches[0].clips.size() == 3);
        CHECK(batches[1].clips.size() == 3);
        CHECK(batches[2].clips.size() == 1);
        CHECK(batches[1].clips.front().clip_index == 3);
        for (const auto& b : batches)
            for (size_t k = 1; k < b.clips.size(); ++k)
                CHECK(b.clips[k].clip_index == b.clips[k - 1].clip_index + 1);
    }
}

TEST_CASE("pipeline config json rejects unknown fields", "[pipeline]") {
    nlohmann::ordered_json j = pipeline_config_to_json(PipelineConfig{});
    CHECK_NOTHROW(pipeline_config_from_json(j));
    j["mystery"] = 1;
    CHECK_THROWS_WITH(pipeline_config_from_json(j), Catch::Contains("unknown field"));

    PipelineConfig cfg;
    apply_config_override(cfg, "hidden_width=32");
    CHECK(cfg.hidden_width == 32);
    apply_config_override(cfg, "architecture=parallel");
    CHECK(cfg.architecture == Architecture::kParallel);
    CHECK_THROWS_AS(apply_config_override(cfg, "nope=1"), ValidationError);
    CHECK_THROWS_AS(apply_config_override(cfg, "clip_stride=60"), ValidationError);
}

TEST_CASE("gradients of the full model match finite differences (small)", "[pipeline]") {
    auto data = generate(tiny_scenario(55, 2, 60));
    PipelineConfig cfg;
    cfg.hidden_width = 5;
    cfg.depth = 2;
    cfg.seed = 12;
    double err = pipeline_grad_check(data.annotations, data.features, data.feature_dim, cfg);
    CHECK(err < 1e-4);
}
