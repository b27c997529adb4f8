#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "vidrel/model.hpp"
#include "vidrel/pipeline_batch.hpp"

namespace vidrel {

struct LossCurveRow {
    int epoch = 0;
    long step = 0;
    double loss = 0.0;
};

struct TrainResult {
    nn::Checkpoint checkpoint;
    std::vector<LossCurveRow> curve;
    std::vector<double> epoch_mean_loss;
    double final_learning_rate = 0.0;
};

// Deterministic end-to-end training: vocabularies and co-occurrence from the
// training annotations, seeded init, seeded batch order, one optimizer step
// per clip batch, learning rate divided by 10 from lr_drop_epoch on.
inline TrainResult train(const std::vector<DatasetAnnotation>& annotations,
                         const FeatureMap& features, int feature_dim, const PipelineConfig& cfg) {
    cfg.validate();
    if (annotations.empty()) throw ValidationError("train: empty training set");
    TrainResult result;
    nn::Checkpoint& ckpt = result.checkpoint;
    ckpt.config = cfg;
    ckpt.seed = cfg.seed;
    ckpt.objects = object_vocabulary(annotations);
    ckpt.predicates = predicate_vocabulary(annotations);
    if (ckpt.predicates.size() == 0) throw ValidationError("train: no ground-truth predicates");
    ckpt.cooccurrence = compute_cooccurrence(annotations);

    std::vector<ClipBatch> batches;
    for (const auto& anno : annotations) {
        auto clips = segment_clips(anno, cfg);
        attach_appearance(clips, anno.video_id, features, feature_dim);
        for (auto& batch : make_batches(anno, std::move(clips), ckpt.cooccurrence, ckpt.predicates, cfg))
            batches.push_back(std::move(batch));
    }
    if (batches.empty()) throw ValidationError("train: no usable clips in training set");

    ckpt.params = nn::init_params(nn::model_dims(feature_dim, ckpt.predicates.size(), cfg), cfg.seed);
    auto optimizer = nn::make_optimizer(ckpt.params, cfg.learning_rate, cfg.weight_decay);

    const double gamma = cfg.loss == LossKind::kFocal ? cfg.focal_gamma : 0.0;
    const double balance = cfg.loss == LossKind::kFocal ? cfg.focal_balance : 0.5;

    Rng shuffle_rng = Rng(cfg.seed).fork(0x5b5b);
    std::vector<size_t> order(batches.size());
    std::iota(order.begin(), order.end(), 0);
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        optimizer.learning_rate =
            epoch >= cfg.lr_drop_epoch ? cfg.learning_rate / 10.0 : cfg.learning_rate;
        // Fisher-Yates with the project RNG, deterministic across platforms
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(shuffle_rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_sum = 0.0;
        for (size_t idx : order) {
            ClipBatch& batch = batches[idx];
            auto pv = nn::make_param_vars(ckpt.params, /*requires_grad=*/true);
            nn::Var scores = forward(batch, pv, ckpt.params.dims);
            nn::Var loss = nn::focal_loss(scores, batch.targets, gamma, balance);
            double loss_value = loss->value.at(0, 0);
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) +
                                         " step " + std::to_string(step));
            nn::backward(loss);
            std::vector<nn::Tensor2> grads;
            grads.reserve(pv.vars.size());
            for (auto& v : pv.vars) {
                v->ensure_grad();
                grads.push_back(v->grad);
            }
            nn::optimizer_step(ckpt.params, grads, optimizer);
            result.curve.push_back({epoch, step, loss_value});
            epoch_sum += loss_value;
            ++step;
        }
        result.epoch_mean_loss.push_back(epoch_sum / static_cast<double>(batches.size()));
    }
    result.final_learning_rate = optimizer.learning_rate;
    return result;
}

struct VideoClipPredictions {
    std::string video_id;
    std::vector<Clip> clips;
    std::vector<ClipRelation> relations;
};

// Scores every ordered pair of every clip and keeps the top_k predicates per
// pair, sorted by descending score (ties by predicate index).
inline VideoClipPredictions predict_video(const DatasetAnnotation& anno, const FeatureMap& features,
                                          nn::Checkpoint& ckpt, int top_k) {
    const PipelineConfig& cfg = ckpt.config;
    VideoClipPredictions out;
    out.video_id = anno.video_id;
    auto clips = segment_clips(anno, cfg);
    attach_appearance(clips, anno.video_id, features, ckpt.params.dims.feature_dim);
    out.clips = clips;
    auto batches = make_batches(anno, std::move(clips), ckpt.cooccurrence, ckpt.predicates, cfg);
    for (auto& batch : batches) {
        auto pv = nn::make_param_vars(ckpt.params, /*requires_grad=*/false);
        nn::Var scores = forward(batch, pv, ckpt.params.dims);
        const nn::Tensor2& s = scores->value;
        const int predicate_count = s.cols;
        int k = std::min(top_k, predicate_count);
        for (int row = 0; row < s.rows; ++row) {
            std::vector<int> idx(static_cast<size_t>(predicate_count));
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
                return s.at(row, a) != s.at(row, b) ? s.at(row, a) > s.at(row, b) : a < b;
            });
            for (int r = 0; r < k; ++r)
                out.relations.push_back({batch.pairs[static_cast<size_t>(row)], idx[static_cast<size_t>(r)],
                                         s.at(row, idx[static_cast<size_t>(r)])});
        }
    }
    return out;
}

inline std::vector<VideoClipPredictions> predict(const std::vector<DatasetAnnotation>& annotations,
                                                 const FeatureMap& features, nn::Checkpoint& ckpt,
                                                 int top_k) {
    std::vector<VideoClipPredictions> out;
    out.reserve(annotations.size());
    for (const auto& anno : annotations) out.push_back(predict_video(anno, features, ckpt, top_k));
    return out;
}

// ---------------------------------------------------------------------------
// Clip-level prediction files: the handoff between `predict` and
// `associate`. Tubelet appearance is not serialized; association only needs
// geometry, categories and source trajectories.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json clip_predictions_to_json(const VideoClipPredictions& vp,
                                                       const Vocabulary& predicates) {
    nlohmann::ordered_json doc;
    doc["video_id"] = vp.video_id;
    doc["clips"] = nlohmann::ordered_json::array();
    for (const auto& clip : vp.clips) {
        nlohmann::ordered_json cj;
        cj["clip_index"] = clip.clip_index;
        cj["start_frame"] = clip.start_frame;
        cj["end_frame"] = clip.end_frame;
        cj["tubelets"] = nlohmann::ordered_json::array();
        for (const auto& t : clip.tubelets) {
            nlohmann::ordered_json tj;
            tj["id"] = t.tubelet_id;
            tj["category"] = t.category;
            if (t.source_trajectory_id) tj["source"] = *t.source_trajectory_id;
            tj["first_frame"] = t.first_frame();
            tj["boxes"] = nlohmann::ordered_json::array();
            for (const auto& [frame, box] : t.boxes)
                tj["boxes"].push_back({box.xmin, box.ymin, box.xmax, box.ymax});
            cj["tubelets"].push_back(std::move(tj));
        }
        doc["clips"].push_back(std::move(cj));
    }
    doc["relations"] = nlohmann::ordered_json::array();
    for (const auto& r : vp.relations)
        doc["relations"].push_back({{"clip", r.pair.clip_index},
                                    {"subject", r.pair.subject},
                                    {"object", r.pair.object},
                                    {"predicate", predicates.name(r.predicate)},
                                    {"score", r.score}});
    return doc;
}

struct LoadedClipPredictions {
    VideoClipPredictions video;
    Vocabulary predicates;  // built from the names present in the file
};

inline LoadedClipPredictions clip_predictions_from_json(const nlohmann::ordered_json& doc) {
    LoadedClipPredictions out;
    out.video.video_id = doc.at("video_id").get<std::string>();
    for (const auto& cj : doc.at("clips")) {
        Clip clip;
        clip.clip_index = cj.at("clip_index").get<int>();
        clip.start_frame = cj.at("start_frame").get<int>();
        clip.end_frame = cj.at("end_frame").get<int>();
        for (const auto& tj : cj.at("tubelets")) {
            Tubelet t;
            t.tubelet_id = tj.at("id").get<std::string>();
            t.category = tj.at("category").get<std::string>();
            if (tj.contains("source")) t.source_trajectory_id = tj.at("source").get<std::string>();
            t.clip_index = clip.clip_index;
            int frame = tj.at("first_frame").get<int>();
            for (const auto& bj : tj.at("boxes"))
                t.boxes.push_back({frame++, BoundingBox{bj.at(0).get<double>(), bj.at(1).get<double>(),
                                                        bj.at(2).get<double>(), bj.at(3).get<double>()}});
            clip.tubelets.push_back(std::move(t));
        }
        out.video.clips.push_back(std::move(clip));
    }
    std::vector<std::string> names;
    for (const auto& rj : doc.at("relations")) names.push_back(rj.at("predicate").get<std::string>());
    out.predicates = Vocabulary::from_names(std::move(names));
    for (const auto& rj : doc.at("relations")) {
        ClipRelation r;
        r.pair.clip_index = rj.at("clip").get<int>();
        r.pair.subject = rj.at("subject").get<int>();
        r.pair.object = rj.at("object").get<int>();
        r.predicate = *out.predicates.lookup(rj.at("predicate").get<std::string>());
        r.score = rj.at("score").get<double>();
        out.video.relations.push_back(std::move(r));
    }
    return out;
}

// Max relative error of reverse-mode gradients vs central differences over
// every parameter, with the summed batch loss of `annotations` as objective.
inline double pipeline_grad_check(const std::vector<DatasetAnnotation>& annotations,
                                  const FeatureMap& features, int feature_dim,
                                  const PipelineConfig& cfg) {
    auto objects = object_vocabulary(annotations);
    auto predicates = predicate_vocabulary(annotations);
    auto cooc = compute_cooccurrence(annotations);
    std::vector<ClipBatch> batches;
    for (const auto& anno : annotations) {
        auto clips = segment_clips(anno, cfg);
        attach_appearance(clips, anno.video_id, features, feature_dim);
        for (auto& b : make_batches(anno, std::move(clips), cooc, predicates, cfg))
            batches.push_back(std::move(b));
    }
    nn::ModelParams params = nn::init_params(nn::model_dims(feature_dim, predicates.size(), cfg), cfg.seed);
    const double gamma = cfg.loss == LossKind::kFocal ? cfg.focal_gamma : 0.0;
    const double balance = cfg.loss == LossKind::kFocal ? cfg.focal_balance : 0.5;

    auto build = [&]() -> std::pair<nn::Var, std::vector<nn::Var>> {
        auto pv = nn::make_param_vars(params, /*requires_grad=*/true);
        nn::Var total;
        for (auto& batch : batches) {
            nn::Var loss = nn::focal_loss(forward(batch, pv, params.dims), batch.targets, gamma, balance);
            total = total ? nn::add(total, loss) : loss;
        }
        return {total, pv.vars};
    };
    std::vector<nn::Tensor2*> storage;
    for (auto& [name, t] : params.named_tensors()) storage.push_back(t);
    return nn::grad_check(build, storage);
}

}  // namespace vidrel
