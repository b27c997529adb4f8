#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidrel/io.hpp"
#include "vidrel/types.hpp"

namespace vidrel {

// One relation family the generator can script into a video:
//   overlap  "touching"          subject rides on the object for the span;
//                                decidable from the pair geometry alone.
//   context  "signal_a/b"        pair at constant medium distance; a marker
//                                object overlapping both carries the label,
//                                visible only through same-clip context.
//   sweep    "weaving/flanking"  subject hovers above the object, either
//                                oscillating across it with a full period
//                                per clip (side alternates clip to clip) or
//                                holding one side; any single clip looks the
//                                same for both, so only cross-clip context
//                                separates the two predicates.
//   follow   "following"         subject shadows the object over a long span
//                                with high overlap; association fodder.
struct RelationScript {
    std::string kind;  // overlap | context | sweep | follow
    std::string span;  // short | long
    double weight = 1.0;
};

struct ScenarioSpec {
    uint64_t seed = 42;
    int video_count = 100;
    int frame_count = 90;
    int min_objects = 3;
    int max_objects = 4;
    int category_count = 12;   // includes the two marker categories
    int predicate_count = 12;  // scripted predicates plus inert fillers
    std::vector<RelationScript> scripts = {{"overlap", "short", 1.0},
                                           {"context", "long", 1.0},
                                           {"sweep", "long", 1.0}};
    double feature_noise = 0.05;
    int feature_dim = 256;
    double dropout_rate = 0.0;  // chance a long relation loses one clip of subject track

    void validate() const {
        if (video_count <= 0 || frame_count <= 0) throw ValidationError("scenario: counts must be positive");
        if (min_objects < 2 || max_objects < min_objects)
            throw ValidationError("scenario: need at least two objects per video");
        if (category_count < max_objects + 2)
            throw ValidationError("scenario: category_count must cover max_objects plus two markers");
        if (predicate_count < 6)
            throw ValidationError("scenario: predicate_count must be at least 6 (scripted predicates)");
        if (feature_dim < 4) throw ValidationError("scenario: feature_dim too small");
        if (feature_noise < 0.0) throw ValidationError("scenario: feature_noise must be >= 0");
        if (dropout_rate < 0.0 || dropout_rate > 1.0)
            throw ValidationError("scenario: dropout_rate must be in [0,1]");
        if (scripts.empty()) throw ValidationError("scenario: no relation scripts (infeasible spec)");
        for (const auto& s : scripts) {
            if (s.kind != "overlap" && s.kind != "context" && s.kind != "sweep" && s.kind != "follow")
                throw ValidationError("scenario: unknown script kind '" + s.kind + "'");
            if (s.span != "short" && s.span != "long")
                throw ValidationError("scenario: unknown span '" + s.span + "'");
            if (s.weight <= 0.0) throw ValidationError("scenario: script weight must be positive");
            if (s.kind == "context" && min_objects < 3)
                throw ValidationError("scenario: context scripts need min_objects >= 3 (infeasible spec)");
        }
    }
};

inline nlohmann::ordered_json scenario_to_json(const ScenarioSpec& s) {
    nlohmann::ordered_json j;
    j["seed"] = s.seed;
    j["video_count"] = s.video_count;
    j["frame_count"] = s.frame_count;
    j["min_objects"] = s.min_objects;
    j["max_objects"] = s.max_objects;
    j["category_count"] = s.category_count;
    j["predicate_count"] = s.predicate_count;
    j["scripts"] = nlohmann::ordered_json::array();
    for (const auto& sc : s.scripts)
        j["scripts"].push_back({{"kind", sc.kind}, {"span", sc.span}, {"weight", sc.weight}});
    j["feature_noise"] = s.feature_noise;
    j["feature_dim"] = s.feature_dim;
    j["dropout_rate"] = s.dropout_rate;
    return j;
}

inline ScenarioSpec scenario_from_json(const nlohmann::ordered_json& j) {
    ScenarioSpec s;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        try {
            if (k == "seed") s.seed = v.get<uint64_t>();
            else if (k == "video_count") s.video_count = v.get<int>();
            else if (k == "frame_count") s.frame_count = v.get<int>();
            else if (k == "min_objects") s.min_objects = v.get<int>();
            else if (k == "max_objects") s.max_objects = v.get<int>();
            else if (k == "category_count") s.category_count = v.get<int>();
            else if (k == "predicate_count") s.predicate_count = v.get<int>();
            else if (k == "feature_noise") s.feature_noise = v.get<double>();
            else if (k == "feature_dim") s.feature_dim = v.get<int>();
            else if (k == "dropout_rate") s.dropout_rate = v.get<double>();
            else if (k == "scripts") {
                s.scripts.clear();
                for (const auto& sj : v)
                    s.scripts.push_back({sj.at("kind").get<std::string>(), sj.at("span").get<std::string>(),
                                         sj.at("weight").get<double>()});
            } else {
                throw ValidationError("scenario: unknown field '" + k + "'");
            }
        } catch (const nlohmann::json::exception&) {
            throw ValidationError("scenario: field '" + k + "' has wrong type");
        }
    }
    s.validate();
    return s;
}

struct SyntheticData {
    std::vector<DatasetAnnotation> annotations;
    FeatureMap features;
    int feature_dim = 0;
};

namespace synth_detail {

constexpr double kCanvasW = 640.0;
constexpr double kCanvasH = 480.0;

inline std::string category_name(int i) {
    if (i == 0) return "marker_a";
    if (i == 1) return "marker_b";
    char buf[16];
    std::snprintf(buf, sizeof(buf), "obj_%02d", i - 2);
    return buf;
}

inline std::vector<std::string> predicate_names(int count) {
    std::vector<std::string> out = {"touching", "signal_a", "signal_b",
                                    "weaving", "flanking", "following"};
    for (int i = 0; static_cast<int>(out.size()) < count; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "filler_%02d", i);
        out.push_back(buf);
    }
    return out;
}

// Category embeddings hash the category name so that independently seeded
// train and test scenarios share the same feature space.
inline std::vector<double> category_embedding(const std::string& name, int dim) {
    Rng rng(fnv1a(name.data(), name.size()) ^ 0xe0bedd1276543210ULL);
    std::vector<double> v(static_cast<size_t>(dim));
    double norm = 0.0;
    for (double& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

using Path = std::vector<std::pair<double, double>>;  // per-frame centers

// Smooth piecewise-linear wander: waypoints every 30 frames, bounded step.
inline Path wander_path(Rng& rng, int frames, double max_step) {
    Path path(static_cast<size_t>(frames));
    const double margin = 70.0;
    double x = rng.uniform(margin, kCanvasW - margin);
    double y = rng.uniform(margin, kCanvasH - margin);
    int segment = 30;
    double tx = x, ty = y;
    for (int f = 0; f < frames; ++f) {
        if (f % segment == 0) {
            x = tx;
            y = ty;
            tx = std::clamp(x + rng.uniform(-max_step, max_step), margin, kCanvasW - margin);
            ty = std::clamp(y + rng.uniform(-max_step, max_step), margin, kCanvasH - margin);
        }
        double t = static_cast<double>(f % segment) / segment;
        path[static_cast<size_t>(f)] = {x + t * (tx - x), y + t * (ty - y)};
    }
    return path;
}

inline FrameBoxTrack path_to_boxes(const Path& path, double w, double h) {
    FrameBoxTrack track;
    for (size_t f = 0; f < path.size(); ++f) {
        double cx = std::clamp(path[f].first, w / 2.0, kCanvasW - w / 2.0);
        double cy = std::clamp(path[f].second, h / 2.0, kCanvasH - h / 2.0);
        track.push_back({static_cast<int>(f),
                         BoundingBox{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0}});
    }
    return track;
}

}  // namespace synth_detail

// Deterministic synthetic dataset: trajectories, one scripted relation per
// video (plus an occasional unlearnable filler relation), and per-frame
// appearance features keyed "<video>/<traj>/<frame>".
inline SyntheticData generate(const ScenarioSpec& spec) {
    using namespace synth_detail;
    spec.validate();
    SyntheticData data;
    data.feature_dim = spec.feature_dim;
    Rng root(spec.seed);

    double total_weight = 0.0;
    for (const auto& s : spec.scripts) total_weight += s.weight;

    for (int v = 0; v < spec.video_count; ++v) {
        Rng rng = root.fork(static_cast<uint64_t>(v) + 1);
        DatasetAnnotation anno;
        char vid[32];
        std::snprintf(vid, sizeof(vid), "video_%04d", v);
        anno.video_id = vid;
        anno.frame_count = spec.frame_count;
        anno.width = static_cast<int>(kCanvasW);
        anno.height = static_cast<int>(kCanvasH);

        // pick the script
        double pick = rng.uniform() * total_weight;
        const RelationScript* script = &spec.scripts.back();
        for (const auto& s : spec.scripts) {
            if (pick < s.weight) {
                script = &s;
                break;
            }
            pick -= s.weight;
        }

        const int n_objects = rng.uniform_int(spec.min_objects, spec.max_objects);
        const bool has_marker = script->kind == "context";
        const bool rider = script->kind == "overlap";  // subject is markedly smaller

        // distinct non-marker categories for the regular objects
        std::vector<int> regular(static_cast<size_t>(spec.category_count - 2));
        for (size_t i = 0; i < regular.size(); ++i) regular[i] = static_cast<int>(i) + 2;
        for (size_t i = regular.size(); i > 1; --i)
            std::swap(regular[i - 1], regular[rng.next_u64() % i]);

        // object sizes and paths; index 0 is the reference object, 1 the subject
        std::vector<double> widths, heights;
        for (int i = 0; i < n_objects; ++i) {
            double w = rng.uniform(70.0, 110.0);
            widths.push_back(w);
            heights.push_back(rng.uniform(0.85, 1.15) * w);
        }
        if (rider) {
            // the subject rides on the object, clearly smaller, so the pair
            // feature separates the two roles
            widths[1] = widths[0] * rng.uniform(0.5, 0.65);
            heights[1] = heights[0] * rng.uniform(0.5, 0.65);
        } else {
            widths[1] = widths[0] * rng.uniform(0.9, 1.1);
            heights[1] = heights[0] * rng.uniform(0.9, 1.1);
        }

        const bool slow = script->kind == "sweep" || script->kind == "follow";
        Path object_path = wander_path(rng, spec.frame_count, slow ? 40.0 : 60.0);

        // span of the scripted relation
        int span_begin = 0, span_end = spec.frame_count;  // half-open
        if (script->span == "short") {
            int span_len = std::min(45, spec.frame_count);
            int latest = spec.frame_count - span_len;
            span_begin = latest > 0 ? 15 * rng.uniform_int(0, latest / 15) : 0;
            span_end = span_begin + span_len;
        }

        std::string predicate;
        Path subject_path(static_cast<size_t>(spec.frame_count));
        double jx = rng.uniform(-1.0, 1.0), jy = rng.uniform(-1.0, 1.0);
        double jn = std::sqrt(jx * jx + jy * jy);
        jx /= jn;
        jy /= jn;
        if (script->kind == "overlap") {
            predicate = "touching";
            for (int f = 0; f < spec.frame_count; ++f) {
                double away = 0.0;
                if (f < span_begin) away = 6.0 + 3.0 * (span_begin - f);
                else if (f >= span_end) away = 6.0 + 3.0 * (f - span_end + 1);
                double d = std::min(6.0 + away, 220.0);
                subject_path[static_cast<size_t>(f)] = {object_path[static_cast<size_t>(f)].first + jx * d,
                                                        object_path[static_cast<size_t>(f)].second + jy * d};
            }
        } else if (script->kind == "context") {
            predicate = rng.uniform() < 0.5 ? "signal_a" : "signal_b";
            double d = 1.35 * widths[0];
            for (int f = 0; f < spec.frame_count; ++f)
                subject_path[static_cast<size_t>(f)] = {object_path[static_cast<size_t>(f)].first + jx * d,
                                                        object_path[static_cast<size_t>(f)].second + jy * d};
        } else if (script->kind == "sweep") {
            bool weaving = rng.uniform() < 0.5;
            predicate = weaving ? "weaving" : "flanking";
            double amp = 1.4 * widths[0];
            double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
            double y_off = 1.2 * heights[0];  // hover above: no box overlap either way
            for (int f = 0; f < spec.frame_count; ++f) {
                double dx = weaving ? sign * amp * std::sin(2.0 * M_PI * f / 30.0 + M_PI / 2.0)
                                    : sign * amp;
                subject_path[static_cast<size_t>(f)] = {object_path[static_cast<size_t>(f)].first + dx,
                                                        object_path[static_cast<size_t>(f)].second - y_off};
            }
        } else {  // follow
            predicate = "following";
            double d = 0.25 * widths[0];
            for (int f = 0; f < spec.frame_count; ++f)
                subject_path[static_cast<size_t>(f)] = {object_path[static_cast<size_t>(f)].first + jx * d,
                                                        object_path[static_cast<size_t>(f)].second + jy * d};
        }

        // assemble trajectories: t0 = object, t1 = subject, then marker, wanderers
        std::vector<Path> paths = {object_path, subject_path};
        std::vector<std::string> categories = {category_name(regular[0]), category_name(regular[1])};
        if (has_marker) {
            // the marker shadows the subject so its position affinity to the
            // subject node is strong and pair-direction breaking
            paths.push_back(subject_path);
            categories.push_back(predicate == "signal_a" ? "marker_a" : "marker_b");
        }
        size_t cat_cursor = 2;
        while (paths.size() < static_cast<size_t>(n_objects)) {
            paths.push_back(wander_path(rng, spec.frame_count, 90.0));
            categories.push_back(category_name(regular[cat_cursor++]));
        }

        // optional one-clip dropout of the subject trajectory (long spans only)
        int drop_begin = -1, drop_end = -1;
        if (script->span == "long" && spec.frame_count >= 75 && rng.uniform() < spec.dropout_rate) {
            int clip_count = (spec.frame_count - 30) / 15 + 1;
            int g = rng.uniform_int(1, std::max(1, clip_count - 2));
            drop_begin = 15 * g;
            drop_end = std::min(drop_begin + 30, spec.frame_count);
        }

        for (size_t i = 0; i < paths.size(); ++i) {
            TrajectoryAnnotation traj;
            traj.traj_id = "t" + std::to_string(i);
            traj.category = categories[i];
            double w = i < widths.size() ? widths[i] : widths.back();
            double h = i < heights.size() ? heights[i] : heights.back();
            if (has_marker && i == 2) {
                w = 1.3 * widths[1];
                h = 1.3 * heights[1];
            }
            FrameBoxTrack track = path_to_boxes(paths[i], w, h);
            if (i == 1 && drop_begin >= 0) {
                FrameBoxTrack kept;
                for (const auto& p : track)
                    if (p.first < drop_begin || p.first >= drop_end) kept.push_back(p);
                track = std::move(kept);
            }
            traj.boxes = std::move(track);

            // per-frame appearance features
            auto embed = category_embedding(traj.category, spec.feature_dim);
            std::vector<double> offset(static_cast<size_t>(spec.feature_dim));
            for (double& x : offset) x = 0.15 * rng.normal();
            for (const auto& [frame, box] : traj.boxes) {
                std::vector<double> feat(static_cast<size_t>(spec.feature_dim));
                for (int d = 0; d < spec.feature_dim; ++d)
                    feat[static_cast<size_t>(d)] = embed[static_cast<size_t>(d)] +
                                                   offset[static_cast<size_t>(d)] +
                                                   spec.feature_noise * rng.normal();
                data.features.emplace(feature_key(anno.video_id, traj.traj_id, frame), std::move(feat));
            }
            anno.trajectories.push_back(std::move(traj));
        }

        anno.relations.push_back({"t1", "t0", predicate, span_begin, span_end});

        // some videos carry one extra filler relation with no geometric
        // signature; filler predicates widen the head and deepen the class
        // imbalance the way rare real predicates do
        const int filler_count = spec.predicate_count - 6;
        if (filler_count > 0 && rng.uniform() < 0.3) {
            int a = rng.uniform_int(0, static_cast<int>(paths.size()) - 1);
            int b = rng.uniform_int(0, static_cast<int>(paths.size()) - 2);
            if (b >= a) ++b;
            char filler[16];
            std::snprintf(filler, sizeof(filler), "filler_%02d", rng.uniform_int(0, filler_count - 1));
            int latest = spec.frame_count - std::min(30, spec.frame_count);
            int fb = latest > 0 ? 15 * rng.uniform_int(0, latest / 15) : 0;
            anno.relations.push_back({"t" + std::to_string(a), "t" + std::to_string(b), filler, fb,
                                      std::min(fb + 30, spec.frame_count)});
        }
        validate_annotation(anno);
        data.annotations.push_back(std::move(anno));
    }
    return data;
}

}  // namespace vidrel
