#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vidrel/common.hpp"

namespace vidrel {

struct BoundingBox {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double center_x() const { return 0.5 * (xmin + xmax); }
    double center_y() const { return 0.5 * (ymin + ymax); }
    double area() const { return width() * height(); }

    bool valid() const {
        return std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) &&
               std::isfinite(ymax) && xmax > xmin && ymax > ymin;
    }

    bool operator==(const BoundingBox& o) const {
        return xmin == o.xmin && ymin == o.ymin && xmax == o.xmax && ymax == o.ymax;
    }
};

// A box sequence indexed by frame, sorted by frame, one box per frame.
using FrameBoxTrack = std::vector<std::pair<int, BoundingBox>>;

inline const BoundingBox* find_box(const FrameBoxTrack& track, int frame) {
    auto it = std::lower_bound(track.begin(), track.end(), frame,
                               [](const auto& p, int f) { return p.first < f; });
    if (it == track.end() || it->first != frame) return nullptr;
    return &it->second;
}

// A per-clip box sequence tracking one object. Frames are contiguous.
struct Tubelet {
    std::string tubelet_id;
    std::string category;
    int clip_index = 0;
    FrameBoxTrack boxes;
    std::vector<double> appearance;
    std::optional<std::string> source_trajectory_id;

    int first_frame() const { return boxes.front().first; }
    int last_frame() const { return boxes.back().first; }
};

inline void validate_tubelet(const Tubelet& t, int expected_dim) {
    if (t.boxes.empty()) throw ValidationError("tubelet " + t.tubelet_id + ": no boxes");
    for (size_t i = 0; i < t.boxes.size(); ++i) {
        if (!t.boxes[i].second.valid())
            throw ValidationError("tubelet " + t.tubelet_id + ": invalid box at frame " +
                                  std::to_string(t.boxes[i].first));
        if (i > 0 && t.boxes[i].first != t.boxes[i - 1].first + 1)
            throw ValidationError("tubelet " + t.tubelet_id + ": frames not contiguous");
    }
    if (expected_dim >= 0 && static_cast<int>(t.appearance.size()) != expected_dim)
        throw ValidationError("tubelet " + t.tubelet_id + ": appearance dimension " +
                              std::to_string(t.appearance.size()) + " != " +
                              std::to_string(expected_dim));
}

struct Clip {
    int clip_index = 0;
    int start_frame = 0;
    int end_frame = 0;  // inclusive; end - start + 1 == clip length
    std::vector<Tubelet> tubelets;
};

// Ordered tubelet pair inside one clip; subject != object, (s,o) and (o,s) distinct.
struct ClipPair {
    int clip_index = 0;
    int subject = 0;  // index into Clip::tubelets
    int object = 0;

    bool operator==(const ClipPair& o) const {
        return clip_index == o.clip_index && subject == o.subject && object == o.object;
    }
};

// All ordered pairs of a clip with M tubelets: exactly M*(M-1), subject-major.
inline std::vector<ClipPair> enumerate_pairs(int clip_index, int tubelet_count) {
    std::vector<ClipPair> out;
    out.reserve(static_cast<size_t>(tubelet_count) * (tubelet_count - 1));
    for (int i = 0; i < tubelet_count; ++i)
        for (int j = 0; j < tubelet_count; ++j)
            if (i != j) out.push_back({clip_index, i, j});
    return out;
}

struct ClipRelation {
    ClipPair pair;
    int predicate = 0;  // index into the predicate vocabulary
    double score = 0.0;
};

// An associated triplet spanning one or more clips. Frame bounds are inclusive.
struct VideoRelation {
    std::string subject_category;
    std::string object_category;
    std::string predicate;
    FrameBoxTrack subject_track;
    FrameBoxTrack object_track;
    int begin_frame = 0;
    int end_frame = 0;
    double score = 0.0;
    bool interpolated = false;  // true when a one-clip gap was bridged

    bool operator==(const VideoRelation& o) const {
        return subject_category == o.subject_category && object_category == o.object_category &&
               predicate == o.predicate && subject_track == o.subject_track &&
               object_track == o.object_track && begin_frame == o.begin_frame &&
               end_frame == o.end_frame && score == o.score;
    }
};

struct TrajectoryAnnotation {
    std::string traj_id;
    std::string category;
    FrameBoxTrack boxes;
};

// Ground-truth relation instance; [begin_fid, end_fid) half-open.
struct RelationInstance {
    std::string subject_traj;
    std::string object_traj;
    std::string predicate;
    int begin_fid = 0;
    int end_fid = 0;
};

struct DatasetAnnotation {
    std::string video_id;
    int frame_count = 0;
    int width = 0;
    int height = 0;
    std::vector<TrajectoryAnnotation> trajectories;
    std::vector<RelationInstance> relations;

    const TrajectoryAnnotation* find_trajectory(const std::string& id) const {
        for (const auto& t : trajectories)
            if (t.traj_id == id) return &t;
        return nullptr;
    }
};

inline void validate_annotation(const DatasetAnnotation& a) {
    auto ctx = [&](const std::string& field) { return "video " + a.video_id + ": " + field; };
    if (a.frame_count <= 0) throw ValidationError(ctx("frame_count must be positive"));
    if (a.width <= 0 || a.height <= 0) throw ValidationError(ctx("width/height must be positive"));
    for (const auto& t : a.trajectories) {
        if (t.boxes.empty()) throw ValidationError(ctx("trajectories[" + t.traj_id + "].boxes empty"));
        for (size_t i = 0; i < t.boxes.size(); ++i) {
            const auto& [frame, box] = t.boxes[i];
            if (frame < 0 || frame >= a.frame_count)
                throw ValidationError(ctx("trajectories[" + t.traj_id + "].boxes: frame " +
                                          std::to_string(frame) + " out of range"));
            if (!box.valid())
                throw ValidationError(ctx("trajectories[" + t.traj_id + "].boxes[" +
                                          std::to_string(frame) + "]: invalid box"));
            if (i > 0 && t.boxes[i].first <= t.boxes[i - 1].first)
                throw ValidationError(ctx("trajectories[" + t.traj_id + "].boxes: frames not increasing"));
        }
    }
    for (size_t r = 0; r < a.relations.size(); ++r) {
        const auto& rel = a.relations[r];
        auto rctx = [&](const std::string& f) { return ctx("relations[" + std::to_string(r) + "]." + f); };
        if (!a.find_trajectory(rel.subject_traj))
            throw ValidationError(rctx("subject: unknown trajectory '" + rel.subject_traj + "'"));
        if (!a.find_trajectory(rel.object_traj))
            throw ValidationError(rctx("object: unknown trajectory '" + rel.object_traj + "'"));
        if (rel.begin_fid < 0 || rel.end_fid > a.frame_count || rel.begin_fid >= rel.end_fid)
            throw ValidationError(rctx("span [" + std::to_string(rel.begin_fid) + "," +
                                       std::to_string(rel.end_fid) + ") out of range"));
    }
}

// Sorted name <-> index mapping for object categories or predicates.
struct Vocabulary {
    std::vector<std::string> names;
    std::map<std::string, int> index;

    static Vocabulary from_names(std::vector<std::string> raw) {
        std::sort(raw.begin(), raw.end());
        raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
        Vocabulary v;
        v.names = std::move(raw);
        for (int i = 0; i < static_cast<int>(v.names.size()); ++i) v.index[v.names[i]] = i;
        return v;
    }

    int size() const { return static_cast<int>(names.size()); }

    std::optional<int> lookup(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(int i) const { return names.at(static_cast<size_t>(i)); }
};

inline Vocabulary object_vocabulary(const std::vector<DatasetAnnotation>& annos) {
    std::vector<std::string> names;
    for (const auto& a : annos)
        for (const auto& t : a.trajectories) names.push_back(t.category);
    return Vocabulary::from_names(std::move(names));
}

inline Vocabulary predicate_vocabulary(const std::vector<DatasetAnnotation>& annos) {
    std::vector<std::string> names;
    for (const auto& a : annos)
        for (const auto& r : a.relations) names.push_back(r.predicate);
    return Vocabulary::from_names(std::move(names));
}

}  // namespace vidrel
