#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidrel/types.hpp"

namespace vidrel {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Annotation JSON, one document per video:
// {"video_id": str, "frame_count": int, "width": int, "height": int,
//  "trajectories": [{"traj_id": str, "category": str,
//                    "boxes": {"<frame>": [xmin,ymin,xmax,ymax], ...}}],
//  "relations": [{"subject": str, "object": str, "predicate": str,
//                 "begin_fid": int, "end_fid": int}]}
// Relation spans are half-open [begin_fid, end_fid).
// ---------------------------------------------------------------------------

inline json annotation_to_json(const DatasetAnnotation& a) {
    json doc;
    doc["video_id"] = a.video_id;
    doc["frame_count"] = a.frame_count;
    doc["width"] = a.width;
    doc["height"] = a.height;
    doc["trajectories"] = json::array();
    for (const auto& t : a.trajectories) {
        json boxes = json::object();
        for (const auto& [frame, box] : t.boxes)
            boxes[std::to_string(frame)] = {box.xmin, box.ymin, box.xmax, box.ymax};
        doc["trajectories"].push_back(
            {{"traj_id", t.traj_id}, {"category", t.category}, {"boxes", std::move(boxes)}});
    }
    doc["relations"] = json::array();
    for (const auto& r : a.relations)
        doc["relations"].push_back({{"subject", r.subject_traj},
                                    {"object", r.object_traj},
                                    {"predicate", r.predicate},
                                    {"begin_fid", r.begin_fid},
                                    {"end_fid", r.end_fid}});
    return doc;
}

namespace detail {

inline FrameBoxTrack parse_box_map(const json& boxes, const std::string& ctx) {
    FrameBoxTrack track;
    for (auto it = boxes.begin(); it != boxes.end(); ++it) {
        int frame = 0;
        try {
            frame = std::stoi(it.key());
        } catch (const std::exception&) {
            throw ValidationError(ctx + ": non-integer frame key '" + it.key() + "'");
        }
        const json& v = it.value();
        if (!v.is_array() || v.size() != 4)
            throw ValidationError(ctx + ".boxes[" + it.key() + "]: expected [xmin,ymin,xmax,ymax]");
        track.push_back({frame, BoundingBox{v[0].get<double>(), v[1].get<double>(),
                                            v[2].get<double>(), v[3].get<double>()}});
    }
    std::sort(track.begin(), track.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return track;
}

template <typename T>
T require(const json& doc, const char* key, const std::string& ctx) {
    if (!doc.contains(key)) throw ValidationError(ctx + ": missing field '" + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(ctx + ": field '" + key + "' has wrong type");
    }
}

}  // namespace detail

inline DatasetAnnotation annotation_from_json(const json& doc, const std::string& where) {
    DatasetAnnotation a;
    a.video_id = detail::require<std::string>(doc, "video_id", where);
    const std::string ctx = "video " + a.video_id;
    a.frame_count = detail::require<int>(doc, "frame_count", ctx);
    a.width = detail::require<int>(doc, "width", ctx);
    a.height = detail::require<int>(doc, "height", ctx);
    for (const auto& tj : detail::require<json>(doc, "trajectories", ctx)) {
        TrajectoryAnnotation t;
        t.traj_id = detail::require<std::string>(tj, "traj_id", ctx + ".trajectories");
        t.category = detail::require<std::string>(tj, "category", ctx + ".trajectories[" + t.traj_id + "]");
        t.boxes = detail::parse_box_map(detail::require<json>(tj, "boxes", ctx),
                                        ctx + ".trajectories[" + t.traj_id + "]");
        a.trajectories.push_back(std::move(t));
    }
    for (const auto& rj : detail::require<json>(doc, "relations", ctx)) {
        RelationInstance r;
        r.subject_traj = detail::require<std::string>(rj, "subject", ctx + ".relations");
        r.object_traj = detail::require<std::string>(rj, "object", ctx + ".relations");
        r.predicate = detail::require<std::string>(rj, "predicate", ctx + ".relations");
        r.begin_fid = detail::require<int>(rj, "begin_fid", ctx + ".relations");
        r.end_fid = detail::require<int>(rj, "end_fid", ctx + ".relations");
        a.relations.push_back(std::move(r));
    }
    validate_annotation(a);
    return a;
}

inline json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
    return doc;
}

inline void write_json_file(const fs::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << "\n";
}

// Loads a directory of per-video *.json files (sorted by filename), or a
// single file holding one video document.
inline std::vector<DatasetAnnotation> load_dataset(const fs::path& path) {
    std::vector<DatasetAnnotation> out;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(annotation_from_json(load_json_file(f), f.string()));
    } else if (fs::exists(path)) {
        out.push_back(annotation_from_json(load_json_file(path), path.string()));
    } else {
        throw ValidationError("dataset path does not exist: " + path.string());
    }
    return out;
}

inline void save_dataset(const std::vector<DatasetAnnotation>& annos, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& a : annos) write_json_file(dir / (a.video_id + ".json"), annotation_to_json(a));
}

// ---------------------------------------------------------------------------
// Feature file (little-endian): magic "VRFT", u32 version, u32 D, u32 count,
// then count records of (u32 id-length, id bytes, D floats).
// Version 1 stores 32-bit floats (box features); version 2 stores 64-bit
// doubles and is used for parameter checkpoints, where the round-trip must
// preserve every bit of the trained weights.
// ---------------------------------------------------------------------------

using FeatureMap = std::map<std::string, std::vector<double>>;

// Record ids of per-frame box features.
inline std::string feature_key(const std::string& video_id, const std::string& traj_id, int frame) {
    return video_id + "/" + traj_id + "/" + std::to_string(frame);
}

namespace detail {

inline void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& in, const std::string& ctx) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ValidationError(ctx + ": payload size mismatch");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u32(out, static_cast<uint32_t>(bits));
    put_u32(out, static_cast<uint32_t>(bits >> 32));
}

inline float get_f32(std::istream& in, const std::string& ctx) {
    uint32_t bits = get_u32(in, ctx);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline double get_f64(std::istream& in, const std::string& ctx) {
    uint64_t lo = get_u32(in, ctx);
    uint64_t hi = get_u32(in, ctx);
    uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

inline void save_features(const FeatureMap& features, const fs::path& path, int dim,
                          uint32_t version = 1) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write("VRFT", 4);
    detail::put_u32(out, version);
    detail::put_u32(out, static_cast<uint32_t>(dim));
    detail::put_u32(out, static_cast<uint32_t>(features.size()));
    for (const auto& [id, vec] : features) {
        if (static_cast<int>(vec.size()) != dim)
            throw ValidationError("feature '" + id + "': dimension " + std::to_string(vec.size()) +
                                  " != header D " + std::to_string(dim));
        detail::put_u32(out, static_cast<uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        for (double v : vec) {
            if (version == 1)
                detail::put_f32(out, static_cast<float>(v));
            else
                detail::put_f64(out, v);
        }
    }
}

struct LoadedFeatures {
    int dim = 0;
    uint32_t version = 1;
    FeatureMap features;
};

inline LoadedFeatures load_features(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    const std::string ctx = path.string();
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "VRFT", 4) != 0)
        throw ValidationError(ctx + ": bad magic, not a feature file");
    LoadedFeatures out;
    out.version = detail::get_u32(in, ctx);
    if (out.version != 1 && out.version != 2)
        throw ValidationError(ctx + ": unsupported version " + std::to_string(out.version));
    out.dim = static_cast<int>(detail::get_u32(in, ctx));
    uint32_t count = detail::get_u32(in, ctx);
    for (uint32_t r = 0; r < count; ++r) {
        uint32_t id_len = detail::get_u32(in, ctx);
        std::string id(id_len, '\0');
        if (!in.read(id.data(), id_len)) throw ValidationError(ctx + ": payload size mismatch");
        std::vector<double> vec(static_cast<size_t>(out.dim));
        for (int i = 0; i < out.dim; ++i) {
            double v = out.version == 1 ? static_cast<double>(detail::get_f32(in, ctx))
                                        : detail::get_f64(in, ctx);
            if (!std::isfinite(v))
                throw ValidationError(ctx + ": non-finite feature in record '" + id + "'");
            vec[static_cast<size_t>(i)] = v;
        }
        out.features.emplace(std::move(id), std::move(vec));
    }
    // trailing bytes mean the header undercounted
    if (in.peek() != std::char_traits<char>::eof())
        throw ValidationError(ctx + ": payload size mismatch");
    return out;
}

// ---------------------------------------------------------------------------
// Prediction JSON, one document per video:
// {"video_id": str, "relations": [{"triplet": [subj, pred, obj], "score": f,
//   "duration": [begin, end), "sub_traj": {...}, "obj_traj": {...}}]}
// ---------------------------------------------------------------------------

inline json track_to_json(const FrameBoxTrack& track) {
    json out = json::object();
    for (const auto& [frame, box] : track)
        out[std::to_string(frame)] = {box.xmin, box.ymin, box.xmax, box.ymax};
    return out;
}

inline json predictions_to_json(const std::string& video_id,
                                const std::vector<VideoRelation>& relations) {
    json doc;
    doc["video_id"] = video_id;
    doc["relations"] = json::array();
    for (const auto& r : relations) {
        doc["relations"].push_back({{"triplet", {r.subject_category, r.predicate, r.object_category}},
                                    {"score", r.score},
                                    {"duration", {r.begin_frame, r.end_frame + 1}},
                                    {"sub_traj", track_to_json(r.subject_track)},
                                    {"obj_traj", track_to_json(r.object_track)}});
    }
    return doc;
}

inline std::vector<VideoRelation> predictions_from_json(const json& doc, std::string* video_id) {
    const std::string ctx = "predictions";
    if (video_id) *video_id = detail::require<std::string>(doc, "video_id", ctx);
    std::vector<VideoRelation> out;
    for (const auto& rj : detail::require<json>(doc, "relations", ctx)) {
        VideoRelation r;
        const auto& triplet = rj.at("triplet");
        r.subject_category = triplet.at(0).get<std::string>();
        r.predicate = triplet.at(1).get<std::string>();
        r.object_category = triplet.at(2).get<std::string>();
        r.score = rj.at("score").get<double>();
        r.begin_frame = rj.at("duration").at(0).get<int>();
        r.end_frame = rj.at("duration").at(1).get<int>() - 1;
        r.subject_track = detail::parse_box_map(rj.at("sub_traj"), ctx + ".sub_traj");
        r.object_track = detail::parse_box_map(rj.at("obj_traj"), ctx + ".obj_traj");
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_predictions(const std::vector<VideoRelation>& relations, const fs::path& path,
                              const std::string& video_id) {
    write_json_file(path, predictions_to_json(video_id, relations));
}

// Per-video prediction files in a directory, keyed by video id.
inline std::map<std::string, std::vector<VideoRelation>> load_predictions(const fs::path& path) {
    std::map<std::string, std::vector<VideoRelation>> out;
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    for (const auto& f : files) {
        std::string vid;
        auto rels = predictions_from_json(load_json_file(f), &vid);
        out[vid] = std::move(rels);
    }
    return out;
}

}  // namespace vidrel
