#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "vidrel/config.hpp"
#include "vidrel/geometry.hpp"
#include "vidrel/graph.hpp"
#include "vidrel/model.hpp"

namespace vidrel {

// Arithmetic mean of per-frame box features.
inline std::vector<double> encode_appearance(const std::vector<const std::vector<double>*>& frames) {
    if (frames.empty()) throw ValidationError("encode_appearance: no per-frame features");
    const size_t dim = frames.front()->size();
    std::vector<double> mean(dim, 0.0);
    for (const auto* f : frames) {
        if (f->size() != dim) throw ValidationError("encode_appearance: dimension mismatch");
        for (size_t i = 0; i < dim; ++i) mean[i] += (*f)[i];
    }
    for (double& v : mean) v /= static_cast<double>(frames.size());
    return mean;
}

// Splits a video into overlapping clips starting at 0, clip_stride apart.
// A trajectory joins a clip's tubelets when it covers at least half of the
// clip; partial coverage is padded by repeating boundary boxes so every
// tubelet spans the whole clip. Videos shorter than one clip yield a single
// final-frame-padded clip.
inline std::vector<Clip> segment_clips(const DatasetAnnotation& anno, const PipelineConfig& cfg) {
    const int delta = cfg.clip_length;
    std::vector<int> starts;
    if (anno.frame_count < delta) {
        starts.push_back(0);
    } else {
        for (int s = 0; s + delta <= anno.frame_count; s += cfg.clip_stride) starts.push_back(s);
    }
    std::vector<Clip> clips;
    for (size_t k = 0; k < starts.size(); ++k) {
        Clip clip;
        clip.clip_index = static_cast<int>(k);
        clip.start_frame = starts[k];
        clip.end_frame = starts[k] + delta - 1;
        for (const auto& traj : anno.trajectories) {
            FrameBoxTrack present;
            for (const auto& [frame, box] : traj.boxes)
                if (frame >= clip.start_frame && frame <= clip.end_frame) present.push_back({frame, box});
            if (present.empty() || 2 * static_cast<int>(present.size()) < delta) continue;
            Tubelet t;
            t.tubelet_id = anno.video_id + "/" + traj.traj_id + "@" + std::to_string(k);
            t.category = traj.category;
            t.clip_index = clip.clip_index;
            t.source_trajectory_id = traj.traj_id;
            for (int f = clip.start_frame; f <= clip.end_frame; ++f) {
                const BoundingBox* box = find_box(present, f);
                if (!box) {
                    if (f < present.front().first) box = &present.front().second;
                    else if (f > present.back().first) box = &present.back().second;
                    else {
                        // interior hole: repeat the most recent box
                        auto it = std::lower_bound(present.begin(), present.end(), f,
                                                   [](const auto& p, int x) { return p.first < x; });
                        box = &std::prev(it)->second;
                    }
                }
                t.boxes.push_back({f, *box});
            }
            clip.tubelets.push_back(std::move(t));
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

// Fills Tubelet::appearance as the mean of the per-frame features of the
// trajectory's real frames within the clip (padding frames add no evidence).
inline void attach_appearance(std::vector<Clip>& clips, const std::string& video_id,
                              const FeatureMap& features, int feature_dim) {
    for (auto& clip : clips) {
        for (auto& t : clip.tubelets) {
            std::vector<const std::vector<double>*> frames;
            for (const auto& [frame, box] : t.boxes) {
                auto it = features.find(feature_key(video_id, *t.source_trajectory_id, frame));
                if (it != features.end()) frames.push_back(&it->second);
            }
            if (frames.empty())
                throw ValidationError("attach_appearance: no features for " + t.tubelet_id);
            t.appearance = encode_appearance(frames);
            validate_tubelet(t, feature_dim);
        }
    }
}

// target(pair, predicate) = 1 iff a ground-truth relation has the pair's
// source trajectories as subject/object and overlaps at least half the clip.
inline nn::Tensor2 derive_targets(const std::vector<Clip>& clips, const DatasetAnnotation& anno,
                                  const Vocabulary& predicates, const PipelineConfig& cfg) {
    int total_pairs = 0;
    for (const auto& c : clips) {
        int m = static_cast<int>(c.tubelets.size());
        total_pairs += m * (m - 1);
    }
    nn::Tensor2 targets(total_pairs, predicates.size());
    int row = 0;
    for (const auto& clip : clips) {
        auto pairs = enumerate_pairs(clip.clip_index, static_cast<int>(clip.tubelets.size()));
        for (const auto& pair : pairs) {
            const Tubelet& subj = clip.tubelets[static_cast<size_t>(pair.subject)];
            const Tubelet& obj = clip.tubelets[static_cast<size_t>(pair.object)];
            for (const auto& rel : anno.relations) {
                if (rel.subject_traj != subj.source_trajectory_id ||
                    rel.object_traj != obj.source_trajectory_id)
                    continue;
                auto pred = predicates.lookup(rel.predicate);
                if (!pred) continue;
                int lo = std::max(clip.start_frame, rel.begin_fid);
                int hi = std::min(clip.end_frame, rel.end_fid - 1);
                int overlap = hi - lo + 1;
                if (overlap > 0 && 2 * overlap >= cfg.clip_length) targets.at(row, *pred) = 1.0;
            }
            ++row;
        }
    }
    return targets;
}

// A training/prediction unit: consecutive clips of one video with all graphs
// and features assembled. Row r of `targets` (and of the forward output)
// corresponds to pairs[r]; object node rows are clip-major tubelet order.
struct ClipBatch {
    std::vector<Clip> clips;
    std::vector<ClipPair> pairs;           // relation nodes, clip-major
    std::vector<int> subject_node;         // per pair: global object-node index
    std::vector<int> object_node;
    nn::Tensor2 appearance;                // [object nodes x D]
    nn::Tensor2 pair_spatial_feat;         // [pairs x 10]
    nn::Tensor2 targets;                   // [pairs x predicates]
    std::vector<nn::GraphEdge> pos_edges;  // object-level, within clips
    std::vector<nn::GraphEdge> sem_edges;
    std::vector<nn::GraphEdge> rel_temporal_edges;  // relation-level, across clips
    std::vector<nn::GraphEdge> obj_temporal_edges;  // object-level, across clips
    std::vector<nn::GraphEdge> rel_pos_edges;       // relation-level lift (reversed arch)
    std::vector<nn::GraphEdge> rel_sem_edges;
};

namespace detail {

inline void push_directed(std::vector<nn::GraphEdge>& edges, int a, int b, double w,
                          TemporalDirection dir) {
    if (dir == TemporalDirection::kForward || dir == TemporalDirection::kBidirectional)
        edges.push_back({a, b, w});
    if (dir == TemporalDirection::kBackward || dir == TemporalDirection::kBidirectional)
        edges.push_back({b, a, w});
}

}  // namespace detail

inline ClipBatch make_batch(std::vector<Clip> clips, const DatasetAnnotation& anno,
                            const CooccurrenceTable& cooc, const Vocabulary& predicates,
                            const PipelineConfig& cfg) {
    ClipBatch batch;
    batch.clips = std::move(clips);

    // object node layout: clip-major, tubelet order
    std::vector<int> clip_obj_base(batch.clips.size() + 1, 0);
    int total_objects = 0;
    for (size_t k = 0; k < batch.clips.size(); ++k) {
        clip_obj_base[k] = total_objects;
        total_objects += static_cast<int>(batch.clips[k].tubelets.size());
    }
    clip_obj_base[batch.clips.size()] = total_objects;

    int dim = 0;
    for (const auto& clip : batch.clips)
        if (!clip.tubelets.empty()) {
            dim = static_cast<int>(clip.tubelets[0].appearance.size());
            break;
        }
    batch.appearance = nn::Tensor2(total_objects, dim);
    {
        int row = 0;
        for (const auto& clip : batch.clips)
            for (const auto& t : clip.tubelets) {
                for (int j = 0; j < dim; ++j) batch.appearance.at(row, j) = t.appearance[static_cast<size_t>(j)];
                ++row;
            }
    }

    // spatial graphs per clip -> object-level edge lists
    const bool weighted = cfg.spatial_affinity_weighted;
    for (size_t k = 0; k < batch.clips.size(); ++k) {
        SpatialGraph g = build_spatial_graph(batch.clips[k], cooc);
        const int base = clip_obj_base[k];
        for (int i = 0; i < g.node_count; ++i)
            for (int j = 0; j < g.node_count; ++j) {
                double wp = weighted ? g.pos(i, j) : 1.0;
                if (wp > 0.0) batch.pos_edges.push_back({base + i, base + j, wp});
                if (i != j) {
                    double ws = weighted ? g.sem(i, j) : 1.0;
                    if (ws > 0.0) batch.sem_edges.push_back({base + i, base + j, ws});
                }
            }
    }

    // relation nodes, pair features, subject/object row gathers
    for (size_t k = 0; k < batch.clips.size(); ++k) {
        const Clip& clip = batch.clips[k];
        for (const auto& pair : enumerate_pairs(clip.clip_index, static_cast<int>(clip.tubelets.size()))) {
            batch.pairs.push_back(pair);
            batch.subject_node.push_back(clip_obj_base[k] + pair.subject);
            batch.object_node.push_back(clip_obj_base[k] + pair.object);
        }
    }
    batch.pair_spatial_feat = nn::Tensor2(static_cast<int>(batch.pairs.size()), nn::ModelDims::kPairFeatDim);
    {
        int row = 0;
        for (size_t k = 0; k < batch.clips.size(); ++k) {
            const Clip& clip = batch.clips[k];
            for (const auto& pair : enumerate_pairs(clip.clip_index, static_cast<int>(clip.tubelets.size()))) {
                auto f = pair_spatial(clip.tubelets[static_cast<size_t>(pair.subject)],
                                      clip.tubelets[static_cast<size_t>(pair.object)]);
                for (int j = 0; j < nn::ModelDims::kPairFeatDim; ++j)
                    batch.pair_spatial_feat.at(row, j) = f[static_cast<size_t>(j)];
                ++row;
            }
        }
    }

    // relation-level temporal graph
    TemporalGraph tg = build_temporal_graph(batch.clips, cfg.affinity, cfg.temporal_direction,
                                            cfg.temporal_mode == TemporalMode::kDenseUnweighted);
    for (const auto& e : tg.edges) batch.rel_temporal_edges.push_back({e.src, e.dst, e.weight});

    // object-level temporal graph (reversed / pure-object architectures)
    for (size_t k = 0; k + 1 < batch.clips.size(); ++k) {
        const Clip& a = batch.clips[k];
        const Clip& b = batch.clips[k + 1];
        for (int i = 0; i < static_cast<int>(a.tubelets.size()); ++i)
            for (int j = 0; j < static_cast<int>(b.tubelets.size()); ++j) {
                double w = cfg.temporal_mode == TemporalMode::kDenseUnweighted
                               ? 1.0
                               : object_temporal_affinity(a.tubelets[static_cast<size_t>(i)],
                                                          b.tubelets[static_cast<size_t>(j)], cfg.affinity);
                if (w <= 0.0) continue;
                detail::push_directed(batch.obj_temporal_edges, clip_obj_base[k] + i,
                                      clip_obj_base[k + 1] + j, w, cfg.temporal_direction);
            }
    }

    // relation-level spatial lift (reversed architecture): affinity of two
    // same-clip pairs is the min of their subject-subject and object-object
    // object-level affinities, preserving the diagonal conventions.
    if (cfg.architecture == Architecture::kReversed) {
        int pair_base = 0;
        for (size_t k = 0; k < batch.clips.size(); ++k) {
            SpatialGraph g = build_spatial_graph(batch.clips[k], cooc);
            auto pairs = enumerate_pairs(batch.clips[k].clip_index,
                                         static_cast<int>(batch.clips[k].tubelets.size()));
            for (size_t p = 0; p < pairs.size(); ++p)
                for (size_t q = 0; q < pairs.size(); ++q) {
                    double wp = std::min(g.pos(pairs[p].subject, pairs[q].subject),
                                         g.pos(pairs[p].object, pairs[q].object));
                    double ws = std::min(g.sem(pairs[p].subject, pairs[q].subject),
                                         g.sem(pairs[p].object, pairs[q].object));
                    if (!weighted) {
                        wp = 1.0;
                        ws = p == q ? 0.0 : 1.0;
                    }
                    if (wp > 0.0)
                        batch.rel_pos_edges.push_back({pair_base + static_cast<int>(p),
                                                       pair_base + static_cast<int>(q), wp});
                    if (ws > 0.0)
                        batch.rel_sem_edges.push_back({pair_base + static_cast<int>(p),
                                                       pair_base + static_cast<int>(q), ws});
                }
            pair_base += static_cast<int>(pairs.size());
        }
    }

    batch.targets = derive_targets(batch.clips, anno, predicates, cfg);
    return batch;
}

// Batches never span videos; clips are chunked consecutively by budget.
// Chunks without a single ordered pair carry neither supervision nor
// predictions and are dropped.
inline std::vector<ClipBatch> make_batches(const DatasetAnnotation& anno, std::vector<Clip> clips,
                                           const CooccurrenceTable& cooc, const Vocabulary& predicates,
                                           const PipelineConfig& cfg) {
    std::vector<ClipBatch> out;
    for (size_t begin = 0; begin < clips.size(); begin += static_cast<size_t>(cfg.batch_clip_budget)) {
        size_t end = std::min(clips.size(), begin + static_cast<size_t>(cfg.batch_clip_budget));
        std::vector<Clip> chunk(clips.begin() + static_cast<long>(begin),
                                clips.begin() + static_cast<long>(end));
        ClipBatch batch = make_batch(std::move(chunk), anno, cooc, predicates, cfg);
        if (!batch.pairs.empty()) out.push_back(std::move(batch));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forward pass. All four graph architectures share the same building blocks;
// disabled stages pass their input through unchanged.
// ---------------------------------------------------------------------------

namespace detail {

inline nn::Var spatial_encode(const nn::Var& x, const ClipBatch& batch, const nn::ParamVars& pv,
                              const nn::ModelDims& dims, bool relation_level) {
    const auto& pos_edges = relation_level ? batch.rel_pos_edges : batch.pos_edges;
    const auto& sem_edges = relation_level ? batch.rel_sem_edges : batch.sem_edges;
    if (dims.spatial_mode == SpatialMode::kOff) return x;
    if (dims.spatial_mode == SpatialMode::kPosOnly) return nn::run_stack(x, pv.pos_layers, pos_edges);
    if (dims.spatial_mode == SpatialMode::kSemOnly) return nn::run_stack(x, pv.sem_layers, sem_edges);
    nn::Var f_pos = nn::run_stack(x, pv.pos_layers, pos_edges);
    nn::Var f_sem = nn::run_stack(x, pv.sem_layers, sem_edges);
    return nn::gated_fusion(f_pos, f_sem, pv.gate_weight, pv.fusion_weight);
}

inline nn::Var compose_relations(const nn::Var& object_feat, const ClipBatch& batch,
                                 const nn::ParamVars& pv) {
    nn::Var subj = nn::gather_rows(object_feat, batch.subject_node);
    nn::Var obj = nn::gather_rows(object_feat, batch.object_node);
    nn::Var pair_feat = nn::constant(batch.pair_spatial_feat);
    return nn::relation_feature(subj, obj, pair_feat, pv.pair_proj, pv.rel_proj);
}

}  // namespace detail

inline nn::Var forward(const ClipBatch& batch, const nn::ParamVars& pv, const nn::ModelDims& dims) {
    nn::Var appearance = nn::constant(batch.appearance);
    nn::Var logits;
    switch (dims.arch) {
        case Architecture::kHierarchical: {
            nn::Var f_spa = detail::spatial_encode(appearance, batch, pv, dims, false);
            nn::Var f_rel = detail::compose_relations(f_spa, batch, pv);
            nn::Var f_tem = dims.has_temporal()
                                ? nn::run_stack(f_rel, pv.temporal_layers, batch.rel_temporal_edges)
                                : f_rel;
            logits = nn::mlp_head(f_tem, pv.head_w1, pv.head_b1, pv.head_w2, pv.head_b2);
            break;
        }
        case Architecture::kParallel: {
            // both stacks consume raw inputs; outputs are averaged
            nn::Var f_spa = detail::spatial_encode(appearance, batch, pv, dims, false);
            nn::Var rel_spatial_branch = detail::compose_relations(f_spa, batch, pv);
            nn::Var fused = rel_spatial_branch;
            if (dims.has_temporal()) {
                nn::Var raw_pair = nn::concat_cols(
                    nn::concat_cols(nn::gather_rows(appearance, batch.subject_node),
                                    nn::gather_rows(appearance, batch.object_node)),
                    nn::constant(batch.pair_spatial_feat));
                nn::Var rel_temporal_branch =
                    nn::run_stack(raw_pair, pv.temporal_layers, batch.rel_temporal_edges);
                fused = nn::scale(nn::add(rel_spatial_branch, rel_temporal_branch), 0.5);
            }
            logits = nn::mlp_head(fused, pv.head_w1, pv.head_b1, pv.head_w2, pv.head_b2);
            break;
        }
        case Architecture::kReversed: {
            // temporal conv on object nodes first, spatial conv on relation nodes after
            nn::Var f_obj = dims.has_temporal()
                                ? nn::run_stack(appearance, pv.temporal_layers, batch.obj_temporal_edges)
                                : appearance;
            nn::Var f_rel = detail::compose_relations(f_obj, batch, pv);
            nn::Var f_spa = detail::spatial_encode(f_rel, batch, pv, dims, true);
            logits = nn::mlp_head(f_spa, pv.head_w1, pv.head_b1, pv.head_w2, pv.head_b2);
            break;
        }
        case Architecture::kPureObject: {
            // the temporal graph runs over object nodes instead of pair nodes
            nn::Var f_spa = detail::spatial_encode(appearance, batch, pv, dims, false);
            nn::Var f_obj = dims.has_temporal()
                                ? nn::run_stack(f_spa, pv.temporal_layers, batch.obj_temporal_edges)
                                : f_spa;
            nn::Var f_rel = detail::compose_relations(f_obj, batch, pv);
            logits = nn::mlp_head(f_rel, pv.head_w1, pv.head_b1, pv.head_w2, pv.head_b2);
            break;
        }
    }
    return nn::sigmoid(logits);
}

}  // namespace vidrel
