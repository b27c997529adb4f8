#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidrel/geometry.hpp"
#include "vidrel/types.hpp"

namespace vidrel {

// Thresholds and fusion weight of the cross-clip affinity:
//   E_t = lambda * min(app(s_i,s_j), app(o_i,o_j))
//       + (1-lambda) * min(loc(s_i,s_j), loc(o_i,o_j))
// where app is cosine similarity gated at alpha and loc is volume IoU
// gated at beta, both with strict inequality.
struct AffinityConfig {
    double alpha = 0.8;
    double beta = 0.7;
    double lambda = 0.8;

    void validate() const {
        if (alpha < 0.0 || alpha > 1.0) throw ValidationError("affinity alpha must be in [0,1]");
        if (beta < 0.0 || beta > 1.0) throw ValidationError("affinity beta must be in [0,1]");
        if (lambda < 0.0 || lambda > 1.0) throw ValidationError("affinity lambda must be in [0,1]");
    }
};

enum class TemporalDirection { kForward, kBackward, kBidirectional };

// Category co-occurrence over training videos, Jaccard-normalized:
// entry(a,b) = #videos containing both / #videos containing a or b.
struct CooccurrenceTable {
    Vocabulary categories;
    std::vector<double> matrix;  // row-major C x C

    double at(int a, int b) const { return matrix[static_cast<size_t>(a) * categories.size() + b]; }

    double lookup(const std::string& a, const std::string& b) const {
        auto ia = categories.lookup(a);
        auto ib = categories.lookup(b);
        if (!ia || !ib) return 0.0;
        return at(*ia, *ib);
    }
};

inline CooccurrenceTable compute_cooccurrence(const std::vector<DatasetAnnotation>& train) {
    if (train.empty()) throw ValidationError("compute_cooccurrence: empty training set");
    std::vector<std::string> names;
    for (const auto& a : train)
        for (const auto& t : a.trajectories) names.push_back(t.category);
    CooccurrenceTable table;
    table.categories = Vocabulary::from_names(std::move(names));
    const int c = table.categories.size();
    std::vector<int> both(static_cast<size_t>(c) * c, 0);
    std::vector<int> present(static_cast<size_t>(c), 0);
    for (const auto& a : train) {
        std::set<int> cats;
        for (const auto& t : a.trajectories) cats.insert(*table.categories.lookup(t.category));
        for (int x : cats) present[static_cast<size_t>(x)]++;
        for (int x : cats)
            for (int y : cats) both[static_cast<size_t>(x) * c + y]++;
    }
    table.matrix.assign(static_cast<size_t>(c) * c, 0.0);
    for (int x = 0; x < c; ++x)
        for (int y = 0; y < c; ++y) {
            int either = present[static_cast<size_t>(x)] + present[static_cast<size_t>(y)] -
                         both[static_cast<size_t>(x) * c + y];
            if (either > 0)
                table.matrix[static_cast<size_t>(x) * c + y] =
                    static_cast<double>(both[static_cast<size_t>(x) * c + y]) / either;
        }
    return table;
}

// Per-clip object graph. pos_affinity has diagonal 1 (self loops),
// sem_affinity has diagonal 0 (self co-occurrence is meaningless).
struct SpatialGraph {
    int clip_index = 0;
    int node_count = 0;
    std::vector<double> pos_affinity;  // row-major M x M
    std::vector<double> sem_affinity;

    double pos(int i, int j) const { return pos_affinity[static_cast<size_t>(i) * node_count + j]; }
    double sem(int i, int j) const { return sem_affinity[static_cast<size_t>(i) * node_count + j]; }
};

inline SpatialGraph build_spatial_graph(const Clip& clip, const CooccurrenceTable& cooc) {
    const int m = static_cast<int>(clip.tubelets.size());
    SpatialGraph g;
    g.clip_index = clip.clip_index;
    g.node_count = m;
    g.pos_affinity.assign(static_cast<size_t>(m) * m, 0.0);
    g.sem_affinity.assign(static_cast<size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) {
                g.pos_affinity[static_cast<size_t>(i) * m + j] = 1.0;
                continue;
            }
            g.pos_affinity[static_cast<size_t>(i) * m + j] =
                mean_iou(clip.tubelets[static_cast<size_t>(i)], clip.tubelets[static_cast<size_t>(j)]);
            g.sem_affinity[static_cast<size_t>(i) * m + j] =
                cooc.lookup(clip.tubelets[static_cast<size_t>(i)].category,
                            clip.tubelets[static_cast<size_t>(j)].category);
        }
    }
    return g;
}

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) throw ValidationError("cosine_similarity: degenerate feature");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double appearance_affinity(const Tubelet& a, const Tubelet& b, double alpha) {
    double sim = cosine_similarity(a.appearance, b.appearance);
    return sim > alpha ? sim : 0.0;
}

// Location affinity evaluates vIoU over the overlapped duration, the same
// convention the position affinity's mIoU uses; adjacent clips share frames,
// so a continued tubelet scores 1 here.
inline double location_affinity(const Tubelet& a, const Tubelet& b, double beta) {
    double v = volume_iou_shared(a, b);
    return v > beta ? v : 0.0;
}

// Pairwise object-level affinity of tubelets from adjacent clips.
inline double object_temporal_affinity(const Tubelet& a, const Tubelet& b,
                                       const AffinityConfig& cfg) {
    return cfg.lambda * appearance_affinity(a, b, cfg.alpha) +
           (1.0 - cfg.lambda) * location_affinity(a, b, cfg.beta);
}

inline double temporal_affinity(const Clip& src_clip, const ClipPair& src, const Clip& dst_clip,
                                const ClipPair& dst, const AffinityConfig& cfg) {
    if (dst.clip_index != src.clip_index + 1)
        throw ValidationError("temporal_affinity: clips not adjacent");
    const Tubelet& si = src_clip.tubelets[static_cast<size_t>(src.subject)];
    const Tubelet& oi = src_clip.tubelets[static_cast<size_t>(src.object)];
    const Tubelet& sj = dst_clip.tubelets[static_cast<size_t>(dst.subject)];
    const Tubelet& oj = dst_clip.tubelets[static_cast<size_t>(dst.object)];
    double app = std::min(appearance_affinity(si, sj, cfg.alpha), appearance_affinity(oi, oj, cfg.alpha));
    double loc = std::min(location_affinity(si, sj, cfg.beta), location_affinity(oi, oj, cfg.beta));
    return cfg.lambda * app + (1.0 - cfg.lambda) * loc;
}

struct TemporalEdge {
    int src = 0;  // node indices into TemporalGraph::nodes
    int dst = 0;
    double weight = 0.0;
};

// Relation-level graph across clips: one node per ordered tubelet pair,
// directed edges between pairs of adjacent clips. Forward mode passes
// messages from past pairs to future pairs only.
struct TemporalGraph {
    std::vector<ClipPair> nodes;       // clip-major, subject-major within clip
    std::vector<int> clip_node_begin;  // nodes of clip k: [begin[k], begin[k+1])
    std::vector<TemporalEdge> edges;   // sorted by (src, dst)

    int node_count() const { return static_cast<int>(nodes.size()); }
};

// dense_unweighted connects every adjacent-clip pair combination with
// weight 1 instead of thresholded affinities (the sparsity ablation).
inline TemporalGraph build_temporal_graph(const std::vector<Clip>& clips, const AffinityConfig& cfg,
                                          TemporalDirection direction,
                                          bool dense_unweighted = false) {
    cfg.validate();
    TemporalGraph g;
    g.clip_node_begin.resize(clips.size() + 1, 0);
    for (size_t k = 0; k < clips.size(); ++k) {
        g.clip_node_begin[k] = static_cast<int>(g.nodes.size());
        auto pairs = enumerate_pairs(clips[k].clip_index, static_cast<int>(clips[k].tubelets.size()));
        g.nodes.insert(g.nodes.end(), pairs.begin(), pairs.end());
    }
    g.clip_node_begin[clips.size()] = static_cast<int>(g.nodes.size());

    for (size_t k = 0; k + 1 < clips.size(); ++k) {
        if (clips[k + 1].clip_index != clips[k].clip_index + 1)
            throw ValidationError("build_temporal_graph: clips not consecutive");
        for (int a = g.clip_node_begin[k]; a < g.clip_node_begin[k + 1]; ++a) {
            for (int b = g.clip_node_begin[k + 1]; b < g.clip_node_begin[k + 2]; ++b) {
                double w;
                if (dense_unweighted) {
                    w = 1.0;
                } else {
                    w = temporal_affinity(clips[k], g.nodes[static_cast<size_t>(a)], clips[k + 1],
                                          g.nodes[static_cast<size_t>(b)], cfg);
                    if (w <= 0.0) continue;
                }
                if (direction == TemporalDirection::kForward ||
                    direction == TemporalDirection::kBidirectional)
                    g.edges.push_back({a, b, w});
                if (direction == TemporalDirection::kBackward ||
                    direction == TemporalDirection::kBidirectional)
                    g.edges.push_back({b, a, w});
            }
        }
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const TemporalEdge& x, const TemporalEdge& y) {
        return x.src != y.src ? x.src < y.src : x.dst < y.dst;
    });
    return g;
}

// Debug/golden-test dump: node descriptors plus (src, dst, weight) triples.
inline nlohmann::ordered_json temporal_graph_to_json(const TemporalGraph& g) {
    nlohmann::ordered_json doc;
    doc["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes)
        doc["nodes"].push_back({{"clip", n.clip_index}, {"subject", n.subject}, {"object", n.object}});
    doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) doc["edges"].push_back({e.src, e.dst, e.weight});
    return doc;
}

inline nlohmann::ordered_json spatial_graph_to_json(const SpatialGraph& g) {
    nlohmann::ordered_json doc;
    doc["clip_index"] = g.clip_index;
    doc["node_count"] = g.node_count;
    doc["pos_affinity"] = g.pos_affinity;
    doc["sem_affinity"] = g.sem_affinity;
    return doc;
}

}  // namespace vidrel
