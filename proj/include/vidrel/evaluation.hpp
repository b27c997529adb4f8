#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "vidrel/geometry.hpp"
#include "vidrel/types.hpp"

namespace vidrel {

// A ground-truth relation instance with trajectory tracks restricted to its
// span, the unit both evaluation protocols match against.
struct GroundTruthRelation {
    std::string subject_category;
    std::string object_category;
    std::string predicate;
    FrameBoxTrack subject_track;
    FrameBoxTrack object_track;
};

inline std::vector<GroundTruthRelation> ground_truth_relations(const DatasetAnnotation& anno) {
    std::vector<GroundTruthRelation> out;
    for (const auto& rel : anno.relations) {
        const TrajectoryAnnotation* s = anno.find_trajectory(rel.subject_traj);
        const TrajectoryAnnotation* o = anno.find_trajectory(rel.object_traj);
        GroundTruthRelation g;
        g.subject_category = s->category;
        g.object_category = o->category;
        g.predicate = rel.predicate;
        for (const auto& [frame, box] : s->boxes)
            if (frame >= rel.begin_fid && frame < rel.end_fid) g.subject_track.push_back({frame, box});
        for (const auto& [frame, box] : o->boxes)
            if (frame >= rel.begin_fid && frame < rel.end_fid) g.object_track.push_back({frame, box});
        out.push_back(std::move(g));
    }
    return out;
}

// Detection match: triplet categories equal and both tracks overlap the
// ground truth at vIoU >= threshold (non-strict).
inline bool match_detection(const VideoRelation& pred, const GroundTruthRelation& gt,
                            double viou_threshold) {
    if (pred.subject_category != gt.subject_category || pred.predicate != gt.predicate ||
        pred.object_category != gt.object_category)
        return false;
    return volume_iou(pred.subject_track, gt.subject_track) >= viou_threshold &&
           volume_iou(pred.object_track, gt.object_track) >= viou_threshold;
}

struct VideoDetScore {
    double ap = 0.0;
    std::map<int, double> recall_at;  // k -> recall
    int gt_count = 0;
};

// Per-video detection evaluation: predictions sorted by descending score
// (stable on input order), greedy one-to-one matching picking the unmatched
// GT with the largest min(subject,object) vIoU, AP by all-points
// interpolation over the PR curve.
inline VideoDetScore reldet_eval_video(const std::vector<VideoRelation>& preds,
                                       const std::vector<GroundTruthRelation>& gts,
                                       double viou_threshold, const std::vector<int>& ks) {
    VideoDetScore out;
    out.gt_count = static_cast<int>(gts.size());
    for (int k : ks) out.recall_at[k] = 0.0;
    if (gts.empty()) return out;

    std::vector<size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return preds[a].score > preds[b].score; });

    std::vector<bool> gt_matched(gts.size(), false);
    std::vector<bool> tp(order.size(), false);
    for (size_t rank = 0; rank < order.size(); ++rank) {
        const VideoRelation& pred = preds[order[rank]];
        double best_ov = -1.0;
        int best_gt = -1;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (gt_matched[g]) continue;
            const GroundTruthRelation& gt = gts[g];
            if (pred.subject_category != gt.subject_category || pred.predicate != gt.predicate ||
                pred.object_category != gt.object_category)
                continue;
            double ov = std::min(volume_iou(pred.subject_track, gt.subject_track),
                                 volume_iou(pred.object_track, gt.object_track));
            if (ov > best_ov) {
                best_ov = ov;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt >= 0 && best_ov >= viou_threshold) {
            gt_matched[static_cast<size_t>(best_gt)] = true;
            tp[rank] = true;
        }
    }

    const double total_gt = static_cast<double>(gts.size());
    std::vector<double> precision(order.size()), recall(order.size());
    int tp_count = 0;
    for (size_t rank = 0; rank < order.size(); ++rank) {
        if (tp[rank]) ++tp_count;
        precision[rank] = static_cast<double>(tp_count) / static_cast<double>(rank + 1);
        recall[rank] = static_cast<double>(tp_count) / total_gt;
        for (int k : ks)
            if (static_cast<int>(rank) + 1 == k) out.recall_at[k] = recall[rank];
    }
    for (int k : ks)
        if (static_cast<int>(order.size()) < k && !order.empty())
            out.recall_at[k] = recall.back();

    // all-points interpolation: recall increments times the max precision at
    // recall >= that level, accumulated in ascending recall order
    std::vector<double> max_prec_right(order.size());
    double running = 0.0;
    for (size_t i = order.size(); i-- > 0;) {
        running = std::max(running, precision[i]);
        max_prec_right[i] = running;
    }
    double ap = 0.0;
    for (size_t i = 0; i < order.size(); ++i) {
        double r_prev = i == 0 ? 0.0 : recall[i - 1];
        if (recall[i] > r_prev) ap += (recall[i] - r_prev) * max_prec_right[i];
    }
    out.ap = ap;
    return out;
}

struct VideoTagScore {
    std::map<int, double> precision_at;
};

// Tagging evaluation: predicted triplet labels deduplicated keeping the max
// score, sorted by score (ties by label), P@k = hits in top-k / k.
inline VideoTagScore reltag_eval_video(const std::vector<VideoRelation>& preds,
                                       const std::vector<GroundTruthRelation>& gts,
                                       const std::vector<int>& ks) {
    using Label = std::tuple<std::string, std::string, std::string>;
    std::map<Label, double> best;
    for (const auto& p : preds) {
        Label l{p.subject_category, p.predicate, p.object_category};
        auto it = best.find(l);
        if (it == best.end() || p.score > it->second) best[l] = p.score;
    }
    std::vector<std::pair<Label, double>> ranked(best.begin(), best.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<Label> gt_labels;
    for (const auto& g : gts) gt_labels.push_back({g.subject_category, g.predicate, g.object_category});
    std::sort(gt_labels.begin(), gt_labels.end());
    gt_labels.erase(std::unique(gt_labels.begin(), gt_labels.end()), gt_labels.end());

    VideoTagScore out;
    for (int k : ks) {
        int hits = 0;
        for (size_t i = 0; i < ranked.size() && static_cast<int>(i) < k; ++i)
            if (std::binary_search(gt_labels.begin(), gt_labels.end(), ranked[i].first)) ++hits;
        out.precision_at[k] = static_cast<double>(hits) / static_cast<double>(k);
    }
    return out;
}

struct EvalReport {
    double map = 0.0;
    std::map<int, double> recall_at;     // 50, 100
    std::map<int, double> precision_at;  // 1, 5, 10
    struct PerVideo {
        double ap = 0.0;
        std::map<int, double> recall_at;
        std::map<int, double> precision_at;
        int gt_count = 0;
    };
    std::map<std::string, PerVideo> per_video;
};

// Dataset-level metrics: per-video scores averaged over the videos that have
// ground-truth relations (predictions for unknown videos are ignored).
inline EvalReport evaluate_dataset(const std::vector<DatasetAnnotation>& annotations,
                                   const std::map<std::string, std::vector<VideoRelation>>& predictions,
                                   double viou_threshold = 0.5,
                                   const std::vector<int>& reldet_ks = {50, 100},
                                   const std::vector<int>& reltag_ks = {1, 5, 10}) {
    EvalReport report;
    for (int k : reldet_ks) report.recall_at[k] = 0.0;
    for (int k : reltag_ks) report.precision_at[k] = 0.0;
    int scored_videos = 0;
    static const std::vector<VideoRelation> kNoPreds;
    for (const auto& anno : annotations) {
        auto gts = ground_truth_relations(anno);
        if (gts.empty()) continue;
        auto it = predictions.find(anno.video_id);
        const std::vector<VideoRelation>& preds = it == predictions.end() ? kNoPreds : it->second;
        auto det = reldet_eval_video(preds, gts, viou_threshold, reldet_ks);
        auto tag = reltag_eval_video(preds, gts, reltag_ks);
        EvalReport::PerVideo pv;
        pv.ap = det.ap;
        pv.recall_at = det.recall_at;
        pv.precision_at = tag.precision_at;
        pv.gt_count = det.gt_count;
        report.per_video[anno.video_id] = pv;
        report.map += det.ap;
        for (int k : reldet_ks) report.recall_at[k] += det.recall_at[k];
        for (int k : reltag_ks) report.precision_at[k] += tag.precision_at[k];
        ++scored_videos;
    }
    if (scored_videos > 0) {
        report.map /= scored_videos;
        for (auto& [k, v] : report.recall_at) v /= scored_videos;
        for (auto& [k, v] : report.precision_at) v /= scored_videos;
    }
    return report;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["reldet"]["map"] = r.map;
    for (const auto& [k, v] : r.recall_at) j["reldet"]["r" + std::to_string(k)] = v;
    for (const auto& [k, v] : r.precision_at) j["reltag"]["p" + std::to_string(k)] = v;
    j["per_video"] = nlohmann::ordered_json::object();
    for (const auto& [vid, pv] : r.per_video) {
        nlohmann::ordered_json e;
        e["ap"] = pv.ap;
        for (const auto& [k, v] : pv.recall_at) e["r" + std::to_string(k)] = v;
        for (const auto& [k, v] : pv.precision_at) e["p" + std::to_string(k)] = v;
        e["gt_count"] = pv.gt_count;
        j["per_video"][vid] = e;
    }
    return j;
}

// Aligned text table, values x100, detection metrics then tagging metrics.
inline std::string report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(28) << "model" << std::right;
    for (const char* c : {"mAP", "R@50", "R@100", "P@1", "P@5", "P@10"}) os << std::setw(9) << c;
    os << "\n";
    for (const auto& [name, r] : rows) {
        os << std::left << std::setw(28) << name << std::right << std::fixed << std::setprecision(2);
        os << std::setw(9) << 100.0 * r.map;
        for (int k : {50, 100})
            os << std::setw(9) << (r.recall_at.count(k) ? 100.0 * r.recall_at.at(k) : 0.0);
        for (int k : {1, 5, 10})
            os << std::setw(9) << (r.precision_at.count(k) ? 100.0 * r.precision_at.at(k) : 0.0);
        os << "\n";
    }
    return os.str();
}

}  // namespace vidrel
