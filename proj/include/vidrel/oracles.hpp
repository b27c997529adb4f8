#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "vidrel/evaluation.hpp"
#include "vidrel/geometry.hpp"
#include "vidrel/types.hpp"

// Independent slow implementations used only to verify the analytic paths.
// Each one recomputes its quantity from first principles: IoU by counting
// lattice cells, vIoU by per-frame cell counting, detection metrics by
// re-deriving the matching from scratch for every rank prefix.

namespace vidrel::oracle {

// Counts unit cells covered by both boxes; exact for integer coordinates.
inline double pixel_grid_iou(const BoundingBox& a, const BoundingBox& b) {
    const long ax0 = static_cast<long>(a.xmin), ax1 = static_cast<long>(a.xmax);
    const long ay0 = static_cast<long>(a.ymin), ay1 = static_cast<long>(a.ymax);
    const long bx0 = static_cast<long>(b.xmin), bx1 = static_cast<long>(b.xmax);
    const long by0 = static_cast<long>(b.ymin), by1 = static_cast<long>(b.ymax);
    if (ax1 - ax0 > 4000 || ay1 - ay0 > 4000 || bx1 - bx0 > 4000 || by1 - by0 > 4000)
        throw ValidationError("pixel_grid_iou: instance too large");
    long inter = 0, only_a = 0, only_b = 0;
    long x0 = std::min(ax0, bx0), x1 = std::max(ax1, bx1);
    long y0 = std::min(ay0, by0), y1 = std::max(ay1, by1);
    for (long x = x0; x < x1; ++x)
        for (long y = y0; y < y1; ++y) {
            bool in_a = x >= ax0 && x < ax1 && y >= ay0 && y < ay1;
            bool in_b = x >= bx0 && x < bx1 && y >= by0 && y < by1;
            if (in_a && in_b) ++inter;
            else if (in_a) ++only_a;
            else if (in_b) ++only_b;
        }
    long uni = inter + only_a + only_b;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Full-union volume IoU by per-frame cell counting (integer boxes).
inline double pixel_grid_volume_iou(const FrameBoxTrack& a, const FrameBoxTrack& b) {
    long inter = 0, vol_a = 0, vol_b = 0;
    auto cells = [](const BoundingBox& box) {
        return (static_cast<long>(box.xmax) - static_cast<long>(box.xmin)) *
               (static_cast<long>(box.ymax) - static_cast<long>(box.ymin));
    };
    for (const auto& [frame, box] : a) {
        vol_a += cells(box);
        const BoundingBox* other = find_box(b, frame);
        if (!other) continue;
        long ix0 = std::max(static_cast<long>(box.xmin), static_cast<long>(other->xmin));
        long ix1 = std::min(static_cast<long>(box.xmax), static_cast<long>(other->xmax));
        long iy0 = std::max(static_cast<long>(box.ymin), static_cast<long>(other->ymin));
        long iy1 = std::min(static_cast<long>(box.ymax), static_cast<long>(other->ymax));
        if (ix1 > ix0 && iy1 > iy0) inter += (ix1 - ix0) * (iy1 - iy0);
    }
    for (const auto& [frame, box] : b) vol_b += cells(box);
    long uni = vol_a + vol_b - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct PrOracleResult {
    double ap = 0.0;
    std::map<int, double> recall_at;
};

// Re-derives the detection metrics: for every rank prefix the greedy
// matching is recomputed from scratch, and the all-points AP integral is
// evaluated by scanning every rank for the max precision at each distinct
// recall breakpoint. Guarded to small instances.
inline PrOracleResult exhaustive_pr_eval(const std::vector<VideoRelation>& preds,
                                         const std::vector<GroundTruthRelation>& gts,
                                         double viou_threshold, const std::vector<int>& ks) {
    if (preds.size() > 64 || gts.size() > 16)
        throw ValidationError("exhaustive_pr_eval: instance too large");
    PrOracleResult out;
    for (int k : ks) out.recall_at[k] = 0.0;
    if (gts.empty()) return out;

    std::vector<size_t> order(preds.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return preds[a].score > preds[b].score; });

    auto matched_in_prefix = [&](size_t prefix) {
        std::vector<bool> used(gts.size(), false);
        int tp = 0;
        for (size_t i = 0; i < prefix; ++i) {
            const VideoRelation& p = preds[order[i]];
            double best = -1.0;
            int pick = -1;
            for (size_t g = 0; g < gts.size(); ++g) {
                if (used[g]) continue;
                if (p.subject_category != gts[g].subject_category || p.predicate != gts[g].predicate ||
                    p.object_category != gts[g].object_category)
                    continue;
                double ov = std::min(volume_iou(p.subject_track, gts[g].subject_track),
                                     volume_iou(p.object_track, gts[g].object_track));
                if (ov > best) {
                    best = ov;
                    pick = static_cast<int>(g);
                }
            }
            if (pick >= 0 && best >= viou_threshold) {
                used[static_cast<size_t>(pick)] = true;
                ++tp;
            }
        }
        return tp;
    };

    const double total = static_cast<double>(gts.size());
    std::vector<double> precision, recall;
    for (size_t r = 1; r <= order.size(); ++r) {
        int tp = matched_in_prefix(r);
        precision.push_back(static_cast<double>(tp) / static_cast<double>(r));
        recall.push_back(static_cast<double>(tp) / total);
    }
    for (int k : ks) {
        size_t prefix = std::min(static_cast<size_t>(k), order.size());
        out.recall_at[k] = prefix == 0 ? 0.0 : static_cast<double>(matched_in_prefix(prefix)) / total;
    }

    std::set<double> breakpoints(recall.begin(), recall.end());
    double prev = 0.0;
    for (double r : breakpoints) {
        if (r <= prev) continue;
        double best_prec = 0.0;
        for (size_t i = 0; i < recall.size(); ++i)
            if (recall[i] >= r) best_prec = std::max(best_prec, precision[i]);
        out.ap += (r - prev) * best_prec;
        prev = r;
    }
    return out;
}

}  // namespace vidrel::oracle
