#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "vidrel/types.hpp"

namespace vidrel {

// Relative positional feature of two boxes: offsets normalized by the second
// box, log size ratios, log area ratio. A tubelet-pair feature concatenates
// the first and last shared frame.
using RelSpatial5 = std::array<double, 5>;
using RelSpatial10 = std::array<double, 10>;

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    double ix = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    double iy = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

// Average per-frame IoU over the frames both tracks cover; 0 without overlap.
inline double mean_iou(const FrameBoxTrack& a, const FrameBoxTrack& b) {
    double sum = 0.0;
    int shared = 0;
    for (const auto& [frame, box] : a) {
        const BoundingBox* other = find_box(b, frame);
        if (!other) continue;
        sum += iou(box, *other);
        ++shared;
    }
    return shared == 0 ? 0.0 : sum / shared;
}

inline double mean_iou(const Tubelet& a, const Tubelet& b) { return mean_iou(a.boxes, b.boxes); }

// Volume IoU: summed intersection area over summed union area across frames.
inline double volume_iou(const FrameBoxTrack& a, const FrameBoxTrack& b) {
    double inter_sum = 0.0, area_a = 0.0, area_b = 0.0;
    for (const auto& [frame, box] : a) {
        area_a += box.area();
        const BoundingBox* other = find_box(b, frame);
        if (!other) continue;
        double ix = std::min(box.xmax, other->xmax) - std::max(box.xmin, other->xmin);
        double iy = std::min(box.ymax, other->ymax) - std::max(box.ymin, other->ymin);
        if (ix > 0.0 && iy > 0.0) inter_sum += ix * iy;
    }
    for (const auto& [frame, box] : b) area_b += box.area();
    double denom = area_a + area_b - inter_sum;
    return denom <= 0.0 ? 0.0 : inter_sum / denom;
}

inline double volume_iou(const Tubelet& a, const Tubelet& b) { return volume_iou(a.boxes, b.boxes); }

// Volume IoU restricted to the overlapped duration of the two tracks; 0 when
// they share no frames. Identical boxes on the shared frames give exactly 1,
// which is what cross-clip continuation tests rely on.
inline double volume_iou_shared(const FrameBoxTrack& a, const FrameBoxTrack& b) {
    if (a.empty() || b.empty()) return 0.0;
    int first = std::max(a.front().first, b.front().first);
    int last = std::min(a.back().first, b.back().first);
    if (first > last) return 0.0;
    FrameBoxTrack ra, rb;
    for (const auto& p : a)
        if (p.first >= first && p.first <= last) ra.push_back(p);
    for (const auto& p : b)
        if (p.first >= first && p.first <= last) rb.push_back(p);
    return volume_iou(ra, rb);
}

inline double volume_iou_shared(const Tubelet& a, const Tubelet& b) {
    return volume_iou_shared(a.boxes, b.boxes);
}

inline RelSpatial5 rel_spatial(const BoundingBox& i, const BoundingBox& j) {
    // widths/heights strictly positive by the box invariant, so the logs are safe
    return {(i.center_x() - j.center_x()) / j.width(),
            (i.center_y() - j.center_y()) / j.height(),
            std::log(i.width() / j.width()),
            std::log(i.height() / j.height()),
            std::log((i.width() * i.height()) / (j.width() * j.height()))};
}

// Pair spatial feature: rel_spatial at the first shared frame of the two
// tubelets concatenated with rel_spatial at the last shared frame.
inline RelSpatial10 pair_spatial(const Tubelet& subject, const Tubelet& object) {
    int first = std::max(subject.first_frame(), object.first_frame());
    int last = std::min(subject.last_frame(), object.last_frame());
    if (first > last)
        throw ValidationError("pair_spatial: no temporal overlap between " + subject.tubelet_id +
                              " and " + object.tubelet_id);
    const BoundingBox* s0 = find_box(subject.boxes, first);
    const BoundingBox* o0 = find_box(object.boxes, first);
    const BoundingBox* s1 = find_box(subject.boxes, last);
    const BoundingBox* o1 = find_box(object.boxes, last);
    RelSpatial5 head = rel_spatial(*s0, *o0);
    RelSpatial5 tail = rel_spatial(*s1, *o1);
    RelSpatial10 out;
    std::copy(head.begin(), head.end(), out.begin());
    std::copy(tail.begin(), tail.end(), out.begin() + 5);
    return out;
}

}  // namespace vidrel
