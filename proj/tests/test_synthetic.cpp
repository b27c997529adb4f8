#include <catch2/catch.hpp>

#include "vidrel/pipeline_batch.hpp"
#include "vidrel/synthetic.hpp"

using namespace vidrel;

namespace {

ScenarioSpec small_spec(uint64_t seed = 5) {
    ScenarioSpec s;
    s.seed = seed;
    s.video_count = 12;
    s.frame_count = 90;
    s.min_objects = 3;
    s.max_objects = 4;
    s.category_count = 10;
    s.predicate_count = 8;
    s.feature_dim = 16;
    return s;
}

}  // namespace

TEST_CASE("generation is a pure function of the scenario spec", "[synthetic]") {
    auto a = generate(small_spec());
    auto b = generate(small_spec());
    REQUIRE(a.annotations.size() == b.annotations.size());
    for (size_t i = 0; i < a.annotations.size(); ++i) {
        CHECK(annotation_to_json(a.annotations[i]).dump() ==
              annotation_to_json(b.annotations[i]).dump());
    }
    REQUIRE(a.features.size() == b.features.size());
    auto ita = a.features.begin();
    auto itb = b.features.begin();
    for (; ita != a.features.end(); ++ita, ++itb) {
        CHECK(ita->first == itb->first);
        CHECK(ita->second == itb->second);
    }
}

TEST_CASE("different seeds give different data", "[synthetic]") {
    auto a = generate(small_spec(5));
    auto b = generate(small_spec(6));
    CHECK(annotation_to_json(a.annotations[0]).dump() !=
          annotation_to_json(b.annotations[0]).dump());
}

TEST_CASE("generated annotations satisfy all dataset invariants", "[synthetic]") {
    auto data = generate(small_spec(77));
    for (const auto& anno : data.annotations) {
        CHECK_NOTHROW(validate_annotation(anno));
        CHECK(anno.relations.size() >= 1);
        CHECK(anno.relations.size() <= 2);
        // feature records exist for every trajectory frame
        for (const auto& t : anno.trajectories)
            for (const auto& [frame, box] : t.boxes)
                CHECK(data.features.count(feature_key(anno.video_id, t.traj_id, frame)) == 1);
    }
}

TEST_CASE("long-span relations cover at least three clips at 30/15", "[synthetic]") {
    ScenarioSpec s = small_spec(3);
    s.scripts = {{"sweep", "long", 1.0}, {"follow", "long", 1.0}, {"context", "long", 1.0}};
    auto data = generate(s);
    PipelineConfig cfg;
    for (const auto& anno : data.annotations) {
        const auto& rel = anno.relations[0];
        int covered = 0;
        for (const auto& clip : segment_clips(anno, cfg)) {
            int lo = std::max(clip.start_frame, rel.begin_fid);
            int hi = std::min(clip.end_frame, rel.end_fid - 1);
            if (hi - lo + 1 >= 15) ++covered;
        }
        CHECK(covered >= 3);
    }
}

TEST_CASE("scripted geometry carries the predicate signal", "[synthetic]") {
    ScenarioSpec s = small_spec(11);
    s.video_count = 30;
    auto data = generate(s);
    int touching = 0, signal = 0, sweep = 0;
    for (const auto& anno : data.annotations) {
        const auto& rel = anno.relations[0];
        const auto* subj = anno.find_trajectory(rel.subject_traj);
        const auto* obj = anno.find_trajectory(rel.object_traj);
        if (rel.predicate == "touching") {
            ++touching;
            // the smaller subject sits on the object throughout the span
            for (int f = rel.begin_fid; f < rel.end_fid; f += 7) {
                const BoundingBox* sb = find_box(subj->boxes, f);
                const BoundingBox* ob = find_box(obj->boxes, f);
                REQUIRE(sb);
                REQUIRE(ob);
                double ix = std::min(sb->xmax, ob->xmax) - std::max(sb->xmin, ob->xmin);
                double iy = std::min(sb->ymax, ob->ymax) - std::max(sb->ymin, ob->ymin);
                double containment = std::max(0.0, ix) * std::max(0.0, iy) / sb->area();
                CHECK(containment > 0.7);
                CHECK(sb->width() < 0.7 * ob->width());
            }
        } else if (rel.predicate == "signal_a" || rel.predicate == "signal_b") {
            ++signal;
            // a marker of the matching category overlaps the subject
            std::string want = rel.predicate == "signal_a" ? "marker_a" : "marker_b";
            bool found = false;
            for (const auto& t : anno.trajectories)
                if (t.category == want && mean_iou(t.boxes, subj->boxes) > 0.05) found = true;
            CHECK(found);
        } else if (rel.predicate == "weaving" || rel.predicate == "flanking") {
            ++sweep;
            // weaving alternates the subject's side per clip start; flanking
            // holds one side; both hover above the object
            auto offset_at = [&](int frame) {
                const BoundingBox* sb = find_box(subj->boxes, frame);
                const BoundingBox* ob = find_box(obj->boxes, frame);
                REQUIRE(sb);
                REQUIRE(ob);
                return std::pair{sb->center_x() - ob->center_x(), sb->center_y() - ob->center_y()};
            };
            auto [x0, y0] = offset_at(0);
            auto [x1, y1] = offset_at(15);
            auto [x2, y2] = offset_at(30);
            if (rel.predicate == "weaving") {
                CHECK(x0 * x1 < 0.0);
                CHECK(x1 * x2 < 0.0);
            } else {
                CHECK(x0 * x1 > 0.0);
                CHECK(x1 * x2 > 0.0);
            }
            CHECK(y0 < 0.0);  // above the object
        }
    }
    CHECK(touching > 0);
    CHECK(signal > 0);
    CHECK(sweep > 0);
}

TEST_CASE("dropout removes one clip of the subject trajectory", "[synthetic]") {
    ScenarioSpec s = small_spec(13);
    s.scripts = {{"follow", "long", 1.0}};
    s.dropout_rate = 1.0;
    auto data = generate(s);
    int with_gap = 0;
    for (const auto& anno : data.annotations) {
        const auto* subj = anno.find_trajectory(anno.relations[0].subject_traj);
        int prev = subj->boxes.front().first;
        int gap_frames = 0;
        for (size_t i = 1; i < subj->boxes.size(); ++i) {
            gap_frames += subj->boxes[i].first - prev - 1;
            prev = subj->boxes[i].first;
        }
        if (gap_frames > 0) {
            ++with_gap;
            CHECK(gap_frames == 30);
        }
    }
    CHECK(with_gap == static_cast<int>(data.annotations.size()));
}

TEST_CASE("infeasible scenarios are rejected", "[synthetic]") {
    ScenarioSpec s = small_spec();
    s.category_count = 3;
    CHECK_THROWS_AS(s.validate(), ValidationError);

    ScenarioSpec t = small_spec();
    t.scripts = {};
    CHECK_THROWS_WITH(t.validate(), Catch::Contains("infeasible"));

    ScenarioSpec u = small_spec();
    u.scripts = {{"context", "long", 1.0}};
    u.min_objects = 2;
    CHECK_THROWS_AS(u.validate(), ValidationError);
}

TEST_CASE("scenario json round-trip rejects unknown fields", "[synthetic]") {
    ScenarioSpec s = small_spec(91);
    auto j = scenario_to_json(s);
    auto back = scenario_from_json(j);
    CHECK(scenario_to_json(back).dump() == j.dump());
    j["bogus"] = true;
    CHECK_THROWS_WITH(scenario_from_json(j), Catch::Contains("unknown field"));
}
