import math

import numpy as np
import pytest

from roomlayout import synth
from roomlayout.coarse import ContourMask, binarize_and_dilate
from roomlayout.errors import DegenerateConfiguration, NoSegments
from roomlayout.geometry import LineSegment, Point2
from roomlayout.vanishing import (
    VanishingTriple, detect_line_segments, estimate_vanishing_points,
    grid_search_candidates, merge_duplicate_lines, select_critical_lines,
    ClassifiedLine,
)

def make_segment(x0, y0, x1, y1, strength=100.0):
    return LineSegment(Point2(float(x0), float(y0)), Point2(float(x1), float(y1)), strength)


class TestDetector:
    def test_black_square_sides_recovered(self):
        img = np.full((120, 120), 255.0)
        img[30:91, 40:101] = 0.0
        segments = detect_line_segments(img, min_length=15)
        assert len(segments) >= 4
        # each square side matched within 1 px by some segment
        sides = [
            ((39.5, 30.0), (39.5, 90.0)), ((100.5, 30.0), (100.5, 90.0)),
            ((40.0, 29.5), (100.0, 29.5)), ((40.0, 90.5), (100.0, 90.5)),
        ]
        for (ax, ay), (bx, by) in sides:
            hit = False
            for seg in segments:
                x0, y0 = seg.p0.xy()
                x1, y1 = seg.p1.xy()
                d = math.hypot(x0 - ax, y0 - ay) + math.hypot(x1 - bx, y1 - by)
                d2 = math.hypot(x0 - bx, y0 - by) + math.hypot(x1 - ax, y1 - ay)
                if min(d, d2) < 2.0:
                    hit = True
            assert hit

    def test_constant_image_has_no_segments(self):
        with pytest.raises(NoSegments):
            detect_line_segments(np.full((60, 60), 128.0), min_length=15)

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(5)
        img = np.full((100, 100), 220.0)
        img[20:80, 30:70] = 60.0
        img += rng.normal(0, 1.0, img.shape)
        seg_a = detect_line_segments(img, min_length=15)
        seg_b = detect_line_segments(np.rot90(img).copy(), min_length=15)
        assert len(seg_a) == len(seg_b)
        angles_a = sorted((math.degrees(math.atan2(s.direction()[1], s.direction()[0])) % 180) for s in seg_a)
        angles_b = sorted(((math.degrees(math.atan2(s.direction()[1], s.direction()[0])) + 90) % 180) for s in seg_b)
        for a, b in zip(angles_a, angles_b):
            diff = abs(a - b) % 180
            assert min(diff, 180 - diff) < 1.0

    def test_determinism(self):
        rng = np.random.default_rng(9)
        img = np.full((100, 100), 220.0)
        img[20:80, 30:70] = 60.0
        img += rng.normal(0, 1.5, img.shape)
        a = detect_line_segments(img, min_length=15)
        b = detect_line_segments(img, min_length=15)
        assert [(s.p0.xy(), s.p1.xy(), s.strength) for s in a] == [
            (s.p0.xy(), s.p1.xy(), s.strength) for s in b
        ]


class TestVanishingPoints:
    def test_pencil_plus_verticals(self):
        segments = []
        for ang in np.linspace(0.25, math.pi - 0.25, 9):
            d = (math.cos(ang), math.sin(ang))
            segments.append(make_segment(
                200 + 40 * d[0], 150 + 40 * d[1], 200 + 140 * d[0], 150 + 140 * d[1]
            ))
        for x in (50, 120, 320):
            segments.append(make_segment(x, 20, x, 120, strength=80))
        triple = estimate_vanishing_points(segments, dims=(400, 300))
        assert triple.v_vertical.is_ideal
        x, y = triple.v_horiz1.xy()
        assert math.hypot(x - 200, y - 150) < 3.0

    def test_two_ideal_families(self):
        segments = [make_segment(10 + 30 * i, 20, 10 + 30 * i, 90) for i in range(3)]
        segments += [make_segment(10, 15 + 25 * i, 100, 15 + 25 * i) for i in range(3)]
        triple = estimate_vanishing_points(segments, dims=(120, 120))
        assert triple.v_vertical.is_ideal
        assert triple.v_horiz1.is_ideal
        assert abs(triple.v_vertical.normalized().y) == pytest.approx(1.0, abs=1e-6)
        assert abs(triple.v_horiz1.normalized().x) == pytest.approx(1.0, abs=1e-6)

    def test_order_invariance(self, rng):
        segments = []
        for ang in np.linspace(0.3, math.pi - 0.3, 7):
            d = (math.cos(ang), math.sin(ang))
            segments.append(make_segment(
                150 + 30 * d[0], 100 + 30 * d[1], 150 + 120 * d[0], 100 + 120 * d[1],
                strength=50 + 10 * ang,
            ))
        for x in (40, 260):
            segments.append(make_segment(x, 10, x, 190, strength=70))
        a = estimate_vanishing_points(segments, dims=(300, 200))
        shuffled = list(segments)
        rng.shuffle(shuffled)
        b = estimate_vanishing_points(shuffled, dims=(300, 200))
        assert a.v_horiz1.normalized().xy() == b.v_horiz1.normalized().xy()
        assert a.support == b.support

    def test_degenerate_single_direction(self):
        segments = [make_segment(10, 10 + 5 * i, 90, 10 + 5 * i) for i in range(4)]
        with pytest.raises(DegenerateConfiguration):
            estimate_vanishing_points(segments)

    def test_too_few_segments(self):
        with pytest.raises(DegenerateConfiguration):
            estimate_vanishing_points([make_segment(0, 0, 10, 10)])

    def test_beats_random_triples(self, rng):
        # local-optimality smoke test: the estimated grouping collects at
        # least as much consistent strength as random candidate triples
        from roomlayout.vanishing import _consistency, CONSENSUS_DEG

        scene = synth.make_scene(seed=21, blur_sigma=0.0, noise_amp=0.0, occlusion_fraction=0.0)
        segments = detect_line_segments(scene.image, 15)
        triple = estimate_vanishing_points(segments, dims=(404, 404))
        cos_thresh = math.cos(math.radians(CONSENSUS_DEG))

        def triple_score(points):
            total = 0.0
            for seg in segments:
                best = 0.0
                for p in points:
                    if p is None:
                        continue
                    cons = _consistency(p, [seg])[0]
                    if cons >= cos_thresh:
                        best = max(best, seg.strength)
                total += best
            return total

        est = triple_score([triple.v_vertical, triple.v_horiz1, triple.v_horiz2])
        for _ in range(100):
            pts = [
                Point2(rng.uniform(-2000, 2000), rng.uniform(-2000, 2000))
                for _ in range(3)
            ]
            assert triple_score(pts) <= est + 1e-9


class TestGridSearch:
    def test_extent_zero_is_singleton(self):
        out = grid_search_candidates(Point2(10.0, 20.0), extent=0, step=5)
        assert len(out) == 1 and out[0].xy() == (10.0, 20.0)

    def test_extent_ten_step_five(self):
        assert len(grid_search_candidates(Point2(0.0, 0.0), 10, 5)) == 25

    def test_extent_twelve_truncates_to_two_rings(self):
        # floor(12/5) = 2 rings on each side
        out = grid_search_candidates(Point2(0.0, 0.0), 12, 5)
        assert len(out) == 25
        xs = sorted({p.xy()[0] for p in out})
        assert xs == [-10.0, -5.0, 0.0, 5.0, 10.0]

    def test_contains_origin_and_reflection_symmetric(self):
        v0 = Point2(33.0, 44.0)
        out = grid_search_candidates(v0, 20, 5)
        pts = {p.xy() for p in out}
        assert (33.0, 44.0) in pts
        for x, y in pts:
            assert (2 * 33.0 - x, 2 * 44.0 - y) in pts

    def test_row_major_order(self):
        out = grid_search_candidates(Point2(0.0, 0.0), 5, 5)
        coords = [p.xy() for p in out]
        assert coords == [
            (-5.0, -5.0), (0.0, -5.0), (5.0, -5.0),
            (-5.0, 0.0), (0.0, 0.0), (5.0, 0.0),
            (-5.0, 5.0), (0.0, 5.0), (5.0, 5.0),
        ]


class TestCriticalLines:
    def quad_segments(self, model, inset=6.0):
        from roomlayout.geometry import extract_corners

        corners = {c.id: c.point.xy() for c in extract_corners(model, 404, 404)}
        p1, p2, p3, p4 = (corners[k] for k in ("p1", "p2", "p3", "p4"))

        def shrink(a, b):
            ax, ay = a
            bx, by = b
            n = math.hypot(bx - ax, by - ay)
            ux, uy = (bx - ax) / n, (by - ay) / n
            return make_segment(ax + inset * ux, ay + inset * uy, bx - inset * ux, by - inset * uy)

        return [shrink(p1, p4), shrink(p2, p3), shrink(p1, p2), shrink(p4, p3)]

    def make_scene_mask_triple(self, seed=31):
        scene = synth.make_scene(seed=seed, blur_sigma=0.0, noise_amp=0.0, occlusion_fraction=0.0)
        mask = binarize_and_dilate(scene.pmap, 0.5, 4)
        triple = VanishingTriple(
            v_vertical=scene.vertical_vp,
            v_horiz1=scene.model.v,
            v_horiz2=scene.floor_vp,
            support=(2, 0, 2),
            assignments=(0, 2, 0, 2),
        )
        return scene, mask, triple

    def test_room_boundary_segments_classify_one_two_one(self):
        scene, mask, _ = self.make_scene_mask_triple()
        segs = self.quad_segments(scene.model)
        # l1 and l2 belong to the far horizontal group, walls to the vertical
        triple = VanishingTriple(
            v_vertical=scene.vertical_vp, v_horiz1=scene.model.v,
            v_horiz2=scene.floor_vp, support=(2, 0, 2),
            assignments=(2, 2, 0, 0),
        )
        out = select_critical_lines(segs, triple, mask, (404, 404))
        assert len(out.ceiling) == 1
        assert len(out.wall) == 2
        assert len(out.floor) == 1

    def test_all_segments_outside_mask_gives_empty(self):
        scene, _, triple = self.make_scene_mask_triple()
        segs = self.quad_segments(scene.model)
        empty = ContourMask(np.zeros((404, 404), dtype=bool), dilation_radius=4)
        out = select_critical_lines(
            segs,
            VanishingTriple(
                v_vertical=scene.vertical_vp, v_horiz1=scene.model.v,
                v_horiz2=scene.floor_vp, support=(2, 0, 2), assignments=(2, 2, 0, 0),
            ),
            empty, (404, 404),
        )
        assert out.is_empty()

    def test_duplicate_parallel_segments_merge(self):
        a = make_segment(10, 50, 90, 50.2, strength=40)
        b = make_segment(12, 51, 88, 51.1, strength=30)
        entries = [
            ClassifiedLine(line=s.carrier(), strength=s.strength, segments=(s,), vp_group=2)
            for s in (a, b)
        ]
        merged = merge_duplicate_lines(entries)
        assert len(merged) == 1
        assert merged[0].strength == pytest.approx(70.0)
        assert len(merged[0].segments) == 2

    def test_kept_lines_have_in_mask_support(self):
        scene, mask, _ = self.make_scene_mask_triple(seed=8)
        segs = self.quad_segments(scene.model)
        triple = VanishingTriple(
            v_vertical=scene.vertical_vp, v_horiz1=scene.model.v,
            v_horiz2=scene.floor_vp, support=(2, 0, 2), assignments=(2, 2, 0, 0),
        )
        out = select_critical_lines(segs, triple, mask, (404, 404))
        for entry in out.all_lines():
            for seg in entry.segments:
                assert mask.contains(*seg.midpoint())


class TestSegmentsJsonl:
    def test_round_trip(self, tmp_path):
        from roomlayout.vanishing import segments_from_jsonl, segments_to_jsonl

        segments = [
            make_segment(1.5, 2.0, 40.0, 3.5, strength=12.0),
            make_segment(5.0, 8.0, 5.5, 90.0, strength=7.0),
        ]
        path = tmp_path / "segments.jsonl"
        segments_to_jsonl(segments, path)
        back = segments_from_jsonl(path)
        assert [(s.p0.xy(), s.p1.xy(), s.strength) for s in back] == [
            (s.p0.xy(), s.p1.xy(), s.strength) for s in segments
        ]

    def test_empty_file_raises(self, tmp_path):
        from roomlayout.vanishing import segments_from_jsonl

        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(NoSegments):
            segments_from_jsonl(path)

    def test_bad_record_raises(self, tmp_path):
        from roomlayout.vanishing import segments_from_jsonl

        path = tmp_path / "bad.jsonl"
        path.write_text('{"p0": [1, 2]}\n')
        with pytest.raises(ValueError):
            segments_from_jsonl(path)


def test_detector_honors_min_length():
    img = np.full((120, 120), 255.0)
    img[50:61, 40:101] = 0.0  # 61-wide, 11-tall box: short sides are 11 px
    long_only = detect_line_segments(img, min_length=30)
    assert all(s.length() >= 30 for s in long_only)
    with_short = detect_line_segments(img, min_length=8)
    assert len(with_short) > len(long_only)
