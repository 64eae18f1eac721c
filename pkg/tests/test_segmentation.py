import json
import math

import numpy as np
import pytest

from growlight import segmentation
from growlight.segmentation import (
    EstimationError,
    ThresholdRule,
    apply_homography,
    brightness,
    cluster_pot,
    estimate_homography,
    fit_threshold_rule,
    kmeans,
    load_annotations,
    parse_image_name,
    rule_from_annotations,
    segment_image,
    synth_plant_image,
    synth_plant_sequence,
    warp_image,
)


# --- homography ------------------------------------------------------------

SQUARE = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]])


def test_homography_identity():
    h = estimate_homography(SQUARE, SQUARE)
    assert np.allclose(h, np.eye(3), atol=1e-9)


def test_homography_translation():
    h = estimate_homography(SQUARE, SQUARE + [10.0, 5.0])
    expected = np.array([[1, 0, 10], [0, 1, 5], [0, 0, 1]], dtype=float)
    assert np.allclose(h, expected, atol=1e-9)


def test_homography_recovers_known_matrix():
    m = np.array(
        [[1.2, 0.1, 5.0], [-0.05, 0.9, 3.0], [5e-4, -3e-4, 1.0]]
    )
    src = np.array(
        [[0, 0], [30, 2], [28, 25], [1, 27], [15, 13], [7, 22]], dtype=float
    )
    dst = apply_homography(m, src)
    h = estimate_homography(src, dst)
    assert np.allclose(h, m, atol=1e-6)
    assert np.max(np.abs(apply_homography(h, src) - dst)) < 0.5


def test_homography_rejects_collinear():
    src = np.array([[0, 0], [1, 1], [2, 2], [3, 3]], dtype=float)
    with pytest.raises(EstimationError):
        estimate_homography(src, src + 1.0)


def test_homography_rejects_duplicates():
    src = np.array([[0, 0], [0, 0], [2, 5], [7, 1]], dtype=float)
    with pytest.raises(EstimationError):
        estimate_homography(src, src + 1.0)


def test_homography_needs_four_pairs():
    with pytest.raises(EstimationError):
        estimate_homography(SQUARE[:3], SQUARE[:3])


# --- warping ---------------------------------------------------------------


def checker(n=3):
    rng = np.random.default_rng(0)
    return rng.integers(0, 255, (n, n, 3)).astype(np.uint8)


def test_warp_identity():
    img = checker(5)
    assert np.array_equal(warp_image(img, np.eye(3)), img)


def test_warp_quarter_rotation_enumerated():
    img = checker(3)
    # src (x, y) -> dst (2 - y, x): a quarter turn within the 3x3 frame
    h = np.array([[0.0, -1.0, 2.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    out = warp_image(img, h)
    # hand rule: destination (X, Y) pulls source (x, y) = (Y, 2 - X)
    for yy in range(3):
        for xx in range(3):
            assert np.array_equal(out[yy, xx], img[2 - xx, yy])


def test_warp_full_translation_black():
    img = checker(4)
    h = np.array([[1.0, 0.0, 4.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.all(warp_image(img, h) == 0)


def test_warp_rotation_round_trip():
    # blocky image: nearest-neighbor round trips should match almost everywhere
    rng = np.random.default_rng(1)
    blocks = rng.integers(0, 255, (8, 8, 3))
    img = np.repeat(np.repeat(blocks, 8, axis=0), 8, axis=1).astype(np.uint8)
    c = 31.5
    angle = math.radians(30)
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    h = np.array(
        [
            [cos_a, -sin_a, c - c * cos_a + c * sin_a],
            [sin_a, cos_a, c - c * sin_a - c * cos_a],
            [0, 0, 1],
        ]
    )
    back = warp_image(warp_image(img, h), np.linalg.inv(h))
    ys, xs = np.mgrid[0:64, 0:64]
    interior = (xs - c) ** 2 + (ys - c) ** 2 < 20.0**2  # stays in-frame when rotated
    same = np.all(back == img, axis=2)
    assert same[interior].mean() >= 0.95


# --- k-means ---------------------------------------------------------------


def test_kmeans_single_cluster_is_mean():
    rng = np.random.default_rng(2)
    pts = rng.normal(0, 1, (40, 2))
    result = kmeans(pts, k=1, seed=0)
    assert np.allclose(result.centroids[0], pts.mean(axis=0), atol=1e-12)


def test_kmeans_separates_two_blobs():
    rng = np.random.default_rng(3)
    a = rng.normal(0, 0.1, (25, 2))
    b = rng.normal(10, 0.1, (25, 2)) + [10, 10]
    pts = np.vstack([a, b])
    result = kmeans(pts, k=2, seed=0)
    labels_a = set(result.assignments[:25].tolist())
    labels_b = set(result.assignments[25:].tolist())
    assert len(labels_a) == 1 and len(labels_b) == 1 and labels_a != labels_b


def _oracle_lloyd(points, k, seed, max_iters=100, tol=1e-6):
    """Plain re-implementation with explicit loops, mirroring the seeding."""
    rng = np.random.default_rng(seed)
    centroids = [points[rng.integers(len(points))]]
    while len(centroids) < k:
        d2 = np.array(
            [min(np.sum((p - c) ** 2) for c in centroids) for p in points]
        )
        total = d2.sum()
        if total == 0.0:
            centroids.append(points[rng.integers(len(points))])
        else:
            centroids.append(points[rng.choice(len(points), p=d2 / total)])
    centroids = np.array(centroids, dtype=float)
    history = []
    for _ in range(max_iters):
        assignments = np.array(
            [int(np.argmin([np.sum((p - c) ** 2) for c in centroids])) for p in points]
        )
        for c in range(k):
            members = points[assignments == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
        wcss = sum(np.sum((p - centroids[a]) ** 2) for p, a in zip(points, assignments))
        improved = not history or (history[-1] - wcss) > tol * max(history[-1], 1e-300)
        history.append(float(wcss))
        if not improved:
            break
    return assignments, centroids, history


def test_kmeans_matches_independent_lloyd():
    rng = np.random.default_rng(4)
    pts = np.vstack(
        [rng.normal(0, 1, (4, 2)), rng.normal(8, 1, (4, 2)), rng.normal((0, 9), 1, (4, 2))]
    )
    result = kmeans(pts, k=3, seed=11)
    assignments, centroids, history = _oracle_lloyd(pts, k=3, seed=11)
    assert np.array_equal(result.assignments, assignments)
    assert np.allclose(result.centroids, centroids, atol=1e-12)
    assert np.allclose(result.wcss_history, history, atol=1e-9)


def test_kmeans_wcss_non_increasing():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 10, (200, 2))
    for seed in range(5):
        result = kmeans(pts, k=5, seed=seed)
        assert np.all(np.diff(result.wcss_history) <= 1e-12)


def test_kmeans_rejects_bad_input():
    with pytest.raises(ValueError):
        kmeans(np.empty((0, 2)), k=1)
    with pytest.raises(ValueError):
        kmeans(np.ones((3, 2)), k=5)


# --- threshold rule --------------------------------------------------------


def test_rule_exact_recovery():
    samples = [(t, 3.0 * math.exp(0.2 * t)) for t in (1.0, 4.0, 9.0, 12.0)]
    rule = fit_threshold_rule(samples)
    assert rule.scale == pytest.approx(3.0, abs=1e-9)
    assert rule.rate == pytest.approx(0.2, abs=1e-9)


def test_rule_constant_samples():
    rule = fit_threshold_rule([(1.0, 5.0), (3.0, 5.0), (7.0, 5.0)])
    assert rule.rate == pytest.approx(0.0, abs=1e-12)
    assert rule.scale == pytest.approx(5.0, abs=1e-9)


def test_rule_matches_normal_equations_oracle():
    rng = np.random.default_rng(6)
    t = rng.uniform(0, 14, 20)
    d = 4.0 * np.exp(0.13 * t) * np.exp(rng.normal(0, 0.05, 20))
    rule = fit_threshold_rule(list(zip(t, d)))
    a = np.column_stack([t, np.ones(20)])
    slope, intercept = np.linalg.solve(a.T @ a, a.T @ np.log(d))
    assert rule.rate == pytest.approx(slope, abs=1e-8)
    assert rule.scale == pytest.approx(math.exp(intercept), rel=1e-8)


def test_rule_rejects_bad_samples():
    with pytest.raises(ValueError):
        fit_threshold_rule([(1.0, 0.0), (2.0, 5.0)])
    with pytest.raises(ValueError):
        fit_threshold_rule([(1.0, 5.0)])


def test_rule_threshold_monotone_in_age():
    rule = ThresholdRule(scale=2.0, rate=0.3)
    ts = np.linspace(0, 15, 40)
    thresholds = [rule.threshold(t) for t in ts]
    assert np.all(np.diff(thresholds) > 0)


# --- segmentation ----------------------------------------------------------

POT = [(100, 100)]
RULE = ThresholdRule(scale=60.0, rate=0.0)


def test_segment_all_black_zero_area():
    img = np.zeros((120, 120, 3), dtype=np.uint8)
    areas, mask = segment_image(img, [(30, 30), (90, 90)], RULE, t_days=3, scale_cm_per_px=0.05)
    assert areas == [0.0, 0.0]
    assert np.all(mask == 0)


def test_segment_disc_area_within_tolerance():
    img, count = synth_plant_image((200, 200), (100, 100), radius=40)
    areas, mask = segment_image(img, POT, RULE, t_days=3, scale_cm_per_px=0.05)
    analytic = math.pi * (40 * 0.05) ** 2
    assert areas[0] == pytest.approx(analytic, rel=0.05)
    assert areas[0] == pytest.approx(count * 0.05**2, rel=1e-12)


def test_segment_growing_sequence_nondecreasing():
    radii = [14.0 * math.exp(0.15 * t) for t in range(6)]
    images, _ = synth_plant_sequence((200, 200), (100, 100), radii, seed=3)
    rule = ThresholdRule(scale=42.0, rate=0.15)
    areas = [
        segment_image(img, POT, rule, t_days=t, scale_cm_per_px=0.05)[0][0]
        for t, img in enumerate(images)
    ]
    assert all(a > 0 for a in areas)
    assert all(b >= a for a, b in zip(areas, areas[1:]))


def test_segment_scale_equivariance():
    img1, _ = synth_plant_image((200, 200), (100, 100), radius=40)
    img2, _ = synth_plant_image((400, 400), (200, 200), radius=80)
    a1 = segment_image(img1, [(100, 100)], RULE, t_days=3, scale_cm_per_px=0.05)[0][0]
    a2 = segment_image(
        img2, [(200, 200)], ThresholdRule(scale=120.0, rate=0.0), t_days=3,
        scale_cm_per_px=0.025,
    )[0][0]
    assert abs(a2 - a1) / a1 < 0.02


def test_segment_requires_rule_and_scale():
    img = np.zeros((50, 50, 3), dtype=np.uint8)
    with pytest.raises(segmentation.SegmentationError):
        segment_image(img, POT, None, t_days=1, scale_cm_per_px=0.05)
    with pytest.raises(segmentation.SegmentationError):
        segment_image(img, POT, RULE, t_days=1, scale_cm_per_px=0.0)


# --- synthetic frames ------------------------------------------------------


def test_synth_rejects_degenerate_disc():
    with pytest.raises(ValueError):
        synth_plant_image((100, 100), (50, 50), radius=0)
    with pytest.raises(ValueError):
        synth_plant_image((100, 100), (95, 50), radius=10)


def test_synth_deterministic():
    a, _ = synth_plant_image((80, 80), (40, 40), radius=15, noise=12.0, seed=5)
    b, _ = synth_plant_image((80, 80), (40, 40), radius=15, noise=12.0, seed=5)
    assert np.array_equal(a, b)


def test_synth_noiseless_count_matches_direct_rasterization():
    img, count = synth_plant_image((90, 90), (45, 45), radius=17)
    direct = sum(
        1
        for y in range(90)
        for x in range(90)
        if (x - 45) ** 2 + (y - 45) ** 2 <= 17**2
    )
    assert count == direct
    bright = brightness(img)
    assert int((bright > 0.3).sum()) == direct


# --- annotations and naming ------------------------------------------------


def test_parse_image_name():
    assert parse_image_name("exp1_03_12.png") == ("exp1", 3, 12)
    with pytest.raises(ValueError):
        parse_image_name("no-pattern.png")


def test_rule_from_annotations_round_trip(tmp_path):
    radii = [12.0 * math.exp(0.1 * t) for t in (0, 2, 4)]
    images, _ = synth_plant_sequence((200, 200), (100, 100), radii, seed=9)
    images_by_id = {f"exp_{i}_0.png": img for i, img in enumerate(images)}

    annotations = []
    for i, (name, img) in enumerate(images_by_id.items()):
        bright = brightness(img)
        regions, dist = segmentation._pot_regions(bright.shape, POT)
        _, centroids = cluster_pot(bright, dist, regions == 0, k=4, seed=0)
        plant_ids = [c for c in range(len(centroids)) if centroids[c, 0] > 0.3]
        annotations.append(
            {"image_id": name, "day_index": 2 * i, "plant_cluster_ids": [plant_ids]}
        )
    path = tmp_path / "annotations.json"
    path.write_text(json.dumps({"annotations": annotations}), encoding="utf-8")

    loaded = load_annotations(path)
    rule = rule_from_annotations(images_by_id, loaded, POT, k=4, seed=0)
    assert rule.rate > 0  # the plant grows, so the distance bound must too
    # the fitted bound should sit near the labeled centroid distances
    assert 5.0 < rule.scale < 40.0
