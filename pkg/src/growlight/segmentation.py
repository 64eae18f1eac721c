"""Batch leaf-area extraction from top-view grow-bed images.

Pipeline: rectify each frame with an estimated homography, cluster the
pixels of each pot region on (brightness, distance-to-pot-center) with
k-means, then label as plant those clusters whose centroid distance
stays under an exponential-in-age threshold fitted from a handful of
manually annotated frames.  Leaf area is the labeled pixel count times
the configured cm-per-pixel scale squared.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

DEFAULT_CLUSTERS_PER_POT = 4
DEFAULT_BRIGHTNESS_FLOOR = 0.35

_LUMA = np.array([0.299, 0.587, 0.114])


class EstimationError(ValueError):
    pass


class SegmentationError(RuntimeError):
    pass


# --- homography ------------------------------------------------------------


def estimate_homography(src_points, dst_points):
    """Direct linear transform from >= 4 point correspondences.

    Points are (x, y) pairs; the result maps src -> dst in homogeneous
    coordinates and is normalized so H[2, 2] == 1.
    """
    src = np.asarray(src_points, dtype=float)
    dst = np.asarray(dst_points, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[0] < 4 or src.shape[1] != 2:
        raise EstimationError("need matching (N, 2) arrays with N >= 4")

    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    a = np.array(rows)
    _, s, vt = np.linalg.svd(a)
    # rank deficiency beyond the 1-dim null space means collinear points
    if s[-2] < 1e-9 * s[0]:
        raise EstimationError("degenerate point configuration")
    h = vt[-1].reshape(3, 3)
    if abs(h[2, 2]) < 1e-12:
        raise EstimationError("homography is not normalizable")
    h = h / h[2, 2]
    if abs(np.linalg.det(h)) < 1e-12:
        raise EstimationError("homography is singular")
    return h


def apply_homography(h, points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hom = np.column_stack([pts, np.ones(len(pts))]) @ h.T
    return hom[:, :2] / hom[:, 2:3]


def warp_image(image, h):
    """Rectify with inverse-mapping and nearest-neighbor sampling.

    Pixels whose source falls outside the frame become black.  Nearest
    neighbor keeps label masks crisp for area counting.
    """
    image = np.asarray(image)
    height, width = image.shape[:2]
    ys, xs = np.mgrid[0:height, 0:width]
    dst = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    src = apply_homography(np.linalg.inv(h), dst)
    sx = np.rint(src[:, 0]).astype(int)
    sy = np.rint(src[:, 1]).astype(int)
    valid = (sx >= 0) & (sx < width) & (sy >= 0) & (sy < height)
    out = np.zeros_like(image)
    flat_out = out.reshape(height * width, *image.shape[2:])
    flat_out[valid] = image[sy[valid], sx[valid]]
    return flat_out.reshape(image.shape)


# --- k-means ---------------------------------------------------------------


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    wcss_history: list


def _wcss(points, assignments, centroids):
    return float(np.sum((points - centroids[assignments]) ** 2))


def kmeans(points, k, seed=0, max_iters=100, tol=1e-6):
    """Lloyd's algorithm from a seeded k-means++ initialization."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("points must be a non-empty (N, D) array")
    if not 1 <= k <= len(points):
        raise ValueError(f"k={k} outside 1..{len(points)}")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centroids = [points[rng.integers(len(points))]]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centroids], axis=0
        )
        total = d2.sum()
        if total == 0.0:
            centroids.append(points[rng.integers(len(points))])
        else:
            centroids.append(points[rng.choice(len(points), p=d2 / total)])
    centroids = np.array(centroids)

    history = []
    assignments = None
    for _ in range(max_iters):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        assignments = np.argmin(d2, axis=1)
        for c in range(k):
            members = points[assignments == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
            else:
                # re-seed empty clusters at the point farthest from its centroid
                worst = int(np.argmax(d2[np.arange(len(points)), assignments]))
                centroids[c] = points[worst]
                assignments[worst] = c
        wcss = _wcss(points, assignments, centroids)
        if history and wcss > history[-1] + 1e-12:
            raise SegmentationError("k-means objective increased")
        improved = not history or (history[-1] - wcss) > tol * max(history[-1], 1e-300)
        history.append(wcss)
        if not improved:
            break
    return KMeansResult(assignments=assignments, centroids=centroids, wcss_history=history)


# --- exponential threshold rule -------------------------------------------


@dataclass(frozen=True)
class ThresholdRule:
    """Plant-cluster distance bound A * exp(B * t_days)."""

    scale: float  # A
    rate: float  # B

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def threshold(self, t_days):
        return self.scale * math.exp(self.rate * t_days)


def fit_threshold_rule(samples):
    """Least squares of ln(distance) on t over (t_days, distance) pairs."""
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    t = np.array([s[0] for s in samples], dtype=float)
    d = np.array([s[1] for s in samples], dtype=float)
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    if len(set(t.tolist())) < 2:
        raise ValueError("need at least 2 distinct t values")
    slope, intercept = np.polyfit(t, np.log(d), 1)
    return ThresholdRule(scale=float(np.exp(intercept)), rate=float(slope))


# --- segmentation ----------------------------------------------------------


def brightness(image):
    """Rec.601 luma in [0, 1] for an (H, W, 3) uint8 image."""
    return np.asarray(image, dtype=float) @ _LUMA / 255.0


def _pot_regions(shape, pot_centers):
    """Assign every pixel to its nearest pot center; returns (H, W) indices."""
    height, width = shape
    ys, xs = np.mgrid[0:height, 0:width]
    centers = np.asarray(pot_centers, dtype=float)
    d2 = (xs[..., None] - centers[:, 0]) ** 2 + (ys[..., None] - centers[:, 1]) ** 2
    return np.argmin(d2, axis=2), np.sqrt(np.min(d2, axis=2))


def cluster_pot(bright, dist, mask, k, seed):
    """K-means over one pot's pixels on min-maxed (brightness, distance).

    Returns the k-means result plus the centroids mapped back to raw
    feature units (the threshold rule works in pixels).
    """
    feats = np.column_stack([bright[mask], dist[mask]])
    lo = feats.min(axis=0)
    span = feats.max(axis=0) - lo
    span[span == 0] = 1.0
    result = kmeans((feats - lo) / span, k=min(k, len(feats)), seed=seed)
    raw_centroids = result.centroids * span + lo
    return result, raw_centroids


def segment_image(
    image,
    pot_centers,
    rule,
    t_days,
    scale_cm_per_px,
    k=DEFAULT_CLUSTERS_PER_POT,
    brightness_floor=DEFAULT_BRIGHTNESS_FLOOR,
    seed=0,
):
    """Per-pot leaf areas (cm^2) and a label mask (0 = background, pot+1)."""
    if rule is None:
        raise SegmentationError("threshold rule not fitted")
    if not scale_cm_per_px or scale_cm_per_px <= 0:
        raise SegmentationError("pixel scale not configured")
    image = np.asarray(image)
    bright = brightness(image)
    regions, dist = _pot_regions(bright.shape, pot_centers)
    limit = rule.threshold(t_days)

    areas = []
    mask = np.zeros(bright.shape, dtype=np.int32)
    for pot in range(len(pot_centers)):
        in_pot = regions == pot
        result, centroids = cluster_pot(bright, dist, in_pot, k, seed)
        plant_clusters = [
            c
            for c in range(len(centroids))
            if centroids[c, 1] <= limit and centroids[c, 0] >= brightness_floor
        ]
        plant = np.zeros(int(in_pot.sum()), dtype=bool)
        for c in plant_clusters:
            plant |= result.assignments == c
        areas.append(float(plant.sum()) * scale_cm_per_px**2)
        mask[in_pot] = np.where(plant, pot + 1, 0)
    return areas, mask


# --- annotations and batch processing --------------------------------------


@dataclass(frozen=True)
class Annotation:
    image_id: str
    day_index: float
    plant_cluster_ids: tuple  # per pot: tuple of cluster-id tuples


def load_annotations(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return [
        Annotation(
            image_id=a["image_id"],
            day_index=float(a["day_index"]),
            plant_cluster_ids=tuple(tuple(ids) for ids in a["plant_cluster_ids"]),
        )
        for a in doc["annotations"]
    ]


def rule_from_annotations(images_by_id, annotations, pot_centers, k=DEFAULT_CLUSTERS_PER_POT, seed=0, margin=0.1):
    """Fit the distance threshold from annotated frames.

    For each annotated frame, the labeled plant clusters contribute the
    maximum centroid distance seen at that age.
    """
    samples = []
    for ann in annotations:
        image = images_by_id[ann.image_id]
        bright = brightness(image)
        regions, dist = _pot_regions(bright.shape, pot_centers)
        max_dist = 0.0
        for pot, cluster_ids in enumerate(ann.plant_cluster_ids):
            if not cluster_ids:
                continue
            _, centroids = cluster_pot(bright, dist, regions == pot, k, seed)
            for c in cluster_ids:
                if c >= len(centroids):
                    raise SegmentationError(
                        f"annotation references missing cluster {c} in {ann.image_id}"
                    )
                max_dist = max(max_dist, float(centroids[c, 1]))
        if max_dist > 0.0:
            samples.append((ann.day_index, max_dist))
    rule = fit_threshold_rule(samples)
    # the regression passes through the labels, so roughly half of them sit
    # just above it; pad the bound so every annotated plant stays inside
    return ThresholdRule(scale=rule.scale * (1.0 + margin), rate=rule.rate)


_NAME_RE = re.compile(r"^(?P<experiment>.+)_(?P<day>\d+)_(?P<hour>\d+)\.(png|ppm)$")


def parse_image_name(name):
    m = _NAME_RE.match(name)
    if not m:
        raise ValueError(f"image name {name!r} not <experiment>_<day>_<hour>.png")
    return m.group("experiment"), int(m.group("day")), int(m.group("hour"))


# --- synthetic test sequences ----------------------------------------------


def synth_plant_image(size, center, radius, noise=0.0, seed=0):
    """One frame: a bright disc (the plant) on a dark background."""
    width, height = size
    if radius <= 0:
        raise ValueError("radius must be positive")
    cx, cy = center
    if cx - radius < 0 or cx + radius >= width or cy - radius < 0 or cy + radius >= height:
        raise ValueError("disc does not fit in the frame")
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width]
    disc = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2
    image = np.empty((height, width, 3), dtype=float)
    image[~disc] = (25.0, 30.0, 25.0)
    image[disc] = (60.0, 200.0, 70.0)
    if noise > 0.0:
        image += rng.uniform(-noise, noise, image.shape)
    return np.clip(np.rint(image), 0, 255).astype(np.uint8), int(disc.sum())


def synth_plant_sequence(size, center, radii, noise=0.0, seed=0):
    """Frames with known disc radii; returns (images, true pixel counts)."""
    images = []
    true_counts = []
    for i, radius in enumerate(radii):
        img, count = synth_plant_image(size, center, radius, noise=noise, seed=seed + i)
        images.append(img)
        true_counts.append(count)
    return images, true_counts
