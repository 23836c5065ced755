"""Deterministic shape corpora shared by the tests and the acceptance harness."""

import numpy as np
from scipy.spatial import ConvexHull

from hbsig.datagen import _densify, gen_polygon
from hbsig.field_core import image_geometry
from hbsig.shape_ops import BoundaryPolygon, rasterize

GEO = image_geometry()


def star_polygon(seed: int) -> BoundaryPolygon:
    rng = np.random.default_rng(seed)
    return gen_polygon(seed, int(rng.integers(5, 17)))


def convex_polygon(seed: int) -> BoundaryPolygon:
    """Convex hull of a generated polygon's corner points."""
    rng = np.random.default_rng(10_000 + seed)
    n = int(rng.integers(5, 17))
    corners = gen_polygon(10_000 + seed, n).vertices[::12]
    hull = ConvexHull(np.column_stack([corners.real, corners.imag])).vertices
    z = corners[hull][::-1]  # ConvexHull is counterclockwise
    return BoundaryPolygon.from_points(_densify(z))


def similar(poly: BoundaryPolygon, scale: float, theta: float, shift: complex) -> BoundaryPolygon:
    return BoundaryPolygon.from_points(poly.vertices * scale * np.exp(1j * theta) + shift)


def random_similarity(poly: BoundaryPolygon, rng, margin_px: float = 6.0):
    """Random scale/rotation/translation keeping the shape inside the frame."""
    half = GEO.width / (2 * GEO.pixels_per_unit) - margin_px / GEO.pixels_per_unit
    c = poly.centroid()
    reach = np.abs(poly.vertices - c).max()
    while True:
        k = rng.uniform(0.7, 1.3)
        th = rng.uniform(-np.pi, np.pi)
        lim = half - k * reach
        if lim <= 0:
            continue
        shift = complex(*rng.uniform(-lim, lim, 2))
        q = similar(poly, k, th, -c * k * np.exp(1j * th) + shift)
        v = q.vertices
        if np.abs(v.real).max() < half and np.abs(v.imag).max() < half:
            return q, (k, th, shift)


def image(poly: BoundaryPolygon):
    return rasterize(poly, GEO)


def disk_image(radius_px: float, center_px=(0.0, 0.0)):
    z = GEO.coordinates()
    c = complex(center_px[0], -center_px[1]) / GEO.pixels_per_unit
    from hbsig.field_core import GrayImage

    return GrayImage.from_mask(np.abs(z - c) < radius_px / GEO.pixels_per_unit, GEO)
