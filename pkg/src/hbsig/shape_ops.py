"""Binary shapes: validation, boundary polygons, rasterisation and set distances."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import kernels
from .errors import DegeneratePolygon, NotSimplyConnected
from .field_core import GrayImage, GridGeometry, image_geometry

DEFAULT_BOUNDARY_POINTS = 400
MIN_VERTICES = 8


class ShapeStatus(str, enum.Enum):
    SIMPLY_CONNECTED = "SimplyConnected"
    DISCONNECTED = "Disconnected"
    MULTIPLY_CONNECTED = "MultiplyConnected"
    EMPTY = "Empty"
    TOUCHES_BORDER = "TouchesBorder"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ShapeValidation:
    status: ShapeStatus
    component_count: int
    hole_count: int

    @property
    def ok(self) -> bool:
        return self.status is ShapeStatus.SIMPLY_CONNECTED

    def to_dict(self) -> dict:
        return {"status": str(self.status), "components": self.component_count, "holes": self.hole_count}


_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = ndimage.generate_binary_structure(2, 2)


def validate_shape(image: GrayImage) -> ShapeValidation:
    """Classify the ``>= 0.5`` foreground.

    Foreground components use 4-connectivity; holes are 8-connected
    background regions that do not reach the image border.
    """
    fg = image.foreground
    _, ncomp = ndimage.label(fg, structure=_FOUR)
    bg_labels, nbg = ndimage.label(~fg, structure=_EIGHT)
    border = np.concatenate([bg_labels[0], bg_labels[-1], bg_labels[:, 0], bg_labels[:, -1]])
    outer = set(np.unique(border[border > 0]).tolist())
    holes = nbg - len(outer)
    touches = bool(fg[0].any() or fg[-1].any() or fg[:, 0].any() or fg[:, -1].any())
    if ncomp == 0:
        status = ShapeStatus.EMPTY
    elif ncomp > 1:
        status = ShapeStatus.DISCONNECTED
    elif holes > 0:
        status = ShapeStatus.MULTIPLY_CONNECTED
    elif touches:
        status = ShapeStatus.TOUCHES_BORDER
    else:
        status = ShapeStatus.SIMPLY_CONNECTED
    return ShapeValidation(status, int(ncomp), int(holes))


def require_simply_connected(image: GrayImage) -> ShapeValidation:
    v = validate_shape(image)
    if not v.ok:
        raise NotSimplyConnected(v.status)
    return v


# ---------------------------------------------------------------------------
# polygons


def signed_area(z: np.ndarray) -> float:
    zn = np.roll(z, -1)
    return 0.5 * float(np.sum(z.real * zn.imag - zn.real * z.imag))


def perimeter(z: np.ndarray) -> float:
    return float(np.abs(np.roll(z, -1) - z).sum())


def is_simple(z: np.ndarray) -> bool:
    from shapely.geometry import LinearRing

    ring = LinearRing(np.column_stack([z.real, z.imag]))
    return bool(ring.is_simple)


@dataclass(frozen=True)
class BoundaryPolygon:
    """Closed clockwise polygon in the complex coordinates of a grid (y up).

    The closing edge is implicit; the first vertex is not repeated.
    """

    vertices: np.ndarray = field(repr=False)
    check_simple: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        z = np.array(self.vertices, dtype=np.complex128).ravel()
        if z.size >= 2 and z[0] == z[-1]:
            z = z[:-1]
        if z.size < MIN_VERTICES:
            raise DegeneratePolygon(f"polygon needs at least {MIN_VERTICES} vertices, got {z.size}")
        if not np.all(np.isfinite(z)):
            raise DegeneratePolygon("non-finite vertex")
        area = signed_area(z)
        if area == 0.0:
            raise DegeneratePolygon("zero-area polygon")
        if area > 0:
            raise DegeneratePolygon("polygon must be clockwise (negative signed area)")
        if self.check_simple and not is_simple(z):
            raise DegeneratePolygon("polygon self-intersects")
        z.setflags(write=False)
        object.__setattr__(self, "vertices", z)

    @classmethod
    def from_points(cls, points, check_simple: bool = True) -> "BoundaryPolygon":
        """Build from any closed vertex list, reversing counterclockwise input."""
        z = np.asarray(points, dtype=np.complex128).ravel()
        if z.size >= 2 and z[0] == z[-1]:
            z = z[:-1]
        if z.size >= 3 and signed_area(z) > 0:
            z = z[::-1]
        return cls(z, check_simple)

    def __len__(self):
        return self.vertices.size

    @property
    def area(self) -> float:
        return -signed_area(self.vertices)

    @property
    def length(self) -> float:
        return perimeter(self.vertices)

    def centroid(self) -> complex:
        z = self.vertices
        zn = np.roll(z, -1)
        cross = z.real * zn.imag - zn.real * z.imag
        a = 0.5 * cross.sum()
        return complex(((z + zn) * cross).sum() / (6.0 * a))

    def rms_radius(self, center: complex | None = None) -> float:
        """Arc-length RMS distance of the boundary from ``center`` (default: area centroid)."""
        c = self.centroid() if center is None else center
        a = self.vertices - c
        d = np.roll(self.vertices, -1) - self.vertices
        seg = np.abs(d)
        integral = seg * (np.abs(a) ** 2 + (a * np.conj(d)).real + np.abs(d) ** 2 / 3.0)
        return float(np.sqrt(integral.sum() / seg.sum()))

    def contains(self, z) -> np.ndarray:
        from shapely import contains_xy
        from shapely.geometry import Polygon

        z = np.asarray(z, dtype=np.complex128)
        poly = Polygon(np.column_stack([self.vertices.real, self.vertices.imag]))
        return contains_xy(poly, z.real, z.imag)

    def interior_point(self) -> complex:
        """Pole of inaccessibility: the interior point farthest from the boundary."""
        from shapely.geometry import Polygon
        from shapely.ops import polylabel

        poly = Polygon(np.column_stack([self.vertices.real, self.vertices.imag]))
        tol = max(np.sqrt(poly.area), 1e-12) * 1e-3
        p = polylabel(poly, tolerance=tol)
        return complex(p.x, p.y)

    def transformed(self, scale: complex = 1.0, shift: complex = 0.0) -> "BoundaryPolygon":
        """Apply ``z -> scale * z + shift`` (a similarity; |scale| > 0)."""
        return BoundaryPolygon(self.vertices * scale + shift, check_simple=False)


def trace_boundary(image: GrayImage, smoothing: float = 0.0) -> BoundaryPolygon:
    """Clockwise contour of the foreground at the 0.5 level.

    The image is thresholded first.  With ``smoothing = 0`` every vertex
    sits on the midpoint of an edge shared by a foreground and a background
    pixel; a positive value blurs the binary mask with a Gaussian of that
    many pixels before contouring, which removes the staircase while
    leaving straight edges in place.
    """
    from skimage import measure

    require_simply_connected(image)
    pad = 1 + int(np.ceil(4 * smoothing))
    fg = np.pad(image.foreground.astype(np.float64), pad)
    if smoothing > 0:
        fg = ndimage.gaussian_filter(fg, smoothing, mode="constant", truncate=4.0)
    contours = measure.find_contours(fg, 0.5, fully_connected="low")
    if not contours:
        raise DegeneratePolygon("no contour found")
    rc = max(contours, key=len) - float(pad)
    g = image.geometry
    z = (rc[:, 1] + 0.5 - g.center_x) / g.pixels_per_unit + 1j * (g.center_y - (rc[:, 0] + 0.5)) / g.pixels_per_unit
    return BoundaryPolygon.from_points(z)


def resample_boundary(poly: BoundaryPolygon, count: int = DEFAULT_BOUNDARY_POINTS) -> BoundaryPolygon:
    """``count`` vertices equally spaced by arc length, starting at the first vertex."""
    if count < MIN_VERTICES:
        raise ValueError(f"count must be >= {MIN_VERTICES}")
    z = poly.vertices
    closed = np.append(z, z[0])
    seg = np.abs(np.diff(closed))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if not total > 0:
        raise DegeneratePolygon("zero-length polygon")
    t = np.arange(count) * (total / count)
    out = np.interp(t, s, closed.real) + 1j * np.interp(t, s, closed.imag)
    return BoundaryPolygon(out, check_simple=False)


def rasterize(poly: BoundaryPolygon, geometry: GridGeometry | None = None) -> GrayImage:
    """Pixel is 1 exactly when its center lies inside the polygon (even-odd rule)."""
    geometry = geometry or image_geometry()
    row, col = geometry.to_pixel_float(poly.vertices)
    if row.min() < -0.5 or col.min() < -0.5 or row.max() > geometry.height - 0.5 or col.max() > geometry.width - 0.5:
        raise ValueError("polygon extends outside the grid")
    mask = kernels.raster(np.ascontiguousarray(row), np.ascontiguousarray(col), geometry.height, geometry.width)
    return GrayImage.from_mask(mask, geometry)


# ---------------------------------------------------------------------------
# distances


def _foreground_points(image: GrayImage, ppu: float) -> np.ndarray:
    g = image.geometry
    rows, cols = np.nonzero(image.foreground)
    x = (cols + 0.5 - g.center_x) / g.pixels_per_unit
    y = (g.center_y - (rows + 0.5)) / g.pixels_per_unit
    return np.column_stack([x, y]) * (g.pixels_per_unit / ppu)


def hausdorff_distance(a: GrayImage, b: GrayImage) -> float:
    """Symmetric Hausdorff distance between foreground pixel-center sets, in units of ``a``."""
    ppu = a.geometry.pixels_per_unit
    pa = _foreground_points(a, ppu)
    pb = _foreground_points(b, ppu)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("hausdorff distance needs non-empty foregrounds")
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return float(max(da.max(), db.max()))


def curve_hausdorff(p: BoundaryPolygon, q: BoundaryPolygon, samples: int = 2048) -> float:
    """Hausdorff distance between two boundary curves, densely sampled by arc length."""
    a = resample_boundary(p, samples).vertices
    b = resample_boundary(q, samples).vertices
    pa = np.column_stack([a.real, a.imag])
    pb = np.column_stack([b.real, b.imag])
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return float(max(da.max(), db.max()))


# ---------------------------------------------------------------------------
# pose

TARGET_RMS_RADIUS = 0.5


def polygon_pose(poly: BoundaryPolygon) -> tuple[complex, float]:
    """(area centroid, boundary RMS radius about it)."""
    c = poly.centroid()
    return c, poly.rms_radius(c)


def normalized_polygon(poly: BoundaryPolygon, rms_radius: float = TARGET_RMS_RADIUS, rotation: float = 0.0):
    """Centroid at 0, boundary RMS radius ``rms_radius``, optionally rotated by ``rotation``."""
    c, r = polygon_pose(poly)
    scale = (rms_radius / r) * np.exp(1j * rotation)
    return poly.transformed(scale, -c * scale)


def normalize_pose(image: GrayImage):
    """Move the centroid to the grid center and scale the boundary RMS radius to 0.5.

    Returns ``(normalized image, SimilarityParams)``; the image is produced by
    ``pre_stn_transform`` with the returned parameters, rotation left at 0.
    """
    from .transforms import SimilarityParams, pre_stn_transform

    poly = trace_boundary(image)
    c, r = polygon_pose(poly)
    g = image.geometry
    row, col = g.to_pixel_float(c)
    dx = 2.0 * (float(col) + 0.5) / g.width - 1.0
    dy = 2.0 * (float(row) + 0.5) / g.height - 1.0
    params = SimilarityParams(dx, dy, r / TARGET_RMS_RADIUS, 0.0)
    return pre_stn_transform(image, params), params
