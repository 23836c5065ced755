"""Synthetic training corpus: random polygons, welding-derived shapes and HBS labels."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import GenerationError, HbsError
from .field_core import GrayImage, image_geometry, write_field, write_image
from .harmonic import TWO_PI, CircleMapSamples, HbsConfig, HbsResult, compute_hbs, hbs_from_circle_map, uniform_nodes
from .reconstruct import shape_from_hbs
from .shape_ops import BoundaryPolygon, is_simple, rasterize, validate_shape
from .transforms import SimilarityParams, SoftenParams, pre_stn_transform, soften

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "dsv1"
EDGE_SUBDIVISIONS = 12
BORDER_PX = 4
MIN_SLOPE = 0.05


def entry_seed(base_seed: int, index: int, stream: str = "") -> int:
    """Per-entry 63-bit seed, independent of execution order."""
    digest = hashlib.sha256(f"{base_seed}:{index}:{stream}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# ---------------------------------------------------------------------------
# polygons


def _densify(z: np.ndarray, per_edge: int = EDGE_SUBDIVISIONS) -> np.ndarray:
    t = np.arange(per_edge) / per_edge
    nxt = np.roll(z, -1)
    return (z[:, None] + t[None, :] * (nxt - z)[:, None]).ravel()


def gen_polygon(
    seed: int,
    n: int,
    radius: float = 1.0,
    inner_ratio: float = 0.5,
    angle_jitter: float = 0.3,
    max_tries: int = 100,
) -> BoundaryPolygon:
    """Random star-shaped polygon about the image center, clockwise.

    Angles are stratified (one per sector of width 2 pi / n, jittered by
    ``angle_jitter`` sectors), radii uniform by area in the annulus
    [inner_ratio, 1] * radius.  Vertices are sorted clockwise about their
    centroid.  Draws whose raster is not a single simply connected region
    are redrawn from the same stream.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    rng = np.random.default_rng(seed)
    geo = image_geometry()
    for _ in range(max_tries):
        ang = (np.arange(n) + rng.uniform(-angle_jitter, angle_jitter, n)) * TWO_PI / n
        rad = radius * np.sqrt(rng.uniform(inner_ratio**2, 1.0, n))
        z = rad * np.exp(1j * ang)
        c = z.mean()
        z = z[np.argsort(-np.angle(z - c), kind="stable")]
        z = _densify(z)
        if not is_simple(z):
            continue
        poly = BoundaryPolygon.from_points(z)
        if validate_shape(rasterize(poly, geo)).ok:
            return poly
    raise GenerationError(f"no valid polygon for seed {seed} after {max_tries} draws")


# ---------------------------------------------------------------------------
# circle maps


@dataclass(frozen=True)
class FourierCircleMap:
    """g(t) = t + sum_m c_m sin(m t + phi_m)."""

    coeffs: tuple
    phases: tuple

    def _terms(self):
        m = np.arange(1, len(self.coeffs) + 1)
        return m, np.asarray(self.coeffs, dtype=float), np.asarray(self.phases, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        m, c, p = self._terms()
        return t + np.sin(np.multiply.outer(t, m) + p) @ c

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        m, c, p = self._terms()
        return 1.0 + np.cos(np.multiply.outer(t, m) + p) @ (m * c)

    def min_slope(self, samples: int = 4096) -> float:
        return float(self.derivative(uniform_nodes(samples)).min())

    def samples(self, M: int = 1024) -> CircleMapSamples:
        return CircleMapSamples.from_function(self, M)


def draw_circle_map(seed: int, modes: int, amplitude: float = 0.5) -> FourierCircleMap:
    """Random monotone Fourier circle map with min g' > 0.05 (coefficients shrunk by 0.9 until it holds)."""
    if modes < 1:
        raise ValueError("modes must be >= 1")
    rng = np.random.default_rng(seed)
    m = np.arange(1, modes + 1)
    c = amplitude * rng.normal(size=modes) / m
    p = rng.uniform(0, TWO_PI, modes)
    fmap = FourierCircleMap(tuple(c), tuple(p))
    while fmap.min_slope() <= MIN_SLOPE:
        c = 0.9 * c
        fmap = FourierCircleMap(tuple(c), tuple(p))
    return fmap


def gen_monotone_circle_map(seed: int, modes: int, M: int = 1024) -> CircleMapSamples:
    return draw_circle_map(seed, modes).samples(M)


def shape_from_welding(g: CircleMapSamples, config: HbsConfig | None = None) -> GrayImage:
    """Shape whose welding is g, through the harmonic extension and the Beltrami solver."""
    fld, _, _, _ = hbs_from_circle_map(g, config)
    return shape_from_hbs(fld)


# ---------------------------------------------------------------------------
# perturbation and augmentation


def grid_perturb(poly: BoundaryPolygon, magnitude: float, seed: int, max_tries: int = 20) -> BoundaryPolygon:
    """Smooth random displacement of the vertices, ``magnitude`` pixels std.

    Offsets on an 8x8 control grid spanning the image frame are Gaussian,
    truncated to 2 * magnitude in length, and interpolated bicubically;
    interpolated displacements are clipped to the same bound.  Redrawn up to
    ``max_tries`` times while the result self-intersects or its raster is
    not a single simply connected region.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be non-negative")
    if magnitude == 0:
        return poly
    geo = image_geometry()
    sigma = magnitude / geo.pixels_per_unit
    cap = 2.0 * sigma
    half = geo.width / (2.0 * geo.pixels_per_unit)
    knots = np.linspace(-half, half, 8)
    rng = np.random.default_rng(seed)
    z = poly.vertices
    for _ in range(max_tries):
        off = rng.normal(0.0, sigma, size=(8, 8, 2))
        norm = np.hypot(off[..., 0], off[..., 1])
        off *= np.minimum(1.0, cap / np.maximum(norm, 1e-300))[..., None]
        dx = RectBivariateSpline(knots, knots, off[..., 0], kx=3, ky=3).ev(z.real, z.imag)
        dy = RectBivariateSpline(knots, knots, off[..., 1], kx=3, ky=3).ev(z.real, z.imag)
        d = dx + 1j * dy
        d *= np.minimum(1.0, cap / np.maximum(np.abs(d), 1e-300))
        moved = z + d
        if not is_simple(moved):
            continue
        # no resampling: arc-length resampling would cut corners and break the bound
        out = BoundaryPolygon.from_points(moved)
        if validate_shape(rasterize(out, geo)).ok:
            return out
    raise GenerationError(f"grid_perturb: no simple, rasterizable draw after {max_tries} tries")


@dataclass(frozen=True)
class AugmentRanges:
    """Closed ranges for the pre-STN similarity parameters."""

    dx: tuple = (-0.2, 0.2)
    dy: tuple = (-0.2, 0.2)
    k: tuple = (0.8, 1.25)
    theta: tuple = (-math.pi, math.pi)

    def __post_init__(self):
        for name in ("dx", "dy", "k", "theta"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"bad range for {name}: {(lo, hi)}")
        if self.k[0] <= 0:
            raise ValueError("scale range must be positive")

    def draw(self, rng) -> SimilarityParams:
        return SimilarityParams(*(float(rng.uniform(*getattr(self, n))) for n in ("dx", "dy", "k", "theta")))


def _clear_of_border(image: GrayImage, border: int) -> bool:
    fg = image.foreground
    if not fg.any():
        return False
    rows, cols = np.nonzero(fg)
    h, w = fg.shape
    return rows.min() >= border and cols.min() >= border and rows.max() < h - border and cols.max() < w - border


def augment(image: GrayImage, ranges: AugmentRanges, seed: int, max_tries: int = 50) -> GrayImage:
    """Random similarity resample keeping the foreground at least 4 px from the border."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        out = pre_stn_transform(image, ranges.draw(rng))
        if _clear_of_border(out, BORDER_PX) and validate_shape(out).ok:
            return out
    raise GenerationError(f"augment: no admissible draw in {max_tries} tries")


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class GenConfig:
    method: str = "polygon"  # polygon, welding or mixed (alternating)
    count: int = 10
    seed: int = 0
    polygon_points: tuple = (5, 16)
    welding_modes: tuple = (1, 4)
    perturb_magnitude: float = 0.0
    augment: AugmentRanges | None = field(default_factory=AugmentRanges)
    soften: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.method not in ("polygon", "welding", "mixed"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.count <= 0:
            raise ValueError("count must be positive")
        if self.polygon_points[0] < 3 or self.polygon_points[0] > self.polygon_points[1]:
            raise ValueError("bad polygon_points range")
        if self.welding_modes[0] < 1 or self.welding_modes[0] > self.welding_modes[1]:
            raise ValueError("bad welding_modes range")
        if self.perturb_magnitude < 0:
            raise ValueError("perturb_magnitude must be non-negative")

    def method_for(self, index: int) -> str:
        if self.method == "mixed":
            return "polygon" if index % 2 == 0 else "welding"
        return self.method

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("workers")
        return d


@dataclass(frozen=True)
class DatasetManifest:
    path: Path
    entries: list

    def __len__(self):
        return len(self.entries)


def _make_shape(config: GenConfig, index: int, attempt: int):
    method = config.method_for(index)
    seed = entry_seed(config.seed, index, f"shape{attempt}")
    rng = np.random.default_rng(seed)
    params = {}
    if method == "polygon":
        n = int(rng.integers(config.polygon_points[0], config.polygon_points[1] + 1))
        params["n"] = n
        poly = gen_polygon(int(rng.integers(2**62)), n)
        if config.perturb_magnitude > 0:
            poly = grid_perturb(poly, config.perturb_magnitude, int(rng.integers(2**62)))
        image = rasterize(poly, image_geometry())
    else:
        modes = int(rng.integers(config.welding_modes[0], config.welding_modes[1] + 1))
        params["modes"] = modes
        image = shape_from_welding(gen_monotone_circle_map(int(rng.integers(2**62)), modes))
    if config.augment is not None:
        image = augment(image, config.augment, int(rng.integers(2**62)))
    if config.soften:
        image = soften(image, SoftenParams(seed=int(rng.integers(2**31))))
    return method, seed, params, image


def check_result(result: HbsResult, tol: float = 1e-6) -> None:
    """HbsResult gates: finite, |B| < 1 and the normalization residuals satisfied."""
    vals = result.hbs.masked()
    if not np.all(np.isfinite(vals)) or np.abs(vals).max() >= 1.0:
        raise GenerationError("HBS has non-finite values or |B| >= 1")
    c1, c2, _ = result.condition_residuals
    if c1 > tol:
        raise GenerationError(f"interior normalization residual {c1:.2e} > {tol:.0e}")
    if not result.degenerate and abs(c2) > tol:
        raise GenerationError(f"rotation residual {c2:.2e} > {tol:.0e}")


def _generate_entry(args):
    config, index, out_dir, max_attempts = args
    out_dir = Path(out_dir)
    last = None
    for attempt in range(max_attempts):
        try:
            method, seed, params, image = _make_shape(config, index, attempt)
            result = compute_hbs(image)
        except HbsError as exc:
            last = exc
            log.info("entry %d attempt %d failed: %s", index, attempt, exc)
            continue
        provenance = {"method": method, "seed": seed, "attempt": attempt, "params": params}
        try:
            check_result(result)
        except GenerationError as exc:
            raise GenerationError(f"entry {index} {json.dumps(provenance)}: {exc}") from exc
        stem = f"{index:06d}"
        write_image(image, out_dir / f"{stem}.png")
        write_field(result.hbs, out_dir / f"{stem}.hbs")
        return {
            "index": index,
            "image_path": f"{stem}.png",
            "hbs_path": f"{stem}.hbs",
            "provenance": provenance,
            "validation": validate_shape(image).to_dict(),
            "hbs_residuals": result.residuals_dict(),
        }
    raise GenerationError(f"entry {index}: no valid shape in {max_attempts} attempts ({last})")


def build_dataset(config: GenConfig, out_dir, max_attempts: int = 5, progress: Callable | None = None) -> DatasetManifest:
    """Generate ``config.count`` labelled shapes into ``out_dir`` with a JSON-lines manifest.

    Every entry draws from its own seed, so the manifest and files are the
    same for any worker count.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(config, i, str(out_dir), max_attempts) for i in range(config.count)]
    entries = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for e in pool.map(_generate_entry, jobs):
                entries.append(e)
                if progress:
                    progress(e)
    else:
        for job in jobs:
            e = _generate_entry(job)
            entries.append(e)
            if progress:
                progress(e)
    path = out_dir / "manifest.jsonl"
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": MANIFEST_FORMAT, "config": config.to_dict()}, sort_keys=True) + "\n")
        for e in entries:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    return DatasetManifest(path, entries)
