"""Harmonic extension of a circle map, its Beltrami coefficient, and the HBS pipeline.

The circle map is sampled as g(t_m) on M uniform nodes.  Its harmonic
extension is kept in Fourier form

    H(z) = sum_{k>=0} p_k z^k + sum_{k>=1} q_k conj(z)^k

with p, q read off the FFT of e^{i g(t_m)}; this is the trapezoid Poisson
integral with the aliased tail removed.  The Beltrami coefficient is
mu = H_zbar / H_z = Q'(conj z) / P'(z).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import kernels
from .conformal import (
    WeldingMap,
    extract_welding,
    interior_residual,
    normalize_interior,
    zipper_exterior,
    zipper_interior,
)
from .errors import DegenerateExtension, NonMonotoneWelding
from .field_core import ComplexField, GrayImage, GridGeometry, check_same_geometry, hbs_geometry
from .shape_ops import DEFAULT_BOUNDARY_POINTS, resample_boundary, trace_boundary
from .transforms import post_stn_rotate

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
DEFAULT_QUAD_NODES = 1024
MU_CLAMP = 0.999
DEGENERATE_INTEGRAL = 1e-9
# |integral of B| below this fraction of the integral of |B| leaves the rotation undefined
DEGENERATE_RATIO = 1e-3


@dataclass(frozen=True)
class CircleMapSamples:
    """g sampled on t_m = 2 pi m / M; the map is e^{it} -> e^{i g(t)}."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.array(self.values, dtype=np.float64).ravel()
        if g.size < 4:
            raise ValueError("need at least 4 samples")
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite circle-map samples")
        if not (np.all(np.diff(g) > 0) and g[-1] < g[0] + TWO_PI):
            raise NonMonotoneWelding("circle map samples are not strictly increasing over one cycle")
        g.setflags(write=False)
        object.__setattr__(self, "values", g)

    @classmethod
    def from_function(cls, func: Callable, M: int = DEFAULT_QUAD_NODES) -> "CircleMapSamples":
        return cls(func(uniform_nodes(M)))

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def angles(self) -> np.ndarray:
        return uniform_nodes(self.M)

    def boundary_values(self) -> np.ndarray:
        return np.exp(1j * self.values)


def uniform_nodes(M: int) -> np.ndarray:
    return TWO_PI * np.arange(M) / M


def uniformize_welding(w: WeldingMap, M: int = DEFAULT_QUAD_NODES) -> CircleMapSamples:
    """Monotone cubic (PCHIP) interpolation of alpha(beta) onto M uniform nodes."""
    beta, alpha = w.beta, w.alpha
    bx = np.concatenate([beta - TWO_PI, beta, beta + TWO_PI, [beta[0] + 2 * TWO_PI]])
    ax = np.concatenate([alpha - TWO_PI, alpha, alpha + TWO_PI, [alpha[0] + 2 * TWO_PI]])
    interp = PchipInterpolator(bx, ax, extrapolate=False)
    t = uniform_nodes(M)
    # shift nodes into the window covered by the extended samples
    g = interp(np.where(t < beta[0], t + TWO_PI, t))
    g = np.where(t < beta[0], g - TWO_PI, g)
    return CircleMapSamples(g)


def _fourier_halves(F: np.ndarray, degree: int | None = None):
    """Split e^{ig} samples into analytic (p) and anti-analytic (q) coefficient vectors."""
    M = F.size
    c = np.fft.fft(F) / M
    half = M // 2
    p = np.zeros(half + 1, dtype=np.complex128)
    q = np.zeros(half + 1, dtype=np.complex128)
    p[: half + (M % 2)] = c[: half + (M % 2)]
    q[1 : half + 1] = c[::-1][: half]
    if M % 2 == 0:
        # Nyquist mode cos(M t / 2) splits evenly between z^{M/2} and conj(z)^{M/2}
        p[half] = 0.5 * c[half]
        q[half] = 0.5 * c[half]
    if degree is not None:
        p, q = p[: degree + 1], q[: degree + 1]
    return p, q


@dataclass(frozen=True)
class HarmonicExtension:
    """H(z) = P(z) + Q(conj z) built from a sampled circle map."""

    p: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)

    @classmethod
    def from_samples(cls, g: CircleMapSamples, trim: float = 1e-13) -> "HarmonicExtension":
        """Coefficients of the sampled map; trailing modes whose derivative weight
        k |c_k| is below ``trim`` times the largest are dropped."""
        p, q = _fourier_halves(g.boundary_values())
        if trim > 0:
            k = np.arange(p.size)
            weight = k * np.maximum(np.abs(p), np.abs(q))
            keep = np.nonzero(weight > trim * weight.max())[0]
            deg = max(int(keep[-1]) if keep.size else 1, 1)
            p, q = p[: deg + 1].copy(), q[: deg + 1].copy()
        return cls(p, q)

    def evaluate(self, z):
        """(H, H_z, H_zbar) at the points ``z``."""
        z = np.ascontiguousarray(np.asarray(z, dtype=np.complex128).ravel())
        return kernels.fourier_eval(self.p, self.q, z)

    def __call__(self, z):
        return self.evaluate(z)[0]

    def rotated(self, theta: float) -> "HarmonicExtension":
        """Extension of the pre-rotated map, z -> H(e^{i theta} z)."""
        k = np.arange(self.p.size)
        return HarmonicExtension(self.p * np.exp(1j * k * theta), self.q * np.exp(-1j * k * theta))


def poisson_extend(g: CircleMapSamples, z, min_terms: float = 80.0):
    """Poisson integral of e^{i g} at interior points by the periodic trapezoid rule.

    The trapezoid rule on M nodes resolves the kernel only while r^M is
    negligible.  Closer to the circle the samples are first refined by
    zero-padded FFT (exact for the band-limited interpolant), so the sum is
    taken on M' >= ``min_terms`` / (-ln r_max) nodes.
    """
    z_in = np.asarray(z, dtype=np.complex128)
    pts = np.ascontiguousarray(z_in.ravel())
    r = np.abs(pts)
    if pts.size and not r.max() < 1.0:
        raise ValueError("poisson_extend needs |z| < 1")
    F = g.boundary_values()
    M = F.size
    rmax = float(r.max()) if pts.size else 0.0
    need = min_terms / -math.log(rmax) if rmax > 0 else 1.0
    Mp = M
    while Mp < need and Mp < (1 << 22):
        Mp *= 2
    if Mp > M:
        c = np.fft.fft(F)
        pad = np.zeros(Mp, dtype=np.complex128)
        half = M // 2
        pad[:half] = c[:half]
        pad[-half:] = c[-half:]
        if M % 2 == 0:
            pad[half] = 0.5 * c[half]
            pad[-half] = 0.5 * c[half]
        F = np.fft.ifft(pad) * (Mp / M)
    out = kernels.poisson_sum(uniform_nodes(F.size), np.ascontiguousarray(F), pts)
    return out.reshape(z_in.shape) if z_in.shape else complex(out[0])


# ---------------------------------------------------------------------------
# Beltrami coefficient on the grid

_STENCIL_MARGIN = 1e-6


def _stencil_derivatives(func, z: np.ndarray, h: float):
    """Wirtinger derivatives by finite differences, staying inside |z| < 1.

    Central differences where both neighbours along an axis are inside;
    otherwise the second-order one-sided formula pointing toward the center,
    or the first-order one if even that leaves the disk.
    """
    lim = 1.0 - _STENCIL_MARGIN
    H0 = func(z)
    derivs = []
    for step in (h, 1j * h):
        coord = z.real if step == h else z.imag
        plus, minus = z + step, z - step
        central = (np.abs(plus) < lim) & (np.abs(minus) < lim)
        d = np.empty_like(z)
        d[central] = (func(plus[central]) - func(minus[central])) / (2 * h)
        rest = ~central
        if rest.any():
            sgn = np.where(coord[rest] > 0, -1.0, 1.0)
            zr = z[rest]
            z1 = zr + sgn * step
            z2 = zr + 2 * sgn * step
            two = np.abs(z2) < lim
            d_rest = np.empty(zr.shape, dtype=np.complex128)
            f0, f1 = H0[rest], func(z1)
            second = two.copy()
            if second.any():
                f2 = func(z2[second])
                d_rest[second] = sgn[second] * (-3 * f0[second] + 4 * f1[second] - f2) / (2 * h)
            first = ~second
            d_rest[first] = sgn[first] * (f1[first] - f0[first]) / h
            d[rest] = d_rest
        derivs.append(d)
    Hx, Hy = derivs
    return 0.5 * (Hx - 1j * Hy), 0.5 * (Hx + 1j * Hy)


class BeltramiGrid(NamedTuple):
    field: ComplexField
    clamped: int


def _mu_from_derivatives(Hz, Hzb, clamp: float):
    if np.any(np.abs(Hz) < 1e-12):
        raise DegenerateExtension("|H_z| vanishes at a masked pixel")
    mu = Hzb / Hz
    mag = np.abs(mu)
    over = mag > clamp
    n = int(over.sum())
    if n:
        mu[over] *= clamp / mag[over]
    return mu, n


def beltrami_from_function(
    func: Callable,
    geometry: GridGeometry | None = None,
    clamp: float = MU_CLAMP,
) -> BeltramiGrid:
    """mu of an arbitrary map ``func`` (vectorised on complex arrays) by the grid stencil."""
    geometry = geometry or hbs_geometry()
    mask = ComplexField.zeros(geometry).disk_mask
    z = geometry.coordinates()[mask]
    Hz, Hzb = _stencil_derivatives(func, z, geometry.pixel_size)
    mu, n = _mu_from_derivatives(Hz, Hzb, clamp)
    values = np.zeros(geometry.shape, dtype=np.complex128)
    values[mask] = mu
    return BeltramiGrid(ComplexField(geometry, values), n)


def _beltrami_extension(ext: HarmonicExtension, geometry: GridGeometry, method: str, clamp: float) -> BeltramiGrid:
    mask = ComplexField.zeros(geometry).disk_mask
    z = geometry.coordinates()[mask]
    if method == "spectral":
        _, Hz, Hzb = ext.evaluate(z)
    elif method == "stencil":
        Hz, Hzb = _stencil_derivatives(ext, z, geometry.pixel_size)
    else:
        raise ValueError(f"unknown derivative method {method!r}")
    mu, n = _mu_from_derivatives(Hz, Hzb, clamp)
    if n:
        log.debug("clamped |mu| at %d pixels", n)
    values = np.zeros(geometry.shape, dtype=np.complex128)
    values[mask] = mu
    return BeltramiGrid(ComplexField(geometry, values), n)


def beltrami_on_grid(
    g: CircleMapSamples,
    geometry: GridGeometry | None = None,
    method: str = "spectral",
    clamp: float = MU_CLAMP,
) -> ComplexField:
    """Beltrami coefficient of the harmonic extension of g at the masked pixel centers.

    ``method="spectral"`` differentiates the Fourier form exactly;
    ``method="stencil"`` uses finite differences with spacing 1/pixels_per_unit.
    """
    geometry = geometry or hbs_geometry()
    return _beltrami_extension(HarmonicExtension.from_samples(g), geometry, method, clamp).field


# ---------------------------------------------------------------------------
# rotation normalization


def field_integrals(fld: ComplexField) -> tuple[complex, complex]:
    """(integral of B, integral of B/z) over the disk, as masked sums times pixel area."""
    mask = fld.disk_mask
    z = fld.geometry.coordinates()[mask]
    b = fld.values[mask]
    area = fld.geometry.pixel_area
    return complex(b.sum() * area), complex((b / z).sum() * area)


def rotation_angle(fld: ComplexField) -> tuple[float, bool]:
    """theta with arg of the rotated integral 0 and arg of the rotated B/z integral in [0, pi)."""
    I0, I1 = field_integrals(fld)
    total = float(np.abs(fld.values[fld.disk_mask]).sum()) * fld.geometry.pixel_area
    if abs(I0) < max(DEGENERATE_INTEGRAL, DEGENERATE_RATIO * total):
        return 0.0, True
    theta = 0.5 * math.atan2(I0.imag, I0.real)
    if _condition3_angle(I1, theta) >= math.pi:
        theta += math.pi
    return _wrap(theta), False


def _condition3_angle(I1: complex, theta: float) -> float:
    return float(np.mod(np.angle(I1 * np.exp(-1j * theta)), TWO_PI))


def _wrap(theta: float) -> float:
    return float((theta + math.pi) % TWO_PI - math.pi)


class NormalizedField(NamedTuple):
    field: ComplexField
    theta: float
    degenerate: bool


def normalize_rotation(fld: ComplexField, max_iter: int = 8, tol: float = 1e-12) -> NormalizedField:
    """Rotate B -> B(e^{i theta} z) e^{-2 i theta} so the integral conditions hold.

    The domain rotation is a bilinear resample, so the pixel integrals of
    the result are re-measured and theta refined until the correction falls
    below ``tol``; every iterate resamples the input once.
    """
    theta, degenerate = rotation_angle(fld)
    if degenerate:
        return NormalizedField(fld, 0.0, True)
    if abs(theta) < tol:
        return NormalizedField(fld, 0.0, False)
    out = post_stn_rotate(fld, theta)
    for _ in range(max_iter):
        dt, degenerate = rotation_angle(out)
        if degenerate or abs(dt) < tol:
            break
        theta = _wrap(theta + dt)
        out = post_stn_rotate(fld, theta)
    return NormalizedField(out, theta, False)


# ---------------------------------------------------------------------------
# distances


def hbs_distance(a: ComplexField, b: ComplexField) -> float:
    """Mean squared modulus of a - b over the disk mask."""
    check_same_geometry(a, b)
    mask = a.disk_mask
    d = a.values[mask] - b.values[mask]
    return float(np.mean(d.real**2 + d.imag**2))


class Alignment(NamedTuple):
    field: ComplexField
    theta: float
    distance: float


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def align_rotation(
    b: ComplexField,
    reference: ComplexField,
    phase_correct: bool = True,
    grid: int = 360,
    tol: float = 1e-4,
) -> Alignment:
    """Rotation theta minimising hbs_distance(post_stn_rotate(b, theta), reference).

    A ``grid``-point scan over the circle is refined by golden-section search
    in the bracketing cell down to ``tol`` radians.
    """
    check_same_geometry(b, reference)

    def cost(theta: float) -> float:
        if theta == 0.0:
            return hbs_distance(b, reference)
        return hbs_distance(post_stn_rotate(b, theta, phase_correct), reference)

    thetas = TWO_PI * np.arange(grid) / grid
    thetas = np.where(thetas > math.pi, thetas - TWO_PI, thetas)
    costs = np.array([cost(float(t)) for t in thetas])
    k = int(np.argmin(costs))
    best_t, best_c = float(thetas[k]), float(costs[k])
    step = TWO_PI / grid
    lo, hi = best_t - step, best_t + step
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = cost(x1), cost(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = cost(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = cost(x2)
    cand, cand_c = (x1, f1) if f1 <= f2 else (x2, f2)
    if cand_c < best_c:
        best_t, best_c = cand, cand_c
    best_t = _wrap(best_t)
    out = b if best_t == 0.0 else post_stn_rotate(b, best_t, phase_correct)
    return Alignment(out, best_t, best_c)


# ---------------------------------------------------------------------------
# end-to-end pipeline


@dataclass(frozen=True)
class HbsConfig:
    boundary_points: int = DEFAULT_BOUNDARY_POINTS
    quad_nodes: int = DEFAULT_QUAD_NODES
    # Gaussian pre-smoothing of the mask, as a fraction of the boundary RMS radius
    smoothing: float = 0.12
    geometry: GridGeometry = field(default_factory=hbs_geometry)
    derivative: str = "spectral"
    clamp: float = MU_CLAMP
    rotation_iters: int = 8
    condition_tol: float = 1e-6

    def __post_init__(self):
        if self.boundary_points < 8:
            raise ValueError("boundary_points must be >= 8")
        if self.quad_nodes < 16:
            raise ValueError("quad_nodes must be >= 16")
        if self.smoothing < 0:
            raise ValueError("smoothing must be non-negative")
        if self.derivative not in ("spectral", "stencil"):
            raise ValueError("derivative must be 'spectral' or 'stencil'")


@dataclass(frozen=True)
class HbsResult:
    hbs: ComplexField
    rotation_applied: float
    condition_residuals: tuple[float, float, float]
    timing: dict = field(default_factory=dict)
    clamped: int = 0
    degenerate: bool = False
    circle_map: CircleMapSamples | None = field(default=None, repr=False)

    def residuals_dict(self) -> dict:
        c1, c2, c3 = self.condition_residuals
        return {"interior_integral": c1, "arg_integral_B": c2, "arg_integral_B_over_z": c3}


def condition_residuals(fld: ComplexField) -> tuple[float, float]:
    """(arg of the B integral, arg of the B/z integral in [0, 2 pi))."""
    I0, I1 = field_integrals(fld)
    return float(np.angle(I0)), float(np.mod(np.angle(I1), TWO_PI))


def hbs_from_circle_map(g: CircleMapSamples, config: HbsConfig | None = None):
    """Beltrami field of g's harmonic extension, rotation-normalized by exact re-evaluation.

    Returns ``(field, theta, clamped, degenerate)``; the field equals the
    Beltrami coefficient of z -> H(e^{i theta} z).
    """
    config = config or HbsConfig()
    ext = HarmonicExtension.from_samples(g)
    geo = config.geometry
    res = _beltrami_extension(ext, geo, config.derivative, config.clamp)
    theta, degenerate = rotation_angle(res.field)
    if degenerate:
        return res.field, 0.0, res.clamped, True
    total = 0.0
    for _ in range(config.rotation_iters):
        if abs(theta) < 1e-12:
            break
        total = _wrap(total + theta)
        res = _beltrami_extension(ext.rotated(total), geo, config.derivative, config.clamp)
        theta, degenerate = rotation_angle(res.field)
        if degenerate:
            break
    return res.field, total, res.clamped, degenerate


def smoothed_boundary(image: GrayImage, smoothing: float = 0.12):
    """Traced boundary after blurring the mask by ``smoothing`` times its RMS radius.

    Tying the blur width to the shape's own size keeps the corner rounding
    similarity-invariant, so scaled copies are smoothed alike.
    """
    raw = trace_boundary(image)
    if smoothing <= 0:
        return raw
    sigma_px = smoothing * raw.rms_radius() * image.geometry.pixels_per_unit
    return trace_boundary(image, sigma_px)


def compute_hbs(image: GrayImage, config: HbsConfig | None = None) -> HbsResult:
    """Harmonic Beltrami signature of the thresholded shape in ``image``."""
    config = config or HbsConfig()
    timing = {}
    t0 = time.perf_counter()

    def lap(name):
        nonlocal t0
        t = time.perf_counter()
        timing[name] = (t - t0) * 1e3
        t0 = t

    poly = resample_boundary(smoothed_boundary(image, config.smoothing), config.boundary_points)
    lap("boundary")
    interior = normalize_interior(zipper_interior(poly), poly, tol=config.condition_tol)
    exterior = zipper_exterior(poly)
    lap("zipper")
    welding = extract_welding(interior, exterior, poly)
    g = uniformize_welding(welding, config.quad_nodes)
    lap("welding")
    hbs, theta, clamped, degenerate = hbs_from_circle_map(g, config)
    lap("beltrami")
    c1 = interior_residual(interior, poly)
    c2, c3 = condition_residuals(hbs)
    timing["total"] = sum(timing.values())
    return HbsResult(hbs, theta, (c1, c2, c3), timing, clamped, degenerate, g)
