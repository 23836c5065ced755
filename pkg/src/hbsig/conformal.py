"""Conformal maps of polygonal Jordan domains onto the disk (geodesic zipper).

``zipper_interior`` builds Omega -> D, ``zipper_exterior`` builds the
complement map with infinity fixed, and ``extract_welding`` pairs their
boundary angles into the circle homeomorphism f = Phi1^-1 o Phi2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConvergenceError, NonMonotoneWelding, ZipperBreakdown
from .shape_ops import BoundaryPolygon

log = logging.getLogger(__name__)

UNIT_CIRCLE_TOL = 1e-6
TWO_PI = 2.0 * np.pi


def _mobius(m: np.ndarray, w):
    return (m[0, 0] * w + m[0, 1]) / (m[1, 0] * w + m[1, 1])


def disk_automorphism(a: complex, rotation: float = 0.0) -> np.ndarray:
    """Matrix of w -> e^{i rotation} (w - a) / (1 - conj(a) w)."""
    r = np.exp(1j * rotation)
    return np.array([[r, -r * a], [-np.conj(a), 1.0]], dtype=np.complex128)


@dataclass(frozen=True)
class ZipperMap:
    """Composition of geodesic slit maps followed by a Cayley map and a disk Möbius.

    ``boundary`` holds the images of ``vertices`` (same order), all on the
    unit circle.  For an exterior map, points are first inverted about
    ``inversion_center`` and the final disk value w is returned as 1/w.
    """

    vertices: np.ndarray = field(repr=False)
    z0: complex
    z1: complex
    b: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    cayley_point: complex
    post: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    inversion_center: complex | None = None
    repairs: int = 0

    @property
    def elementary_params(self) -> np.ndarray:
        return self.b + 1j * self.c

    @property
    def post_mobius(self) -> tuple[complex, float]:
        """(a, phi) with post map w -> e^{i phi} (w - a) / (1 - conj(a) w)."""
        m = self.post
        a = -m[0, 1] / m[0, 0]
        phi = float(np.angle(m[0, 0] / m[1, 1]))
        return complex(a), phi

    def _disk(self, zeta):
        F = kernels.zipper_eval(self.z0, self.z1, self.b, self.c, self.s, zeta)
        p = self.cayley_point
        w = (F - p) / (F - np.conj(p))
        return _mobius(self.post, w)

    def __call__(self, z):
        """Evaluate at points off the boundary curve."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        if self.inversion_center is None:
            return self._disk(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            zeta = np.where(np.isinf(z), 0.0, 1.0 / (z - self.inversion_center))
            return 1.0 / self._disk(zeta)

    def with_post(self, m: np.ndarray) -> "ZipperMap":
        """Post-compose a disk Möbius map given by its matrix."""
        if self.inversion_center is None:
            boundary = _mobius(m, self.boundary)
        else:
            boundary = 1.0 / _mobius(m, 1.0 / self.boundary)
        return replace(self, post=m @ self.post, boundary=boundary)


def _sweep(z_ccw: np.ndarray, interior_point: complex):
    bs, cs, ss, F, ext, repairs = kernels.zipper_forward(
        np.ascontiguousarray(z_ccw), np.array([interior_point], dtype=np.complex128)
    )
    if not (np.all(np.isfinite(bs)) and np.all(np.isfinite(cs)) and np.isfinite(ext[0])):
        raise ZipperBreakdown("non-finite value in the slit-map composition")
    if not ext[0].imag > 0:
        raise ZipperBreakdown("interior point did not land in the upper half-plane")
    inner = F[1:]
    if not (np.all(np.isfinite(inner)) and np.all(np.diff(inner) > 0)):
        raise ZipperBreakdown("boundary correspondence lost monotonicity (near-self-intersecting input?)")
    if repairs:
        log.debug("zipper reflected %d near-real slit tips", repairs)
    p = complex(ext[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(np.isinf(F), 1.0 + 0j, (F - p) / (F - np.conj(p)))
    return bs, cs, ss, p, w, int(repairs)


def _check_circle(w: np.ndarray, what: str) -> None:
    err = np.abs(np.abs(w) - 1.0).max()
    if not err < UNIT_CIRCLE_TOL:
        raise ZipperBreakdown(f"{what} boundary images leave the unit circle by {err:.2e}")


def zipper_interior(poly: BoundaryPolygon, interior_point: complex | None = None) -> ZipperMap:
    """Conformal map from the polygon's interior onto the unit disk.

    ``interior_point`` is sent to 0.  The default is the area centroid when
    it lies well inside, else the pole of inaccessibility.
    """
    if interior_point is None:
        interior_point = _safe_center(poly)
    z = poly.vertices[::-1].copy()  # counterclockwise: domain on the left
    bs, cs, ss, p, w, repairs = _sweep(z, complex(interior_point))
    boundary = w[::-1].copy()
    _check_circle(boundary, "interior")
    ident = np.eye(2, dtype=np.complex128)
    return ZipperMap(poly.vertices, z[0], z[1], bs, cs, ss, p, ident, boundary, None, repairs)


def contour_integral(values: np.ndarray, z: np.ndarray) -> complex:
    """Trapezoid rule for the closed contour integral of ``values`` dz along ``z``."""
    vn = np.roll(values, -1)
    return complex(np.sum(0.5 * (values + vn) * (np.roll(z, -1) - z)))


def arclength_weights(z: np.ndarray) -> np.ndarray:
    """Trapezoid weights for integrals against |dz| on the closed polygon ``z``."""
    seg = np.abs(np.roll(z, -1) - z)
    return 0.5 * (seg + np.roll(seg, 1))


def interior_residual(zmap: ZipperMap, poly: BoundaryPolygon) -> float:
    """|integral of Phi1^-1 |dz|| over the perimeter: the boundary mean of the images."""
    m = arclength_weights(poly.vertices)
    return float(abs(np.sum(m * zmap.boundary)) / m.sum())


def normalize_interior(
    zmap: ZipperMap,
    poly: BoundaryPolygon,
    tol: float = 1e-6,
    damping: float = 0.5,
    max_iter: int = 200,
) -> ZipperMap:
    """Post-compose a disk automorphism so the boundary images have zero arc-length mean.

    With arc-length weights m_k the condition reads sum m_k phi_a(w_k) = 0
    for phi_a(w) = (w - a)/(1 - conj(a) w).  Its linearisation at a = 0,
    F - a M + conj(a) S = 0 with F = sum m w, S = sum m w^2, M = sum m, is
    solved exactly and a ``damping`` fraction of the step applied.  The
    residual |F|/M is scale-free; the rotation part stays untouched.
    """
    m_w = arclength_weights(poly.vertices)
    M = m_w.sum()
    post = zmap.post.copy()
    w = zmap.boundary.copy()
    for it in range(max_iter + 1):
        F = complex(np.sum(m_w * w))
        if abs(F) / M < tol:
            break
        if it == max_iter:
            raise ConvergenceError(f"interior normalisation stalled at residual {abs(F) / M:.2e}")
        S = complex(np.sum(m_w * w * w))
        den = M * M - abs(S) ** 2
        if not den > 1e-14 * M * M:
            raise ConvergenceError("boundary measure is concentrated at a point")
        a = damping * (M * F + S * np.conj(F)) / den
        if abs(a) > 0.5:
            a *= 0.5 / abs(a)
        step = disk_automorphism(a)
        post = step @ post
        w = _mobius(step, w)
        w /= np.abs(w)
    out = replace(zmap, post=post, boundary=w)
    _check_circle(out.boundary, "normalised interior")
    return out


def _safe_center(poly: BoundaryPolygon) -> complex:
    c = poly.centroid()
    if bool(poly.contains(c)):
        # keep the center well away from the curve; the inversion magnifies anything close to c
        dist = np.abs(poly.vertices - c).min()
        p = poly.interior_point()
        pdist = np.abs(poly.vertices - p).min()
        if dist >= 0.5 * pdist:
            return c
        return p
    return poly.interior_point()


def zipper_exterior(poly: BoundaryPolygon, center: complex | None = None) -> ZipperMap:
    """Conformal map from the polygon's exterior onto |w| > 1 with infinity fixed.

    Built from an interior map of the inverted domain 1/(z - c); the
    derivative at infinity is made real and positive.
    """
    c = _safe_center(poly) if center is None else complex(center)
    inv = 1.0 / (poly.vertices - c)
    # clockwise input inverts to a counterclockwise curve around the image of the exterior
    bs, cs, ss, p, w, repairs = _sweep(inv.copy(), 0j)
    ident = np.eye(2, dtype=np.complex128)
    zmap = ZipperMap(poly.vertices, inv[0], inv[1], bs, cs, ss, p, ident, 1.0 / w, c, repairs)
    # psi = interior map of the inverted domain, psi(0) = 0; Phi2^-1(z) = 1/psi(1/(z-c)) ~ (z-c)/psi'(0)
    h = 1e-4 * np.abs(inv).min()
    probe = np.array([h, -h, 1j * h, -1j * h])
    vals = zmap._disk(probe)
    dpsi = (vals[0] - vals[1] - 1j * (vals[2] - vals[3])) / (4.0 * h)
    zmap = zmap.with_post(disk_automorphism(0.0, -float(np.angle(dpsi))))
    _check_circle(zmap.boundary, "exterior")
    return zmap


def exterior_derivative_phase(zmap: ZipperMap) -> float:
    """arg of the derivative of Phi2^-1 at infinity."""
    h = 1e-4 * np.abs(1.0 / (zmap.vertices - zmap.inversion_center)).min()
    probe = np.array([h, -h, 1j * h, -1j * h])
    vals = zmap._disk(probe)
    dpsi = (vals[0] - vals[1] - 1j * (vals[2] - vals[3])) / (4.0 * h)
    return float(-np.angle(dpsi))


@dataclass(frozen=True)
class WeldingMap:
    """Paired unwrapped boundary angles: e^{i beta_k} -> e^{i alpha_k}.

    Both sequences are strictly increasing and advance by exactly 2 pi
    over one cycle (the next cycle starts at beta_0 + 2 pi).
    """

    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if beta.shape != alpha.shape or beta.ndim != 1:
            raise ValueError("welding angle sequences must be 1-D of equal length")
        for name, s in (("exterior", beta), ("interior", alpha)):
            if not (np.all(np.diff(s) > 0) and s[-1] < s[0] + TWO_PI):
                raise NonMonotoneWelding(f"{name} angles are not strictly increasing over one cycle")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)

    @property
    def sample_count(self) -> int:
        return self.beta.size


def _unwrap_increasing(theta: np.ndarray) -> np.ndarray:
    steps = np.mod(np.diff(theta), TWO_PI)
    return theta[0] + np.concatenate([[0.0], np.cumsum(steps)])


def extract_welding(interior: ZipperMap, exterior: ZipperMap, poly: BoundaryPolygon) -> WeldingMap:
    """beta_k = arg Phi2^-1(z_k), alpha_k = arg Phi1^-1(z_k), traversed counterclockwise."""
    if interior.vertices.shape != poly.vertices.shape or exterior.vertices.shape != poly.vertices.shape:
        raise ValueError("maps were built on a different vertex set")
    alpha = np.angle(interior.boundary[::-1])
    beta = np.angle(exterior.boundary[::-1])
    alpha = _unwrap_increasing(alpha)
    beta = _unwrap_increasing(beta)
    shift = np.floor(beta[0] / TWO_PI) * TWO_PI
    return WeldingMap(beta - shift, alpha - np.floor(alpha[0] / TWO_PI) * TWO_PI)
