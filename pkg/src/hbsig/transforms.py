"""Deterministic spatial-transformer resampling and image softening.

Coordinates follow the usual grid-sampling convention: each axis of the
target grid is mapped to [-1, 1] with pixel centers at ``(2j + 1)/W - 1``
and the y axis pointing down the rows.  A 2x3 matrix maps *target*
coordinates to *source* coordinates; the source is sampled bilinearly
with zero padding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .field_core import ComplexField, GrayImage


@dataclass(frozen=True)
class SimilarityParams:
    """Translation (dx, dy) in normalised target units, scale k, rotation theta."""

    dx: float = 0.0
    dy: float = 0.0
    k: float = 1.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("scale k must be positive")

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[self.k * c, self.k * s, self.dx], [-self.k * s, self.k * c, self.dy]])

    def shift_pixels(self, width: int, height: int) -> tuple[float, float]:
        """(dx, dy) converted to pixels of a ``width x height`` grid."""
        return self.dx * width / 2.0, self.dy * height / 2.0


@dataclass(frozen=True)
class RotationParam:
    theta: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("rotation must be finite")


@dataclass(frozen=True)
class AffineParams:
    phi: tuple

    def __post_init__(self):
        phi = tuple(float(v) for v in np.asarray(self.phi, dtype=float).ravel())
        if len(phi) != 6 or not all(math.isfinite(v) for v in phi):
            raise ValueError("affine parameters must be six finite reals")
        object.__setattr__(self, "phi", phi)
        if self.phi[0] * self.phi[4] - self.phi[1] * self.phi[3] <= 0:
            warnings.warn("affine matrix has non-positive determinant", RuntimeWarning, stacklevel=3)

    @classmethod
    def identity(cls) -> "AffineParams":
        return cls((1.0, 0.0, 0.0, 0.0, 1.0, 0.0))

    def matrix(self) -> np.ndarray:
        return np.asarray(self.phi).reshape(2, 3)


def _as_matrix(params) -> np.ndarray:
    if isinstance(params, (AffineParams, SimilarityParams)):
        return params.matrix()
    m = np.asarray(params, dtype=float)
    return m.reshape(2, 3)


def _source_pixels(matrix: np.ndarray, height: int, width: int):
    xt = (2.0 * np.arange(width) + 1.0) / width - 1.0
    yt = (2.0 * np.arange(height) + 1.0) / height - 1.0
    X, Y = np.meshgrid(xt, yt)
    xs = matrix[0, 0] * X + matrix[0, 1] * Y + matrix[0, 2]
    ys = matrix[1, 0] * X + matrix[1, 1] * Y + matrix[1, 2]
    cols = ((xs + 1.0) * width - 1.0) / 2.0
    rows = ((ys + 1.0) * height - 1.0) / 2.0
    return rows.ravel(), cols.ravel()


def _sample_plane(plane: np.ndarray, rows, cols) -> np.ndarray:
    return kernels.bilinear(np.ascontiguousarray(plane, dtype=np.float64), rows, cols).reshape(plane.shape)


def affine_sample(src, params):
    """Resample a GrayImage or ComplexField through a 2x3 target-to-source matrix."""
    matrix = _as_matrix(params)
    g = src.geometry
    rows, cols = _source_pixels(matrix, g.height, g.width)
    if isinstance(src, ComplexField):
        re = _sample_plane(src.values.real, rows, cols)
        im = _sample_plane(src.values.imag, rows, cols)
        return ComplexField(g, re + 1j * im)
    out = _sample_plane(src.values, rows, cols)
    return GrayImage(g, np.clip(out, 0.0, 1.0))


def pre_stn_transform(image: GrayImage, p: SimilarityParams) -> GrayImage:
    return affine_sample(image, p.matrix())


def rotation_matrix(theta: float) -> np.ndarray:
    # a true rotation; with y pointing down this samples the source at e^{i theta} z
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s, 0.0], [-s, c, 0.0]])


def post_stn_rotate(fld: ComplexField, p, phase_correct: bool = True) -> ComplexField:
    """Rotate the domain of ``fld`` by theta about the grid center.

    The output at z is ``fld(e^{i theta} z)``, times ``e^{-2 i theta}`` when
    ``phase_correct`` is set.  That combination is how a Beltrami coefficient
    transforms when its circle map is pre-composed with a rotation.
    """
    theta = p.theta if isinstance(p, RotationParam) else float(p)
    if theta == 0.0:
        return fld
    out = affine_sample(fld, rotation_matrix(theta))
    if phase_correct:
        out = ComplexField(out.geometry, out.values * np.exp(-2j * theta))
    return out


# ---------------------------------------------------------------------------
# softening


@dataclass(frozen=True)
class SoftenParams:
    a: float = 0.1
    b: float = 0.1
    eps: float = 1e-3
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.a <= 0.2 and 0.0 <= self.b <= 0.2):
            raise ValueError("soften offsets a, b must lie in [0, 0.2]")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


def soften(image: GrayImage, p: SoftenParams) -> GrayImage:
    """Noisy near-binary copy of ``image`` whose 0.5-superlevel set is unchanged."""
    rng = np.random.default_rng(p.seed)
    noise = rng.normal(0.0, p.noise_sigma, size=image.values.shape) if p.noise_sigma > 0 else 0.0
    fg = image.foreground
    inside = np.maximum(1.0 - p.a + noise, 0.5)
    outside = np.minimum(p.b + noise, 0.5 - p.eps)
    out = np.clip(np.where(fg, inside, outside), 0.0, 1.0)
    return GrayImage(image.geometry, out)
