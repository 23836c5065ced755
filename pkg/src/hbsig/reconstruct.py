"""Shape recovery from a Beltrami field with a linear Beltrami solver (LBS).

A map G with dG/dzbar = mu dG/dz is found as the pair of solutions of
div(A grad u) = div(A grad v) = 0 with the per-triangle coefficient matrix

    A = [[(rho-1)^2 + tau^2, -2 tau], [-2 tau, (1+rho)^2 + tau^2]] / (1 - |mu|^2)

for mu = rho + i tau, using P1 finite elements on a triangulated grid and
the identity as Dirichlet data on the outer boundary.  mu is the field
inside the unit disk and zero outside, so the image of the unit circle is
the recovered shape.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg, splu
from scipy.spatial import cKDTree

from . import kernels
from .errors import DegeneratePolygon, ReconstructionFlip, SolverError
from .field_core import ComplexField, GrayImage, GridGeometry, image_geometry
from .shape_ops import BoundaryPolygon, TARGET_RMS_RADIUS, normalized_polygon, rasterize

log = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 129
DEFAULT_HALF_WIDTH = 1.28
# identity boundary data is imposed this far out; the ring beyond the HBS
# square is meshed with geometrically growing spacing
DEFAULT_OUTER_EXTENT = 40.0
PAD_GROWTH = 1.15
REPAIR_RADIUS = 0.04
REPAIR_FACTOR = 0.9
MAX_REPAIRS = 30


@dataclass(frozen=True)
class TriMesh:
    """Tensor-grid triangulation; ``xs``/``ys`` are the grid lines, vertices row-major in y."""

    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    per_triangle_mu: np.ndarray = field(repr=False)

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def boundary_vertices(self) -> np.ndarray:
        nx, ny = self.xs.size, self.ys.size
        idx = np.arange(nx * ny).reshape(ny, nx)
        return np.unique(np.concatenate([idx[0], idx[-1], idx[:, 0], idx[:, -1]]))


class QcMapSolution(NamedTuple):
    mapped_vertices: np.ndarray
    flipped_triangle_count: int
    residual: float
    # folds before repair and number of triangles whose mu was damped
    raw_flipped_count: int = 0
    damped_triangle_count: int = 0


def _grid_lines(resolution: int, half_width: float, outer_extent: float | None) -> np.ndarray:
    core = np.linspace(-half_width, half_width, resolution)
    if outer_extent is None or outer_extent <= half_width:
        return core
    h = core[1] - core[0]
    pad, x = [], half_width
    while x < outer_extent:
        h *= PAD_GROWTH
        x = min(x + h, outer_extent)
        pad.append(x)
    pad = np.array(pad)
    return np.concatenate([-pad[::-1], core, pad])


def _cell_flip(i, j) -> np.ndarray:
    """Cells whose diagonal runs from (x1, y0) to (x0, y1), in a checkerboard."""
    return (np.asarray(i) + np.asarray(j)) % 2 == 1


def _triangulate(nx: int, ny: int) -> np.ndarray:
    idx = np.arange(nx * ny).reshape(ny, nx)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    J, I = np.meshgrid(np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
    flip = _cell_flip(I.ravel(), J.ravel())
    # counterclockwise with x to the right and y up
    first = np.where(flip[:, None], np.stack([v00, v10, v01], axis=1), np.stack([v00, v10, v11], axis=1))
    second = np.where(flip[:, None], np.stack([v10, v11, v01], axis=1), np.stack([v00, v11, v01], axis=1))
    return np.concatenate([first, second])


def sample_field(fld: ComplexField, z: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of ``fld`` at ``z`` using only pixels inside the disk mask.

    Weights of masked-out neighbours are dropped and the rest renormalised,
    so a constant field stays constant right up to the disk edge.
    """
    g = fld.geometry
    rows, cols = g.to_pixel_float(z)
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    cols = np.ascontiguousarray(cols, dtype=np.float64)
    mask = fld.disk_mask.astype(np.float64)
    wsum = kernels.bilinear(mask, rows, cols)
    re = kernels.bilinear(np.ascontiguousarray(fld.values.real), rows, cols)
    im = kernels.bilinear(np.ascontiguousarray(fld.values.imag), rows, cols)
    out = np.zeros(z.shape, dtype=np.complex128)
    ok = wsum > 1e-12
    out[ok] = (re[ok] + 1j * im[ok]) / wsum[ok]
    return out


def build_mesh(
    fld: ComplexField | None,
    resolution: int = DEFAULT_RESOLUTION,
    half_width: float = DEFAULT_HALF_WIDTH,
    outer_extent: float | None = DEFAULT_OUTER_EXTENT,
) -> TriMesh:
    """Two triangles per grid cell, mu sampled at triangle centroids (0 where |centroid| >= 1).

    The regular ``resolution``-line grid covers the square of half-width
    ``half_width``; with ``outer_extent`` set, graded cells continue out to
    that half-width so the identity boundary data sits far from the disk.
    """
    if resolution < 3:
        raise ValueError("resolution must be >= 3")
    xs = _grid_lines(resolution, half_width, outer_extent)
    ys = xs.copy()
    X, Y = np.meshgrid(xs, ys)
    vertices = (X + 1j * Y).ravel()
    tris = _triangulate(xs.size, ys.size)
    c = vertices[tris].mean(axis=1)
    mu = np.zeros(c.size, dtype=np.complex128)
    if fld is not None:
        inside = np.abs(c) < 1.0
        mu[inside] = sample_field(fld, c[inside])
        if np.any(np.abs(mu) >= 1.0):
            raise ValueError("field has |mu| >= 1 inside the disk")
    return TriMesh(xs, ys, vertices, tris, mu)


def _gradients(vertices: np.ndarray, tris: np.ndarray):
    p = vertices[tris]
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area2 = d1.real * d2.imag - d1.imag * d2.real
    # grad phi_i = rot90(opposite edge) / (2 area), stored as complex gx + i gy
    grad = 1j * e / area2[:, None]
    return grad, 0.5 * area2


def _coefficients(mu: np.ndarray):
    rho, tau = mu.real, mu.imag
    s = 1.0 / (1.0 - np.abs(mu) ** 2)
    a11 = ((rho - 1) ** 2 + tau**2) * s
    a12 = -2 * tau * s
    a22 = ((1 + rho) ** 2 + tau**2) * s
    return a11, a12, a22


def assemble(mesh: TriMesh) -> sparse.csr_matrix:
    grad, area = _gradients(mesh.vertices, mesh.triangles)
    if np.any(area <= 0):
        raise SolverError("mesh has degenerate or misoriented triangles")
    a11, a12, a22 = _coefficients(mesh.per_triangle_mu)
    gx, gy = grad.real, grad.imag
    rows, cols, vals = [], [], []
    for i in range(3):
        ax = a11 * gx[:, i] + a12 * gy[:, i]
        ay = a12 * gx[:, i] + a22 * gy[:, i]
        for j in range(3):
            rows.append(mesh.triangles[:, i])
            cols.append(mesh.triangles[:, j])
            vals.append(area * (ax * gx[:, j] + ay * gy[:, j]))
    n = mesh.vertices.size
    K = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return K.tocsr()


def _solve_once(mesh: TriMesh, mu: np.ndarray, gb: np.ndarray, bnd: np.ndarray, inner: np.ndarray):
    K = assemble(dataclasses.replace(mesh, per_triangle_mu=mu))
    K_ii = K[inner][:, inner].tocsc()
    K_ib = K[inner][:, bnd]
    rhs = -(K_ib @ np.column_stack([gb.real, gb.imag]))
    try:
        sol = splu(K_ii).solve(rhs)
    except RuntimeError as exc:
        log.warning("sparse LU failed (%s); falling back to conjugate gradients", exc)
        sol = np.empty_like(rhs)
        for c in range(2):
            x, info = cg(K_ii, rhs[:, c], rtol=1e-10, maxiter=20 * inner.size)
            if info != 0:
                raise SolverError(f"conjugate gradients did not converge (info={info})") from exc
            sol[:, c] = x
    res = K_ii @ sol - rhs
    residual = float(np.linalg.norm(res)) / max(float(np.linalg.norm(rhs)), 1e-300)
    mapped = mesh.vertices.copy()
    mapped[inner] = sol[:, 0] + 1j * sol[:, 1]
    mapped[bnd] = gb
    _, area = _gradients(mapped, mesh.triangles)
    return mapped, area, residual


def solve_lbs(
    mesh: TriMesh,
    boundary_values: np.ndarray | None = None,
    repair: bool = True,
    repair_radius: float = REPAIR_RADIUS,
    repair_factor: float = REPAIR_FACTOR,
    max_repairs: int = MAX_REPAIRS,
) -> QcMapSolution:
    """Piecewise-linear map with the mesh's per-triangle Beltrami coefficient.

    Dirichlet data defaults to the identity on the outer boundary.  The
    interior system is factorised with sparse LU, shared by both
    coordinates; conjugate gradients to 1e-10 is the fallback.

    Where |mu| jumps from near 1 to 0 at the disk edge the P1 scheme can fold
    a few triangles.  With ``repair`` set, mu is scaled by ``repair_factor``
    on triangles within ``repair_radius`` of each folded one and the system
    re-solved, until no folds remain or ``max_repairs`` rounds have run.
    """
    if np.any(np.abs(mesh.per_triangle_mu) >= 1.0):
        raise ValueError("|mu| must be < 1 on every triangle")
    n = mesh.vertices.size
    bnd = mesh.boundary_vertices()
    is_b = np.zeros(n, dtype=bool)
    is_b[bnd] = True
    inner = np.nonzero(~is_b)[0]
    if boundary_values is None:
        gb = mesh.vertices[bnd]
    else:
        gb = np.asarray(boundary_values, dtype=np.complex128).ravel()
        if gb.size != bnd.size or not np.all(np.isfinite(gb)):
            raise SolverError(f"boundary condition conflict: expected {bnd.size} finite values, got {gb.size}")

    mu = mesh.per_triangle_mu.copy()
    mapped, area, residual = _solve_once(mesh, mu, gb, bnd, inner)
    raw_flips = int(np.sum(area <= 0))
    damped = np.zeros(mu.size, dtype=bool)
    if repair and raw_flips:
        cen = mesh.centroids()
        tree = cKDTree(np.column_stack([cen.real, cen.imag]))
        for _ in range(max_repairs):
            bad = np.nonzero(area <= 0)[0]
            if bad.size == 0:
                break
            near = tree.query_ball_point(np.column_stack([cen[bad].real, cen[bad].imag]), repair_radius)
            near = np.unique(np.concatenate([np.asarray(v, dtype=np.int64) for v in near]))
            mu[near] *= repair_factor
            damped[near] = True
            mapped, area, residual = _solve_once(mesh, mu, gb, bnd, inner)
        log.debug("fold repair: %d raw folds, %d triangles damped", raw_flips, int(damped.sum()))
    if residual > 1e-8:
        raise SolverError(f"linear solve residual {residual:.2e} exceeds 1e-8")
    return QcMapSolution(mapped, int(np.sum(area <= 0)), residual, raw_flips, int(damped.sum()))


def recovered_mu(mesh: TriMesh, solution: QcMapSolution) -> np.ndarray:
    """Beltrami coefficient of the solved map on each triangle, f_zbar / f_z."""
    grad, _ = _gradients(mesh.vertices, mesh.triangles)
    w = solution.mapped_vertices[mesh.triangles]
    fx = np.sum(w * grad.real, axis=1)
    fy = np.sum(w * grad.imag, axis=1)
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    return fzb / fz


def evaluate_map(mesh: TriMesh, solution: QcMapSolution, z: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of the solved map at points inside the mesh."""
    z = np.asarray(z, dtype=np.complex128)
    xs, ys = mesh.xs, mesh.ys
    i = np.clip(np.searchsorted(xs, z.real, side="right") - 1, 0, xs.size - 2)
    j = np.clip(np.searchsorted(ys, z.imag, side="right") - 1, 0, ys.size - 2)
    nx = xs.size
    v00 = j * nx + i
    v10 = v00 + 1
    v01 = v00 + nx
    v11 = v01 + 1
    x0, x1, y0, y1 = xs[i], xs[i + 1], ys[j], ys[j + 1]
    s = (z.real - x0) / (x1 - x0)
    t = (z.imag - y0) / (y1 - y0)
    W = solution.mapped_vertices
    # diagonal (v00, v11): lower weights 1-s, s-t, t; upper 1-t, s, t-s
    main = np.where(
        s >= t,
        (1 - s) * W[v00] + (s - t) * W[v10] + t * W[v11],
        (1 - t) * W[v00] + s * W[v11] + (t - s) * W[v01],
    )
    # diagonal (v10, v01): first 1-s-t, s, t; second 1-t, s+t-1, 1-s
    anti = np.where(
        s + t <= 1,
        (1 - s - t) * W[v00] + s * W[v10] + t * W[v01],
        (1 - t) * W[v10] + (s + t - 1) * W[v11] + (1 - s) * W[v01],
    )
    return np.where(_cell_flip(i, j), anti, main)


class Reconstruction(NamedTuple):
    boundary: BoundaryPolygon
    solution: QcMapSolution
    mesh: TriMesh


def reconstruct_boundary(
    fld: ComplexField,
    resolution: int = DEFAULT_RESOLUTION,
    samples: int = 1024,
    outer_extent: float | None = DEFAULT_OUTER_EXTENT,
) -> Reconstruction:
    """Image of the unit circle under the solved map, as a clockwise polygon."""
    mesh = build_mesh(fld, resolution, outer_extent=outer_extent)
    sol = solve_lbs(mesh)
    t = -2 * np.pi * np.arange(samples) / samples
    w = evaluate_map(mesh, sol, np.exp(1j * t))
    try:
        poly = BoundaryPolygon.from_points(w)
    except DegeneratePolygon as exc:
        raise ReconstructionFlip(f"image of the unit circle is not a simple curve: {exc}") from exc
    if sol.flipped_triangle_count:
        log.warning("%d flipped triangles in the reconstruction", sol.flipped_triangle_count)
    return Reconstruction(poly, sol, mesh)


def shape_from_hbs(
    fld: ComplexField,
    geometry: GridGeometry | None = None,
    resolution: int = DEFAULT_RESOLUTION,
    rotation: float = 0.0,
    outer_extent: float | None = DEFAULT_OUTER_EXTENT,
) -> GrayImage:
    """Rasterised recovered shape: centroid at the grid center, boundary RMS radius 0.5.

    ``rotation`` turns the recovered boundary before rasterising.
    """
    geometry = geometry or image_geometry()
    rec = reconstruct_boundary(fld, resolution, outer_extent=outer_extent)
    poly = normalized_polygon(rec.boundary, TARGET_RMS_RADIUS, rotation)
    return rasterize(poly, geometry)
