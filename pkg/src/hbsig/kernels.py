"""Hot numeric kernels.

Each kernel exists twice: ``*_nb`` compiled with numba and ``*_np`` in
vectorised numpy.  The public names at the bottom of the module point at
one or the other depending on :data:`hbsig._accel.USE_NUMBA`.  Both
variants take and return the same arrays and must agree to rounding;
``tests/test_kernels.py`` checks that and ``benchmarks/bench_backends.py``
times them against each other.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# zipper: geodesic slit maps
#
# Vertices z[0..n-1] run counterclockwise (domain on the left).  The first
# map opens the segment z0 -> z1 onto the real line with z1 -> 0, z0 -> inf.
# Step k sends the current image a of z[k] to 0 through
#     z -> z / (1 - b z)            (geodesic 0..a becomes the segment 0..ic)
#     z -> z * sqrt(1 + (c / z)^2)  (= sqrt(z^2 + c^2), opens the slit)
#     z -> z / (1 - z / s)          (returns the image s of z0 to infinity)
# with b = Re a / |a|^2, c = |a|^2 / Im a and s = -sign(b) sqrt(1/b^2 + c^2).
# Keeping z0 at infinity stops the magnitudes from compounding when the
# last vertices crowd around it.  The final map z -> -z^2 unfolds the last
# edge onto the real line, sending the domain onto the upper half-plane.
# Zipped vertices keep only their domain-side copy, which is always real.


@njit
def _step_nb(p, b, c, s):
    pp = p / (1.0 - b * p)
    w = c / pp
    q = pp * cmath.sqrt(1.0 + w * w)
    if math.isinf(s):
        return q
    return q / (1.0 - q / s)


@njit
def _step_real_nb(x, b, c, s):
    den = 1.0 - b * x
    if den == 0.0:
        xp = math.inf if x > 0 else -math.inf
        r = math.inf
    else:
        xp = x / den
        r = math.sqrt(xp * xp + c * c)
    q = r if xp >= 0.0 else -r
    if math.isinf(s):
        return q
    if math.isinf(q):
        return -s
    return q / (1.0 - q / s)


@njit
def _zipper_forward_nb(z, extras):
    n = z.shape[0]
    m = extras.shape[0]
    nsteps = n - 2
    bs = np.zeros(nsteps)
    cs = np.zeros(nsteps)
    ss = np.zeros(nsteps)
    u = np.zeros(n, dtype=np.complex128)
    x = np.zeros(n)
    e = np.zeros(m, dtype=np.complex128)
    z0 = z[0]
    z1 = z[1]
    for j in range(2, n):
        u[j] = 1j * cmath.sqrt((z[j] - z1) / (z[j] - z0))
    for j in range(m):
        e[j] = 1j * cmath.sqrt((extras[j] - z1) / (extras[j] - z0))
    repairs = 0
    tiny = 1e-300
    for k in range(2, n):
        a = u[k]
        if not (a.imag > 0.0):
            repairs += 1
            a = complex(a.real, max(abs(a.imag), tiny))
        aa = a.real * a.real + a.imag * a.imag
        b = a.real / aa
        c = aa / a.imag
        if b == 0.0:
            s = math.inf
        else:
            s = math.sqrt(1.0 / (b * b) + c * c)
            if b > 0.0:
                s = -s
        bs[k - 2] = b
        cs[k - 2] = c
        ss[k - 2] = s
        for j in range(k + 1, n):
            u[j] = _step_nb(u[j], b, c, s)
        for j in range(m):
            e[j] = _step_nb(e[j], b, c, s)
        for j in range(1, k - 1):
            x[j] = _step_real_nb(x[j], b, c, s)
        x[k - 1] = -c if math.isinf(s) else -c / (1.0 + c / s)
        x[k] = 0.0
    out = np.zeros(n)
    out[0] = math.inf
    for j in range(1, n):
        out[j] = -x[j] * x[j]
    ext = np.zeros(m, dtype=np.complex128)
    for j in range(m):
        ext[j] = -e[j] * e[j]
    return bs, cs, ss, out, ext, repairs


@njit
def _zipper_eval_nb(z0, z1, bs, cs, ss, pts):
    m = pts.shape[0]
    out = np.empty(m, dtype=np.complex128)
    for j in range(m):
        p = 1j * cmath.sqrt((pts[j] - z1) / (pts[j] - z0))
        for k in range(bs.shape[0]):
            p = _step_nb(p, bs[k], cs[k], ss[k])
        out[j] = -p * p
    return out


def _step_np(p, b, c, s):
    pp = p / (1.0 - b * p)
    w = c / pp
    q = pp * np.sqrt(1.0 + w * w)
    if np.isinf(s):
        return q
    return q / (1.0 - q / s)


def _step_real_np(x, b, c, s):
    with np.errstate(divide="ignore", invalid="ignore"):
        den = 1.0 - b * x
        xp = np.where(den == 0.0, np.where(x > 0, np.inf, -np.inf), x / den)
        r = np.sqrt(xp * xp + c * c)
        q = np.where(xp >= 0.0, r, -r)
        if np.isinf(s):
            return q
        return np.where(np.isinf(q), -s, q / (1.0 - q / s))


def _zipper_forward_np(z, extras):
    z = np.asarray(z, dtype=np.complex128)
    extras = np.asarray(extras, dtype=np.complex128)
    n = z.shape[0]
    bs = np.zeros(n - 2)
    cs = np.zeros(n - 2)
    ss = np.zeros(n - 2)
    u = np.zeros(n, dtype=np.complex128)
    x = np.zeros(n)
    z0, z1 = z[0], z[1]
    u[2:] = 1j * np.sqrt((z[2:] - z1) / (z[2:] - z0))
    e = 1j * np.sqrt((extras - z1) / (extras - z0))
    repairs = 0
    for k in range(2, n):
        a = u[k]
        if not (a.imag > 0.0):
            repairs += 1
            a = complex(a.real, max(abs(a.imag), 1e-300))
        aa = a.real * a.real + a.imag * a.imag
        b = a.real / aa
        c = aa / a.imag
        s = np.inf if b == 0.0 else -np.sign(b) * np.sqrt(1.0 / (b * b) + c * c)
        bs[k - 2], cs[k - 2], ss[k - 2] = b, c, s
        u[k + 1 :] = _step_np(u[k + 1 :], b, c, s)
        e = _step_np(e, b, c, s)
        if k > 2:
            x[1 : k - 1] = _step_real_np(x[1 : k - 1], b, c, s)
        x[k - 1] = -c if np.isinf(s) else -c / (1.0 + c / s)
        x[k] = 0.0
    out = np.empty(n)
    out[0] = np.inf
    out[1:] = -x[1:] * x[1:]
    return bs, cs, ss, out, -e * e, repairs


def _zipper_eval_np(z0, z1, bs, cs, ss, pts):
    p = 1j * np.sqrt((pts - z1) / (pts - z0))
    for b, c, s in zip(bs, cs, ss):
        p = _step_np(p, b, c, s)
    return -p * p


# ---------------------------------------------------------------------------
# harmonic extension in Fourier form:  H(z) = P(z) + Q(conj z)
# P, Q are polynomials; returns H, dH/dz = P'(z), dH/dzbar = Q'(conj z).


@njit
def _fourier_eval_nb(p, q, pts):
    m = pts.shape[0]
    deg = p.shape[0] - 1
    H = np.empty(m, dtype=np.complex128)
    Hz = np.empty(m, dtype=np.complex128)
    Hzb = np.empty(m, dtype=np.complex128)
    for j in range(m):
        z = pts[j]
        w = z.conjugate()
        P = p[deg]
        dP = 0j
        Q = q[deg]
        dQ = 0j
        for k in range(deg - 1, -1, -1):
            dP = dP * z + P
            P = P * z + p[k]
            dQ = dQ * w + Q
            Q = Q * w + q[k]
        H[j] = P + Q
        Hz[j] = dP
        Hzb[j] = dQ
    return H, Hz, Hzb


def _fourier_eval_np(p, q, pts):
    z = np.asarray(pts, dtype=np.complex128)
    w = np.conj(z)
    deg = p.shape[0] - 1
    P = np.full(z.shape, p[deg], dtype=np.complex128)
    Q = np.full(z.shape, q[deg], dtype=np.complex128)
    dP = np.zeros_like(P)
    dQ = np.zeros_like(Q)
    for k in range(deg - 1, -1, -1):
        dP = dP * z + P
        P = P * z + p[k]
        dQ = dQ * w + Q
        Q = Q * w + q[k]
    return P + Q, dP, dQ


# ---------------------------------------------------------------------------
# Poisson kernel trapezoid sum:  (1/M) sum_m P_r(theta - t_m) F_m


@njit
def _poisson_sum_nb(t, F, pts):
    M = t.shape[0]
    out = np.empty(pts.shape[0], dtype=np.complex128)
    for j in range(pts.shape[0]):
        r = abs(pts[j])
        th = cmath.phase(pts[j])
        num = 1.0 - r * r
        s = 0j
        for m in range(M):
            s += F[m] * (num / (1.0 - 2.0 * r * math.cos(th - t[m]) + r * r))
        out[j] = s / M
    return out


def _poisson_sum_np(t, F, pts, chunk=1 << 20):
    pts = np.asarray(pts, dtype=np.complex128)
    out = np.empty(pts.shape[0], dtype=np.complex128)
    M = t.shape[0]
    step = max(1, chunk // M)
    for s in range(0, pts.shape[0], step):
        z = pts[s : s + step]
        r = np.abs(z)[:, None]
        th = np.angle(z)[:, None]
        kern = (1.0 - r * r) / (1.0 - 2.0 * r * np.cos(th - t[None, :]) + r * r)
        out[s : s + step] = kern @ F / M
    return out


# ---------------------------------------------------------------------------
# bilinear sampling with zero padding; (row, col) fractional, centers at integers


@njit
def _bilinear_nb(values, rows, cols):
    h, w = values.shape
    out = np.zeros(rows.shape[0])
    for j in range(rows.shape[0]):
        r = rows[j]
        c = cols[j]
        if not (r > -1.0 and r < h and c > -1.0 and c < w):
            continue
        r0 = int(math.floor(r))
        c0 = int(math.floor(c))
        fr = r - r0
        fc = c - c0
        acc = 0.0
        for dr in range(2):
            rr = r0 + dr
            if rr < 0 or rr >= h:
                continue
            wr = fr if dr == 1 else 1.0 - fr
            if wr == 0.0:
                continue
            for dc in range(2):
                cc = c0 + dc
                if cc < 0 or cc >= w:
                    continue
                wc = fc if dc == 1 else 1.0 - fc
                if wc == 0.0:
                    continue
                acc += wr * wc * values[rr, cc]
        out[j] = acc
    return out


def _bilinear_np(values, rows, cols):
    h, w = values.shape
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = rows - r0
    fc = cols - c0
    out = np.zeros(rows.shape[0])
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            rr = r0 + dr
            cc = c0 + dc
            ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w) & (wr * wc != 0.0)
            out[ok] += (wr * wc)[ok] * values[rr[ok], cc[ok]]
    return out


# ---------------------------------------------------------------------------
# even-odd scanline rasterisation; polygon given in fractional (row, col)


@njit
def _raster_nb(prow, pcol, height, width):
    n = prow.shape[0]
    out = np.zeros((height, width), dtype=np.bool_)
    xs = np.empty(n)
    for i in range(height):
        y = float(i)
        cnt = 0
        for k in range(n):
            r0 = prow[k]
            r1 = prow[(k + 1) % n]
            if (r0 <= y) != (r1 <= y):
                c0 = pcol[k]
                c1 = pcol[(k + 1) % n]
                xs[cnt] = c0 + (y - r0) * (c1 - c0) / (r1 - r0)
                cnt += 1
        if cnt == 0:
            continue
        cr = np.sort(xs[:cnt])
        for p in range(0, cnt - 1, 2):
            lo = int(math.floor(cr[p])) + 1
            hi = int(math.floor(cr[p + 1])) + 1
            if lo < 0:
                lo = 0
            if hi > width:
                hi = width
            for jj in range(lo, hi):
                out[i, jj] = True
    return out


def _raster_np(prow, pcol, height, width):
    out = np.zeros((height, width), dtype=bool)
    r0, r1 = prow, np.roll(prow, -1)
    c0, c1 = pcol, np.roll(pcol, -1)
    cols = np.arange(width)
    lo_row = max(int(np.floor(prow.min())), 0)
    hi_row = min(int(np.ceil(prow.max())) + 1, height)
    for i in range(lo_row, hi_row):
        y = float(i)
        hit = (r0 <= y) != (r1 <= y)
        if not hit.any():
            continue
        xs = c0[hit] + (y - r0[hit]) * (c1[hit] - c0[hit]) / (r1[hit] - r0[hit])
        xs.sort()
        # pixel j is inside when an odd number of crossings lie strictly left of it
        out[i] = np.searchsorted(xs, cols, side="left") % 2 == 1
    return out


if USE_NUMBA:
    zipper_forward = _zipper_forward_nb
    zipper_eval = _zipper_eval_nb
    fourier_eval = _fourier_eval_nb
    poisson_sum = _poisson_sum_nb
    bilinear = _bilinear_nb
    raster = _raster_nb
else:
    zipper_forward = _zipper_forward_np
    zipper_eval = _zipper_eval_np
    fourier_eval = _fourier_eval_np
    poisson_sum = _poisson_sum_np
    bilinear = _bilinear_np
    raster = _raster_np

NUMBA_KERNELS = {
    "zipper_forward": _zipper_forward_nb,
    "zipper_eval": _zipper_eval_nb,
    "fourier_eval": _fourier_eval_nb,
    "poisson_sum": _poisson_sum_nb,
    "bilinear": _bilinear_nb,
    "raster": _raster_nb,
}
NUMPY_KERNELS = {
    "zipper_forward": _zipper_forward_np,
    "zipper_eval": _zipper_eval_np,
    "fourier_eval": _fourier_eval_np,
    "poisson_sum": _poisson_sum_np,
    "bilinear": _bilinear_np,
    "raster": _raster_np,
}
