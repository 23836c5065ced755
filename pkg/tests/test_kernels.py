import os
import subprocess
import sys

import numpy as np
import pytest

from hbsig import _accel, kernels
from hbsig.harmonic import uniform_nodes
from hbsig.shape_ops import resample_boundary

from .corpora import star_polygon

pytestmark = pytest.mark.skipif(not _accel.NUMBA_AVAILABLE, reason="numba not installed")

NB, NP = kernels.NUMBA_KERNELS, kernels.NUMPY_KERNELS
rng = np.random.default_rng(0)


def both(name, *args):
    return NB[name](*args), NP[name](*args)


def test_kernel_tables_match():
    assert set(NB) == set(NP)
    chosen = NB if _accel.USE_NUMBA else NP
    for name, fn in chosen.items():
        assert getattr(kernels, name) is fn


@pytest.mark.parametrize("seed", [0, 7, 19])
def test_zipper_parity(seed):
    z = resample_boundary(star_polygon(seed), 400).vertices[::-1].copy()
    extras = np.array([0.0, 0.05 + 0.02j, 5.0 + 3.0j])
    a, b = both("zipper_forward", z, extras)
    # step parameters with b ~ 1e-15 carry rounding noise, so compare whole vectors
    for x, y in zip(a[:3], b[:3]):
        f = np.isfinite(y)
        assert np.array_equal(f, np.isfinite(x))
        assert np.abs(x[f] - y[f]).max() <= 1e-9 * np.abs(y[f]).max()
    assert np.isinf(a[3][0]) and np.isinf(b[3][0])
    assert np.allclose(a[3][1:], b[3][1:], rtol=1e-9, atol=0)
    assert np.allclose(a[4], b[4], rtol=1e-9, atol=0)
    assert a[5] == b[5]
    pts = 0.2 * (rng.normal(size=50) + 1j * rng.normal(size=50))
    ea, eb = both("zipper_eval", z[0], z[1], a[0], a[1], a[2], pts)
    assert np.allclose(ea, eb, rtol=1e-8, atol=1e-10)


def test_fourier_parity():
    p = (rng.normal(size=129) + 1j * rng.normal(size=129)) / np.arange(1, 130) ** 2
    q = (rng.normal(size=129) + 1j * rng.normal(size=129)) / np.arange(1, 130) ** 2
    pts = 0.99 * np.sqrt(rng.uniform(size=500)) * np.exp(2j * np.pi * rng.uniform(size=500))
    a, b = both("fourier_eval", p, q, pts)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-10, atol=1e-12)


def test_poisson_parity():
    t = uniform_nodes(256)
    F = np.exp(1j * (t + 0.3 * np.sin(t)))
    pts = 0.9 * np.sqrt(rng.uniform(size=300)) * np.exp(2j * np.pi * rng.uniform(size=300))
    a, b = both("poisson_sum", t, F, pts)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_bilinear_parity():
    vals = rng.normal(size=(40, 30))
    rows = rng.uniform(-3, 43, 2000)
    cols = rng.uniform(-3, 33, 2000)
    rows[:5] = [0, 39, 0, 39, 20]
    cols[:5] = [0, 0, 29, 29, 29.999]
    a, b = both("bilinear", vals, rows, cols)
    assert np.allclose(a, b, rtol=0, atol=1e-13)


def test_raster_parity():
    for seed in range(10):
        v = star_polygon(seed).vertices
        prow = 128 - 50 * v.imag - 0.5
        pcol = 128 + 50 * v.real - 0.5
        a, b = both("raster", prow, pcol, 256, 256)
        assert np.array_equal(a, b)
    # horizontal edges exactly on scanlines
    prow = np.array([10.0, 10.0, 30.0, 30.0])
    pcol = np.array([5.0, 25.0, 25.0, 5.0])
    a, b = both("raster", prow, pcol, 40, 40)
    assert np.array_equal(a, b) and a.sum() == 20 * 20


def test_env_switch():
    code = "from hbsig import _accel; print(_accel.backend_name())"
    for flag, want in (("0", "numpy"), ("off", "numpy"), ("1", "numba")):
        env = dict(os.environ, HBSIG_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == want
