"""Independent reference values, frozen into tests/golden/oracles.json.

Nothing here imports hbsig: every value comes from brute force, dense
quadrature or closed-form geometry, so the tests compare the library
against numbers it had no hand in producing.

    python3 tests/oracles/build_goldens.py
"""

import json
import math
from pathlib import Path

import numpy as np

GOLDEN = Path(__file__).resolve().parent.parent / "golden" / "oracles.json"


def disk_inside_count(size=128, ppu=50.0):
    """Pixel centers strictly inside the unit circle, by a plain double loop."""
    c = size / 2.0
    n = 0
    for i in range(size):
        y = (c - (i + 0.5)) / ppu
        for j in range(size):
            x = (j + 0.5 - c) / ppu
            if x * x + y * y < 1.0:
                n += 1
    return n


def triangle_pixel_counts(size=256):
    """Pixel centers inside the triangle (10,10),(200,10),(10,200) given in pixel (x, y).

    Returns (strict, on_edge) counts from the three half-plane tests.
    """
    strict = edge = 0
    for r in range(size):
        y = r + 0.5
        for c in range(size):
            x = c + 0.5
            s = (x - 10.0, y - 10.0, 210.0 - x - y)
            if min(s) > 0:
                strict += 1
            elif min(s) == 0:
                edge += 1
    return strict, edge


def rectangle_contour_perimeter(w=100, h=60):
    """Length of the 0.5 level line of a w x h block of ones under linear interpolation.

    The level set runs half a pixel outside the outer pixel centers, i.e.
    along the pixel edges, except at the four corners where marching
    squares cuts the unit square corner by a diagonal of length sqrt(0.5).
    """
    return 2.0 * (w + h) - 4.0 * (1.0 - math.sqrt(0.5))


def fourier_map(coeffs, phases):
    m = np.arange(1, len(coeffs) + 1)
    c = np.asarray(coeffs, float)
    p = np.asarray(phases, float)

    def g(t):
        return t + np.sin(np.multiply.outer(t, m) + p) @ c

    return g


def poisson_dense(g, z, nodes=1 << 16):
    """Trapezoid rule with ``nodes`` points for the Poisson integral of e^{i g}."""
    t = 2 * np.pi * np.arange(nodes) / nodes
    f = np.exp(1j * g(t))
    out = []
    for zz in np.atleast_1d(z):
        r2 = abs(zz) ** 2
        ker = (1 - r2) / np.abs(np.exp(1j * t) - zz) ** 2
        out.append(np.mean(ker * f))
    return np.array(out)


def poisson_cases(seed=20240501, maps=5, points=100):
    """Five random monotone maps (min slope checked densely) with 100 interior points each."""
    rng = np.random.default_rng(seed)
    cases = []
    while len(cases) < maps:
        modes = int(rng.integers(1, 6))
        c = 0.4 * rng.normal(size=modes) / np.arange(1, modes + 1)
        p = rng.uniform(0, 2 * np.pi, modes)
        tt = np.linspace(0, 2 * np.pi, 20001)
        slope = 1 + np.cos(np.multiply.outer(tt, np.arange(1, modes + 1)) + p) @ (np.arange(1, modes + 1) * c)
        if slope.min() <= 0.05:
            continue
        r = 0.9 * np.sqrt(rng.uniform(size=points))
        z = r * np.exp(2j * np.pi * rng.uniform(size=points))
        vals = poisson_dense(fourier_map(c, p), z)
        cases.append(
            {
                "coeffs": c.tolist(),
                "phases": p.tolist(),
                "z": [[v.real, v.imag] for v in z],
                "values": [[v.real, v.imag] for v in vals],
            }
        )
    return cases


def main():
    strict, edge = triangle_pixel_counts()
    z0 = 0.6 * np.exp(1.1j)
    single = poisson_dense(fourier_map([0.3], [0.0]), z0)[0]
    data = {
        "disk_inside_count_128_ppu50": disk_inside_count(),
        "reference_disk_count": 7845,
        "triangle_strict_count": strict,
        "triangle_edge_count": edge,
        "rectangle_100x60_contour_perimeter": rectangle_contour_perimeter(),
        "disk80_circumference": 2 * math.pi * 80,
        "disk_shift_3px_hausdorff": 3 / 50,
        "poisson_single": {"z": [z0.real, z0.imag], "value": [single.real, single.imag]},
        "poisson_cases": poisson_cases(),
    }
    GOLDEN.parent.mkdir(parents=True, exist_ok=True)
    GOLDEN.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {GOLDEN}")
    print({k: v for k, v in data.items() if k != "poisson_cases"})


if __name__ == "__main__":
    main()
