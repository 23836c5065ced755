"""Compare the numba kernels with their pure-numpy twins.

Each backend runs in a fresh interpreter with HBSIG_NUMBA set, since the
switch is read at import time.  Usage:

    python3 benchmarks/bench_backends.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, statistics, sys, time
import numpy as np
from hbsig import kernels, backend_name
from hbsig.datagen import gen_polygon
from hbsig.field_core import image_geometry
from hbsig.harmonic import compute_hbs, HarmonicExtension, uniform_nodes
from hbsig.shape_ops import rasterize, resample_boundary

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
geo = image_geometry()
polys = [gen_polygon(s, 5 + s % 10) for s in range(8)]
images = [rasterize(p, geo) for p in polys]
zc = resample_boundary(polys[0], 400).vertices[::-1].copy()

pts = (np.sqrt(rng.uniform(0, 0.99, 8000)) * np.exp(2j * np.pi * rng.uniform(size=8000)))
p = rng.normal(size=513) + 1j * rng.normal(size=513)
p /= np.arange(1, 514) ** 2
q = p[::-1].copy()
t = uniform_nodes(1024)
F = np.exp(1j * (t + 0.3 * np.sin(t)))
vals = rng.normal(size=(256, 256))
rows = rng.uniform(-2, 258, 65536)
cols = rng.uniform(-2, 258, 65536)
prow = 128 + 60 * np.sin(np.linspace(0, 2 * np.pi, 400, endpoint=False))
pcol = 128 + 80 * np.cos(np.linspace(0, 2 * np.pi, 400, endpoint=False))

cases = {
    "zipper_forward": lambda: kernels.zipper_forward(zc, np.zeros(1, complex)),
    "fourier_eval": lambda: kernels.fourier_eval(p, q, pts),
    "poisson_sum": lambda: kernels.poisson_sum(t, F, pts[:2000]),
    "bilinear": lambda: kernels.bilinear(vals, rows, cols),
    "raster": lambda: kernels.raster(prow, pcol, 256, 256),
    "compute_hbs": lambda: [compute_hbs(im) for im in images],
}

out = {"backend": backend_name(), "ms": {}}
t0 = time.perf_counter()
for fn in cases.values():
    fn()
out["warmup_ms"] = (time.perf_counter() - t0) * 1e3
for name, fn in cases.items():
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append((time.perf_counter() - t0) * 1e3)
    ms = statistics.median(runs)
    out["ms"][name] = ms / len(images) if name == "compute_hbs" else ms
print(json.dumps(out))
"""


def run_backend(flag: str, repeat: int) -> dict:
    env = dict(os.environ, HBSIG_NUMBA=flag, OMP_NUM_THREADS="1", NUMBA_NUM_THREADS="1")
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", dest="json_path")
    args = ap.parse_args(argv)

    results = {flag: run_backend(flag, args.repeat) for flag in ("0", "1")}
    numpy_ms, numba_ms = results["0"]["ms"], results["1"]["ms"]
    print(f"{'kernel':16s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name in numpy_ms:
        a, b = numpy_ms[name], numba_ms[name]
        print(f"{name:16s} {a:10.2f} {b:10.2f} {a / b:8.2f}")
    print(f"(compute_hbs is per image; numba warm-up incl. JIT {results['1']['warmup_ms']:.0f} ms, backend reported: {results['1']['backend']})")
    if args.json_path:
        with open(args.json_path, "w") as fh:
            json.dump({"numpy": results["0"], "numba": results["1"]}, fh, indent=2)


if __name__ == "__main__":
    main()
