"""Command-line interface: ``hbsig compute|distance|reconstruct|generate|bench|render``.

Exit codes: 0 success, 1 some items failed, 2 usage error, 3 internal error.
"""

from __future__ import annotations

import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from ._accel import backend_name
from .errors import HbsError
from .field_core import read_field, read_image, write_field, write_image

REPORT_SCHEMA = "hbsig.report/1"
EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
IMAGE_SUFFIXES = (".png", ".pgm", ".pnm")


def _report(command: str, items: list, **extra) -> dict:
    rep = {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "backend": backend_name(),
        "command": command,
        "argv": sys.argv[1:],
        "ok": all(it["status"] == "ok" for it in items),
        "items": items,
    }
    rep.update(extra)
    return rep


def _emit(report: dict, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps(report, indent=2, sort_keys=True))
        return
    for it in report["items"]:
        line = f"{it['status']:5s} {it.get('input', '')}"
        if it["status"] != "ok":
            line += f"  {it['error']}: {it.get('message', '')}"
        elif it.get("output"):
            line += f" -> {it['output']}"
        click.echo(line)


def _error_item(item: dict, exc: Exception) -> dict:
    status = getattr(exc, "status", None)
    item.update(status="error", error=str(status) if status is not None else type(exc).__name__, message=str(exc))
    return item


def _exit_code(report: dict) -> int:
    return EXIT_OK if report["ok"] else EXIT_PARTIAL


@click.group()
@click.version_option(__version__, prog_name="hbsig")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def cli(verbose):
    """Harmonic Beltrami signatures of planar shapes."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# compute


def _compute_one(args) -> dict:
    from .harmonic import HbsConfig, compute_hbs

    path, out_dir, cfg = args
    item = {"input": str(path)}
    try:
        image = read_image(path)
        res = compute_hbs(image, HbsConfig(**cfg))
        out = Path(out_dir or Path(path).parent) / (Path(path).stem + ".hbs")
        write_field(res.hbs, out)
        mag = np.abs(res.hbs.masked())
        item.update(
            status="ok",
            output=str(out),
            timing_ms={k: round(v, 3) for k, v in res.timing.items()},
            residuals=res.residuals_dict(),
            rotation_applied=res.rotation_applied,
            clamped=res.clamped,
            degenerate=res.degenerate,
            mean_abs=float(mag.mean()),
            sup_abs=float(mag.max()),
        )
    except (HbsError, OSError, ValueError) as exc:
        _error_item(item, exc)
    return item


def _map(func, jobs, threads: int):
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, jobs))
    return [func(j) for j in jobs]


@cli.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory (default: beside each input).")
@click.option("--boundary-points", default=400, show_default=True, type=click.IntRange(min=8))
@click.option("--quad-nodes", default=1024, show_default=True, type=click.IntRange(min=16))
@click.option("--smoothing", default=0.12, show_default=True, type=click.FloatRange(min=0), help="Mask blur as a fraction of the shape's RMS radius.")
@click.option("--threads", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--json", "as_json", is_flag=True, help="Print a JSON report.")
def compute(inputs, out_dir, boundary_points, quad_nodes, smoothing, threads, as_json):
    """Compute the HBS of each input image, writing <stem>.hbs."""
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    cfg = {"boundary_points": boundary_points, "quad_nodes": quad_nodes, "smoothing": smoothing}
    items = _map(_compute_one, [(p, out_dir, cfg) for p in inputs], threads)
    report = _report("compute", items)
    _emit(report, as_json)
    sys.exit(_exit_code(report))


# ---------------------------------------------------------------------------
# distance


@cli.command()
@click.argument("a", type=click.Path(exists=True, dir_okay=False))
@click.argument("b", type=click.Path(exists=True, dir_okay=False))
@click.option("--align", is_flag=True, help="Also report the rotation-aligned distance.")
@click.option("--no-phase", is_flag=True, help="Rotate without the e^{-2i theta} phase factor.")
@click.option("--json", "as_json", is_flag=True)
def distance(a, b, align, no_phase, as_json):
    """Mean squared HBS difference over the disk."""
    from .harmonic import align_rotation, hbs_distance

    item = {"input": f"{a} {b}"}
    try:
        fa, fb = read_field(a), read_field(b)
        item.update(status="ok", distance=hbs_distance(fa, fb))
        if align:
            al = align_rotation(fb, fa, phase_correct=not no_phase)
            item.update(aligned_distance=al.distance, theta=al.theta)
    except (HbsError, OSError) as exc:
        _error_item(item, exc)
    report = _report("distance", [item])
    if as_json or item["status"] != "ok":
        _emit(report, as_json)
    else:
        click.echo(f"distance {item['distance']:.6e}")
        if align:
            click.echo(f"aligned  {item['aligned_distance']:.6e}  theta {item['theta']:.6f}")
    sys.exit(_exit_code(report))


# ---------------------------------------------------------------------------
# reconstruct


@cli.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--resolution", default=129, show_default=True, type=click.IntRange(min=3))
@click.option("--json", "as_json", is_flag=True)
def reconstruct(source, out_path, resolution, as_json):
    """Recover the shape encoded by an .hbs field as a 256x256 image."""
    from .reconstruct import reconstruct_boundary
    from .shape_ops import TARGET_RMS_RADIUS, normalized_polygon, rasterize

    item = {"input": source}
    try:
        t0 = time.perf_counter()
        rec = reconstruct_boundary(read_field(source), resolution)
        write_image(rasterize(normalized_polygon(rec.boundary, TARGET_RMS_RADIUS)), out_path)
        sol = rec.solution
        item.update(
            status="ok",
            output=out_path,
            flipped_triangle_count=sol.flipped_triangle_count,
            raw_flipped_count=sol.raw_flipped_count,
            damped_triangle_count=sol.damped_triangle_count,
            residual=sol.residual,
            timing_ms={"total": round((time.perf_counter() - t0) * 1e3, 3)},
        )
    except (HbsError, OSError) as exc:
        _error_item(item, exc)
    report = _report("reconstruct", [item])
    _emit(report, as_json)
    sys.exit(_exit_code(report))


# ---------------------------------------------------------------------------
# generate


@cli.command()
@click.option("--method", type=click.Choice(["polygon", "welding", "mixed"]), default="polygon", show_default=True)
@click.option("--count", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--soften/--no-soften", default=False, show_default=True)
@click.option("--perturb", default=0.0, show_default=True, type=click.FloatRange(min=0), help="Grid perturbation std in pixels.")
@click.option("--augment/--no-augment", default=True, show_default=True)
@click.option("--threads", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--json", "as_json", is_flag=True)
def generate(method, count, seed, out_dir, soften, perturb, augment, threads, as_json):
    """Build a labelled dataset with a manifest.jsonl."""
    from .datagen import AugmentRanges, GenConfig, build_dataset

    config = GenConfig(
        method=method,
        count=count,
        seed=seed,
        perturb_magnitude=perturb,
        augment=AugmentRanges() if augment else None,
        soften=soften,
        workers=threads,
    )
    t0 = time.perf_counter()
    manifest = build_dataset(config, out_dir)
    elapsed = time.perf_counter() - t0
    methods = {}
    for e in manifest.entries:
        m = e["provenance"]["method"]
        methods[m] = methods.get(m, 0) + 1
    summary = {
        "manifest": str(manifest.path),
        "entries": len(manifest),
        "methods": methods,
        "retried": sum(1 for e in manifest.entries if e["provenance"]["attempt"] > 0),
        "seconds": round(elapsed, 3),
    }
    items = [{"input": e["image_path"], "status": "ok", "output": e["hbs_path"]} for e in manifest.entries]
    report = _report("generate", items, summary=summary)
    if as_json:
        _emit(report, True)
    else:
        click.echo(f"manifest {summary['manifest']}")
        click.echo(f"entries {summary['entries']} {methods} retried {summary['retried']} in {elapsed:.1f}s")
    sys.exit(_exit_code(report))


# ---------------------------------------------------------------------------
# bench

BASELINE_MS = 871.0


@cli.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--repeat", default=3, show_default=True, type=click.IntRange(min=1))
@click.option("--json", "as_json", is_flag=True)
def bench(corpus_dir, repeat, as_json):
    """Single-threaded compute_hbs latency over the images in CORPUS_DIR."""
    from .harmonic import compute_hbs

    paths = sorted(p for p in Path(corpus_dir).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise click.UsageError(f"no images in {corpus_dir}")
    images = [read_image(p) for p in paths]
    compute_hbs(images[0])  # warm-up, absorbs JIT compilation
    totals, stages, items = [], {}, []
    for p, img in zip(paths, images):
        runs = []
        item = {"input": str(p)}
        try:
            for _ in range(repeat):
                res = compute_hbs(img)
                runs.append(res.timing["total"])
                for k, v in res.timing.items():
                    stages.setdefault(k, []).append(v)
            item.update(status="ok", timing_ms={"median": statistics.median(runs), "min": min(runs), "max": max(runs)})
            totals.append(statistics.median(runs))
        except HbsError as exc:
            _error_item(item, exc)
        items.append(item)
    summary = {
        "images": len(paths),
        "repeat": repeat,
        "median_ms": statistics.median(totals) if totals else None,
        "p10_ms": float(np.percentile(totals, 10)) if totals else None,
        "p90_ms": float(np.percentile(totals, 90)) if totals else None,
        "stage_median_ms": {k: statistics.median(v) for k, v in stages.items()},
        "baseline_ms": BASELINE_MS,
    }
    report = _report("bench", items, summary=summary)
    if as_json:
        _emit(report, True)
    else:
        click.echo(f"backend {backend_name()}  images {len(paths)}  repeat {repeat}")
        if totals:
            click.echo(f"median {summary['median_ms']:.1f} ms  (p10 {summary['p10_ms']:.1f}, p90 {summary['p90_ms']:.1f})  baseline {BASELINE_MS:.0f} ms")
            for k, v in summary["stage_median_ms"].items():
                click.echo(f"  {k:9s} {v:8.1f} ms")
    sys.exit(_exit_code(report))


# ---------------------------------------------------------------------------
# render


def render_field(fld, scale: int = 4) -> np.ndarray:
    """RGB uint8 picture: hue = arg B, brightness = |B| clipped to 1, grey outside the disk."""
    from skimage.color import hsv2rgb

    v = fld.values
    hsv = np.stack([(np.angle(v) / (2 * np.pi)) % 1.0, np.ones(v.shape), np.clip(np.abs(v), 0.0, 1.0)], axis=-1)
    rgb = hsv2rgb(hsv)
    rgb[~fld.disk_mask] = 0.5
    img = np.rint(rgb * 255).astype(np.uint8)
    if scale > 1:
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    return img


@cli.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--scale", default=4, show_default=True, type=click.IntRange(min=1))
def render(source, out_path, scale):
    """Render an .hbs field as a colour PNG."""
    from PIL import Image

    item = {"input": source}
    try:
        Image.fromarray(render_field(read_field(source), scale), "RGB").save(out_path)
        item.update(status="ok", output=out_path)
    except (HbsError, OSError) as exc:
        _error_item(item, exc)
    report = _report("render", [item])
    _emit(report, False)
    sys.exit(_exit_code(report))


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="hbsig", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - top-level guard maps crashes to exit 3
        logging.getLogger("hbsig").error("internal error: %s", exc, exc_info=True)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
