import json
from pathlib import Path

import numpy as np
import pytest

from hbsig.datagen import (
    AugmentRanges,
    FourierCircleMap,
    GenConfig,
    augment,
    build_dataset,
    draw_circle_map,
    entry_seed,
    gen_monotone_circle_map,
    gen_polygon,
    grid_perturb,
    shape_from_welding,
)
from hbsig.errors import GenerationError
from hbsig.field_core import read_field, read_image
from hbsig.harmonic import compute_hbs, hbs_distance, hbs_from_circle_map, uniform_nodes
from hbsig.losses import loss_hbs
from hbsig.shape_ops import curve_hausdorff, is_simple, rasterize, validate_shape

from .corpora import GEO, image

GOLDEN = Path(__file__).parent / "golden"


def _triangle():
    from hbsig.datagen import _densify
    from hbsig.shape_ops import BoundaryPolygon

    px = np.array([60.0, 210.0, 100.0])
    py = np.array([190.0, 170.0, 60.0])
    return BoundaryPolygon.from_points(_densify((px - 128) / 50 + 1j * (128 - py) / 50))


def test_entry_seed_stable():
    assert entry_seed(7, 3, "a") == entry_seed(7, 3, "a")
    assert len({entry_seed(7, i) for i in range(100)}) == 100
    assert entry_seed(7, 3, "a") != entry_seed(7, 3, "b")
    assert 0 <= entry_seed(1, 2) < 2**63


# polygons


def test_gen_polygon_triangle():
    p = gen_polygon(5, 3)
    assert len(p) == 36
    assert validate_shape(rasterize(p, GEO)).ok


def test_gen_polygon_deterministic():
    assert np.array_equal(gen_polygon(11, 9).vertices, gen_polygon(11, 9).vertices)
    assert not np.array_equal(gen_polygon(11, 9).vertices, gen_polygon(12, 9).vertices)


def test_gen_polygon_batch_valid():
    rng = np.random.default_rng(0)
    for seed in range(1000):
        p = gen_polygon(seed, int(rng.integers(3, 17)))
        assert is_simple(p.vertices)
        assert validate_shape(rasterize(p, GEO)).ok


def test_gen_polygon_rejects_small_n():
    with pytest.raises(ValueError):
        gen_polygon(0, 2)


# circle maps


def test_zero_coefficients_identity():
    g = FourierCircleMap((0.0, 0.0), (0.3, 1.0))
    t = uniform_nodes(64)
    assert np.array_equal(g(t), t)
    assert g.min_slope() == 1.0


def test_circle_map_slopes():
    for seed in range(50):
        fmap = draw_circle_map(seed, 1 + seed % 6)
        t = np.linspace(0, 2 * np.pi, 100_001)
        assert np.diff(fmap(t)).min() > 0
        assert fmap.min_slope(20_000) > 0.05
        assert fmap(2 * np.pi) - fmap(0.0) == pytest.approx(2 * np.pi)


def test_circle_map_deterministic():
    a = gen_monotone_circle_map(4, 3).values
    b = gen_monotone_circle_map(4, 3).values
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        draw_circle_map(0, 0)


def test_identity_welding_gives_disk():
    from hbsig.harmonic import CircleMapSamples

    from .corpora import disk_image

    im = shape_from_welding(CircleMapSamples.from_function(lambda t: t))
    from hbsig.shape_ops import hausdorff_distance

    assert hausdorff_distance(im, disk_image(25)) < 0.04


def test_sine_welding_consistency():
    from hbsig.harmonic import CircleMapSamples

    g = CircleMapSamples.from_function(lambda t: t + 0.3 * np.sin(t))
    im = shape_from_welding(g)
    assert validate_shape(im).ok
    prescribed = hbs_from_circle_map(g)[0]
    back = compute_hbs(im).hbs
    assert hbs_distance(back, prescribed) > 1e-6  # not a disk
    assert loss_hbs(back, prescribed) < 0.02


def test_welding_batch_golden():
    data = json.loads((GOLDEN / "welding.json").read_text())
    assert len(data["draws"]) == 100
    assert data["pass_rate"] >= 0.95
    failures = [r for r in data["draws"] if r.get("aligned", np.inf) >= 0.02]
    assert len(failures) == round((1 - data["pass_rate"]) * 100)
    # spot-check a few draws against the frozen values
    for row in data["draws"][:3]:
        g = draw_circle_map(row["seed"], row["modes"]).samples()
        back = compute_hbs(shape_from_welding(g)).hbs
        assert loss_hbs(back, hbs_from_circle_map(g)[0]) == pytest.approx(row["aligned"], rel=1e-6, abs=1e-12)


# perturbation


def test_grid_perturb_zero_is_identity():
    tri = _triangle()
    out = grid_perturb(tri, 0.0, 1)
    assert np.allclose(out.vertices, tri.vertices, atol=1e-15)


def test_grid_perturb_bound():
    tri = _triangle()
    for seed in range(10):
        out = grid_perturb(tri, 2.0, seed)
        assert is_simple(out.vertices)
        assert curve_hausdorff(out, tri) <= 4 / 50


def test_grid_perturb_deterministic_and_valid():
    tri = _triangle()
    a, b = grid_perturb(tri, 3.0, 9), grid_perturb(tri, 3.0, 9)
    assert np.array_equal(a.vertices, b.vertices)
    assert len(a) == len(tri)
    assert validate_shape(rasterize(a, GEO)).ok
    with pytest.raises(ValueError):
        grid_perturb(tri, -1.0, 0)


def test_grid_perturb_gives_up():
    with pytest.raises(GenerationError):
        grid_perturb(gen_polygon(3, 12), 200.0, 0, max_tries=2)


# augmentation


def test_augment_zero_ranges_identity():
    im = image(gen_polygon(2, 7))
    ranges = AugmentRanges((0, 0), (0, 0), (1, 1), (0, 0))
    assert np.array_equal(augment(im, ranges, 0).values, im.values)


def test_augment_invariance_and_border():
    for seed in range(3):
        im = image(gen_polygon(20 + seed, 8))
        out = augment(im, AugmentRanges(), seed)
        fg = out.foreground
        assert not fg[:4].any() and not fg[-4:].any() and not fg[:, :4].any() and not fg[:, -4:].any()
        assert hbs_distance(compute_hbs(out).hbs, compute_hbs(im).hbs) < 5e-3


def test_augment_deterministic():
    im = image(gen_polygon(3, 6))
    assert np.array_equal(augment(im, AugmentRanges(), 5).values, augment(im, AugmentRanges(), 5).values)


def test_augment_range_validation():
    with pytest.raises(ValueError):
        AugmentRanges(k=(0.0, 1.0))
    with pytest.raises(ValueError):
        AugmentRanges(dx=(0.3, 0.1))


# datasets


def test_gen_config_validation():
    with pytest.raises(ValueError):
        GenConfig(method="coco")
    with pytest.raises(ValueError):
        GenConfig(count=0)
    with pytest.raises(ValueError):
        GenConfig(polygon_points=(2, 5))
    cfg = GenConfig(method="mixed", count=10)
    assert [cfg.method_for(i) for i in range(10)].count("welding") == 5


def test_build_dataset(tmp_path):
    cfg = GenConfig(method="polygon", count=4, seed=3, augment=None)
    man = build_dataset(cfg, tmp_path / "a")
    lines = (tmp_path / "a" / "manifest.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["format"] == "dsv1"
    assert len(man) == 4 and len(lines) == 5
    for e in man.entries:
        im = read_image(tmp_path / "a" / e["image_path"])
        fld = read_field(tmp_path / "a" / e["hbs_path"])
        assert e["validation"]["status"] == "SimplyConnected"
        # stored label re-verifies from the stored image
        assert hbs_distance(compute_hbs(im).hbs, fld) < 1e-6
    build_dataset(cfg, tmp_path / "b")
    for name in ["manifest.jsonl"] + [e["hbs_path"] for e in man.entries]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_build_dataset_mixed_split(tmp_path):
    man = build_dataset(GenConfig(method="mixed", count=4, seed=1, augment=None), tmp_path)
    methods = [e["provenance"]["method"] for e in man.entries]
    assert methods == ["polygon", "welding", "polygon", "welding"]
