import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbsig.errors import GeometryMismatch, NotSimplyConnected
from hbsig.field_core import ComplexField, GrayImage, hbs_geometry
from hbsig.harmonic import (
    CircleMapSamples,
    align_rotation,
    beltrami_on_grid,
    compute_hbs,
    hbs_distance,
    normalize_rotation,
)
from hbsig.losses import loss_combined, loss_hbs, loss_post, loss_total
from hbsig.shape_ops import polygon_pose, trace_boundary, normalize_pose
from hbsig.transforms import (
    AffineParams,
    RotationParam,
    SimilarityParams,
    SoftenParams,
    affine_sample,
    post_stn_rotate,
    pre_stn_transform,
    soften,
)

from .corpora import GEO, disk_image, image, star_polygon


@pytest.fixture(scope="module")
def fields():
    return [compute_hbs(image(star_polygon(s))).hbs for s in (40, 41)]


def _random_image(seed=0, shape=(64, 64)):
    rng = np.random.default_rng(seed)
    from scipy.ndimage import gaussian_filter

    v = gaussian_filter(rng.uniform(size=shape), 3)
    v = (v - v.min()) / np.ptp(v)
    from hbsig.field_core import GridGeometry

    return GrayImage(GridGeometry(shape[1], shape[0]), v)


# affine sampling


def test_identity_exact():
    im = _random_image()
    out = affine_sample(im, AffineParams.identity())
    assert np.array_equal(out.values, im.values)


def test_one_pixel_translation():
    im = _random_image()
    w = im.geometry.width
    out = affine_sample(im, [[1, 0, 2.0 / w], [0, 1, 0]])
    # target column j samples source column j + 1
    assert np.allclose(out.values[:, :-1], im.values[:, 1:], atol=1e-12)
    assert np.all(out.values[:, -1] == 0)


def test_composition():
    # two bilinear passes differ from one by O(h^2 f''), so the test image is a
    # smooth wave with a period of about 64 px
    y, x = np.mgrid[0:96, 0:96] + 0.5
    from hbsig.field_core import GridGeometry

    im = GrayImage(GridGeometry(96, 96), 0.5 + 0.25 * np.sin(2 * np.pi * x / 64) + 0.25 * np.cos(2 * np.pi * y / 51.2))
    rng = np.random.default_rng(3)
    for _ in range(20):
        A = np.eye(3)
        B = np.eye(3)
        A[:2] = [[1, 0, 0], [0, 1, 0]] + 0.05 * rng.normal(size=(2, 3))
        B[:2] = [[1, 0, 0], [0, 1, 0]] + 0.05 * rng.normal(size=(2, 3))
        twice = affine_sample(affine_sample(im, A[:2]), B[:2])
        once = affine_sample(im, (A @ B)[:2])
        c = slice(24, 72)
        assert np.abs(twice.values[c, c] - once.values[c, c]).max() < 2e-3


def test_rotation_preserves_mass():
    im = disk_image(30, (10, 5))
    mass = im.values.sum()
    for theta in (0.3, 1.0, 2.5):
        out = pre_stn_transform(im, SimilarityParams(0, 0, 1, theta))
        assert abs(out.values.sum() - mass) / mass < 0.01


def test_complex_planes_independent():
    geo = hbs_geometry()
    rng = np.random.default_rng(0)
    re, im = rng.normal(size=geo.shape), rng.normal(size=geo.shape)
    m = [[0.9, 0.1, 0.05], [-0.1, 0.9, 0.0]]
    out = affine_sample(ComplexField(geo, re + 1j * im), m)
    a = affine_sample(ComplexField(geo, re), m)
    b = affine_sample(ComplexField(geo, im), m)
    assert np.allclose(out.values, a.values + 1j * b.values)


def test_affine_params_validation():
    with pytest.raises(ValueError):
        AffineParams((1, 0, 0, 0, 1))
    with pytest.raises(ValueError):
        AffineParams((1, 0, 0, 0, np.nan, 0))
    with pytest.warns(RuntimeWarning):
        AffineParams((1, 0, 0, 0, -1, 0))


# pre-STN


def test_pre_stn_identity():
    im = disk_image(40, (5, 5))
    assert np.array_equal(pre_stn_transform(im, SimilarityParams()).values, im.values)


def test_pre_stn_scale_halves_diameter():
    im = disk_image(60)
    out = pre_stn_transform(im, SimilarityParams(0, 0, 2.0, 0))
    cols = np.nonzero(out.foreground.any(axis=0))[0]
    assert abs((cols.max() - cols.min() + 1) - 60) <= 2


def test_pre_stn_matches_normalize_pose():
    im = image(star_polygon(13))
    out, p = normalize_pose(im)
    again = pre_stn_transform(im, p)
    assert np.array_equal(out.values, again.values)
    c, r = polygon_pose(trace_boundary(out))
    assert abs(c) * GEO.pixels_per_unit < 1.0
    assert abs(r - 0.5) * GEO.pixels_per_unit < 1.0


def test_similarity_params_validation():
    with pytest.raises(ValueError):
        SimilarityParams(k=0.0)
    with pytest.raises(ValueError):
        RotationParam(np.inf)


# post-STN


def test_post_rotate_identities(fields):
    f = fields[0]
    assert post_stn_rotate(f, 0.0) is f
    full = post_stn_rotate(f, RotationParam(2 * np.pi))
    assert np.abs(full.values - f.values).max() < 1e-6


def test_post_rotate_transformation_law():
    def gmap(t):
        return t + 0.25 * np.sin(t) + 0.1 * np.cos(2 * t + 0.3)

    base = beltrami_on_grid(CircleMapSamples.from_function(gmap))
    for theta in (0.4, -1.1):
        shifted = beltrami_on_grid(CircleMapSamples.from_function(lambda t: gmap(t + theta) - theta))
        assert hbs_distance(post_stn_rotate(base, theta), shifted) < 5e-3
        assert hbs_distance(post_stn_rotate(base, theta), shifted) < 0.1 * hbs_distance(
            post_stn_rotate(base, theta, phase_correct=False), shifted
        )


def test_hbs_of_rotated_shape(fields):
    p = star_polygon(40)
    c = p.centroid()
    rot = p.transformed(np.exp(0.9j), -c * np.exp(0.9j) + c)
    assert hbs_distance(compute_hbs(image(rot)).hbs, fields[0]) < 5e-3


# losses


def test_loss_hbs_basics(fields):
    a, b = fields
    assert loss_hbs(a, a, 0.0) == 0.0
    al = align_rotation(b, a)
    assert loss_hbs(a, b, al.theta) <= loss_hbs(a, b, 0.0)
    assert loss_hbs(a, b) == pytest.approx(al.distance)
    assert loss_hbs(a, b, RotationParam(0.2)) == loss_hbs(a, b, 0.2)


def test_loss_hbs_construct_and_invert(fields):
    ref = fields[1]
    pred = post_stn_rotate(ref, 0.5)
    theta = align_rotation(ref, pred).theta
    assert abs(theta - 0.5) < 1e-3
    assert loss_hbs(pred, ref, theta) < 1e-4


def test_loss_hbs_geometry_mismatch(fields):
    with pytest.raises(GeometryMismatch):
        loss_hbs(fields[0], ComplexField.zeros(hbs_geometry(64)))


def test_loss_post(fields):
    assert loss_post(fields[0]) < 1e-6
    assert loss_post(post_stn_rotate(fields[0], 0.4)) > 0
    assert loss_post(ComplexField.zeros()) == 0.0


def test_loss_total(fields):
    a, b = fields
    assert loss_total(a, a) == 0.0
    assert loss_total(a, b, 0.0) == pytest.approx(loss_hbs(a, b))
    off = post_stn_rotate(a, 0.4)
    vals = [loss_total(off, b, lam) for lam in (0.0, 0.1, 0.5)]
    assert vals[0] < vals[1] < vals[2]
    with pytest.raises(ValueError):
        loss_total(a, b, -0.1)


def test_loss_total_zero_on_normalized_prediction(fields):
    ref = post_stn_rotate(fields[1], 0.5)
    pred = normalize_rotation(ref).field
    assert loss_total(pred, ref) < 1e-4


def test_loss_combined(fields):
    mask = image(star_polygon(40))
    assert loss_combined(0.3, mask, fields[0], 0.0) == 0.3
    assert abs(loss_combined(0.3, mask, fields[0], 2.0) - 0.3) <= 5e-3 * 2.0
    nibbled = mask.foreground.copy()
    rows, cols = np.nonzero(nibbled)
    top = rows == rows.min()
    nibbled[rows[top], cols[top]] = False
    nibbled[rows.min() + 1 : rows.min() + 4, cols[top].min() : cols[top].max() + 1] = False
    bumped = loss_combined(0.3, GrayImage.from_mask(nibbled, GEO), fields[0], 1.0)
    assert bumped > 0.3
    ring = disk_image(50).foreground & ~disk_image(20).foreground
    with pytest.raises(NotSimplyConnected) as err:
        loss_combined(0.3, GrayImage.from_mask(ring, GEO), fields[0], 1.0)
    assert str(err.value.status) == "MultiplyConnected"
    with pytest.raises(ValueError):
        loss_combined(0.3, mask, fields[0], -1.0)


# softening


def test_soften_plain():
    im = disk_image(40)
    out = soften(im, SoftenParams(0, 0, noise_sigma=0))
    assert np.array_equal(out.values, im.values)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(0, 0.2),
    b=st.floats(0, 0.2),
    eps=st.floats(1e-6, 0.1),
    sigma=st.floats(0, 0.5),
    seed=st.integers(0, 2**32),
)
def test_soften_keeps_superlevel_set(a, b, eps, sigma, seed):
    im = image(star_polygon(seed % 50))
    out = soften(im, SoftenParams(a, b, eps, sigma, seed))
    assert np.array_equal(out.foreground, im.foreground)


def test_soften_deterministic_and_hbs_preserving():
    im = image(star_polygon(1))
    p = SoftenParams(0.15, 0.05, 1e-3, 0.1, 7)
    s1, s2 = soften(im, p), soften(im, p)
    assert np.array_equal(s1.values, s2.values)
    assert hbs_distance(compute_hbs(s1).hbs, compute_hbs(im).hbs) == 0.0


def test_soften_validation():
    with pytest.raises(ValueError):
        SoftenParams(a=0.3)
    with pytest.raises(ValueError):
        SoftenParams(eps=0)
    with pytest.raises(ValueError):
        SoftenParams(noise_sigma=-1)
