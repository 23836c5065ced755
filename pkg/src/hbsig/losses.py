"""Distance-based losses on HBS fields, usable as oracles for learned models."""

from __future__ import annotations

from .field_core import ComplexField, GrayImage, check_same_geometry
from .harmonic import HbsConfig, align_rotation, compute_hbs, hbs_distance, normalize_rotation
from .shape_ops import require_simply_connected
from .transforms import RotationParam, post_stn_rotate

DEFAULT_LAMBDA_POST = 0.1


def _theta(theta) -> float | None:
    if theta is None:
        return None
    return theta.theta if isinstance(theta, RotationParam) else float(theta)


def loss_hbs(predicted: ComplexField, reference: ComplexField, theta=None) -> float:
    """hbs_distance(predicted, reference rotated by theta).

    ``theta`` may be a float or RotationParam; when omitted the best
    alignment of the reference onto the prediction is searched.
    """
    check_same_geometry(predicted, reference)
    t = _theta(theta)
    if t is None:
        return align_rotation(reference, predicted).distance
    return hbs_distance(predicted, post_stn_rotate(reference, t))


def loss_post(fld: ComplexField) -> float:
    """Fixed-point defect of rotation normalization; zero for normalized fields."""
    return hbs_distance(normalize_rotation(fld).field, fld)


def loss_total(predicted: ComplexField, reference: ComplexField, lambda_post: float = DEFAULT_LAMBDA_POST) -> float:
    """Aligned HBS loss plus ``lambda_post`` times the post-rotation defect of the prediction."""
    if lambda_post < 0:
        raise ValueError("lambda_post must be non-negative")
    total = loss_hbs(predicted, reference)
    if lambda_post > 0:
        total += lambda_post * loss_post(predicted)
    return total


def loss_combined(
    base_loss: float,
    mask: GrayImage,
    reference_hbs: ComplexField,
    lambda_hbs: float,
    config: HbsConfig | None = None,
) -> float:
    """``base_loss`` plus ``lambda_hbs`` times the aligned HBS loss of the mask's signature.

    Raises NotSimplyConnected (carrying the validation status) when the mask
    cannot be fed through the classical pipeline.
    """
    if lambda_hbs < 0:
        raise ValueError("lambda_hbs must be non-negative")
    if lambda_hbs == 0:
        return float(base_loss)
    require_simply_connected(mask)
    hbs = compute_hbs(mask, config).hbs
    return float(base_loss) + lambda_hbs * loss_hbs(hbs, reference_hbs)
