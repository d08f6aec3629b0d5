"""Dense float64 kernels and the finite-difference gradient oracle.

All functions are pure: they never mutate their inputs and are safe to call
concurrently. Matrices are 2-D C-contiguous ``float64`` arrays.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateNeighborhoodError,
    DeterminismError,
    DimensionError,
    EmptyMaskError,
)


def as_matrix(x) -> np.ndarray:
    """Coerce to a 2-D float64 array (copying only when needed)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check.

    Raises DimensionError naming both shapes when a.cols != b.rows.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}:"
            f" inner dimensions {a.shape[1]} != {b.shape[0]}"
        )
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise DimensionError("matrix product overflowed to non-finite values")
    return out


def leaky_relu(x, slope: float = 0.2) -> np.ndarray:
    """Elementwise max(x, slope*x); slope must lie in (0, 1)."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"slope must be in (0, 1), got {slope}")
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, x, slope * x)


def leaky_relu_grad(x, slope: float = 0.2) -> np.ndarray:
    """Derivative of leaky_relu w.r.t. its input (1 for x >= 0, else slope)."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, 1.0, slope)


def elu(x) -> np.ndarray:
    """Elementwise x for x > 0, exp(x) - 1 otherwise."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x) -> np.ndarray:
    """Derivative of elu w.r.t. its input (1 for x > 0, else exp(x))."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


def masked_softmax(logits, mask) -> np.ndarray:
    """Row-wise softmax restricted to masked entries.

    Unmasked entries of the result are exactly 0; each row of masked entries
    sums to 1. The row maximum is subtracted before exponentiation so large
    logits stay finite.

    Raises DegenerateNeighborhoodError if any row has no active mask entry.
    """
    logits = as_matrix(logits)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.shape:
        raise DimensionError(
            f"mask shape {mask.shape} does not match logits shape {logits.shape}"
        )
    active = mask.any(axis=1)
    if not active.all():
        rows = np.flatnonzero(~active)
        raise DegenerateNeighborhoodError(
            f"rows {rows.tolist()} have no active entries to normalize over"
        )
    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    expd = np.where(mask, np.exp(shifted), 0.0)
    return expd / expd.sum(axis=1, keepdims=True)


def row_softmax(logits) -> np.ndarray:
    """Plain row-wise softmax (all entries active)."""
    logits = as_matrix(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def _as_index_mask(mask, n_rows: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype == bool:
        if mask.shape != (n_rows,):
            raise DimensionError(
                f"boolean mask length {mask.shape} does not match {n_rows} rows"
            )
        return np.flatnonzero(mask)
    idx = mask.astype(np.int64, copy=False)
    if idx.size and (idx.min() < 0 or idx.max() >= n_rows):
        raise DimensionError(f"mask indices outside [0, {n_rows})")
    return idx


def cross_entropy(predictions, labels, mask) -> float:
    """Mean negative log-probability of the true class over masked nodes.

    ``predictions`` rows must be probability distributions (sum to 1 within
    1e-9 over the masked rows); ``mask`` is a boolean vector or an index array
    selecting the nodes that contribute.
    """
    probs = as_matrix(predictions)
    labels = np.asarray(labels, dtype=np.int64)
    idx = _as_index_mask(mask, probs.shape[0])
    if idx.size == 0:
        raise EmptyMaskError("cross_entropy over an empty node subset")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise ValueError(
            f"labels outside [0, {probs.shape[1]}): min={labels.min()} max={labels.max()}"
        )
    row_sums = probs[idx].sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-9:
        raise ValueError("prediction rows do not sum to 1 over masked nodes")
    true_p = probs[idx, labels[idx]]
    with np.errstate(divide="ignore"):
        return float(-np.mean(np.log(true_p)))


@dataclass
class GradCheckResult:
    max_relative_deviation: float
    checked_coordinates: int
    worst_coordinate: int


def finite_difference_check(
    loss_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    theta: np.ndarray,
    step: float = 1e-5,
    num_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckResult:
    """Compare an analytic gradient against central differences.

    ``loss_and_grad`` maps a flat parameter vector to (loss, gradient) and must
    be deterministic; it is evaluated twice at ``theta`` to verify that, and a
    DeterminismError is raised on mismatch.

    All coordinates are checked unless ``num_coords`` limits the sample (at
    least 100 whenever that many exist). The returned deviation per coordinate
    is |analytic - numeric| / max(1, |numeric|).
    """
    if not 1e-6 <= step <= 1e-3:
        raise ValueError(f"step must lie in [1e-6, 1e-3], got {step}")
    theta = np.asarray(theta, dtype=np.float64).ravel().copy()

    loss_a, grad = loss_and_grad(theta)
    loss_b, _ = loss_and_grad(theta)
    if loss_a != loss_b:
        raise DeterminismError(
            f"loss_and_grad returned {loss_a!r} then {loss_b!r} at the same point"
        )
    grad = np.asarray(grad, dtype=np.float64).ravel()
    if grad.shape != theta.shape:
        raise DimensionError(
            f"gradient length {grad.shape[0]} does not match parameters {theta.shape[0]}"
        )

    n = theta.size
    if n == 0:
        return GradCheckResult(0.0, 0, -1)
    if num_coords is None or num_coords >= n:
        coords = np.arange(n)
    else:
        want = max(100, num_coords) if n >= 100 else n
        want = min(want, n)
        rng = rng or np.random.default_rng(0)
        coords = rng.choice(n, size=want, replace=False)

    worst = 0.0
    worst_i = -1
    for i in coords:
        probe = theta.copy()
        probe[i] = theta[i] + step
        up, _ = loss_and_grad(probe)
        probe[i] = theta[i] - step
        down, _ = loss_and_grad(probe)
        numeric = (up - down) / (2.0 * step)
        dev = abs(grad[i] - numeric) / max(1.0, abs(numeric))
        if dev > worst:
            worst = dev
            worst_i = int(i)
    return GradCheckResult(worst, len(coords), worst_i)


def flatten_arrays(arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate arrays into one flat vector (copy)."""
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def unflatten_like(vector: np.ndarray, templates: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Split a flat vector back into arrays shaped like ``templates``."""
    vector = np.asarray(vector, dtype=np.float64).ravel()
    out = []
    pos = 0
    for t in templates:
        size = int(np.prod(t.shape, dtype=np.int64)) if t.ndim else 1
        out.append(vector[pos:pos + size].reshape(t.shape).copy())
        pos += size
    if pos != vector.size:
        raise DimensionError(
            f"vector length {vector.size} does not match templates (need {pos})"
        )
    return out
