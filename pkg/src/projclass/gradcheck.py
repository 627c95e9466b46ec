"""Finite-difference oracle for every backward pass.

Compares reverse-mode input gradients of a scalar-valued fragment against
central differences. Must run in float64; the relative-error metric is
|a - b| / max(|a|, |b|, 1e-8), maximized over coordinates. Coordinates at
documented nondifferentiable points (max-pool ties, clip boundaries) can be
excluded via a boolean mask, and `min_kink_margin` measures how close a
given instance comes to such a point so random-instance tests can reject
unsuitable draws.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .autodiff import Tensor, no_grad, record_kink_margins
from .errors import NonScalarOutput

DEFAULT_STEP = 1e-5


def gradcheck(fragment: Callable[[Tensor], Tensor], x: Tensor,
              h: float = DEFAULT_STEP,
              exclude: Optional[np.ndarray] = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    `fragment` must map the input tensor to a scalar tensor. `exclude`
    marks input coordinates to skip (nondifferentiable points).
    """
    if x.data.dtype != np.float64:
        raise ValueError("gradcheck requires a float64 input")
    probe = Tensor(x.data.copy(), requires_grad=True)
    out = fragment(probe)
    if out.data.size != 1:
        raise NonScalarOutput(f"fragment output has shape {out.data.shape}")
    out.backward()
    analytic = (probe.grad if probe.grad is not None
                else np.zeros_like(probe.data))

    flat = x.data.copy().reshape(-1)
    numeric = np.zeros_like(flat)
    skip = (np.zeros(flat.shape, dtype=bool) if exclude is None
            else np.asarray(exclude, dtype=bool).reshape(-1))
    with no_grad():
        for i in range(flat.size):
            if skip[i]:
                continue
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fragment(Tensor(flat.reshape(x.data.shape))).item()
            flat[i] = orig - h
            f_minus = fragment(Tensor(flat.reshape(x.data.shape))).item()
            flat[i] = orig
            numeric[i] = (f_plus - f_minus) / (2.0 * h)

    a = analytic.reshape(-1)[~skip]
    b = numeric[~skip]
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float((np.abs(a - b) / denom).max())


def min_kink_margin(fragment: Callable[[Tensor], Tensor], x: Tensor) -> float:
    """Smallest distance to a relu/max-pool/clip kink along the forward pass.

    Returns +inf when the fragment contains no kinked operation. Instances
    with a margin below ~100*h are unsuitable for central differences.
    """
    with no_grad(), record_kink_margins() as margins:
        fragment(Tensor(x.data.copy()))
    return min(margins) if margins else float("inf")
