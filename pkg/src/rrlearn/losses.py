"""Bent surrogate losses.

A bent loss is a convex nondecreasing function whose slope jumps from 1 to
a > 1 at the origin:

    loss(u) = base(u)          for u <= 0,
    loss(u) = base(0) + a * u  for u > 0,

where the base has left slope 1 at 0.  Two built-in bases are supported:

    hinge:  base(u) = [1 + u]+
    dwd:    base(u) = -1/(4u) for u < -1/2, 1 + u otherwise

Both give loss(0) = 1.  The bent hinge also decomposes as
[1 + u]+ + (a - 1)[u]+, which the dual solver relies on.  Custom bases may
be plugged in via :func:`custom_loss`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

HINGE = "hinge"
DWD = "dwd"
CUSTOM = "custom"


@dataclass(frozen=True)
class BentLoss:
    """A bent surrogate loss with right slope ``a`` at the origin.

    For custom losses, ``base_value`` and ``base_subgrad`` describe the
    unbent base on u <= 0 (vectorized value; subgradient interval at a
    scalar).  The base must be convex and nondecreasing with slope 1 at 0.
    """

    kind: str
    a: float
    name: str = ""
    base_value: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False, compare=False
    )
    base_subgrad: Optional[Callable[[float], Tuple[float, float]]] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if not self.a > 1.0:
            raise ValueError(f"bend slope a must exceed 1, got {self.a}")
        if self.kind not in (HINGE, DWD, CUSTOM):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == CUSTOM and (self.base_value is None or self.base_subgrad is None):
            raise ValueError("custom losses need base_value and base_subgrad")

    def value(self, u):
        """Loss evaluated elementwise at u (scalar or array)."""
        u = np.asarray(u, dtype=float)
        if self.kind == HINGE:
            out = np.maximum(1.0 + u, 0.0) + (self.a - 1.0) * np.maximum(u, 0.0)
        elif self.kind == DWD:
            neg = np.minimum(u, 0.0)
            base = np.where(neg < -0.5, -0.25 / np.where(neg < -0.5, neg, -1.0), 1.0 + neg)
            out = base + self.a * np.maximum(u, 0.0)
        else:
            neg = np.minimum(u, 0.0)
            out = np.asarray(self.base_value(neg), dtype=float) + self.a * np.maximum(u, 0.0)
        return out if out.ndim else float(out)

    def subgradient(self, u: float) -> Tuple[float, float]:
        """Subdifferential interval [lo, hi] at a scalar u."""
        u = float(u)
        a = self.a
        if u > 0.0:
            return (a, a)
        if self.kind == HINGE:
            if u == 0.0:
                return (1.0, a)
            if u > -1.0:
                return (1.0, 1.0)
            if u == -1.0:
                return (0.0, 1.0)
            return (0.0, 0.0)
        if self.kind == DWD:
            if u == 0.0:
                return (1.0, a)
            if u >= -0.5:
                return (1.0, 1.0)
            g = 0.25 / (u * u)
            return (g, g)
        lo, hi = self.base_subgrad(u)
        if u == 0.0:
            return (float(lo), a)
        return (float(lo), float(hi))


def bent_hinge(a: float) -> BentLoss:
    return BentLoss(kind=HINGE, a=a, name="hinge")


def bent_dwd(a: float) -> BentLoss:
    return BentLoss(kind=DWD, a=a, name="dwd")


def custom_loss(base_value, base_subgrad, a: float, name: str = "custom") -> BentLoss:
    """Bend a user-supplied convex nondecreasing base with slope 1 at 0."""
    return BentLoss(kind=CUSTOM, a=a, name=name,
                    base_value=base_value, base_subgrad=base_subgrad)


def make_loss(kind: str, a: float) -> BentLoss:
    """Build a built-in loss by name ('hinge' or 'dwd')."""
    if kind == HINGE:
        return bent_hinge(a)
    if kind == DWD:
        return bent_dwd(a)
    raise ValueError(f"unknown loss kind {kind!r} (expected 'hinge' or 'dwd')")


def loss_eval(loss: BentLoss, u):
    """Evaluate the loss at u."""
    return loss.value(u)


def loss_subgradient(loss: BentLoss, u: float) -> Tuple[float, float]:
    """Subdifferential interval of the loss at u."""
    return loss.subgradient(u)


def hinge_decomposition(u, a: float):
    """Split the bent hinge into its two hinge parts ([1+u]+, (a-1)[u]+)."""
    u = np.asarray(u, dtype=float)
    return np.maximum(1.0 + u, 0.0), (a - 1.0) * np.maximum(u, 0.0)
