"""Diagonal observables of a local harmonic density."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StabilityError
from .lha_core import LhaDensity

__all__ = [
    "ObservableSet",
    "diagonal_moments",
    "cumulants",
    "well_population",
    "coherence_width",
    "observable_set",
]


def diagonal_moments(density: LhaDensity, max_k: int = 4):
    """Trapezoidal <q^k> for k = 0..max_k (index k holds order k)."""
    if max_k < 0:
        raise DomainError("max_k must be non-negative")
    q = density.q_grid
    rho = density.diagonal
    return np.array([np.trapezoid(q**k * rho, q) for k in range(max_k + 1)])


def cumulants(moments):
    """Centered ``(kappa2, kappa4)`` from raw moments <q^0>..<q^4>."""
    m = np.asarray(moments, dtype=float)
    if m.size < 5:
        raise DomainError("need moments through order 4")
    m0 = m[0] if m[0] != 0 else 1.0
    m1, m2, m3, m4 = (m[1:5] / m0)
    c2 = m2 - m1 * m1
    c4 = m4 - 4 * m3 * m1 + 6 * m2 * m1**2 - 3 * m1**4
    return float(c2), float(c4 - 3 * c2 * c2)


def _region_integral(q, f, q_b, side):
    """Trapezoid of f over the part of the grid beyond q_b.

    The partial cell containing q_b is included with f interpolated
    linearly, so left and right integrals add up to the full trapezoid.
    """
    if not q[0] <= q_b <= q[-1]:
        raise DomainError(f"q_b = {q_b} lies outside the grid [{q[0]}, {q[-1]}]")
    s = str(side).lower()
    if s not in ("right", "left"):
        raise DomainError("side must be 'right' or 'left'")
    k = int(np.searchsorted(q, q_b, side="right")) - 1
    k = min(max(k, 0), q.size - 2)
    fb = f[k] + (f[k + 1] - f[k]) * (q_b - q[k]) / (q[k + 1] - q[k])
    if s == "right":
        inner = np.trapezoid(f[k + 1:], q[k + 1:]) if k + 2 <= q.size - 1 else 0.0
        return float(inner + 0.5 * (fb + f[k + 1]) * (q[k + 1] - q_b))
    inner = np.trapezoid(f[:k + 1], q[:k + 1]) if k >= 1 else 0.0
    return float(inner + 0.5 * (f[k] + fb) * (q_b - q[k]))


def well_population(density: LhaDensity, q_b, side="right"):
    """Probability past the barrier position ``q_b``."""
    return _region_integral(density.q_grid, density.diagonal, float(q_b), side)


def coherence_width(density: LhaDensity):
    """Standard deviation 1/(2 sqrt(<P^2>)) of the off-diagonal Gaussian."""
    if np.any(density.unstable_mask):
        raise StabilityError("coherence width undefined at unstable points", n=0)
    return 1.0 / (2.0 * np.sqrt(density.quantities.p2))


@dataclass
class ObservableSet:
    moments: np.ndarray
    kappa2: float
    kappa4: float
    populations: dict = field(default_factory=dict)
    coherence_width: np.ndarray | None = None


def observable_set(density: LhaDensity, q_b=None):
    m = diagonal_moments(density, 4)
    k2, k4 = cumulants(m)
    pops = {}
    if q_b is not None:
        pops["right"] = well_population(density, q_b, "right")
        pops["left"] = well_population(density, q_b, "left")
    width = None
    if not np.any(density.unstable_mask):
        width = coherence_width(density)
    return ObservableSet(moments=m[1:], kappa2=k2, kappa4=k4, populations=pops, coherence_width=width)
