"""One dimensional potentials with analytic derivatives up to third order."""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import DomainError, NoBarrierError

__all__ = [
    "Potential",
    "Harmonic",
    "Quartic",
    "AsymmetricQuarticDW",
    "Rescaled",
    "BackToBackMorse",
    "Polynomial",
    "EffectiveOscillator",
    "PROTON_MASS",
    "proton_potential",
    "eval_derivs",
    "effective_frequency_displacement",
    "barrier_position",
    "potential_from_config",
]

#: proton mass in electron masses (CODATA 2018)
PROTON_MASS = 1836.15267343

#: |V2| below which the displacement V1/V2 is reported as undefined
INFLECTION_TOL = 1e-12


class Potential:
    """Base class: subclasses implement :meth:`derivs`."""

    kind = "abstract"

    def derivs(self, q):
        """Return ``(V, V1, V2, V3)`` evaluated at ``q``."""
        raise NotImplementedError

    def __call__(self, q):
        return self.derivs(q)[0]

    def to_config(self):
        out = {"kind": self.kind}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        return out


@dataclass(frozen=True)
class Harmonic(Potential):
    """V = a q + b q^2."""

    a: float = 0.0
    b: float = 0.5
    kind = "harmonic"

    def derivs(self, q):
        q = np.asarray(q, dtype=float)
        return (self.a * q + self.b * q * q,
                self.a + 2.0 * self.b * q,
                np.full_like(q, 2.0 * self.b),
                np.zeros_like(q))


@dataclass(frozen=True)
class Quartic(Potential):
    """V = m w^2 q^2 / 2 + a q^4."""

    mass: float = 1.0
    omega: float = 1.0
    a: float = 2.5e-3
    kind = "quartic"

    def derivs(self, q):
        q = np.asarray(q, dtype=float)
        k = self.mass * self.omega**2
        return (0.5 * k * q * q + self.a * q**4,
                k * q + 4.0 * self.a * q**3,
                k + 12.0 * self.a * q * q,
                24.0 * self.a * q)


@dataclass(frozen=True)
class AsymmetricQuarticDW(Potential):
    """V = a4 q^4 - a2 q^2 + a1 q."""

    a4: float = 0.5
    a2: float = 0.5
    a1: float = 0.0
    kind = "quartic_dw"

    def derivs(self, q):
        q = np.asarray(q, dtype=float)
        return (self.a4 * q**4 - self.a2 * q * q + self.a1 * q,
                4.0 * self.a4 * q**3 - 2.0 * self.a2 * q + self.a1,
                12.0 * self.a4 * q * q - 2.0 * self.a2,
                24.0 * self.a4 * q)


@dataclass(frozen=True)
class Rescaled(Potential):
    """b V(q / b); the n-th derivative picks up a factor b^(1-n)."""

    b: float
    inner: Potential
    kind = "rescaled"

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError(f"rescale factor b must be > 0, got {self.b}")

    def derivs(self, q):
        b = self.b
        v, v1, v2, v3 = self.inner.derivs(np.asarray(q, dtype=float) / b)
        return b * v, v1, v2 / b, v3 / (b * b)

    def to_config(self):
        out = dict(self.inner.to_config())
        out["inner"] = out.pop("kind")
        out["kind"] = self.kind
        out["b"] = self.b
        return out


@dataclass(frozen=True)
class BackToBackMorse(Potential):
    """Two opposing Morse wells centred at r1 (depth v1) and r2 (depth v2)."""

    v1: float
    v2: float
    a1: float
    a2: float
    r1: float
    r2: float
    kind = "morse2"

    def derivs(self, q):
        q = np.asarray(q, dtype=float)
        u = np.exp(-self.a1 * (q - self.r1))
        w = np.exp(-self.a2 * (self.r2 - q))
        p, s = self.a1, self.a2
        v = self.v1 * (u * u - 2 * u) + self.v2 * (w * w - 2 * w)
        v1 = self.v1 * p * (2 * u - 2 * u * u) + self.v2 * s * (2 * w * w - 2 * w)
        v2 = self.v1 * p**2 * (4 * u * u - 2 * u) + self.v2 * s**2 * (4 * w * w - 2 * w)
        v3 = self.v1 * p**3 * (2 * u - 8 * u * u) + self.v2 * s**3 * (8 * w * w - 2 * w)
        return v, v1, v2, v3


def proton_potential():
    """Guanine-cytosine proton double well in Hartree atomic units."""
    return BackToBackMorse(v1=0.1617, v2=0.082, a1=0.305, a2=0.755, r1=-2.7, r2=2.1)


@dataclass(frozen=True)
class Polynomial(Potential):
    """V = sum_k coeffs[k] q^k."""

    coeffs: tuple
    kind = "polynomial"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise DomainError("polynomial needs at least one coefficient")

    def derivs(self, q):
        q = np.asarray(q, dtype=float)
        p = np.polynomial.Polynomial(self.coeffs)
        return p(q), p.deriv(1)(q), p.deriv(2)(q), p.deriv(3)(q)


def eval_derivs(pm: Potential, q, max_order=3):
    if not 0 <= max_order <= 3:
        raise DomainError("max_order must be between 0 and 3")
    if not np.all(np.isfinite(q)):
        raise DomainError("positions must be finite")
    return pm.derivs(q)[: max_order + 1]


class EffectiveOscillator(NamedTuple):
    omega_q_sq: np.ndarray
    Q_q: np.ndarray
    defined: np.ndarray


def effective_frequency_displacement(pm: Potential, q, m):
    """Local squared frequency V2/m and displacement V1/V2.

    ``Q_q`` is NaN (and ``defined`` False) where |V2| < INFLECTION_TOL.
    """
    if not m > 0:
        raise DomainError("mass must be > 0")
    _, v1, v2, _ = pm.derivs(q)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    defined = np.abs(v2) >= INFLECTION_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        disp = np.where(defined, v1 / np.where(defined, v2, 1.0), np.nan)
    return EffectiveOscillator(v2 / m, disp, defined)


def _local_extrema(f):
    """Interior indices where ``f`` has a local maximum."""
    inner = (f[1:-1] >= f[:-2]) & (f[1:-1] >= f[2:]) & ((f[1:-1] > f[:-2]) | (f[1:-1] > f[2:]))
    return np.nonzero(inner)[0] + 1


def _refine_root(fn, a, b, fallback):
    if fn(a) * fn(b) < 0:
        return optimize.brentq(fn, a, b, xtol=1e-14, rtol=1e-15, maxiter=200)
    return float(fallback)


def barrier_position(pm: Potential, bracket, n_scan=4001, shoulder=False):
    """Position of the highest interior maximum of ``pm`` inside ``bracket``.

    A grid scan locates the maximum and a bracketed root of V1 refines it.
    With ``shoulder=True`` a potential without interior maximum falls back
    to the inflection point where |V1| is locally smallest (the remnant of
    a barrier that a strong tilt has washed out).
    """
    lo, hi = map(float, bracket)
    if not hi > lo:
        raise DomainError("bracket must be an increasing interval")
    q = np.linspace(lo, hi, n_scan)
    v, v1, _, _ = (np.asarray(a) for a in pm.derivs(q))
    idx = _local_extrema(v)
    if idx.size:
        i = idx[np.argmax(v[idx])]
        return _refine_root(lambda x: float(pm.derivs(x)[1]), q[i - 1], q[i + 1], q[i])
    if shoulder:
        idx = _local_extrema(-np.abs(v1))
        # skip minima of V itself: a shoulder needs an inflection, not a V1 zero
        v2 = lambda x: float(pm.derivs(x)[2])
        idx = [i for i in idx if v2(q[i - 1]) * v2(q[i + 1]) < 0 and v1[i - 1] * v1[i + 1] > 0]
        if idx:
            i = min(idx, key=lambda j: abs(v1[j]))
            return _refine_root(v2, q[i - 1], q[i + 1], q[i])
    raise NoBarrierError(f"no interior maximum of the potential in [{lo}, {hi}]")


_KINDS = {
    "harmonic": Harmonic,
    "quartic": Quartic,
    "quartic_dw": AsymmetricQuarticDW,
    "morse2": BackToBackMorse,
    "polynomial": Polynomial,
}


def potential_from_config(params):
    """Build a potential from a flat mapping (``kind`` plus parameters).

    ``kind = rescaled`` takes ``b`` and ``inner`` (the wrapped kind); the
    remaining keys go to the wrapped potential.  ``kind = proton`` is the
    guanine-cytosine double well.
    """
    params = dict(params)
    kind = str(params.pop("kind", "")).strip().lower()
    if kind == "proton":
        return proton_potential()
    if kind == "rescaled":
        b = float(params.pop("b"))
        inner_kind = params.pop("inner")
        return Rescaled(b, potential_from_config({"kind": inner_kind, **params}))
    if kind not in _KINDS:
        raise DomainError(f"unknown potential kind {kind!r}")
    cls = _KINDS[kind]
    if cls is Polynomial:
        raw = params.pop("coeffs")
        if isinstance(raw, str):
            raw = [c for c in raw.replace(",", " ").split()]
        return Polynomial(tuple(float(c) for c in raw))
    names = {f.name for f in fields(cls)}
    unknown = set(params) - names
    if unknown:
        raise DomainError(f"unknown parameters for {kind}: {sorted(unknown)}")
    return cls(**{k: float(v) for k, v in params.items()})
