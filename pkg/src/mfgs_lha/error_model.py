"""A-priori error estimates for the local harmonic density.

The leading correction at matrix element (q, eta) is

    T(q, eta) = -beta V3(q) / 6 * (Delta^3 + 3 E^2 Delta)

with the classical path deviation ``Delta = max(|beta V1 (W~ - S~) / D|, |eta|)``
and the quantum spread ``E = sqrt(S~) (1 + 1/sqrt(D))``.  The pointwise
relative error is ``eps(q, eta) = |T(q, eta)| + eps_T`` where
``eps_T = int rho(q) |T(q, 0)| dq``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StabilityError, UndefinedRelativeError
from .lha_core import LhaDensity, LocalHarmonicQuantities

__all__ = [
    "ErrorReport",
    "delta_dev",
    "eps_dev",
    "t_correction",
    "t_from_parts",
    "eps_total",
    "error_report",
    "eps_observable",
    "eps_region",
    "eps_cumulants",
    "v3_bound",
]

ETA_MEASURE = "d_eta"
KAPPA4_ZERO = 1e-8


def _check(lhq):
    if np.any(lhq.unstable):
        raise StabilityError("error estimates need stable or inverted-stable points", n=0)


def _outer(a, eta):
    """Broadcast a per-q array against eta, giving shape q.shape + eta.shape."""
    a = np.asarray(a, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if a.ndim and eta.ndim:
        return a[..., None], np.broadcast_to(eta, a.shape + eta.shape)
    return a, eta


def _classical_arm(lhq, v1):
    return np.abs(lhq.beta * np.asarray(v1) * (lhq.w_tilde - lhq.s_tilde) / lhq.denom)


def delta_dev(lhq: LocalHarmonicQuantities, V1, V2, eta):
    """Maximum classical path deviation Delta(q, eta).

    ``V2`` is accepted for symmetry with the literal form
    ``|V1/V2 (W/<X^2> - 1)|`` but is not needed by the regularized one.
    """
    _check(lhq)
    first, e = _outer(_classical_arm(lhq, V1), eta)
    return np.maximum(first, np.abs(e))


def eps_dev(lhq: LocalHarmonicQuantities):
    """Typical quantum path deviation E(q) = sqrt(S~) (1 + 1/sqrt(D))."""
    _check(lhq)
    if np.any(lhq.denom <= 0):
        raise StabilityError("D(q) must be positive", n=0)
    return np.sqrt(lhq.s_tilde) * (1.0 + 1.0 / np.sqrt(lhq.denom))


def t_from_parts(beta, v3, delta, epsilon):
    return -beta * v3 / 6.0 * (delta**3 + 3.0 * epsilon**2 * delta)


def t_correction(pm, lhq: LocalHarmonicQuantities, q, eta):
    """Leading order correction T(q, eta); identically zero when V3 = 0."""
    _check(lhq)
    _, v1, _, v3 = pm.derivs(np.asarray(q, dtype=float))
    v1 = np.broadcast_to(v1, np.shape(lhq.s_tilde))
    v3 = np.broadcast_to(v3, np.shape(lhq.s_tilde))
    delta = delta_dev(lhq, v1, None, eta)
    ecal = eps_dev(lhq)
    v3o, _ = _outer(v3, eta)
    eo, _ = _outer(ecal, eta)
    return t_from_parts(lhq.beta, v3o, delta, eo)


def _density_parts(density: LhaDensity):
    lhq = density.quantities
    ok = ~density.unstable_mask
    _, v1, _, v3 = density.derivs
    return lhq, ok, v1, v3


def _t_diag(density: LhaDensity):
    """T(q, 0) on the q-grid, zero at masked points."""
    lhq, ok, v1, v3 = _density_parts(density)
    out = np.zeros(density.q_grid.shape)
    with np.errstate(invalid="ignore"):
        delta = _classical_arm(lhq, v1)
        ecal = np.sqrt(lhq.s_tilde) * (1.0 + 1.0 / np.sqrt(lhq.denom))
        t = t_from_parts(lhq.beta, v3, delta, ecal)
    out[ok] = t[ok]
    return out


def eps_total(density: LhaDensity, report=None):
    """eps_T = trapezoid of rho(q, 0) |T(q, 0)| over the density grid."""
    t0 = report.t_diag if report is not None else _t_diag(density)
    return float(np.trapezoid(density.diagonal * np.abs(t0), density.q_grid))


@dataclass
class ErrorReport:
    t_grid: np.ndarray
    t_diag: np.ndarray
    eps_t: float
    eps_grid: np.ndarray
    per_observable: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def eps_diag(self):
        return np.abs(self.t_diag) + self.eps_t


def error_report(density: LhaDensity, pm=None):
    """T and eps on the full (q, eta) grid of ``density``.

    ``pm`` is unused; third derivatives come from the density itself.
    """
    lhq, ok, v1, v3 = _density_parts(density)
    t_diag = _t_diag(density)
    with np.errstate(invalid="ignore"):
        arm = _classical_arm(lhq, v1)
        delta = np.maximum(arm[:, None], np.abs(density.eta_grid)[None, :])
        ecal = np.sqrt(lhq.s_tilde) * (1.0 + 1.0 / np.sqrt(lhq.denom))
        t_grid = t_from_parts(lhq.beta, v3[:, None], delta, ecal[:, None])
    t_grid[~ok, :] = 0.0
    eps_t = eps_total(density, _Diag(t_diag))
    return ErrorReport(
        t_grid=t_grid,
        t_diag=t_diag,
        eps_t=eps_t,
        eps_grid=np.abs(t_grid) + eps_t,
        metadata={"eta_measure": ETA_MEASURE},
    )


@dataclass
class _Diag:
    t_diag: np.ndarray


def _weights(density, observable):
    q = density.q_grid
    if callable(observable):
        w = np.asarray(observable(q), dtype=float)
    else:
        w = np.asarray(observable, dtype=float)
    w = np.broadcast_to(w, q.shape)
    return w


def eps_observable(density: LhaDensity, report: ErrorReport | None, observable, name=None):
    """Relative error of a diagonal observable O(q).

    ``observable`` is a callable of q or an array on the q-grid.  Region
    observables pass an indicator.
    """
    report = report if report is not None else error_report(density)
    q = density.q_grid
    w = _weights(density, observable)
    rho = density.diagonal
    mean = np.trapezoid(w * rho, q)
    if mean == 0:
        raise UndefinedRelativeError("observable has zero expectation value")
    num = np.trapezoid(w * report.eps_diag * rho, q)
    val = float(num / mean)
    if name is not None:
        report.per_observable[name] = val
    return val


def eps_region(density: LhaDensity, report: ErrorReport | None, q_b, side="right", name=None):
    """Relative error of the population beyond ``q_b``.

    Uses the same split of the trapezoid as the population itself, so the
    ratio is taken between two integrals on the same sub-grid.
    """
    from .observables import _region_integral

    report = report if report is not None else error_report(density)
    q = density.q_grid
    rho = density.diagonal
    pop = _region_integral(q, rho, q_b, side)
    if pop == 0:
        raise UndefinedRelativeError("region population is zero")
    num = _region_integral(q, report.eps_diag * rho, q_b, side)
    val = float(num / pop)
    if name is not None:
        report.per_observable[name] = val
    return val


def eps_cumulants(density: LhaDensity, report: ErrorReport | None = None, propagate=False):
    """``(eps_kappa2, eps_kappa4)`` from the q^2 and q^4 errors.

    ``eps_kappa4 = (<q^4> eps_q4 + 6 <q^2> eps_q2) / |kappa4|``, undefined when
    ``|kappa4| <= KAPPA4_ZERO kappa2^2``.  With
    ``propagate=True`` the second term becomes ``6 <q^2>^2 eps_q2``, the
    first order propagation through ``kappa4 = <q^4> - 3 <q^2>^2``.
    """
    from .observables import cumulants, diagonal_moments

    report = report if report is not None else error_report(density)
    q = density.q_grid
    m = diagonal_moments(density, 4)
    eps2 = eps_observable(density, report, q * q, name="q2")
    eps4 = eps_observable(density, report, q**4, name="q4")
    k2, k4 = cumulants(m)
    report.per_observable["kappa2"] = eps2
    second = 6.0 * m[2] ** 2 * eps2 if propagate else 6.0 * m[2] * eps2
    # Gaussian states give k4 at round-off level, not exactly zero
    if abs(k4) <= KAPPA4_ZERO * k2 * k2:
        raise UndefinedRelativeError("kappa4 vanishes")
    e4 = float((m[4] * eps4 + second) / abs(k4))
    report.per_observable["kappa4"] = e4
    return eps2, e4


def v3_bound(pm, density: LhaDensity, q=None):
    """Admissibility ratio |V3| beta rho(q,0) |Delta^3 + 3 E^2 Delta| / 6.

    Values at or below 1 mean the cubic term is locally small.  Returned
    on the density grid, or linearly interpolated at ``q``.
    """
    ratio = np.abs(_t_diag(density)) * density.diagonal
    if q is None:
        return ratio
    qq = np.asarray(q, dtype=float)
    g = density.q_grid
    if np.any(qq < g[0]) or np.any(qq > g[-1]):
        raise DomainError("positions outside the density grid")
    return np.interp(qq, g, ratio)
