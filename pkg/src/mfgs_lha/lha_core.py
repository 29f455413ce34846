"""Local harmonic approximation to the mean force Gibbs state.

At every position ``q`` the potential is replaced by its second order
expansion, an oscillator with squared frequency ``w2 = V2(q)/m`` whose
reduced density matrix is Gaussian.  Everything below reduces to four
Matsubara series over the mode weights ``A_n = w2 + nu_n^2 + zeta_n``::

    s_sum = sum_{n>=1} 1/A_n            S~ = 2 s_sum / (m beta)
    w_sum = sum_{n>=1} (-1)^n / A_n     W~ = 2 w_sum / (m beta)
    p_sum = sum_{n>=1} (w2 + zeta_n)/A_n
    log_prod = sum_{n>=1} ln((nu_n^2 + zeta_n) / A_n)

from which ``D = 1 + beta V2 S~``, ``<X^2> = 1/(beta V2) + S~``,
``<P^2> = (m/beta)(1 + 2 p_sum)`` and ``ln G = -ln(D)/2 + log_prod``.

The diagonal exponent is evaluated as

    ln rho(q, eta) = ln G - beta V + beta^2 V1^2 S~ / (2 D) - 2 <P^2> eta^2

which equals the textbook form ``-Q^2/(2<X^2>) - beta (V - V1^2/(2 V2))``
wherever that is defined and stays finite at inflection points.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .bath import BathContext, TailPolicy
from .errors import DomainError, NumericError, StabilityError
from .potential import Potential

__all__ = [
    "SeriesConfig",
    "Stability",
    "MatsubaraSums",
    "LocalHarmonicQuantities",
    "GridPolicy",
    "LhaDensity",
    "matsubara_sums",
    "local_quantities",
    "series_s_tilde",
    "series_w_tilde",
    "x2_p2",
    "g_factor",
    "stability_check",
    "stability_vp",
    "default_q_grid",
    "default_eta_grid",
    "assemble_density",
]

# elements per temporary (rows x n_terms) block
_BLOCK = 4_000_000
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_GL_U = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class SeriesConfig:
    n_terms: int = 100_000
    tail_correction: bool = True
    product_log_space: bool = True

    def __post_init__(self):
        if int(self.n_terms) < 100:
            raise DomainError(f"n_terms must be >= 100, got {self.n_terms}")
        if not self.product_log_space:
            raise DomainError("infinite products are always accumulated in log space")
        object.__setattr__(self, "n_terms", int(self.n_terms))


class Stability(enum.IntEnum):
    STABLE = 0
    INVERTED_STABLE = 1
    UNSTABLE = 2


def _resolve(ctx: BathContext, cfg):
    if cfg is None:
        return SeriesConfig(n_terms=ctx.n_terms)
    if cfg.n_terms > ctx.n_terms:
        raise DomainError(
            f"series truncation {cfg.n_terms} exceeds the context table ({ctx.n_terms})"
        )
    return cfg


@dataclass
class MatsubaraSums:
    """Raw series per squared frequency; NaN where ``A_1 <= 0``."""

    omega_q_sq: np.ndarray
    a1: np.ndarray
    s_sum: np.ndarray
    w_sum: np.ndarray
    p_sum: np.ndarray
    log_prod: np.ndarray

    @property
    def modes_positive(self):
        return self.a1 > 0


def _explicit_sums(ctx, w2, n):
    y = ctx.y[:n]
    zeta = ctx.zeta_cache[:n]
    inv_y = 1.0 / y
    rows = max(1, _BLOCK // n)
    out = np.empty((4, w2.size))
    even = n - (n % 2)
    for start in range(0, w2.size, rows):
        w = w2[start:start + rows, None]
        inv = 1.0 / (y[None, :] + w)
        out[0, start:start + rows] = inv.sum(axis=1)
        # pairs (-1/A_{2k-1} + 1/A_{2k}) keep the alternating sum well conditioned
        alt = (inv[:, 1:even:2] - inv[:, 0:even:2]).sum(axis=1)
        if n % 2:
            alt -= inv[:, n - 1]
        out[1, start:start + rows] = alt
        out[2, start:start + rows] = ((w + zeta[None, :]) * inv).sum(axis=1)
        out[3, start:start + rows] = -np.log1p(w * inv_y[None, :]).sum(axis=1)
    return out


def _tail_analytic(ctx, w2, n):
    # sum_{k>n} f(k) ~ int_{n+1/2}^inf f(x) dx; substitute x = (n + 1/2)/u
    x0 = n + 0.5
    x = x0 / _GL_U
    nu = ctx.nu_of(x)
    zeta = np.asarray(ctx.spectral.zeta_of_nu(nu))
    y = nu * nu + zeta
    jac = _GL_W * x0 / (_GL_U * _GL_U)
    w = w2[:, None]
    inv = 1.0 / (y[None, :] + w)
    s = (inv * jac).sum(axis=1)
    p = ((w + zeta[None, :]) * inv * jac).sum(axis=1)
    lg = (-np.log1p(w / y[None, :]) * jac).sum(axis=1)
    # alternating remainder: (-1)^(n+1) f(n + 1/2) / 2
    nu_h = ctx.nu_of(x0)
    y_h = nu_h**2 + float(ctx.spectral.zeta_of_nu(nu_h))
    alt = (-1.0) ** (n + 1) * 0.5 / (y_h + w2)
    return s, alt, p, lg


def _tail_saturation(ctx, w2, n):
    # zeta_k -> zeta_inf beyond n; expand 1/(a^2 k^2 + c) in Hurwitz zeta values
    a2 = (2.0 * np.pi / ctx.beta) ** 2
    zinf = ctx.spectral.zeta_saturation()
    c = w2 + zinf
    s = np.zeros_like(w2)
    for k in range(4):
        s += (-c) ** k / a2 ** (k + 1) * special.zeta(2 * k + 2, n + 1)
    s2 = special.zeta(4, n + 1) / a2**2
    lg = -w2 * s + 0.5 * w2 * w2 * s2
    nu_h = ctx.nu_of(n + 0.5)
    alt = (-1.0) ** (n + 1) * 0.5 / (nu_h**2 + zinf + w2)
    return s, alt, c * s, lg


def matsubara_sums(ctx: BathContext, omega_q_sq, cfg: SeriesConfig | None = None):
    """The four Matsubara series for each squared frequency in ``omega_q_sq``."""
    cfg = _resolve(ctx, cfg)
    w2_all = np.atleast_1d(np.asarray(omega_q_sq, dtype=float))
    if not np.all(np.isfinite(w2_all)):
        raise DomainError("squared frequencies must be finite")
    uniq, inverse = np.unique(w2_all, return_inverse=True)
    a1 = uniq + ctx.y[0]
    ok = a1 > 0
    vals = np.full((4, uniq.size), np.nan)
    if np.any(ok):
        w2 = uniq[ok]
        n = cfg.n_terms
        sums = _explicit_sums(ctx, w2, n)
        if cfg.tail_correction:
            tail = (_tail_analytic if ctx.tail_policy is TailPolicy.ANALYTIC else _tail_saturation)(ctx, w2, n)
            sums = sums + np.vstack(tail)
        vals[:, ok] = sums
    shape = np.shape(omega_q_sq)
    pick = [v[inverse].reshape(shape) for v in vals]
    return MatsubaraSums(
        np.asarray(omega_q_sq, dtype=float),
        (uniq + ctx.y[0])[inverse].reshape(shape),
        *pick,
    )


@dataclass
class LocalHarmonicQuantities:
    """Per-position building blocks of the local harmonic density.

    Array-valued; entries at unstable positions are NaN.  ``x2`` is NaN
    where ``omega_q_sq == 0``.
    """

    q: np.ndarray
    omega_q_sq: np.ndarray
    s_tilde: np.ndarray
    w_tilde: np.ndarray
    x2: np.ndarray
    p2: np.ndarray
    log_g: np.ndarray
    denom: np.ndarray
    a1: np.ndarray
    stability: np.ndarray
    beta: float = float("nan")
    mass: float = float("nan")

    @property
    def g_factor(self):
        return np.exp(self.log_g)

    @property
    def unstable(self):
        return self.stability == Stability.UNSTABLE


def _quantities_from_sums(ctx, sums, q=None):
    m, beta = ctx.mass, ctx.beta
    w2 = sums.omega_q_sq
    pos = sums.a1 > 0
    denom = np.where(pos, 1.0 + 2.0 * w2 * sums.s_sum, np.nan)
    stab = np.full(np.shape(w2), Stability.UNSTABLE, dtype=np.int8)
    stab[pos & (w2 >= 0)] = Stability.STABLE
    inv_ok = pos & (w2 < 0) & (denom > 0)
    stab[inv_ok] = Stability.INVERTED_STABLE
    good = stab != Stability.UNSTABLE
    bad = ~good

    def mask(a):
        a = np.array(a, dtype=float)
        a[bad] = np.nan
        return a

    s_t = mask(2.0 * sums.s_sum / (m * beta))
    w_t = mask(2.0 * sums.w_sum / (m * beta))
    with np.errstate(divide="ignore", invalid="ignore"):
        x2 = np.where(w2 != 0, 1.0 / (beta * m * w2) + s_t, np.nan)
        log_g = -0.5 * np.log(np.where(good, denom, np.nan)) + sums.log_prod
    p2 = mask((m / beta) * (1.0 + 2.0 * sums.p_sum))
    return LocalHarmonicQuantities(
        q=np.full(np.shape(w2), np.nan) if q is None else np.asarray(q, dtype=float),
        omega_q_sq=w2,
        s_tilde=s_t,
        w_tilde=w_t,
        x2=mask(x2),
        p2=p2,
        log_g=mask(log_g),
        denom=mask(denom),
        a1=sums.a1,
        stability=stab,
        beta=beta,
        mass=m,
    )


def local_quantities(ctx: BathContext, omega_q_sq, cfg=None, q=None):
    return _quantities_from_sums(ctx, matsubara_sums(ctx, omega_q_sq, cfg), q)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _require_modes(sums):
    if not np.all(sums.a1 > 0):
        raise StabilityError("mode weight A_1 = w2 + nu_1^2 + zeta_1 is not positive", n=1)


def _require_stable(lhq):
    if np.any(lhq.unstable):
        n = 1 if np.any(lhq.unstable & ~(lhq.a1 > 0)) else 0
        raise StabilityError("local harmonic path integral diverges (outside the V_P bound)", n=n)


def series_s_tilde(ctx: BathContext, omega_q_sq, cfg=None):
    """S~ = (2/(m beta)) sum_{n>=1} 1/A_n, so that <X^2> = 1/(beta m w2) + S~."""
    sums = matsubara_sums(ctx, omega_q_sq, cfg)
    _require_modes(sums)
    return _scalar(2.0 * sums.s_sum / (ctx.mass * ctx.beta))


def series_w_tilde(ctx: BathContext, omega_q_sq, cfg=None):
    """W~ = (2/(m beta)) sum_{n>=1} (-1)^n / A_n."""
    sums = matsubara_sums(ctx, omega_q_sq, cfg)
    _require_modes(sums)
    return _scalar(2.0 * sums.w_sum / (ctx.mass * ctx.beta))


def x2_p2(ctx: BathContext, omega_q_sq, cfg=None):
    """Effective ``(<X^2>, <P^2>)`` of the local oscillator.

    ``<X^2>`` is NaN for ``omega_q_sq == 0``.
    """
    lhq = local_quantities(ctx, omega_q_sq, cfg)
    _require_stable(lhq)
    return _scalar(lhq.x2), _scalar(lhq.p2)


def g_factor(ctx: BathContext, omega_q_sq, cfg=None):
    """G = D^(-1/2) prod_{n>=1} (nu_n^2 + zeta_n) / A_n."""
    lhq = local_quantities(ctx, omega_q_sq, cfg)
    _require_stable(lhq)
    return _scalar(lhq.g_factor)


def stability_check(ctx: BathContext, omega_q_sq, cfg=None):
    lhq = local_quantities(ctx, omega_q_sq, cfg)
    st = lhq.stability
    if np.ndim(st) == 0:
        return Stability(int(st))
    return st


def stability_vp(ctx: BathContext, cfg=None):
    """Smallest root x of sum_{n>=1} x / (y_n - x) = 1/2, y_n = m (nu_n^2 + zeta_n).

    With ``w2 = -x/m`` the left side equals ``(1 - D(w2)) / 2`` so the root
    is the zero of ``D`` on ``(-y_1/m, 0)``, where ``D`` is monotone.
    """
    cfg = _resolve(ctx, cfg)
    y1 = ctx.y[0]

    def denom(w2):
        s = matsubara_sums(ctx, np.array([w2]), cfg).s_sum[0]
        return 1.0 + 2.0 * w2 * s

    lo = -y1 * (1.0 - 1e-14)
    if not denom(lo) < 0:
        raise NumericError("no sign change of D below the first mode", {"y1": y1})
    root, info = optimize.brentq(denom, lo, 0.0, xtol=1e-300, rtol=1e-13,
                                 maxiter=500, full_output=True)
    if not info.converged:
        raise NumericError("V_P bisection did not converge", {"iterations": info.iterations})
    return -ctx.mass * root


# --------------------------------------------------------------------------
# density assembly


@dataclass(frozen=True)
class GridPolicy:
    """Grid construction used when ``assemble_density`` gets no grids.

    The q-range extends until the (LHA and classical) diagonal falls below
    ``tail_ratio`` times its maximum at both ends.  The eta-range is
    ``eta_sigmas`` standard deviations of the widest off-diagonal Gaussian
    among points with non-negligible weight.
    """

    n_q: int = 2001
    n_eta: int = 201
    tail_ratio: float = 1e-12
    eta_sigmas: float = 6.0
    q_bounds: tuple | None = None
    search: tuple | None = None
    n_coarse: int = 401


@dataclass
class LhaDensity:
    q_grid: np.ndarray
    eta_grid: np.ndarray
    log_unnorm: np.ndarray
    log_z: float
    rho: np.ndarray
    quantities: LocalHarmonicQuantities
    unstable_mask: np.ndarray
    derivs: tuple
    beta: float
    mass: float
    log_diag: np.ndarray
    diagnostics: list = field(default_factory=list)

    @property
    def Z(self):
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_z))

    @property
    def diagonal(self):
        """Normalized rho(q, 0), zero at masked points."""
        with np.errstate(invalid="ignore"):
            out = np.exp(self.log_diag - self.log_z)
        out[self.unstable_mask] = 0.0
        return out

    @property
    def eta_zero_index(self):
        idx = np.nonzero(self.eta_grid == 0.0)[0]
        return int(idx[0]) if idx.size else None

    def summary(self):
        return {
            "n_q": int(self.q_grid.size),
            "n_eta": int(self.eta_grid.size),
            "q_min": float(self.q_grid[0]),
            "q_max": float(self.q_grid[-1]),
            "eta_max": float(self.eta_grid[-1]) if self.eta_grid.size else 0.0,
            "log_z": float(self.log_z),
            "n_unstable": int(self.unstable_mask.sum()),
        }


def _log_diagonal(pm, ctx, q, cfg):
    v, v1, v2, v3 = pm.derivs(q)
    v, v1, v2, v3 = (np.broadcast_to(np.asarray(a, dtype=float), np.shape(q)).copy()
                     for a in (v, v1, v2, v3))
    lhq = local_quantities(ctx, v2 / ctx.mass, cfg, q=q)
    beta = ctx.beta
    with np.errstate(invalid="ignore"):
        log_diag = lhq.log_g - beta * v + beta**2 * v1**2 * lhq.s_tilde / (2.0 * lhq.denom)
    log_diag = np.where(lhq.unstable, -np.inf, log_diag)
    return log_diag, lhq, (v, v1, v2, v3)


def _trapz_log(log_f, x):
    """log of the trapezoidal integral of exp(log_f)."""
    top = np.max(log_f)
    if not np.isfinite(top):
        raise NumericError("diagonal has no finite values", {})
    return top + np.log(np.trapezoid(np.exp(log_f - top), x))


def _classical_window(pm, beta, policy):
    need = np.log(1.0 / policy.tail_ratio) + 5.0
    lo, hi = policy.search if policy.search is not None else (-1.0, 1.0)
    for _ in range(60):
        q = np.linspace(lo, hi, 4001)
        bv = beta * np.asarray(pm(q))
        bmin = bv.min()
        if bv[0] - bmin > need and bv[-1] - bmin > need:
            keep = np.nonzero(bv - bmin <= need)[0]
            return q[max(keep[0] - 1, 0)], q[min(keep[-1] + 1, q.size - 1)]
        mid, half = 0.5 * (lo + hi), hi - lo
        lo = lo - half if bv[0] - bmin <= need else lo
        hi = hi + half if bv[-1] - bmin <= need else hi
        del mid
    raise NumericError("could not bracket the Boltzmann weight of the potential", {"window": (lo, hi)})


def default_q_grid(pm: Potential, ctx: BathContext, cfg=None, policy: GridPolicy = GridPolicy()):
    """Uniform q-grid whose ends carry < tail_ratio of the peak diagonal."""
    if policy.q_bounds is not None:
        lo, hi = map(float, policy.q_bounds)
        return np.linspace(lo, hi, policy.n_q)
    c_lo, c_hi = _classical_window(pm, ctx.beta, policy)
    cut = np.log(1.0 / policy.tail_ratio)
    width = c_hi - c_lo
    lo, hi = c_lo - 0.5 * width, c_hi + 0.5 * width
    for _ in range(40):
        q = np.linspace(lo, hi, policy.n_coarse)
        log_d, _, _ = _log_diagonal(pm, ctx, q, cfg)
        top = np.max(log_d)
        keep = np.nonzero(log_d >= top - cut)[0]
        grow_lo = keep[0] <= 1
        grow_hi = keep[-1] >= q.size - 2
        if not (grow_lo or grow_hi):
            step = q[1] - q[0]
            lo = min(q[keep[0]] - step, c_lo)
            hi = max(q[keep[-1]] + step, c_hi)
            return np.linspace(lo, hi, policy.n_q)
        w = hi - lo
        lo = lo - 0.5 * w if grow_lo else lo
        hi = hi + 0.5 * w if grow_hi else hi
    raise NumericError("LHA diagonal does not decay inside the search window", {"window": (lo, hi)})


def default_eta_grid(lhq: LocalHarmonicQuantities, weights, policy: GridPolicy = GridPolicy()):
    ok = ~lhq.unstable & (weights >= 1e-10 * np.max(weights))
    sigma = 1.0 / (2.0 * np.sqrt(lhq.p2[ok]))
    half = policy.eta_sigmas * float(np.max(sigma))
    n = policy.n_eta if policy.n_eta % 2 else policy.n_eta + 1
    pos = np.linspace(0.0, half, n // 2 + 1)[1:]
    # mirrored so that eta[i] == -eta[-1 - i] bit for bit
    return np.concatenate([-pos[::-1], [0.0], pos])


def _unstable_runs(mask):
    runs = []
    i = 0
    n = mask.size
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def assemble_density(
    pm: Potential,
    ctx: BathContext,
    q_grid=None,
    eta_grid=None,
    cfg: SeriesConfig | None = None,
    policy: GridPolicy = GridPolicy(),
    weight_limit: float = 1e-6,
):
    """Normalized LHA density matrix rho(q, eta) on a (q, eta) grid.

    Unstable positions are masked.  A masked run whose estimated weight
    (run width times the largest neighbouring diagonal value) reaches
    ``weight_limit`` raises :class:`StabilityError`; smaller runs are
    reported in ``diagnostics`` and as a warning.
    """
    cfg = _resolve(ctx, cfg)
    if q_grid is None:
        q = default_q_grid(pm, ctx, cfg, policy)
    else:
        q = np.asarray(q_grid, dtype=float)
        if q.ndim != 1 or q.size < 3 or not np.all(np.diff(q) > 0):
            raise DomainError("q_grid must be one dimensional and strictly ascending")
    log_diag, lhq, derivs = _log_diagonal(pm, ctx, q, cfg)
    mask = lhq.unstable.copy()
    diagnostics = []
    if mask.all():
        raise StabilityError("every grid point is outside the V_P bound", positions=q)
    log_z = _trapz_log(np.where(mask, -np.inf, log_diag), q)
    diag = np.where(mask, 0.0, np.exp(log_diag - log_z))
    for i, j in _unstable_runs(mask):
        left = diag[i - 1] if i > 0 else 0.0
        right = diag[j + 1] if j + 1 < q.size else 0.0
        lo = q[i - 1] if i > 0 else q[i]
        hi = q[j + 1] if j + 1 < q.size else q[j]
        est = (hi - lo) * max(left, right)
        msg = f"unstable points q in [{q[i]:.6g}, {q[j]:.6g}] ({j - i + 1} pts), weight estimate {est:.3g}"
        if est >= weight_limit:
            raise StabilityError(msg, positions=q[i:j + 1])
        diagnostics.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if eta_grid is None:
        eta = default_eta_grid(lhq, diag, policy)
    else:
        eta = np.asarray(eta_grid, dtype=float)
        if eta.ndim != 1 or not np.allclose(eta, -eta[::-1], rtol=0, atol=1e-14 * max(1.0, np.abs(eta).max())):
            raise DomainError("eta_grid must be symmetric about zero")
    with np.errstate(invalid="ignore"):
        log_unnorm = log_diag[:, None] - 2.0 * lhq.p2[:, None] * (eta * eta)[None, :]
    log_unnorm[mask, :] = -np.inf
    rho = np.exp(log_unnorm - log_z)
    return LhaDensity(
        q_grid=q,
        eta_grid=eta,
        log_unnorm=log_unnorm,
        log_z=float(log_z),
        rho=rho,
        quantities=lhq,
        unstable_mask=mask,
        derivs=derivs,
        beta=ctx.beta,
        mass=ctx.mass,
        log_diag=log_diag,
        diagnostics=diagnostics,
    )
