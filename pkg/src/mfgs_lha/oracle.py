"""Reference computations that share no series code with :mod:`lha_core`.

* :func:`gibbs_grid` diagonalizes a finite difference Hamiltonian for the
  uncoupled thermal state and checks itself by halving the grid spacing.
* :func:`ho_exact_mfgs` evaluates the harmonic mean force Gibbs state of a
  Drude-Lorentz bath in closed form: the Matsubara sums become digamma
  functions and the product a ratio of gamma functions, through the roots
  of the cubic ``(nu + Omega) A(nu)``.
* :func:`usc_reference` is the classical Boltzmann diagonal.
* :func:`quadrature_crosschecks` compares the bath closed forms with direct
  quadrature of their defining integrals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from . import bath
from .bath import BathContext, SpectralKind
from .errors import ConvergenceError, DomainError
from .potential import Potential

__all__ = [
    "GridHamiltonianSpec",
    "GibbsResult",
    "HarmonicMoments",
    "gibbs_grid",
    "gibbs_observables",
    "harmonic_moments",
    "ho_exact_mfgs",
    "usc_reference",
    "classical_moments",
    "quadrature_crosschecks",
    "fourier_kernel",
    "gibbs_converged",
]


@dataclass(frozen=True)
class GridHamiltonianSpec:
    q_min: float
    q_max: float
    n_points: int
    mass: float
    potential: Potential

    def __post_init__(self):
        if self.n_points < 201:
            raise DomainError("n_points must be >= 201")
        if not self.q_max > self.q_min:
            raise DomainError("q_max must exceed q_min")
        if not self.mass > 0:
            raise DomainError("mass must be > 0")

    @property
    def grid(self):
        return np.linspace(self.q_min, self.q_max, self.n_points)

    def refined(self):
        """Same interval with half the spacing (the old nodes are kept)."""
        return GridHamiltonianSpec(self.q_min, self.q_max, 2 * self.n_points - 1, self.mass, self.potential)


@dataclass
class GibbsResult:
    q: np.ndarray
    rho: np.ndarray
    energies: np.ndarray
    observables: dict
    richardson: dict = field(default_factory=dict)
    spec: GridHamiltonianSpec | None = None


def gibbs_observables(q, rho, q_b=None):
    """Centered cumulants and (optionally) the population past ``q_b``."""
    m = [np.trapezoid(q**k * rho, q) for k in range(5)]
    mu = m[1]
    c2 = np.trapezoid((q - mu) ** 2 * rho, q)
    c4 = np.trapezoid((q - mu) ** 4 * rho, q) - 3 * c2 * c2
    out = {"mean": mu, "q2": m[2], "q4": m[4], "kappa2": c2, "kappa4": c4}
    if q_b is not None:
        out["pop_right"] = np.trapezoid(np.where(q >= q_b, rho, 0.0), q)
        k = int(np.searchsorted(q, q_b))
        if 0 < k < q.size:
            # exact tail integral of the piecewise linear interpolant
            fb = rho[k - 1] + (rho[k] - rho[k - 1]) * (q_b - q[k - 1]) / (q[k] - q[k - 1])
            out["pop_right"] = np.trapezoid(rho[k:], q[k:]) + 0.5 * (fb + rho[k]) * (q[k] - q_b)
    return out


def _solve(spec, beta, n_energy=40.0):
    q = spec.grid
    h = q[1] - q[0]
    inner = q[1:-1]
    kin = 1.0 / (2.0 * spec.mass * h * h)
    diag = 2.0 * kin + np.asarray(spec.potential(inner), dtype=float)
    off = np.full(inner.size - 1, -kin)
    e0 = linalg.eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))[0]
    hi = e0 + n_energy / beta
    w, v = linalg.eigh_tridiagonal(diag, off, select="v", select_range=(-np.inf, hi))
    boltz = np.exp(-beta * (w - w[0]))
    dens = (v * v) @ boltz
    rho = np.zeros(q.size)
    rho[1:-1] = dens / h
    rho /= np.trapezoid(rho, q)
    return q, rho, w


def gibbs_grid(spec: GridHamiltonianSpec, beta, q_b=None, rtol=1e-6, check=True, edge_tol=1e-12):
    """Position diagonal of exp(-beta H) / Tr for the uncoupled system.

    The kinetic term is the second order central difference with hard
    walls at the interval ends.  With ``check`` the calculation is repeated
    at half the spacing and every reported observable must agree within
    ``rtol``; the finer result is returned.  :class:`ConvergenceError` is
    raised when the boundary weight or the refinement check fails.
    """
    if not beta > 0:
        raise DomainError("beta must be > 0")
    q, rho, w = _solve(spec, beta)
    edge = max(rho[1], rho[-2]) / rho.max()
    if edge >= edge_tol:
        raise ConvergenceError(
            "grid interval too narrow for the thermal state",
            {"edge_ratio": float(edge), "q_min": spec.q_min, "q_max": spec.q_max},
        )
    obs = gibbs_observables(q, rho, q_b)
    result = GibbsResult(q, rho, w, obs, spec=spec)
    if not check:
        return result
    fine = spec.refined()
    qf, rf, wf = _solve(fine, beta)
    obs_f = gibbs_observables(qf, rf, q_b)
    rel = {}
    for k, v in obs_f.items():
        scale = abs(v)
        if k == "mean":
            # measured against the width; the mean of a symmetric state is round-off
            rel[k] = abs(v - obs[k]) / np.sqrt(obs_f["kappa2"])
            continue
        if k == "kappa4":
            # kappa4 of a near-Gaussian state is a cancellation; floor its scale at kappa2^2
            scale = max(scale, obs_f["kappa2"] ** 2)
        rel[k] = abs(v - obs[k]) / scale if scale > 0 else abs(v - obs[k])
    bad = {k: r for k, r in rel.items() if r >= rtol}
    if bad:
        raise ConvergenceError(
            "halving the grid spacing changed observables beyond tolerance",
            {"relative_change": rel, "n_points": spec.n_points},
        )
    return GibbsResult(qf, rf, wf, obs_f, richardson=rel, spec=fine)


def gibbs_converged(pm: Potential, mass, beta, bounds, q_b=None, n_start=2001, n_max=64001, rtol=1e-6):
    """:func:`gibbs_grid` on ``bounds`` with the point count doubled until
    the refinement check passes."""
    n = int(n_start)
    last = None
    while n <= n_max:
        spec = GridHamiltonianSpec(bounds[0], bounds[1], n, mass, pm)
        try:
            return gibbs_grid(spec, beta, q_b=q_b, rtol=rtol)
        except ConvergenceError as exc:
            if "edge_ratio" in exc.diagnostics:
                raise
            last = exc
        n = 2 * n - 1
    raise ConvergenceError(
        f"grid refinement did not converge up to {n_max} points",
        last.diagnostics if last is not None else {},
    )


# ---------------------------------------------------------------------------
# harmonic oscillator in a Drude-Lorentz bath


@dataclass(frozen=True)
class HarmonicMoments:
    x2: float
    p2: float
    g: float
    s_sum: float
    w_sum: float


def _residues(num, roots, dpoly):
    return np.polyval(num, roots) / np.polyval(dpoly, roots)


def harmonic_moments(omega_sq, beta, gamma, omega_c, mass=1.0):
    """Closed-form Matsubara sums for a Drude-Lorentz bath.

    Writing ``A(nu) = P(nu) / (nu + Omega)`` with the cubic
    ``P = nu^3 + Omega nu^2 + (w2 + 2 gamma Omega) nu + w2 Omega``, the
    partial fraction expansion over the roots ``r_i`` of ``P`` turns each
    sum over ``n >= 1`` into digamma values at ``1 - r_i / c``, ``c = 2 pi / beta``.
    """
    if not omega_sq > 0:
        raise DomainError("the harmonic oracle needs omega^2 > 0")
    c = 2.0 * np.pi / beta
    w2, om = float(omega_sq), float(omega_c)
    P = np.array([1.0, om, w2 + 2.0 * gamma * om, w2 * om])
    dP = np.polyder(P)
    r = np.roots(P).astype(complex)
    z = -r / c

    def dsum(num):
        # sum_{n>=1} num(nu_n)/P(nu_n), deg num <= 1
        res = _residues(num, r, dP)
        return float(np.real(-np.sum(res * special.digamma(1.0 + z)) / c))

    s = dsum(np.array([1.0, om]))
    alt_res = _residues(np.array([1.0, om]), r, dP)
    w = float(np.real(np.sum(alt_res * 0.5 * (special.digamma((z + 1.0) / 2.0)
                                               - special.digamma(z / 2.0 + 1.0))) / c))
    p = dsum(np.array([w2 + 2.0 * gamma * om, w2 * om]))
    # prod (nu^2 + zeta)/A = prod nu (nu^2 + Omega nu + 2 gamma Omega) / P(nu)
    s_roots = np.concatenate([[0.0], np.roots([1.0, om, 2.0 * gamma * om])]).astype(complex)
    log_prod = np.real(np.sum(special.loggamma(1.0 + z)) - np.sum(special.loggamma(1.0 - s_roots / c)))
    x2 = 1.0 / (beta * mass * w2) + 2.0 * s / (mass * beta)
    p2 = (mass / beta) * (1.0 + 2.0 * p)
    d = 1.0 + 2.0 * w2 * s
    g = float(np.exp(-0.5 * np.log(d) + log_prod))
    return HarmonicMoments(x2=float(x2), p2=float(p2), g=g, s_sum=s, w_sum=w)


def ho_exact_mfgs(omega, ctx: BathContext, q_grid, eta_grid, linear=0.0):
    """Exact harmonic density rho(q, eta) for V = m w^2 q^2 / 2 + linear q.

    The diagonal is normalized; the off-diagonal decays as
    ``exp(-2 <P^2> eta^2)``.  Works for a Drude-Lorentz bath of any
    coupling, and for either kind at zero coupling.
    """
    if not omega > 0:
        raise DomainError("omega must be > 0")
    sd = ctx.spectral
    if sd.gamma > 0 and sd.kind is not SpectralKind.DRUDE_LORENTZ:
        raise DomainError("closed-form oracle is limited to the Drude-Lorentz bath")
    hm = harmonic_moments(omega * omega, ctx.beta, sd.gamma, sd.omega_c, sd.mass)
    q = np.asarray(q_grid, dtype=float)
    eta = np.asarray(eta_grid, dtype=float)
    q0 = -linear / (sd.mass * omega * omega)
    diag = np.exp(-((q - q0) ** 2) / (2.0 * hm.x2)) / np.sqrt(2.0 * np.pi * hm.x2)
    return diag[:, None] * np.exp(-2.0 * hm.p2 * eta * eta)[None, :], hm


# ---------------------------------------------------------------------------
# classical reference


def usc_reference(pm: Potential, beta, q_grid):
    """Normalized exp(-beta V) on ``q_grid`` (trapezoidal)."""
    q = np.asarray(q_grid, dtype=float)
    bv = beta * np.asarray(pm(q), dtype=float)
    w = np.exp(-(bv - bv.min()))
    return w / np.trapezoid(w, q)


def classical_moments(pm: Potential, beta, bounds, q_b=None, n=200_001):
    """Classical observables from a fine trapezoid of exp(-beta V)."""
    q = np.linspace(bounds[0], bounds[1], n)
    return gibbs_observables(q, usc_reference(pm, beta, q), q_b)


# ---------------------------------------------------------------------------
# bath cross checks


def quadrature_crosschecks(ctx: BathContext, n_max=100, fourier_terms=1000):
    """Bath closed forms against direct quadrature.

    Returns ``{identity: (max relative deviation, tolerance, passed)}``.
    """
    sd = ctx.spectral
    report = {}

    def rel(a, b):
        return abs(a - b) / abs(b) if b != 0 else abs(a - b)

    if sd.gamma == 0:
        return {"zero coupling": (0.0, 0.0, True)}
    ns = np.arange(1, n_max + 1)
    devs = [rel(bath.zeta(ctx, int(n)), bath.zeta_quad(sd, bath.matsubara_freq(ctx.beta, int(n)))) for n in ns]
    report["zeta closed form"] = (max(devs), 1e-10, max(devs) <= 1e-10)
    d = rel(bath.lambda_reorg(sd), bath.lambda_quad(sd))
    report["Lambda closed form"] = (d, 1e-10, d <= 1e-10)
    x0 = bath.xi_quad(sd, 0.0)
    devs = []
    for n in (1, 5, 50):
        nu = bath.matsubara_freq(ctx.beta, n)
        devs.append(rel(x0 - bath.xi_quad(sd, nu), bath.zeta_quad(sd, nu)))
    report["zeta = xi_0 - xi_n"] = (max(devs), 1e-9, max(devs) <= 1e-9)
    d = rel(fourier_kernel(ctx, 0.5 * ctx.beta, fourier_terms), bath.bath_correlation(ctx, 0.5 * ctx.beta))
    report["K(beta/2) Fourier series"] = (d, 1e-4, d <= 1e-4)
    return report


def fourier_kernel(ctx: BathContext, tau, n_max=1000, end_weight=0.5):
    """(m/beta) sum_{|k|<=n_max} xi_k exp(i nu_k tau).

    The outermost pair carries weight ``end_weight``; 1/2 is the trapezoid
    end correction that cancels the leading oscillating truncation error
    of the slowly decaying Drude-Lorentz coefficients.
    """
    sd = ctx.spectral
    k = np.arange(1, n_max + 1)
    nu = bath.matsubara_freq(ctx.beta, k)
    terms = np.asarray(sd.xi_of_nu(nu)) * np.cos(nu * tau)
    terms[-1] *= end_weight
    return float(sd.mass / ctx.beta * (sd.xi_of_nu(0.0) + 2.0 * np.sum(terms)))
