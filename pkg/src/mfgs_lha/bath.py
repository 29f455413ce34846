"""Ohmic spectral densities and the bath-derived Matsubara sequences.

All quantities are in Hartree atomic units (hbar = 1).  For a spectral
density ``J`` and mass ``m``

    zeta_n = (1/m) int_0^inf dw J(w)/w * 2 nu_n^2 / (w^2 + nu_n^2)
    xi_n   = (1/m) int_0^inf dw J(w) * 2 w / (nu_n^2 + w^2)
    Lambda = int_0^inf dw J(w)/w

with ``nu_n = 2 pi n / beta`` and ``zeta_n = xi_0 - xi_n``.  Drude-Lorentz
sequences are closed form; the exponential cutoff ones use the auxiliary
functions of the sine and cosine integrals.  The adaptive quadrature
routines at the bottom evaluate the defining integrals directly and serve
as the independent reference.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericError

__all__ = [
    "SpectralKind",
    "SpectralDensity",
    "TailPolicy",
    "BathContext",
    "j_omega",
    "matsubara_freq",
    "zeta",
    "xi",
    "lambda_reorg",
    "bath_correlation",
    "zeta_quad",
    "xi_quad",
    "lambda_quad",
]


class SpectralKind(str, enum.Enum):
    DRUDE_LORENTZ = "drude"
    EXPONENTIAL = "exponential"


class TailPolicy(str, enum.Enum):
    """How consumers of the Matsubara tables treat indices beyond ``n_terms``.

    ``ANALYTIC`` keeps the exact ``zeta(nu)`` in the tail and integrates the
    remainder; ``ZETA_SATURATION`` replaces ``zeta_n`` by ``2 Lambda / m``.
    """

    ANALYTIC = "analytic"
    ZETA_SATURATION = "zeta_saturation"


def _aux_f(z):
    """f(z) = int_0^inf exp(-z t) / (1 + t^2) dt for z > 0."""
    si, ci = special.sici(z)
    return ci * np.sin(z) - (si - 0.5 * np.pi) * np.cos(z)


def _one_minus_z_f(z):
    """1 - z f(z), switching to the asymptotic series where it cancels."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z >= 100.0
    zb = z[big]
    inv2 = 1.0 / zb**2
    # 1 - z f(z) ~ sum_k (-1)^(k+1) (2k)! / z^(2k)
    acc = np.zeros_like(zb)
    term = np.ones_like(zb)
    for k in range(1, 7):
        term = term * (2 * k - 1) * (2 * k) * inv2
        acc += (-1) ** (k + 1) * term
    out[big] = acc
    zs = z[~big]
    out[~big] = 1.0 - zs * _aux_f(zs)
    return out


@dataclass(frozen=True)
class SpectralDensity:
    """Ohmic spectral density with a Drude-Lorentz or exponential cutoff.

    ``J(w) = (2 m gamma / pi) w exp(-w / omega_c)`` or
    ``J(w) = (2 m gamma / pi) w omega_c^2 / (w^2 + omega_c^2)``.
    """

    kind: SpectralKind
    gamma: float
    omega_c: float
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SpectralKind(self.kind))
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")
        if not self.omega_c > 0:
            raise DomainError(f"omega_c must be > 0, got {self.omega_c}")
        if not self.mass > 0:
            raise DomainError(f"mass must be > 0, got {self.mass}")

    @property
    def prefactor(self):
        return 2.0 * self.mass * self.gamma / np.pi

    def __call__(self, omega):
        w = np.asarray(omega, dtype=float)
        if np.any(w < 0):
            raise DomainError("spectral density is defined for omega >= 0")
        if self.kind is SpectralKind.DRUDE_LORENTZ:
            cut = self.omega_c**2 / (w**2 + self.omega_c**2)
        else:
            cut = np.exp(-w / self.omega_c)
        out = self.prefactor * w * cut
        return out if out.ndim else float(out)

    def reorganization(self):
        """Lambda = int J(w)/w dw."""
        if self.kind is SpectralKind.DRUDE_LORENTZ:
            return self.mass * self.gamma * self.omega_c
        return 2.0 * self.mass * self.gamma * self.omega_c / np.pi

    def zeta_saturation(self):
        """lim_{n -> inf} zeta_n = xi_0 = 2 Lambda / m."""
        return 2.0 * self.reorganization() / self.mass

    def zeta_of_nu(self, nu):
        """zeta as a function of a (continuous, non-negative) frequency."""
        nu = np.abs(np.asarray(nu, dtype=float))
        g, c = self.gamma, self.omega_c
        if self.kind is SpectralKind.DRUDE_LORENTZ:
            out = 2.0 * g * c * nu / (nu + c)
        else:
            out = np.zeros_like(nu)
            pos = nu > 0
            z = nu[pos] / c
            out[pos] = (4.0 * g * c / np.pi) * z * _aux_f(z)
        return out if out.ndim else float(out)

    def xi_of_nu(self, nu):
        """xi as a function of frequency; equals zeta_saturation() - zeta_of_nu()."""
        nu = np.abs(np.asarray(nu, dtype=float))
        g, c = self.gamma, self.omega_c
        if self.kind is SpectralKind.DRUDE_LORENTZ:
            out = 2.0 * g * c * c / (nu + c)
        else:
            out = np.full_like(nu, 4.0 * g * c / np.pi)
            pos = nu > 0
            out[pos] *= _one_minus_z_f(nu[pos] / c)
        return out if out.ndim else float(out)


def j_omega(sd: SpectralDensity, omega):
    return sd(omega)


def matsubara_freq(beta, n):
    """Bosonic Matsubara frequency 2 pi n / beta (odd in n)."""
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    if np.ndim(n):
        return 2.0 * np.pi * np.asarray(n, dtype=float) / beta
    return 2.0 * np.pi * float(n) / beta


@dataclass(frozen=True)
class BathContext:
    """Inverse temperature, bath and the cached Matsubara tables.

    ``nu``, ``zeta`` and ``y`` (= nu^2 + zeta) hold indices 1..n_terms and are
    read-only once the context exists.
    """

    beta: float
    spectral: SpectralDensity
    n_terms: int = 100_000
    tail_policy: TailPolicy = TailPolicy.ANALYTIC
    nu: np.ndarray = field(init=False, repr=False, compare=False)
    zeta_cache: np.ndarray = field(init=False, repr=False, compare=False)
    y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be > 0, got {self.beta}")
        if int(self.n_terms) < 100:
            raise DomainError(f"n_terms must be >= 100, got {self.n_terms}")
        object.__setattr__(self, "n_terms", int(self.n_terms))
        object.__setattr__(self, "tail_policy", TailPolicy(self.tail_policy))
        nu = 2.0 * np.pi * np.arange(1, self.n_terms + 1) / self.beta
        z = np.asarray(self.spectral.zeta_of_nu(nu))
        y = nu * nu + z
        for arr in (nu, z, y):
            arr.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "zeta_cache", z)
        object.__setattr__(self, "y", y)

    @property
    def mass(self):
        return self.spectral.mass

    @property
    def temperature(self):
        return 1.0 / self.beta

    def nu_of(self, x):
        """Matsubara frequency at a real-valued index."""
        return 2.0 * np.pi * np.asarray(x, dtype=float) / self.beta

    def with_terms(self, n_terms):
        return BathContext(self.beta, self.spectral, n_terms, self.tail_policy)


def zeta(ctx: BathContext, n):
    """zeta_|n| from the cache (closed form beyond it)."""
    k = np.abs(np.asarray(n, dtype=int))
    out = np.zeros(k.shape)
    inside = (k >= 1) & (k <= ctx.n_terms)
    out[inside] = ctx.zeta_cache[k[inside] - 1]
    beyond = k > ctx.n_terms
    if np.any(beyond):
        out[beyond] = ctx.spectral.zeta_of_nu(ctx.nu_of(k[beyond]))
    return out if out.ndim else float(out)


def xi(ctx: BathContext, n):
    k = np.abs(np.asarray(n, dtype=float))
    out = np.asarray(ctx.spectral.xi_of_nu(ctx.nu_of(k)), dtype=float)
    return out if out.ndim else float(out)


def lambda_reorg(sd: SpectralDensity):
    return sd.reorganization()


def _cosh_ratio(w, beta, tau):
    # cosh(w (beta/2 - tau)) / sinh(w beta / 2) without overflow
    num = np.exp(-w * tau) + np.exp(-w * (beta - tau))
    return num / (-np.expm1(-w * beta))


def bath_correlation(ctx: BathContext, tau):
    """Imaginary-time kernel K(tau) by adaptive quadrature.

    Diverges (returns ``inf``) at tau in {0, beta} for a Drude-Lorentz bath,
    where ``J(w) ~ 1/w`` leaves the integral logarithmically divergent.
    """
    beta = ctx.beta
    if not 0.0 <= tau <= beta:
        raise DomainError(f"tau must lie in [0, beta={beta}], got {tau}")
    sd = ctx.spectral
    if sd.gamma == 0:
        return 0.0
    edge = min(tau, beta - tau)
    if edge == 0 and sd.kind is SpectralKind.DRUDE_LORENTZ:
        return np.inf

    def integrand(w):
        if w == 0:
            return sd.prefactor * 2.0 / beta
        return sd(w) * _cosh_ratio(w, beta, tau)

    # J(w) e^{-w edge} decays on the scale 1/edge; split there and at the cutoff
    scales = sorted({sd.omega_c, 1.0 / edge if edge > 0 else sd.omega_c})
    return _quad_split(integrand, scales, "K(tau)")


def _quad_split(f, breaks, label, epsrel=1e-12):
    pts = [0.0] + [b for b in breaks if b > 0] + [np.inf]
    total = 0.0
    err = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        val, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=epsrel, limit=1000)
        total += val
        err += e
    if total != 0 and err > 1e-10 * abs(total):
        raise NumericError(
            f"quadrature for {label} did not converge",
            {"value": total, "abserr": err, "breaks": list(pts)},
        )
    return total


def zeta_quad(sd: SpectralDensity, nu):
    """zeta at frequency nu from its defining integral."""
    nu = abs(float(nu))
    if nu == 0 or sd.gamma == 0:
        return 0.0
    pre = sd.prefactor / sd.mass

    if sd.kind is SpectralKind.DRUDE_LORENTZ:
        def integrand(w):
            return pre * sd.omega_c**2 / (w * w + sd.omega_c**2) * 2 * nu * nu / (w * w + nu * nu)
    else:
        def integrand(w):
            return pre * np.exp(-w / sd.omega_c) * 2 * nu * nu / (w * w + nu * nu)

    return _quad_split(integrand, sorted({nu, sd.omega_c}), "zeta")


def xi_quad(sd: SpectralDensity, nu):
    """xi at frequency nu from its defining integral."""
    nu = abs(float(nu))
    if sd.gamma == 0:
        return 0.0
    pre = sd.prefactor / sd.mass

    if sd.kind is SpectralKind.DRUDE_LORENTZ:
        def integrand(w):
            return pre * sd.omega_c**2 / (w * w + sd.omega_c**2) * 2 * w * w / (w * w + nu * nu)
    else:
        def integrand(w):
            return pre * np.exp(-w / sd.omega_c) * 2 * w * w / (w * w + nu * nu)

    breaks = sorted({nu, sd.omega_c} - {0.0})
    return _quad_split(integrand, breaks, "xi")


def lambda_quad(sd: SpectralDensity):
    if sd.gamma == 0:
        return 0.0

    def integrand(w):
        if w == 0:
            return sd.prefactor
        return sd(w) / w

    return _quad_split(integrand, [sd.omega_c], "Lambda")
