import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfgs_lha import bath
from mfgs_lha.bath import SpectralDensity, SpectralKind, TailPolicy
from mfgs_lha.errors import DomainError
from mfgs_lha.oracle import fourier_kernel

from conftest import drude_ctx, exp_ctx, rel

DL = SpectralKind.DRUDE_LORENTZ
EX = SpectralKind.EXPONENTIAL


def test_j_omega_drude_at_cutoff():
    sd = SpectralDensity(DL, 0.5, 5.0, 1.0)
    assert bath.j_omega(sd, 5.0) == pytest.approx(2.5 / np.pi, rel=1e-15)


@pytest.mark.parametrize("kind", [DL, EX])
def test_j_omega_vanishes_at_zero_frequency(kind):
    assert bath.j_omega(SpectralDensity(kind, 0.7, 3.0, 2.0), 0.0) == 0.0


def test_j_omega_zero_coupling():
    sd = SpectralDensity(EX, 0.0, 5.0)
    assert np.all(bath.j_omega(sd, np.linspace(0, 50, 11)) == 0.0)


def test_j_omega_exponential_form():
    sd = SpectralDensity(EX, 0.3, 2.0, 1.5)
    w = 1.7
    assert bath.j_omega(sd, w) == pytest.approx(2 * 1.5 * 0.3 / np.pi * w * np.exp(-w / 2.0), rel=1e-15)


def test_j_omega_negative_frequency_rejected():
    with pytest.raises(DomainError):
        bath.j_omega(SpectralDensity(DL, 0.5, 5.0), -1.0)


@pytest.mark.parametrize("gamma, omega_c, mass", [(-0.1, 1.0, 1.0), (0.1, 0.0, 1.0), (0.1, 1.0, -2.0)])
def test_spectral_density_invariants(gamma, omega_c, mass):
    with pytest.raises(DomainError):
        SpectralDensity(DL, gamma, omega_c, mass)


@pytest.mark.parametrize("n, expected", [(1, np.pi), (0, 0.0), (-3, -3 * np.pi)])
def test_matsubara_freq(n, expected):
    assert bath.matsubara_freq(2.0, n) == pytest.approx(expected, abs=1e-15)


def test_matsubara_freq_needs_positive_beta():
    with pytest.raises(DomainError):
        bath.matsubara_freq(0.0, 1)


def test_zeta_zero_index_and_coupling():
    ctx = drude_ctx(0.5, n_terms=200)
    assert bath.zeta(ctx, 0) == 0.0
    assert np.all(bath.zeta(drude_ctx(0.0, n_terms=200), np.arange(1, 50)) == 0.0)


def test_zeta_drude_closed_form_matches_quadrature():
    ctx = drude_ctx(0.5, n_terms=200)
    for n in range(1, 101):
        nu = bath.matsubara_freq(2.0, n)
        assert rel(bath.zeta(ctx, n), bath.zeta_quad(ctx.spectral, nu)) <= 1e-10
        assert bath.zeta(ctx, n) == pytest.approx(2 * 0.5 * 5 * nu / (nu + 5), rel=1e-14)


@pytest.mark.parametrize("nu", [0.01, 0.5, 3.0, 5.0, 40.0, 400.0, 4000.0])
def test_zeta_exponential_closed_form_matches_quadrature(nu):
    sd = SpectralDensity(EX, 0.5, 5.0, 1.3)
    assert rel(sd.zeta_of_nu(nu), bath.zeta_quad(sd, nu)) <= 1e-10
    assert rel(sd.xi_of_nu(nu), bath.xi_quad(sd, nu)) <= 1e-10


@pytest.mark.parametrize("z", [99.9, 100.0, 100.1, 1e4])
def test_exponential_asymptotic_branch_matches_quadrature(z):
    sd = SpectralDensity(EX, 1.0, 1.0)
    assert rel(sd.xi_of_nu(z), bath.xi_quad(sd, z)) <= 1e-10


def test_zeta_beyond_table_uses_closed_form():
    ctx = drude_ctx(0.5, n_terms=100)
    assert bath.zeta(ctx, 150) == pytest.approx(ctx.spectral.zeta_of_nu(bath.matsubara_freq(2.0, 150)), rel=1e-15)


@pytest.mark.parametrize("n", [1, 5, 50])
def test_xi_identity_by_quadrature(n):
    sd = SpectralDensity(DL, 0.5, 5.0)
    nu = bath.matsubara_freq(2.0, n)
    lhs = bath.xi_quad(sd, 0.0) - bath.xi_quad(sd, nu)
    assert rel(lhs, bath.zeta_quad(sd, nu)) <= 1e-9


def test_xi_zero_coupling():
    assert np.all(bath.xi(drude_ctx(0.0, n_terms=100), np.arange(0, 10)) == 0.0)


def test_xi_decays_monotonically():
    ctx = drude_ctx(0.5, n_terms=100)
    vals = bath.xi(ctx, np.array([10, 100, 1000, 10_000]))
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] < 1e-3 * bath.xi(ctx, 0)


def test_lambda_closed_forms():
    d = SpectralDensity(DL, 0.5, 5.0, 1.0)
    e = SpectralDensity(EX, 0.5, 5.0, 1.0)
    assert bath.lambda_reorg(d) == pytest.approx(2.5, rel=1e-15)
    assert bath.lambda_reorg(e) == pytest.approx(5 / np.pi, rel=1e-15)
    assert rel(bath.lambda_reorg(d), bath.lambda_quad(d)) <= 1e-10
    assert rel(bath.lambda_reorg(e), bath.lambda_quad(e)) <= 1e-10
    assert bath.lambda_reorg(SpectralDensity(DL, 0.0, 5.0)) == 0.0


@pytest.mark.parametrize("tau", [0.1, 0.37, 0.8, 1.3])
def test_bath_correlation_symmetric(tau):
    ctx = drude_ctx(0.5, n_terms=100)
    assert bath.bath_correlation(ctx, tau) == pytest.approx(bath.bath_correlation(ctx, 2.0 - tau), rel=1e-12)


def test_bath_correlation_zero_coupling_and_domain():
    assert bath.bath_correlation(drude_ctx(0.0, n_terms=100), 0.4) == 0.0
    with pytest.raises(DomainError):
        bath.bath_correlation(drude_ctx(0.5, n_terms=100), 2.5)
    with pytest.raises(DomainError):
        bath.bath_correlation(drude_ctx(0.5, n_terms=100), -0.1)


@pytest.mark.parametrize("make", [drude_ctx, exp_ctx])
@pytest.mark.parametrize("tau", [0.3, 0.7, 1.0])
def test_bath_correlation_fourier_series(make, tau):
    ctx = make(0.5, n_terms=100)
    assert rel(fourier_kernel(ctx, tau, 1000), bath.bath_correlation(ctx, tau)) <= 1e-4


def test_zeta_monotone_in_index():
    for make in (drude_ctx, exp_ctx):
        z = make(0.5, n_terms=1000).zeta_cache
        assert z[0] > 0 and np.all(np.diff(z) > 0)


@pytest.mark.parametrize("make", [drude_ctx, exp_ctx])
def test_zeta_saturates_at_twice_reorganization(make):
    ctx = make(0.5, n_terms=10_000)
    target = 2 * bath.lambda_reorg(ctx.spectral) / ctx.mass
    dev = np.abs(ctx.zeta_cache[[9, 99, 999, 9999]] / target - 1)
    assert np.all(np.diff(dev) < 0)
    assert dev[-1] < 1e-3


@settings(max_examples=40, deadline=None)
@given(gamma=st.floats(1e-3, 1e3), n=st.integers(1, 10_000), kind=st.sampled_from([DL, EX]))
def test_zeta_linear_in_gamma(gamma, n, kind):
    nu = bath.matsubara_freq(2.0, n)
    one = SpectralDensity(kind, gamma, 5.0).zeta_of_nu(nu)
    two = SpectralDensity(kind, 2 * gamma, 5.0).zeta_of_nu(nu)
    assert two == pytest.approx(2 * one, rel=4 * np.finfo(float).eps)


def test_context_tables_are_read_only():
    ctx = drude_ctx(0.5, n_terms=100)
    with pytest.raises(ValueError):
        ctx.zeta_cache[0] = 1.0
    assert ctx.tail_policy is TailPolicy.ANALYTIC
    assert np.all(np.diff(ctx.nu) > 0)


def test_context_validation():
    with pytest.raises(DomainError):
        drude_ctx(0.5, beta=-1.0)
    with pytest.raises(DomainError):
        drude_ctx(0.5, n_terms=10)
