import numpy as np
import pytest

from conftest import drude_ctx, exp_ctx, rel
from mfgs_lha.errors import ConvergenceError, DomainError
from mfgs_lha.lha_core import local_quantities
from mfgs_lha.oracle import (
    GridHamiltonianSpec,
    classical_moments,
    fourier_kernel,
    gibbs_converged,
    gibbs_grid,
    harmonic_moments,
    ho_exact_mfgs,
    quadrature_crosschecks,
    usc_reference,
)
from mfgs_lha.bath import bath_correlation
from mfgs_lha.potential import (
    AsymmetricQuarticDW,
    Harmonic,
    Quartic,
    Rescaled,
    barrier_position,
    proton_potential,
)

# frozen from converged oracle runs
QUARTIC_2_5E_3_GAMMA0 = (0.6468890439807745, -0.0075046205469144756)
QUARTIC_5E_2_GAMMA0 = (0.5377652144003526, -0.044550497758814256)
PROTON_M_USC = 3.779973653084124e-08
DW4_P_USC = 0.2588269287320584


def test_spec_validation():
    with pytest.raises(DomainError):
        GridHamiltonianSpec(-1, 1, 100, 1.0, Harmonic())
    with pytest.raises(DomainError):
        GridHamiltonianSpec(1, -1, 301, 1.0, Harmonic())
    spec = GridHamiltonianSpec(-1, 1, 301, 1.0, Harmonic())
    assert spec.refined().n_points == 601 and np.array_equal(spec.refined().grid[::2], spec.grid)


def test_harmonic_spectrum():
    r = gibbs_grid(GridHamiltonianSpec(-10, 10, 20001, 1.0, Harmonic(0.0, 0.5)), 2.0, check=False)
    assert np.allclose(r.energies[:3], [0.5, 1.5, 2.5], rtol=0, atol=1e-6)


def test_harmonic_thermal_variance():
    r = gibbs_converged(Harmonic(0.0, 0.5), 1.0, 2.0, (-10, 10))
    assert rel(r.observables["q2"], 0.5 / np.tanh(1.0)) < 1e-6
    assert all(v < 1e-6 for v in r.richardson.values())


def test_narrow_interval_rejected():
    with pytest.raises(ConvergenceError) as err:
        gibbs_grid(GridHamiltonianSpec(-2, 2, 401, 1.0, Harmonic(0.0, 0.5)), 2.0)
    assert "edge_ratio" in err.value.diagnostics


def test_coarse_grid_fails_refinement():
    with pytest.raises(ConvergenceError) as err:
        gibbs_grid(GridHamiltonianSpec(-10, 10, 201, 1.0, Harmonic(0.0, 0.5)), 2.0)
    assert "relative_change" in err.value.diagnostics


@pytest.mark.parametrize(
    "a, ref, bounds",
    [(2.5e-3, QUARTIC_2_5E_3_GAMMA0, (-8, 8)), (5e-2, QUARTIC_5E_2_GAMMA0, (-6, 6))],
)
def test_quartic_zero_coupling_regression(a, ref, bounds):
    r = gibbs_converged(Quartic(1, 1, a), 1.0, 2.0, bounds)
    assert rel(r.observables["kappa2"], ref[0]) < 1e-6
    assert rel(r.observables["kappa4"], ref[1]) < 1e-4
    assert r.observables["kappa4"] < 0


def test_harmonic_oracle_coth():
    hm = harmonic_moments(1.0, 2.0, 0.0, 5.0)
    assert rel(hm.x2, 0.5 / np.tanh(1.0)) < 1e-12
    assert rel(hm.p2, 0.5 / np.tanh(1.0)) < 1e-12
    assert rel(hm.g, (1 / np.sinh(1.0)) / np.sqrt(1 / np.tanh(1.0))) < 1e-12


@pytest.mark.parametrize("gamma", [0.0, 0.01, 0.1, 1.0, 10.0, 100.0])
@pytest.mark.parametrize("w2", [0.05, 1.0, 20.0])
def test_harmonic_oracle_matches_series(gamma, w2):
    ctx = drude_ctx(gamma)
    lhq = local_quantities(ctx, w2)
    hm = harmonic_moments(w2, 2.0, gamma, 5.0)
    assert rel(lhq.x2, hm.x2) < 1e-9
    assert rel(lhq.p2, hm.p2) < 1e-9
    assert rel(lhq.g_factor, hm.g) < 1e-9
    assert rel(lhq.w_tilde, 2 * hm.w_sum / 2.0) < 1e-9


@pytest.mark.parametrize("gamma", [0.0, 1e-2, 1.0, 1e2, 1e4])
def test_uncertainty_bound(gamma):
    hm = harmonic_moments(1.0, 2.0, gamma, 5.0)
    assert hm.x2 * hm.p2 >= 0.25


def test_ho_density_shape():
    ctx = drude_ctx(0.3)
    q = np.linspace(-6, 6, 301)
    eta = np.linspace(-1, 1, 11)
    rho, hm = ho_exact_mfgs(1.0, ctx, q, eta, linear=0.3)
    assert rho.shape == (301, 11)
    assert np.argmax(rho[:, 5]) == np.argmin(np.abs(q + 0.3))
    assert np.trapezoid(rho[:, 5], q) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(DomainError):
        ho_exact_mfgs(0.0, ctx, q, eta)
    with pytest.raises(DomainError):
        ho_exact_mfgs(1.0, exp_ctx(0.3), q, eta)


def test_usc_harmonic_variance():
    q = np.linspace(-10, 10, 4001)
    rho = usc_reference(Harmonic(0.0, 0.5), 2.0, q)
    assert np.trapezoid(q * q * rho, q) == pytest.approx(0.5, rel=1e-8)


def test_usc_proton_regression():
    pm = proton_potential()
    qb = barrier_position(pm, (-2, 2))
    c = classical_moments(pm, 1 / 0.00095, (-3, 3.5), qb)
    assert rel(c["pop_right"], PROTON_M_USC) < 1e-6


def test_usc_rescaled_double_well_regression():
    pm = Rescaled(4.0, AsymmetricQuarticDW(0.5, 0.5, 0.1))
    qb = barrier_position(pm, (-8, 8))
    c = classical_moments(pm, 2.0, (-12, 12), qb)
    assert rel(c["pop_right"], DW4_P_USC) < 1e-6


@pytest.mark.parametrize("make", [drude_ctx, exp_ctx])
def test_quadrature_crosschecks_pass(make):
    report = quadrature_crosschecks(make(0.5))
    for name, (dev, tol, ok) in report.items():
        if name.startswith("K(") and make is exp_ctx:
            continue
        assert ok, (name, dev, tol)


def test_crosscheck_zero_coupling():
    assert quadrature_crosschecks(drude_ctx(0.0)) == {"zero coupling": (0.0, 0.0, True)}


def test_fourier_kernel_end_correction():
    ctx = drude_ctx(0.5)
    ref = bath_correlation(ctx, 1.0)
    plain = fourier_kernel(ctx, 1.0, 1000, end_weight=1.0)
    half = fourier_kernel(ctx, 1.0, 1000)
    assert rel(half, ref) < 1e-4 < rel(plain, ref)
