import math

import numpy as np
import pytest
from scipy import integrate

from qsplab.encoding import logical_qubit
from qsplab.fock import CutoffError, StateVector, expectation, make_number, make_parity, make_sign_q
from qsplab.states import (
    ThermalParams,
    DephasingParams,
    coherent_state,
    default_cutoff,
    dephase,
    dephase_trajectory,
    displaced_thermal,
    init_infidelity_analytic,
    sample_coherent_ensemble,
    thermal_state,
)


def test_params_validation():
    with pytest.raises(ValueError):
        ThermalParams(-0.1, 1.0)
    with pytest.raises(ValueError):
        DephasingParams(-1.0)


def test_thermal_state():
    assert np.allclose(thermal_state(0.0, 10).matrix, np.diag([1] + [0] * 9))
    rho = thermal_state(1.0, 100)
    assert np.real(expectation(make_number(100), rho)) == pytest.approx(1.0, abs=1e-8)
    for n_bar in (0.5, 1.0, 2.0):
        assert thermal_state(n_bar, 150).purity() == pytest.approx(1 / (2 * n_bar + 1), abs=1e-9)


def test_thermal_tail_check():
    with pytest.raises(CutoffError):
        thermal_state(2.0, 10)


def test_displaced_thermal_basics():
    assert np.allclose(displaced_thermal(ThermalParams(0.5, 0.0), 40).matrix, thermal_state(0.5, 40).matrix)
    rho = displaced_thermal(ThermalParams(0.0, 2.0), 40)
    assert np.real(expectation(make_number(40), rho)) == pytest.approx(4.0, abs=1e-8)
    assert rho.purity() == pytest.approx(1.0, abs=1e-9)
    assert abs(rho.trace() - 1) <= 1e-9


@pytest.mark.parametrize("n_bar", [0.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
def test_init_infidelity_matches_erfc(alpha, n_bar):
    rho = displaced_thermal(ThermalParams(n_bar, alpha))
    x = logical_qubit(rho).bloch()[0]
    assert 0.5 * (1 - x) == pytest.approx(0.5 * math.erfc(alpha / math.sqrt(n_bar + 0.5)), abs=1e-4)


def test_init_infidelity_analytic():
    assert init_infidelity_analytic(0.7, 0.0) == 0.5
    assert init_infidelity_analytic(0.5, 50.0) == 0.0
    for n_bar in (0.0, 0.5, 2.0):
        val = init_infidelity_analytic(n_bar, math.sqrt(3) * math.sqrt(n_bar + 0.5))
        assert val == pytest.approx(0.5 * math.erfc(math.sqrt(3)), rel=1e-12)
        assert val == pytest.approx(7.2e-3, abs=5e-5)


@pytest.mark.parametrize("alpha,n_bar", [(0.5, 0.0), (1.0, 2.0), (3.0, 0.5), (4.0, 2.0)])
def test_default_cutoff_tail(alpha, n_bar):
    d = default_cutoff(alpha, n_bar)
    assert d >= max(16, math.ceil(2.5 * (alpha + math.sqrt(3 * n_bar)) ** 2 + 10))
    rho = displaced_thermal(ThermalParams(n_bar, alpha), d)
    assert rho.trace_defect <= 1e-6


def test_coherent_ensemble_zero_temperature():
    ens = sample_coherent_ensemble(ThermalParams(0.0, 1.5), np.random.default_rng(0), 5, 30)
    ref = coherent_state(1.5, 30).data
    assert all(np.allclose(s.data, ref) for s in ens.states)


def test_coherent_ensemble_moments():
    params = ThermalParams(0.5, 2.0)
    ens = sample_coherent_ensemble(params, np.random.default_rng(1), 10_000, 40)
    mean, se = ens.expectation(make_number(40))
    assert abs(mean.real - (4.0 + 0.5)) <= 3 * se


def test_coherent_ensemble_reconstructs_density():
    params = ThermalParams(0.5, 2.0)
    ens = sample_coherent_ensemble(params, np.random.default_rng(2), 10_000, 40)
    diff = ens.to_density().matrix - displaced_thermal(params, 40).matrix
    assert 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))) <= 0.02


def test_dephase_trivial_cases():
    rho = displaced_thermal(ThermalParams(0.5, 1.0), 30)
    assert np.array_equal(dephase(rho, 0.0).matrix, rho.matrix)
    diag = thermal_state(0.5, 30)
    assert np.array_equal(dephase(diag, 3.0).matrix, diag.matrix)


def test_dephase_first_coherence_against_rotation_integral():
    rho = coherent_state(2.0, 40).to_density()
    kt = 0.3
    out = dephase(rho, kt)
    assert out.matrix[0, 1] == pytest.approx(rho.matrix[0, 1] * math.exp(-kt / 2), abs=1e-14)
    # rho_01 -> rho_01 e^{i phi}, averaged over phi ~ N(0, kt) by quadrature
    sd = math.sqrt(kt)

    def avg(phi, part):
        w = math.exp(-(phi**2) / (2 * kt)) / math.sqrt(2 * math.pi * kt)
        return w * (math.cos(phi) if part == 0 else math.sin(phi))

    re = integrate.quad(avg, -12 * sd, 12 * sd, args=(0,))[0]
    im = integrate.quad(avg, -12 * sd, 12 * sd, args=(1,))[0]
    assert abs(out.matrix[0, 1] - rho.matrix[0, 1] * complex(re, im)) <= 1e-6


def test_dephase_channel_properties():
    rho = displaced_thermal(ThermalParams(0.5, 1.5), 40)
    out = dephase(rho, 0.4)
    assert abs(out.trace() - 1) <= 1e-9
    assert out.hermiticity_defect() <= 1e-12
    assert out.min_eigenvalue() >= -1e-9
    two_step = dephase(dephase(rho, 0.15), 0.25)
    assert np.max(np.abs(two_step.matrix - out.matrix)) <= 1e-12
    z = make_parity(40)
    assert expectation(z, out) == pytest.approx(expectation(z, rho), abs=1e-12)


def test_dephase_trajectory():
    psi = coherent_state(1.0, 20)
    rng = np.random.default_rng(0)
    assert np.array_equal(dephase_trajectory(psi, 0.0, rng).data, psi.data)
    v = np.zeros(20, dtype=complex)
    v[3] = 1
    out = dephase_trajectory(StateVector(v, 20), 1.0, rng).data
    assert abs(abs(out[3]) - 1) <= 1e-15


def test_dephase_trajectory_ensemble_matches_closed_form():
    d, kt = 40, 0.5
    psi = coherent_state(2.0, d)
    rng = np.random.default_rng(4)
    x = make_sign_q(d).matrix
    samples = []
    for _ in range(10_000):
        v = dephase_trajectory(psi, kt, rng).data
        samples.append(np.real(v.conj() @ x @ v))
    samples = np.array(samples)
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    exact = np.real(expectation(make_sign_q(d), dephase(psi.to_density(), kt)))
    assert abs(samples.mean() - exact) <= 3 * se
