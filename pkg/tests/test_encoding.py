import math

import numpy as np
import pytest

from qsplab.encoding import (
    LogicalState,
    apo_set,
    logical_fidelity,
    logical_qubit,
    logical_state,
    trace_distance,
)
from qsplab.fock import DensityMatrix, StateVector, apply_diagonal, expectation, tensor_states
from qsplab.gates import cphase
from qsplab.states import ThermalParams, displaced_thermal, sample_coherent_ensemble, thermal_state

CLUSTER = LogicalState.from_vector(np.array([1, 1, 1, -1]) / 2)


def vacuum(d):
    v = np.zeros(d, dtype=complex)
    v[0] = 1
    return StateVector(v, d).to_density()


def test_apo_set():
    apo = apo_set(30)
    assert np.array_equal(np.diag(apo.Z.matrix).real, [(-1) ** n for n in range(30)])
    assert expectation(apo.X, vacuum(30)) == pytest.approx(0, abs=1e-15)
    rho = displaced_thermal(ThermalParams(0.3, 1 + 0.7j), 30)
    assert abs(expectation(apo.Y, rho).imag) <= 1e-10
    assert np.max(np.abs(apo.Y.matrix - apo.Y.matrix.conj().T)) <= 1e-12


def test_logical_qubit_vacuum_and_thermal():
    lq = logical_qubit(vacuum(20))
    assert np.allclose(lq.bloch(), [0, 0, 1], atol=1e-12)
    for n_bar in (0.5, 1.0):
        lq = logical_qubit(thermal_state(n_bar, 80))
        assert np.allclose(lq.bloch(), [0, 0, 1 / (2 * n_bar + 1)], atol=1e-9)


def test_logical_qubit_displaced_thermal():
    rho = displaced_thermal(ThermalParams(1.0, 3.0))
    x = logical_qubit(rho).bloch()[0]
    assert x == pytest.approx(1 - math.erfc(3 / math.sqrt(1.5)), abs=1e-4)


def test_logical_qubit_rejects_bad_trace():
    rho = DensityMatrix(2 * vacuum(10).matrix, 10)
    with pytest.raises(ValueError):
        logical_qubit(rho)


def test_logical_state_products():
    lq = logical_state(tensor_states([vacuum(12), vacuum(12)]))
    expect = np.zeros((4, 4))
    expect[0, 0] = 1
    assert np.allclose(lq.matrix, expect, atol=1e-12)


def test_cphase_on_plus_plus_gives_cluster():
    plus = displaced_thermal(ThermalParams(0.5, 3.0), 60)
    rho = apply_diagonal(cphase(60), tensor_states([plus, plus]))
    assert logical_fidelity(logical_state(rho), CLUSTER) >= 0.99


def test_ensemble_tomography_matches_dense():
    d = 30
    params = ThermalParams(0.5, 1.5)
    rng = np.random.default_rng(7)
    a = sample_coherent_ensemble(params, rng, 10_000, d)
    rho = displaced_thermal(params, d)
    ens_l = logical_state(a)
    dense_l = logical_state(rho)
    se = ens_l.diagnostics["stderr"]
    diff = np.abs(ens_l.pauli() - dense_l.pauli())
    assert np.all(diff <= 3 * se + 1e-12)


def test_fidelity_examples():
    zero = LogicalState.from_vector([1, 0])
    one = LogicalState.from_vector([0, 1])
    mixed = LogicalState(np.eye(2) / 2, 1)
    assert logical_fidelity(zero, zero) == pytest.approx(1.0)
    assert logical_fidelity(zero, one) == 0.0
    assert logical_fidelity(mixed, LogicalState.from_vector([1, 1j])) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        logical_fidelity(zero, CLUSTER)


def test_x_maps_parity_sectors():
    d = 40
    x = apo_set(d).X.matrix
    even = np.zeros(d)
    even[::2] = np.random.default_rng(0).normal(size=d // 2)
    out = x @ even
    assert np.max(np.abs(out[::2])) <= 1e-12
    odd = np.zeros(d)
    odd[1::2] = 1.0
    assert np.max(np.abs((x @ odd)[1::2])) <= 1e-12


def test_logical_map_is_affine():
    r1 = displaced_thermal(ThermalParams(0.5, 1.0), 40)
    r2 = displaced_thermal(ThermalParams(1.0, 0.3 + 0.8j), 40)
    lam = 0.3
    mix = DensityMatrix(lam * r1.matrix + (1 - lam) * r2.matrix, 40)
    lhs = logical_qubit(mix).matrix
    rhs = lam * logical_qubit(r1).matrix + (1 - lam) * logical_qubit(r2).matrix
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_mixed_physical_pure_logical():
    rho = displaced_thermal(ThermalParams(1.0, 4.0))
    assert rho.purity() < 0.5
    assert logical_qubit(rho).purity() >= 0.999


def test_logical_state_json_roundtrip():
    lq = logical_qubit(displaced_thermal(ThermalParams(0.5, 1.0), 30))
    back = LogicalState.from_json(lq.to_json())
    assert np.array_equal(back.matrix, lq.matrix)
    assert back.n_qubits == 1


def test_logical_state_check():
    CLUSTER.check()
    with pytest.raises(ValueError):
        LogicalState(np.diag([1.2, -0.2]).astype(complex), 1).check()


def test_trace_distance():
    zero = LogicalState.from_vector([1, 0])
    one = LogicalState.from_vector([0, 1])
    assert trace_distance(zero, one) == pytest.approx(1.0)
    assert trace_distance(zero, zero) == 0.0
