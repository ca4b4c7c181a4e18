import math

import numpy as np
import pytest
from oracles import tail_oracle

from qsplab.encoding import LogicalState, logical_fidelity, logical_qubit, logical_state
from qsplab.fock import apply_diagonal, tensor_states
from qsplab.gates import (
    PrecisionError,
    TruncationBudget,
    cphase,
    cphase_direct,
    joint_parity,
    k_max_bound,
    naive_parity_series,
    parity_rotation,
    t_state_prep,
    truncated_parity_gate,
    truncated_parity_series,
    truncation_budget,
)
from qsplab.states import ThermalParams, displaced_thermal

T_STATE = LogicalState.from_vector(np.array([1, np.exp(1j * math.pi / 4)]) / math.sqrt(2))


def test_parity_rotation_examples():
    assert np.array_equal(parity_rotation(0.0, 8).diagonal, np.ones(8))
    half = parity_rotation(math.pi / 2, 8)
    assert np.max(np.abs((half @ half).diagonal - parity_rotation(math.pi, 8).diagonal)) <= 1e-12
    theta = 0.37
    d = parity_rotation(theta, 4).diagonal
    assert d[1] / d[0] == pytest.approx(np.exp(-2j * theta), abs=1e-15)


def test_joint_parity_examples():
    assert np.array_equal(joint_parity(0.0, 5).diagonal, np.ones(25))
    theta = 0.8
    e = joint_parity(theta, 5).diagonal.reshape(5, 5)
    assert e[1, 1] == pytest.approx(np.exp(1j * theta))
    with pytest.raises(ValueError):
        joint_parity(theta, 5, (1, 1))


def test_gates_are_diagonal_unitaries():
    for op in (parity_rotation(0.3, 20), joint_parity(1.1, 20), cphase(20)):
        assert op.unitarity_defect() <= 1e-12


def test_cphase_matches_direct_formula():
    a, b = cphase(30), cphase_direct(30)
    assert np.max(np.abs(a.diagonal - b.diagonal)) <= 1e-12
    d = a.diagonal.reshape(30, 30)
    assert d[2, 3] / d[0, 0] == pytest.approx(1.0)
    assert d[1, 3] / d[0, 0] == pytest.approx(-1.0)


def test_cphase_twice_is_identity_channel():
    plus = displaced_thermal(ThermalParams(0.5, 3.0), 60)
    rho = tensor_states([plus, plus])
    twice = apply_diagonal(cphase(60), apply_diagonal(cphase(60), rho))
    assert logical_fidelity(logical_state(twice), logical_state(rho)) >= 0.995


def test_t_state_on_ideal_plus():
    plus = displaced_thermal(ThermalParams(0.0, 6.0))
    bloch = logical_qubit(t_state_prep(plus)).bloch()
    assert np.allclose(bloch, [math.cos(math.pi / 4), math.sin(math.pi / 4), 0.0], atol=1e-6)


def test_t_state_on_vacuum_keeps_z():
    vac = displaced_thermal(ThermalParams(0.0, 0.0), 16)
    assert logical_qubit(t_state_prep(vac)).bloch()[2] == pytest.approx(1.0, abs=1e-12)


def test_t_state_fidelity_budget():
    plus = displaced_thermal(ThermalParams(1.0, 3.0))
    fid = logical_fidelity(logical_qubit(t_state_prep(plus)), T_STATE)
    assert fid >= 0.99
    init = 0.5 * math.erfc(3.0 / math.sqrt(1.5))
    assert fid >= 1 - (init + 1e-3)


def test_budget_closed_forms():
    b = truncation_budget(0.5)
    assert (b.lam, b.r_max) == (12.0, 30)
    assert isinstance(b, TruncationBudget)
    assert truncation_budget(0.0).r_max == 15


def test_k_max_oracle_small():
    bound = k_max_bound(3, 0.01)
    oracle = tail_oracle(3, 0.01)
    assert 0 <= bound - oracle <= 5
    assert abs(bound - 30) <= 5


@pytest.mark.parametrize("r,tol", [(5, 1e-3), (10, 0.01), (30, 0.01)])
def test_k_max_never_underestimates(r, tol):
    bound = k_max_bound(r, tol)
    assert 0 <= bound - tail_oracle(r, tol) <= 5


def test_k_max_monotone_in_tol():
    ks = [k_max_bound(10, tol) for tol in (1e-6, 1e-3, 1e-2, 1.0)]
    assert ks == sorted(ks, reverse=True)
    assert k_max_bound(10, 1.0) >= 0


def test_series_zero_level_exact():
    for k in (0, 5, 40):
        assert truncated_parity_series(0, k) == 1.0


def test_naive_summation_fails_at_level_30():
    budget = truncation_budget(0.5)
    assert abs(naive_parity_series(30, budget.k_max) - 1.0) > 1
    assert abs(truncated_parity_series(30, budget.k_max) - 1.0) <= budget.tol


def test_precision_floor():
    with pytest.raises(ValueError):
        truncated_parity_series(10, 60, prec=100)


def test_low_precision_detected():
    with pytest.raises(PrecisionError):
        truncated_parity_series(60, 514, prec=200)


def test_defect_monotone_in_k_max():
    n = 7
    ks = range(int(math.pi * n) + 1, int(math.pi * n) + 40, 3)
    defects = [abs(truncated_parity_series(n, k) - (-1) ** n) for k in ks]
    assert all(b <= a for a, b in zip(defects, defects[1:]))


def test_truncated_gate_weighted_error():
    budget = truncation_budget(0.5)
    d = budget.r_max + 1
    rho = displaced_thermal(ThermalParams(0.5, math.sqrt(3)), d)
    gate, report = truncated_parity_gate(budget, math.pi / 4, d, rho)
    assert report.weighted_error <= 0.05
    assert report.defect[0] == 0.0
    assert np.max(np.abs(np.abs(gate.diagonal[: budget.r_max - 5]) - 1)) <= 1e-12
    csv = report.to_csv().splitlines()
    assert csv[0] == "n,defect,population,weighted_error"
    assert len(csv) == d + 1


def test_truncated_gate_cutoff_check():
    with pytest.raises(ValueError):
        truncated_parity_gate(truncation_budget(0.5), 0.1, 20)
