"""Composite experiments shared by the command-line runner and the acceptance suite.

Each function returns plain rows (lists of dicts) or small dataclasses so
callers can serialise them without knowing the underlying objects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .encoding import LogicalState, apo_set, logical_fidelity, logical_qubit, logical_state, trace_distance
from .fock import apply_diagonal, make_parity, make_sign_q, tensor_states
from .gates import cphase, logical_basis_input, truncated_parity_gate, truncation_budget
from .mbqc import GraphPattern, build_cluster, qubit_oracle, run_pattern, simulate_pattern
from .noise import CatParams, avg_fidelity, threshold_scan, z_invariance_defect
from .runtime import chunk_streams
from .states import (
    ThermalParams,
    default_cutoff,
    dephase,
    dephase_trajectory,
    displaced_thermal,
    init_infidelity_analytic,
    sample_coherent_ensemble,
)

CZ = np.diag([1, 1, 1, -1]).astype(complex)
LOGICAL_INPUTS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / math.sqrt(2),
}


# ---------------------------------------------------------------------------
# initialisation and APO algebra


def init_fidelity_rows(n_bars, alphas, cutoff: int | None = None) -> list[dict]:
    """Simulated vs analytic logical infidelity of displaced thermal |+_L> states."""
    rows = []
    for n_bar, alpha in itertools.product(n_bars, alphas):
        d = default_cutoff(alpha, n_bar) if cutoff is None else cutoff
        rho = displaced_thermal(ThermalParams(n_bar, alpha), d)
        lq = logical_qubit(rho)
        x = float(lq.bloch()[0])
        sim = 0.5 * (1.0 - x)
        ana = init_infidelity_analytic(n_bar, alpha)
        rows.append(
            {
                "n_bar": float(n_bar),
                "alpha": float(alpha),
                "cutoff": d,
                "x_e": x,
                "infidelity_sim": sim,
                "infidelity_analytic": ana,
                "abs_diff": abs(sim - ana),
                "x2_defect": lq.diagnostics["quality"]["x2_defect"],
                "trace_defect": rho.trace_defect,
            }
        )
    return rows


@dataclass
class AlgebraReport:
    cutoff: int
    anticommutator: float
    z_squared: float
    commutator: float
    x2_defects: list = field(default_factory=list)


def apo_algebra(cutoff: int, states=()) -> AlgebraReport:
    """Truncated APO algebra: ``{X,Z}``, ``Z^2 - I``, ``[X,Z] + 2iY`` and ``|<X^2> - 1|`` on given ``(n_bar, alpha)``."""
    apo = apo_set(cutoff)
    x, z, y = apo.X.matrix, apo.Z.matrix, apo.Y.matrix
    eye = np.eye(cutoff)
    rep = AlgebraReport(
        cutoff,
        float(np.max(np.abs(x @ z + z @ x))),
        float(np.max(np.abs(z @ z - eye))),
        float(np.max(np.abs(x @ z - z @ x + 2j * y))),
    )
    x2 = x @ x
    for n_bar, alpha in states:
        rho = displaced_thermal(ThermalParams(n_bar, alpha), cutoff)
        rep.x2_defects.append((float(n_bar), float(alpha), float(abs(np.real(np.sum(x2 * rho.matrix.T)) - 1))))
    return rep


# ---------------------------------------------------------------------------
# two-qubit gate checks


def _two_mode_input(plus, labels):
    return tensor_states([logical_basis_input(plus, labels[0]), logical_basis_input(plus, labels[1])])


def cphase_logical_output(plus, labels) -> tuple[LogicalState, LogicalState]:
    """Logical input and output of CPhase on a product of encoded inputs."""
    rho = _two_mode_input(plus, labels)
    before = logical_state(rho)
    after = logical_state(apply_diagonal(cphase(plus.cutoff, (0, 1)), rho))
    return before, after


def _superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


@dataclass
class ProcessReport:
    alpha: float
    n_bar: float
    cutoff: int
    process_fidelity: float
    logic_table: list
    superoperator: np.ndarray


def cphase_process(alpha: float = 3.0, n_bar: float = 0.5, cutoff: int = 60, labels=("0", "1", "+", "+i")) -> ProcessReport:
    """Logical process tomography of CPhase on encoded inputs.

    The 16 product inputs are tomographed before and after the gate; the
    superoperator is the least-squares map between them, and the process
    fidelity is ``Tr(S_ideal^dag S) / d^2``.
    """
    plus = displaced_thermal(ThermalParams(n_bar, alpha), cutoff)
    ins, outs, table = [], [], []
    for pair in itertools.product(labels, repeat=2):
        before, after = cphase_logical_output(plus, pair)
        ins.append(before.matrix.reshape(-1))
        outs.append(after.matrix.reshape(-1))
        if pair[0] in ("0", "1") and pair[1] in ("0", "1"):
            ideal = LogicalState.from_vector(CZ @ np.kron(LOGICAL_INPUTS[pair[0]], LOGICAL_INPUTS[pair[1]]))
            table.append({"input": pair[0] + pair[1], "fidelity": logical_fidelity(after, ideal)})
    a = np.array(ins)
    b = np.array(outs)
    sup = np.linalg.lstsq(a, b, rcond=None)[0].T
    ideal = _superop(CZ)
    fid = float(np.real(np.trace(ideal.conj().T @ sup)) / 16.0)
    return ProcessReport(alpha, n_bar, cutoff, fid, table, sup)


def mse_independence(alpha: float = 3.0, n_bars=(0.0, 1.0), labels=(("+", "+"), ("+", "-"), ("-", "+"), ("-", "-"))) -> dict:
    """Max trace distance between CPhase logical outputs prepared at different ``n_bar``."""
    outputs = {}
    for n_bar in n_bars:
        plus = displaced_thermal(ThermalParams(n_bar, alpha))
        outputs[n_bar] = [cphase_logical_output(plus, pair)[1] for pair in labels]
    worst = 0.0
    rows = []
    for i, pair in enumerate(labels):
        for a, b in itertools.combinations(n_bars, 2):
            d = trace_distance(outputs[a][i], outputs[b][i])
            worst = max(worst, d)
            rows.append({"input": "".join(pair), "n_bar_a": a, "n_bar_b": b, "trace_distance": d})
    return {"max_trace_distance": worst, "rows": rows}


# ---------------------------------------------------------------------------
# dephasing and truncation


def dephasing_rows(alpha: float, grid, cutoff: int = 60) -> list[dict]:
    params = CatParams(alpha, cutoff)
    rows = []
    for kt in grid:
        fc, ec = avg_fidelity("cs", kt, params)
        fq, eq = avg_fidelity("qsp", kt, params)
        rows.append({"kappa_t": float(kt), "f_avg_cs": fc, "f_avg_qsp": fq, "quad_error": max(ec, eq),
                     "z_defect": z_invariance_defect(kt, params)})
    return rows


def threshold_rows(alphas, drop_level: float = 0.9, cutoff: int = 60) -> list[dict]:
    rows = []
    for a in alphas:
        p = CatParams(a, cutoff)
        cs = threshold_scan("cs", p, drop_level)
        qsp = threshold_scan("qsp", p, drop_level)
        rows.append({"alpha": float(a), "kt_cs": cs, "kt_cs_alpha2": cs * a * a, "kt_qsp": qsp})
    return rows


def truncation_study(n_bar: float = 0.5, tol: float = 0.01, theta: float = math.pi / 4):
    """Budget plus the truncated gate's error report on ``rho_D(alpha = sqrt(3 (n_bar + 1/2)), n_bar)``."""
    budget = truncation_budget(n_bar, tol)
    alpha = math.sqrt(3.0) * math.sqrt(n_bar + 0.5)
    cutoff = budget.r_max + 1
    rho = displaced_thermal(ThermalParams(n_bar, alpha), cutoff)
    _, report = truncated_parity_gate(budget, theta, cutoff, rho)
    report.diagnostics.update({"alpha": alpha, "cutoff": cutoff})
    return budget, report


# ---------------------------------------------------------------------------
# MBQC and backend cross-checks


def mbqc_check(pattern: GraphPattern, alpha: float, n_bar: float, n_traj: int, seed, cutoff: int | None = None,
               backend: str = "trajectory", postselect: bool = False) -> dict:
    oracle = qubit_oracle(pattern)
    if backend == "trajectory":
        run = simulate_pattern(pattern, alpha, n_bar, n_traj, seed, cutoff)
        fid = logical_fidelity(run.logical, oracle.logical)
        return {"backend": backend, "fidelity": fid, "n_trajectories": run.n, "logical": run.logical,
                "plus_counts": run.outcome_counts}
    rho = build_cluster(pattern, alpha, n_bar, "dense", cutoff=cutoff)
    rng = np.random.default_rng(seed)
    forced = {e.vertex: 0 for e in pattern.schedule} if postselect else None
    res = run_pattern(rho, pattern, rng, forced)
    target = oracle.raw if postselect else qubit_oracle(pattern, outcomes={j: r.outcome for j, r in res.outcomes}).logical
    return {"backend": backend, "fidelity": logical_fidelity(res.logical, target), "weight": res.weight,
            "logical": res.logical}


def backend_equivalence(points, alpha: float = 2.0, n_traj: int = 10_000, seed=0, cutoff: int | None = None) -> list[dict]:
    """Dense vs trajectory ``<X_E>``, ``<Z_E>`` after dephasing, with the trajectory standard errors.

    ``points`` are ``(kappa_t, n_bar)`` pairs; the cutoff defaults to the policy value per point.
    """
    rows = []
    streams = np.random.SeedSequence(seed).spawn(len(points))
    for (kt, n_bar), ss in zip(points, streams):
        params = ThermalParams(n_bar, alpha)
        d = default_cutoff(alpha, n_bar) if cutoff is None else cutoff
        x_op, z_op = make_sign_q(d), make_parity(d)
        rho = dephase(displaced_thermal(params, d), kt)
        dense_x = float(np.real(np.sum(x_op.matrix * rho.matrix.T)))
        dense_z = float(np.real(np.sum(z_op.matrix * rho.matrix.T)))
        xs, zs = [], []
        for size, rng in chunk_streams(ss, n_traj):
            ens = sample_coherent_ensemble(params, rng, size, d)
            data = np.stack([dephase_trajectory(s, kt, rng).data for s in ens.states])
            xs.append(np.real(np.einsum("tm,mn,tn->t", data.conj(), x_op.matrix, data)))
            zs.append(np.real(np.einsum("tm,m,tm->t", data.conj(), np.diag(z_op.matrix), data)))
        xs, zs = np.concatenate(xs), np.concatenate(zs)
        n = xs.size
        rows.append(
            {
                "kappa_t": float(kt), "n_bar": float(n_bar), "cutoff": d,
                "dense_x": dense_x, "traj_x": float(xs.mean()), "se_x": float(xs.std(ddof=1) / math.sqrt(n)),
                "dense_z": dense_z, "traj_z": float(zs.mean()), "se_z": float(zs.std(ddof=1) / math.sqrt(n)),
            }
        )
    return rows



# ---------------------------------------------------------------------------
# homodyne shots


def homodyne_shots(alpha: float, n_bar: float, shots: int, basis: str = "X", theta: float = 0.0, seed=0,
                   cutoff: int | None = None, backend: str = "dense") -> list:
    """Shot records for repeated readout of a displaced thermal ``|+_L>`` state.

    ``basis`` is ``X``, ``XY`` (angle ``theta``) or ``Z``. The dense backend
    samples the exact q-marginal; the trajectory backend draws one coherent
    sample per shot and measures it.
    """
    from .gates import parity_rotation
    from .fock import apply
    from .measurement import (
        MeasurementRecord, half_line_projectors, homodyne_sample_q, measure_logical_x, measure_logical_z, measure_xy,
    )

    params = ThermalParams(n_bar, alpha)
    d = default_cutoff(alpha, n_bar) if cutoff is None else cutoff
    records = []
    if backend == "trajectory":
        for size, rng in chunk_streams(seed, shots):
            ens = sample_coherent_ensemble(params, rng, size, d)
            for psi in ens.states:
                if basis == "Z":
                    rec, _ = measure_logical_z(psi, 0, rng)
                elif basis == "XY":
                    rec, _ = measure_xy(psi, 0, theta, rng)
                else:
                    rec, _ = measure_logical_x(psi, 0, rng)
                records.append(rec)
        return records
    rho = displaced_thermal(params, d)
    rng = np.random.default_rng(seed)
    if basis == "Z":
        for _ in range(shots):
            rec, _ = measure_logical_z(rho, 0, rng)
            records.append(rec)
        return records
    if basis == "XY":
        rho = apply(parity_rotation(theta / 2, d, 0), rho)
    plus, minus = half_line_projectors(d)
    w_plus = float(np.real(np.trace(plus @ rho.matrix)))
    xs = np.atleast_1d(homodyne_sample_q(rho, 0, rng, size=shots))
    for x in xs:
        bit = 1 if x >= 0 else -1
        w = w_plus if bit == 1 else 1.0 - w_plus
        records.append(MeasurementRecord(0, basis, bit, w, theta if basis == "XY" else 0.0, float(x)))
    return records
