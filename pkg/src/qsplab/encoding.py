"""Analogous Pauli operators of the quadrature-sign parity encoding and
logical-state reconstruction from physical states."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fock import (
    DensityMatrix,
    FockOperator,
    StateVector,
    TrajectoryEnsemble,
    _as_space,
    make_parity,
    make_sign_q,
    partial_trace,
)

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
PAULI_LABELS = "IXYZ"

MAX_TOMOGRAPHY_QUBITS = 4
EIG_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class ApoSet:
    I: FockOperator
    X: FockOperator
    Y: FockOperator
    Z: FockOperator

    @property
    def cutoff(self) -> int:
        return self.Z.cutoff

    def as_list(self) -> list[np.ndarray]:
        return [self.I.matrix, self.X.matrix, self.Y.matrix, self.Z.matrix]


def apo_set(space) -> ApoSet:
    """I_E, X_E = sign(q), Y_E = i X_E Z_E and Z_E = parity on one mode."""
    space = _as_space(space)
    x = make_sign_q(space)
    z = make_parity(space)
    y = FockOperator(1j * x.matrix @ z.matrix, space.cutoff, hermitian=True)
    eye = FockOperator(np.eye(space.cutoff, dtype=complex), space.cutoff, hermitian=True)
    return ApoSet(eye, x, y, z)


@dataclass(frozen=True, eq=False)
class LogicalState:
    """Logical density matrix on ``n_qubits`` qubits.

    ``modes[i]`` is the physical mode that encodes qubit ``i``.
    ``diagnostics`` carries the pre-normalisation weight and truncation
    quality figures (and standard errors for ensemble inputs).
    """

    matrix: np.ndarray
    n_qubits: int
    modes: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        d = 2**self.n_qubits
        if np.shape(self.matrix) != (d, d):
            raise ValueError(f"logical matrix must be {d}x{d}")
        if not self.modes:
            object.__setattr__(self, "modes", tuple(range(self.n_qubits)))

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @classmethod
    def from_vector(cls, vec, modes: Sequence[int] = ()) -> LogicalState:
        vec = np.asarray(vec, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        n = int(round(np.log2(vec.size)))
        return cls(np.outer(vec, vec.conj()), n, tuple(modes))

    @classmethod
    def from_pauli(cls, values: np.ndarray, modes: Sequence[int] = (), diagnostics=None) -> LogicalState:
        """Build from the ``(4,)*N`` array of Pauli expectation values."""
        values = np.asarray(values)
        n = values.ndim
        mat = np.zeros((2**n, 2**n), dtype=complex)
        for mu in itertools.product(range(4), repeat=n):
            mat += values[mu] * _pauli_product(mu)
        return cls(mat / 2**n, n, tuple(modes), dict(diagnostics or {}))

    def pauli(self) -> np.ndarray:
        """Expectation values Tr(Q_mu rho_L) as a real ``(4,)*N`` array."""
        out = np.zeros((4,) * self.n_qubits)
        for mu in itertools.product(range(4), repeat=self.n_qubits):
            out[mu] = np.real(np.trace(_pauli_product(mu) @ self.matrix))
        return out

    def bloch(self) -> np.ndarray:
        if self.n_qubits != 1:
            raise ValueError("Bloch vector is defined for one qubit")
        return self.pauli()[1:]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def check(self, slack: float = EIG_SLACK) -> None:
        if np.max(np.abs(self.matrix - self.matrix.conj().T)) > 1e-10:
            raise ValueError("logical state is not Hermitian")
        if abs(np.trace(self.matrix) - 1) > 1e-9:
            raise ValueError("logical state does not have unit trace")
        ev = self.eigenvalues()
        if ev.min() < -slack or ev.max() > 1 + slack:
            raise ValueError(f"logical eigenvalues {ev} outside [-{slack}, 1+{slack}]")

    def apply_unitary(self, u: np.ndarray) -> LogicalState:
        return LogicalState(u @ self.matrix @ u.conj().T, self.n_qubits, self.modes, dict(self.diagnostics))

    def to_json(self) -> str:
        doc = {
            "n_qubits": self.n_qubits,
            "modes": list(self.modes),
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
            "diagnostics": _jsonable(self.diagnostics),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> LogicalState:
        doc = json.loads(text)
        mat = np.array([[complex(re, im) for re, im in row] for row in doc["matrix"]])
        return cls(mat, int(doc["n_qubits"]), tuple(doc.get("modes", ())), doc.get("diagnostics", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _pauli_product(mu: Sequence[int]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mu:
        out = np.kron(out, PAULI[m])
    return out


# ---------------------------------------------------------------------------
# Pauli expectation values of physical states


def _dense_pauli_tensor(t: np.ndarray, m: int, ops: list[np.ndarray]) -> np.ndarray:
    if m == 0:
        return np.asarray(t)
    parts = [_dense_pauli_tensor(np.tensordot(t, q, axes=([0, m], [1, 0])), m - 1, ops) for q in ops]
    return np.stack(parts)


def _vector_pauli_tensor(psi: np.ndarray, n_modes: int, modes: Sequence[int], ops: list[np.ndarray]) -> np.ndarray:
    branches = {(): psi}
    for mode in modes:
        nxt = {}
        for key, vec in branches.items():
            for k, q in enumerate(ops):
                nxt[key + (k,)] = np.moveaxis(np.tensordot(q, vec, axes=([1], [mode])), 0, mode)
        branches = nxt
    out = np.zeros((4,) * len(modes), dtype=complex)
    for key, vec in branches.items():
        out[key] = np.vdot(psi, vec)
    return out


def pauli_expectations(state, modes: Sequence[int] | None = None, apo: ApoSet | None = None) -> np.ndarray:
    """``Tr(Q_mu,E rho)`` for every multi-index ``mu`` over the given modes.

    Works for density matrices and state vectors; the result is a real
    ``(4,)*N`` array (imaginary parts of Hermitian expectations discarded
    after a 1e-8 sanity check).
    """
    modes = list(range(state.n_modes)) if modes is None else list(modes)
    if len(modes) > MAX_TOMOGRAPHY_QUBITS:
        raise ValueError(f"full tomography is limited to {MAX_TOMOGRAPHY_QUBITS} qubits")
    if len(set(modes)) != len(modes):
        raise ValueError(f"partition {modes} repeats a mode")
    if any(m < 0 or m >= state.n_modes for m in modes):
        raise ValueError(f"partition {modes} does not match a {state.n_modes}-mode state")
    apo = apo or apo_set(state.cutoff)
    ops = apo.as_list()
    if isinstance(state, StateVector):
        vals = _vector_pauli_tensor(state.tensor, state.n_modes, modes, ops)
    else:
        reduced = state if sorted(modes) == list(range(state.n_modes)) else partial_trace(state, keep=sorted(modes))
        order = [sorted(modes).index(m) for m in modes]
        t = reduced.tensor
        k = reduced.n_modes
        t = np.transpose(t, order + [k + o for o in order])
        vals = _dense_pauli_tensor(t, k, ops)
    if np.max(np.abs(vals.imag)) > 1e-8:
        raise ValueError(f"Pauli expectations have imaginary parts up to {np.max(np.abs(vals.imag)):.3g}")
    return np.real(vals)


def _single_mode_quality(rho1: np.ndarray, apo: ApoSet) -> dict:
    x2 = np.real(np.trace(apo.X.matrix @ apo.X.matrix @ rho1)) / np.real(np.trace(rho1))
    pops = np.real(np.diag(rho1)) / np.real(np.trace(rho1))
    return {"x2_defect": float(abs(x2 - 1)), "upper_half_mass": float(pops[len(pops) // 2 :].sum())}


def truncation_quality(state, modes: Sequence[int], apo: ApoSet) -> dict:
    """Per-mode ``|<X_E^2> - 1|`` and population in the upper half of the Fock range."""
    per_mode = []
    for m in modes:
        if isinstance(state, StateVector):
            t = np.moveaxis(state.tensor, m, 0).reshape(state.cutoff, -1)
            rho1 = t @ t.conj().T
        elif state.n_modes == 1:
            rho1 = state.matrix
        else:
            rho1 = partial_trace(state, keep=[m]).matrix
        per_mode.append(_single_mode_quality(rho1, apo))
    return {
        "x2_defect": max(q["x2_defect"] for q in per_mode),
        "upper_half_mass": max(q["upper_half_mass"] for q in per_mode),
        "per_mode": per_mode,
    }


def logical_state(state, partition: Sequence[int] | None = None, apo: ApoSet | None = None) -> LogicalState:
    """Logical density matrix from APO expectation values.

    ``partition[i]`` names the mode encoding qubit ``i`` (default: one qubit
    per mode, in order). The result is renormalised by ``<I_E ... I_E>``;
    the pre-normalisation weight is kept in ``diagnostics["weight"]``.
    Trajectory ensembles are averaged with standard errors in
    ``diagnostics["stderr"]``.
    """
    if isinstance(state, TrajectoryEnsemble):
        return _ensemble_logical_state(state, partition, apo)
    modes = tuple(range(state.n_modes)) if partition is None else tuple(partition)
    apo = apo or apo_set(state.cutoff)
    vals = pauli_expectations(state, modes, apo)
    weight = vals[(0,) * len(modes)]
    if weight <= 1e-12:
        raise ValueError("state has no weight on the encoding space")
    diag = {"weight": float(weight), "quality": truncation_quality(state, modes, apo)}
    return LogicalState.from_pauli(vals / weight, modes, diag)


def _ensemble_logical_state(ens: TrajectoryEnsemble, partition, apo) -> LogicalState:
    modes = tuple(range(ens.n_modes)) if partition is None else tuple(partition)
    apo = apo or apo_set(ens.cutoff)
    samples = np.array([pauli_expectations(s, modes, apo) for s in ens.states])
    w = ens.weights.reshape((-1,) + (1,) * len(modes))
    mean = np.sum(w * samples, axis=0)
    n_eff = 1.0 / np.sum(ens.weights**2)
    var = np.sum(w * (samples - mean) ** 2, axis=0)
    stderr = np.sqrt(var / max(n_eff - 1, 1))
    weight = mean[(0,) * len(modes)]
    diag = {"weight": float(weight), "stderr": stderr / weight, "n_trajectories": len(ens)}
    return LogicalState.from_pauli(mean / weight, modes, diag)


def logical_qubit(rho, mode: int = 0, apo: ApoSet | None = None) -> LogicalState:
    """Single-qubit logical state of one mode: 1/2 (<I> I + <X> X + <Y> Y + <Z> Z)."""
    if isinstance(rho, DensityMatrix) and abs(rho.trace() - 1) > 1e-6:
        raise ValueError(f"input state has trace {rho.trace():.9g}, expected 1")
    return logical_state(rho, [mode], apo)


def logical_fidelity(a: LogicalState, b: LogicalState) -> float:
    """``Tr(a b)``, clamped to ``[0, 1 + 1e-9]``."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}")
    val = float(np.real(np.trace(np.asarray(a) @ np.asarray(b))))
    return float(np.clip(val, 0.0, 1.0 + 1e-9))


def trace_distance(a, b) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))
