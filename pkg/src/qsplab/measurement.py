"""Logical measurements of QSP qubits.

X is read out by the sign of a q-homodyne outcome, X-Y plane bases by a
parity rotation followed by X readout, and Z by photon-number parity.
Dense states use the exact branch projectors; state vectors sample a
homodyne outcome and collapse onto it.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .fock import (
    DensityMatrix,
    StateVector,
    apply,
    apply_local,
    hermite_functions,
    make_sign_q,
    parity_diagonal,
    partial_trace,
    q_marginal,
    reduced_single_mode,
)

ZERO_BRANCH_TOL = 1e-12


class ZeroProbabilityError(ValueError):
    """The requested measurement branch has (numerically) zero probability."""


@dataclass(frozen=True)
class MeasurementRecord:
    mode: int
    basis: str
    bit: int
    weight: float
    theta: float = 0.0
    raw: float = math.nan

    def __post_init__(self):
        if self.bit not in (1, -1):
            raise ValueError("logical bit must be +1 or -1")
        if not -1e-12 <= self.weight <= 1 + 1e-9:
            raise ValueError(f"collapse weight {self.weight} outside [0, 1]")
        if self.basis in ("X", "XY") and not math.isnan(self.raw) and (self.raw >= 0) != (self.bit == 1):
            raise ValueError("logical bit inconsistent with the sign of the homodyne outcome")

    @property
    def outcome(self) -> int:
        """0 for the + branch, 1 for the - branch."""
        return 0 if self.bit == 1 else 1


@functools.lru_cache(maxsize=16)
def half_line_projectors(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """``(I + X_E)/2`` and ``(I - X_E)/2`` from the same quadrature as ``make_sign_q``."""
    s = make_sign_q(cutoff).matrix
    eye = np.eye(cutoff, dtype=complex)
    plus, minus = 0.5 * (eye + s), 0.5 * (eye - s)
    plus.setflags(write=False)
    minus.setflags(write=False)
    return plus, minus


def parity_projectors(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    p = parity_diagonal(cutoff)
    return np.diag((p > 0).astype(complex)), np.diag((p < 0).astype(complex))


def _branch_weight(proj: np.ndarray, state, mode: int) -> float:
    rho1 = reduced_single_mode(state, mode)
    return float(np.real(np.sum(proj * rho1.T)))


def _pick(weights: tuple[float, float], rng, postselect) -> int:
    if postselect is not None:
        bit = int(postselect)
        if bit not in (1, -1):
            raise ValueError("postselect must be +1 or -1")
    else:
        if rng is None:
            raise ValueError("a random generator is needed unless the outcome is post-selected")
        bit = 1 if rng.random() < weights[0] else -1
    w = weights[0] if bit == 1 else weights[1]
    if w < ZERO_BRANCH_TOL:
        raise ZeroProbabilityError(f"branch {bit:+d} has probability {w:.3g}")
    return bit


def _collapse_dense(rho: DensityMatrix, proj: np.ndarray, mode: int, keep_mode: bool):
    if keep_mode:
        return apply_local(proj, rho, mode).normalized()
    if rho.n_modes == 1:
        return None
    t = np.moveaxis(np.tensordot(proj, rho.tensor, axes=([1], [mode])), 0, mode)
    out = DensityMatrix(t.reshape(rho.dim, rho.dim), rho.cutoff, rho.n_modes, rho.trace_defect)
    return partial_trace(out, modes=[mode]).normalized()


def condition_on_x(psi: StateVector, mode: int, x: float) -> StateVector | None:
    """Remaining modes after an ideal q-homodyne outcome ``x`` on ``mode``."""
    if psi.n_modes == 1:
        return None
    w = hermite_functions(psi.cutoff, [x])[:, 0]
    rest = np.tensordot(w, psi.tensor, axes=([0], [mode]))
    return StateVector(rest.reshape(-1), psi.cutoff, psi.n_modes - 1, psi.trace_defect).normalized()


def homodyne_sample_q(state, mode: int, rng: np.random.Generator, grid=None, size=None):
    """Draw q-homodyne outcomes by inverse CDF on a uniform grid.

    ``grid`` is ``(x_min, x_max, n_points)``; the default spans
    ``+-(sqrt(2D) + 6)`` with 2048 points.
    """
    marg = q_marginal(state, grid, mode)
    return sample_from_density(marg.x, marg.density, rng, size)


def sample_from_density(x: np.ndarray, density: np.ndarray, rng: np.random.Generator, size=None):
    cdf = cumulative_trapezoid(density, x, initial=0.0)
    cdf /= cdf[-1]
    u = rng.random(size)
    return np.interp(u, cdf, x) if size is not None else float(np.interp(u, cdf, x))


def measure_logical_x(state, mode: int = 0, rng=None, postselect=None, keep_mode: bool = True, grid=None):
    """Logical X measurement by homodyne sign.

    Returns ``(record, remainder)``. Dense states collapse with the
    half-line projector (or, with ``keep_mode=False``, have the measured mode
    traced out). State vectors sample a homodyne outcome ``x``; with
    ``keep_mode=False`` the remainder is conditioned on ``x`` itself.
    Post-selection is only available for dense states.
    """
    plus, minus = half_line_projectors(state.cutoff)
    weights = (_branch_weight(plus, state, mode), _branch_weight(minus, state, mode))
    if isinstance(state, DensityMatrix):
        bit = _pick(weights, rng, postselect)
        rec = MeasurementRecord(mode, "X", bit, weights[0] if bit == 1 else weights[1], raw=float(bit))
        return rec, _collapse_dense(state, plus if bit == 1 else minus, mode, keep_mode)
    if postselect is not None:
        raise ValueError("post-selection needs the dense backend")
    x = homodyne_sample_q(state, mode, rng, grid)
    bit = 1 if x >= 0 else -1
    w = weights[0] if bit == 1 else weights[1]
    rec = MeasurementRecord(mode, "X", bit, float(np.clip(w, 0.0, 1.0)), raw=float(x))
    if keep_mode:
        return rec, apply_local(plus if bit == 1 else minus, state, mode).normalized()
    return rec, condition_on_x(state, mode, x)


def measure_xy(state, mode: int, theta: float, rng=None, postselect=None, keep_mode: bool = True, grid=None):
    """Measure in the X-Y plane basis ``(|0_L> +- e^{i theta} |1_L>)/sqrt(2)``.

    Implemented as ``R(theta/2)`` followed by logical X readout.
    """
    from .gates import parity_rotation

    rotated = apply(parity_rotation(theta / 2, state.cutoff, mode), state)
    rec, rest = measure_logical_x(rotated, mode, rng, postselect, keep_mode, grid)
    return MeasurementRecord(mode, "XY", rec.bit, rec.weight, theta, rec.raw), rest


def measure_logical_z(state, mode: int = 0, rng=None, postselect=None, keep_mode: bool = True):
    """Parity measurement with projectors ``(I +- P)/2``."""
    even, odd = parity_projectors(state.cutoff)
    weights = (_branch_weight(even, state, mode), _branch_weight(odd, state, mode))
    if isinstance(state, StateVector) and postselect is not None:
        raise ValueError("post-selection needs the dense backend")
    bit = _pick(weights, rng, postselect)
    proj = even if bit == 1 else odd
    rec = MeasurementRecord(mode, "Z", bit, weights[0] if bit == 1 else weights[1], raw=float(bit))
    if isinstance(state, DensityMatrix):
        return rec, _collapse_dense(state, proj, mode, keep_mode)
    rest = apply_local(proj, state, mode).normalized()
    if keep_mode:
        return rec, rest
    if state.n_modes == 1:
        return rec, None
    # discarding a parity-projected mode leaves a mixture of the other modes
    t = np.moveaxis(rest.tensor, mode, 0).reshape(rest.cutoff, -1)
    return rec, DensityMatrix(t.T @ t.conj(), rest.cutoff, rest.n_modes - 1)


def shots_to_csv(records, header: str = "") -> str:
    """Shot table with columns shot_id, mode, basis, theta, raw_x, logical_bit, weight."""
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["shot_id", "mode", "basis", "theta", "raw_x", "logical_bit", "weight"])
    for i, r in enumerate(records):
        w.writerow([i, r.mode, r.basis, f"{r.theta:.17g}", f"{r.raw:.17g}", r.bit, f"{r.weight:.17g}"])
    return buf.getvalue()
