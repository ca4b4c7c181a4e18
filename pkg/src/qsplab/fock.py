"""Truncated Fock-space kernel.

Single- and multi-mode operators, density matrices and state vectors on a
truncated Fock basis, together with the position-space machinery (normalised
Hermite functions, the q-sign operator, q-quadrature marginals).

Quadratures follow ``a = (q + i p) / sqrt(2)``, so the vacuum has
``<q^2> = 1/2``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, linalg

CONVENTION = "a=(q+ip)/sqrt(2)"

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9


class CutoffError(ValueError):
    """The Fock cutoff is too small for the requested state or operator."""


class QuadratureError(RuntimeError):
    """Panel refinement of a quadrature rule did not converge."""


@dataclass(frozen=True)
class FockSpace:
    cutoff: int
    convention: str = CONVENTION

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValueError(f"cutoff must be an integer >= 2, got {self.cutoff!r}")
        if self.convention != CONVENTION:
            raise ValueError(f"unsupported quadrature convention {self.convention!r}")
        object.__setattr__(self, "cutoff", int(self.cutoff))

    @property
    def dim(self) -> int:
        return self.cutoff

    def levels(self) -> np.ndarray:
        return np.arange(self.cutoff)


def _as_space(space) -> FockSpace:
    return space if isinstance(space, FockSpace) else FockSpace(int(space))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator acting on the modes listed in ``modes``."""

    matrix: np.ndarray
    cutoff: int
    modes: tuple = (0,)
    hermitian: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        mat = np.asarray(self.matrix)
        dim = self.cutoff ** len(self.modes)
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} does not match cutoff^{len(self.modes)} = {dim}")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError(f"repeated mode in signature {self.modes}")
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.hermitian:
            defect = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
            if defect > HERMITIAN_TOL:
                raise ValueError(f"operator flagged Hermitian but defect is {defect:.3g}")

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def dagger(self) -> FockOperator:
        return FockOperator(self.matrix.conj().T, self.cutoff, self.modes, self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            if other.modes != self.modes or other.cutoff != self.cutoff:
                raise ValueError("operator product needs matching mode signature and cutoff")
            return FockOperator(self.matrix @ other.matrix, self.cutoff, self.modes)
        return self.matrix @ np.asarray(other)


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    """Fock-diagonal operator stored as its diagonal (length ``cutoff**len(modes)``)."""

    diagonal: np.ndarray
    cutoff: int
    modes: tuple = (0,)

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=complex)
        if d.shape != (self.cutoff ** len(self.modes),):
            raise ValueError(f"diagonal length {d.shape} does not match cutoff^{len(self.modes)}")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError(f"repeated mode in signature {self.modes}")
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def dagger(self) -> DiagonalOperator:
        return DiagonalOperator(self.diagonal.conj(), self.cutoff, self.modes)

    def __matmul__(self, other):
        if isinstance(other, DiagonalOperator):
            if other.cutoff != self.cutoff:
                raise ValueError("cutoff mismatch")
            modes = tuple(dict.fromkeys(self.modes + other.modes))
            prod = self.on_modes(modes) * other.on_modes(modes)
            return DiagonalOperator(prod.reshape(-1), self.cutoff, modes)
        return self.matrix @ np.asarray(other)

    def on_modes(self, modes) -> np.ndarray:
        """Diagonal as a tensor over ``modes``, constant along modes it does not act on."""
        modes = tuple(modes)
        t = self.diagonal.reshape((self.cutoff,) * self.n_modes)
        t = t.reshape(t.shape + (1,) * (len(modes) - self.n_modes))
        t = np.moveaxis(t, list(range(self.n_modes)), [modes.index(m) for m in self.modes])
        return np.broadcast_to(t, (self.cutoff,) * len(modes))

    def unitarity_defect(self) -> float:
        return float(np.max(np.abs(np.abs(self.diagonal) ** 2 - 1)))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense mixed state on ``n_modes`` modes, each truncated at ``cutoff``.

    ``trace_defect`` records ``|1 - Tr rho|`` before the last renormalisation,
    i.e. the population that fell outside the truncated space.
    """

    matrix: np.ndarray
    cutoff: int
    n_modes: int = 1
    trace_defect: float = 0.0

    def __post_init__(self):
        dim = self.cutoff**self.n_modes
        if np.shape(self.matrix) != (dim, dim):
            raise ValueError(f"density matrix shape {np.shape(self.matrix)} != ({dim}, {dim})")

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def dim(self) -> int:
        return self.cutoff**self.n_modes

    @property
    def tensor(self) -> np.ndarray:
        """View with one row index and one column index per mode."""
        return self.matrix.reshape((self.cutoff,) * (2 * self.n_modes))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix.conj().T, self.matrix)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(linalg.eigvalsh(herm, subset_by_index=[0, 0])[0])

    def populations(self, mode: int | None = None) -> np.ndarray:
        """Fock populations of one mode (or of the joint basis if ``mode`` is None)."""
        if mode is None:
            return np.real(np.diag(self.matrix)).copy()
        return np.real(np.diag(partial_trace(self, keep=[mode]).matrix)).copy()

    def validate(self, trace_tol: float = TRACE_TOL, herm_tol: float = HERMITIAN_TOL, eig_tol: float = 1e-9) -> None:
        tr = self.trace()
        if abs(tr - 1) > trace_tol:
            raise ValueError(f"trace {tr:.12g} deviates from 1 by more than {trace_tol}")
        if self.hermiticity_defect() > herm_tol:
            raise ValueError(f"Hermiticity defect {self.hermiticity_defect():.3g}")
        if self.min_eigenvalue() < -eig_tol:
            raise ValueError(f"negative eigenvalue {self.min_eigenvalue():.3g}")

    def normalized(self) -> DensityMatrix:
        tr = self.trace().real
        if tr <= 0:
            raise ValueError("cannot normalise a state with non-positive trace")
        return DensityMatrix(self.matrix / tr, self.cutoff, self.n_modes, abs(1 - tr))


@dataclass(frozen=True, eq=False)
class StateVector:
    data: np.ndarray
    cutoff: int
    n_modes: int = 1
    trace_defect: float = 0.0

    def __post_init__(self):
        if np.shape(self.data) != (self.cutoff**self.n_modes,):
            raise ValueError(f"state vector shape {np.shape(self.data)} does not match cutoff^{self.n_modes}")

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def tensor(self) -> np.ndarray:
        return self.data.reshape((self.cutoff,) * self.n_modes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def normalized(self) -> StateVector:
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalise the zero vector")
        return StateVector(self.data / nrm, self.cutoff, self.n_modes, abs(1 - nrm**2))

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.data, self.data.conj()), self.cutoff, self.n_modes, self.trace_defect)


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """Weighted collection of pure states; the Monte-Carlo mixed-state backend."""

    states: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.states),) or len(self.states) == 0:
            raise ValueError("need one weight per state and at least one state")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", tuple(self.states))

    @classmethod
    def uniform(cls, states: Sequence[StateVector]) -> TrajectoryEnsemble:
        return cls(tuple(states), np.full(len(states), 1.0 / len(states)))

    @property
    def cutoff(self) -> int:
        return self.states[0].cutoff

    @property
    def n_modes(self) -> int:
        return self.states[0].n_modes

    def __len__(self) -> int:
        return len(self.states)

    def samples(self, op) -> np.ndarray:
        return np.array([expectation(op, s) for s in self.states])

    def expectation(self, op) -> tuple[complex, float]:
        """Weighted mean and its standard error."""
        return weighted_mean(self.samples(op), self.weights)

    def to_density(self) -> DensityMatrix:
        data = np.stack([s.data for s in self.states])
        mat = (data.T * self.weights) @ data.conj()
        return DensityMatrix(mat, self.cutoff, self.n_modes)


def weighted_mean(values: np.ndarray, weights: np.ndarray) -> tuple[complex, float]:
    mean = np.sum(weights * values)
    n_eff = 1.0 / np.sum(weights**2)
    var = np.sum(weights * np.abs(values - mean) ** 2)
    return complex(mean), float(math.sqrt(var / max(n_eff - 1, 1)))


# ---------------------------------------------------------------------------
# single-mode constructors


def make_annihilation(space) -> FockOperator:
    space = _as_space(space)
    mat = np.diag(np.sqrt(np.arange(1, space.cutoff, dtype=float)), 1).astype(complex)
    return FockOperator(mat, space.cutoff)


def make_number(space) -> FockOperator:
    space = _as_space(space)
    return FockOperator(np.diag(space.levels().astype(complex)), space.cutoff, hermitian=True)


def parity_diagonal(cutoff: int) -> np.ndarray:
    return np.where(np.arange(cutoff) % 2 == 0, 1.0, -1.0)


def make_parity(space) -> FockOperator:
    space = _as_space(space)
    return FockOperator(np.diag(parity_diagonal(space.cutoff)).astype(complex), space.cutoff, hermitian=True)


def make_q(space) -> FockOperator:
    a = make_annihilation(space).matrix
    return FockOperator((a + a.conj().T) / math.sqrt(2), _as_space(space).cutoff, hermitian=True)


def make_p(space) -> FockOperator:
    a = make_annihilation(space).matrix
    return FockOperator((a - a.conj().T) / (1j * math.sqrt(2)), _as_space(space).cutoff, hermitian=True)


@functools.lru_cache(maxsize=64)
def _displacement_matrix(alpha: complex, cutoff: int, pad: int) -> np.ndarray:
    big = cutoff + pad
    a = np.diag(np.sqrt(np.arange(1, big, dtype=float)), 1)
    gen = alpha * a.T - np.conj(alpha) * a
    out = linalg.expm(gen)[:cutoff, :cutoff]
    out.setflags(write=False)
    return out


def make_displacement(alpha: complex, space, pad: int | None = None, defect_tol: float | None = 1e-6) -> FockOperator:
    """Displacement ``exp(alpha a^dag - alpha^* a)`` cropped to the cutoff.

    The exponential is taken on a padded space (``cutoff + pad`` levels, pad
    defaulting to the cutoff itself) so the retained block is free of the
    truncated generator's edge artefacts. The unitarity defect of the block
    restricted to the lowest ``ceil(D/2)`` levels is reported in
    ``diagnostics`` and must not exceed ``defect_tol``; pass ``None`` to skip
    the check when the caller verifies adequacy on the occupied levels itself.
    """
    space = _as_space(space)
    alpha = complex(alpha)
    pad = max(space.cutoff, 20) if pad is None else int(pad)
    mat = np.array(_displacement_matrix(alpha, space.cutoff, pad))
    half = -(-space.cutoff // 2)
    gram = mat[:, :half].conj().T @ mat[:, :half]
    defect = float(np.max(np.abs(gram - np.eye(half))))
    if defect_tol is not None and defect > defect_tol:
        raise CutoffError(
            f"displacement alpha={alpha} needs a larger cutoff than {space.cutoff} "
            f"(unitarity defect {defect:.3g} on the lowest {half} levels)"
        )
    full = mat.conj().T @ mat
    diag = {"unitarity_defect_low": defect, "unitarity_defect": float(np.max(np.abs(full - np.eye(space.cutoff))))}
    return FockOperator(mat, space.cutoff, diagnostics=diag)


# ---------------------------------------------------------------------------
# position-space machinery

_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)


def hermite_functions(n_levels: int, x) -> np.ndarray:
    """Normalised Hermite functions psi_0..psi_{n_levels-1} at points ``x``.

    Returns an array of shape ``(n_levels, len(x))``. The upward recurrence
    runs on a rescaled copy with a per-point log scale, so large ``|x|`` does
    not underflow the Gaussian prefactor before the polynomial part grows.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((n_levels, x.size))
    if n_levels == 0:
        return out
    log_scale = -0.5 * x * x
    prev = np.zeros_like(x)
    cur = np.full_like(x, np.pi**-0.25)
    out[0] = cur * np.exp(log_scale)
    for n in range(n_levels - 1):
        nxt = math.sqrt(2.0 / (n + 1)) * x * cur - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if np.any(big):
            cur[big] /= _RESCALE
            prev[big] /= _RESCALE
            log_scale[big] += _LOG_RESCALE
        with np.errstate(under="ignore"):
            out[n + 1] = cur * np.exp(log_scale)
    return out


def hermite_psi(n: int, x: float, return_flag: bool = False):
    """Value of the n-th normalised Hermite function at ``x``.

    Far outside the support the value underflows to 0; with
    ``return_flag=True`` a second element reports whether that happened.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    val = float(hermite_functions(n + 1, [x])[n, 0])
    if return_flag:
        return val, (val == 0.0 and abs(x) > math.sqrt(2 * n + 1))
    return val


def _half_line_rule(x_max: float, panels: int, nodes: int = 32) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, x_max, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + half * t).ravel(), (half * w).ravel()


def sign_support(cutoff: int) -> float:
    """Upper limit of the half-line quadrature, past the classical turning point."""
    return math.sqrt(2 * cutoff) + 6.0


def _sign_matrix_on_rule(cutoff: int, panels: int) -> np.ndarray:
    xs, ws = _half_line_rule(sign_support(cutoff), panels)
    psi = hermite_functions(cutoff, xs)
    mat = 2.0 * (psi * ws) @ psi.T
    n = np.arange(cutoff)
    mat[(n[:, None] + n[None, :]) % 2 == 0] = 0.0
    return mat


@functools.lru_cache(maxsize=16)
def _sign_matrix(cutoff: int, tol: float) -> np.ndarray:
    panels = max(8, math.ceil(sign_support(cutoff) / 0.25))
    coarse = _sign_matrix_on_rule(cutoff, panels)
    fine = _sign_matrix_on_rule(cutoff, 2 * panels)
    err = float(np.max(np.abs(fine - coarse)))
    if err > tol:
        raise QuadratureError(f"sign(q) quadrature disagrees by {err:.3g} under panel refinement")
    fine.setflags(write=False)
    return fine


def make_sign_q(space, tol: float = 1e-10) -> FockOperator:
    """Matrix of sign(q) in the Fock basis.

    ``S_mn = 2 * int_0^inf psi_m psi_n dx`` for ``m + n`` odd and zero
    otherwise, by composite Gauss-Legendre on ``[0, sqrt(2D) + 6]``.
    """
    space = _as_space(space)
    return FockOperator(_sign_matrix(space.cutoff, tol).astype(complex), space.cutoff, hermitian=True)


# ---------------------------------------------------------------------------
# multi-mode composition


def tensor(ops: Sequence) -> FockOperator:
    """Kronecker product; the result acts on modes 0..k-1 in the given order."""
    if not ops:
        raise ValueError("need at least one operator")
    cutoff = ops[0].cutoff
    if any(op.cutoff != cutoff for op in ops):
        raise ValueError("all factors must share the cutoff")
    mat = np.asarray(ops[0].matrix)
    for op in ops[1:]:
        mat = np.kron(mat, op.matrix)
    n = sum(op.n_modes for op in ops)
    return FockOperator(mat, cutoff, tuple(range(n)))


def tensor_states(states: Sequence):
    """Product of states (all state vectors, or density matrices)."""
    cutoff = states[0].cutoff
    if any(s.cutoff != cutoff for s in states):
        raise ValueError("all factors must share the cutoff")
    n = sum(s.n_modes for s in states)
    if all(isinstance(s, StateVector) for s in states):
        data = states[0].data
        for s in states[1:]:
            data = np.kron(data, s.data)
        return StateVector(data, cutoff, n)
    mats = [s.matrix if isinstance(s, DensityMatrix) else s.to_density().matrix for s in states]
    if len(mats) == 2:
        d0, d1 = mats[0].shape[0], mats[1].shape[0]
        t = np.einsum("ik,jl->ijkl", mats[0], mats[1])
        return DensityMatrix(t.reshape(d0 * d1, d0 * d1), cutoff, n)
    mat = mats[0]
    for other in mats[1:]:
        mat = np.kron(mat, other)
    return DensityMatrix(mat, cutoff, n)


def _letters(k: int, offset: int = 0) -> list[str]:
    alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return list(alphabet[offset : offset + k])


def partial_trace(rho: DensityMatrix, modes: Sequence[int] = (), keep: Sequence[int] | None = None) -> DensityMatrix:
    """Trace out ``modes`` (or everything not in ``keep``)."""
    m = rho.n_modes
    if keep is None:
        keep = [k for k in range(m) if k not in set(modes)]
    keep = sorted(keep)
    if any(k < 0 or k >= m for k in keep):
        raise ValueError(f"mode index out of range for a {m}-mode state")
    rows = _letters(m)
    cols = _letters(m, m)
    for k in range(m):
        if k not in keep:
            cols[k] = rows[k]
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, rho.tensor)
    d = rho.cutoff ** len(keep)
    return DensityMatrix(reduced.reshape(d, d), rho.cutoff, len(keep), rho.trace_defect)


def apply_local(op, state, mode: int = 0):
    """Apply a single-mode operator on ``mode``: ``O psi`` or ``O rho O^dag``."""
    if isinstance(op, (FockOperator, DiagonalOperator)):
        if op.n_modes != 1:
            raise ValueError("local application needs a single-mode operator")
        op = op.matrix
    mat = np.asarray(op)
    m = state.n_modes
    if isinstance(state, StateVector):
        t = np.moveaxis(np.tensordot(mat, state.tensor, axes=([1], [mode])), 0, mode)
        return StateVector(t.reshape(-1), state.cutoff, m, state.trace_defect)
    t = np.tensordot(mat, state.tensor, axes=([1], [mode]))
    t = np.moveaxis(t, 0, mode)
    t = np.tensordot(t, mat.conj(), axes=([m + mode], [1]))
    t = np.moveaxis(t, -1, m + mode)
    return DensityMatrix(t.reshape(state.dim, state.dim), state.cutoff, m, state.trace_defect)


def apply_diagonal(op: DiagonalOperator, state):
    """Apply a Fock-diagonal operator by broadcasting, without forming a matrix."""
    m = state.n_modes
    if any(k < 0 or k >= m for k in op.modes):
        raise ValueError(f"operator modes {op.modes} out of range for a {m}-mode state")
    d = np.asarray(op.on_modes(range(m)))
    if isinstance(state, StateVector):
        return StateVector((state.tensor * d).reshape(-1), state.cutoff, m, state.trace_defect)
    t = state.tensor * d.reshape(d.shape + (1,) * m)
    t *= d.conj().reshape((1,) * m + d.shape)
    return DensityMatrix(t.reshape(state.dim, state.dim), state.cutoff, m, state.trace_defect)


def apply(op, state):
    """Apply ``op`` (on its own mode signature) to a state vector or density matrix."""
    if isinstance(op, DiagonalOperator):
        return apply_diagonal(op, state)
    if op.n_modes == 1:
        return apply_local(op, state, op.modes[0])
    if op.modes != tuple(range(state.n_modes)):
        raise ValueError("multi-mode operators must span the whole state in order")
    if isinstance(state, StateVector):
        return StateVector(op.matrix @ state.data, state.cutoff, state.n_modes, state.trace_defect)
    return DensityMatrix(op.matrix @ state.matrix @ op.matrix.conj().T, state.cutoff, state.n_modes, state.trace_defect)


def expectation(op, state) -> complex:
    """``Tr(op rho)`` or ``<psi|op|psi>``; single-mode operators act on ``op.modes[0]``."""
    if isinstance(state, TrajectoryEnsemble):
        return state.expectation(op)[0]
    if isinstance(op, DiagonalOperator) and op.n_modes == state.n_modes:
        if isinstance(state, StateVector):
            return complex(np.sum(op.diagonal * np.abs(state.data) ** 2))
        return complex(np.sum(op.diagonal * np.diag(state.matrix)))
    mat = np.asarray(op.matrix)
    if op.n_modes == 1 and state.n_modes > 1:
        mode = op.modes[0]
        if isinstance(state, StateVector):
            return complex(np.vdot(state.data, apply_local(mat, state, mode).data))
        reduced = partial_trace(state, keep=[mode])
        return complex(np.sum(mat * reduced.matrix.T))
    if isinstance(state, StateVector):
        return complex(np.vdot(state.data, mat @ state.data))
    return complex(np.sum(mat * state.matrix.T))


# ---------------------------------------------------------------------------
# q-quadrature marginals


@dataclass(frozen=True)
class QMarginal:
    x: np.ndarray
    density: np.ndarray
    mass_outside: float

    def total(self) -> float:
        return float(integrate.trapezoid(self.density, self.x))


def reduced_single_mode(state, mode: int = 0) -> np.ndarray:
    """Single-mode density matrix (as an ndarray) of ``mode``."""
    if isinstance(state, TrajectoryEnsemble):
        state = state.to_density()
    if isinstance(state, StateVector):
        t = np.moveaxis(state.tensor, mode, 0).reshape(state.cutoff, -1)
        return t @ t.conj().T
    if state.n_modes == 1:
        return state.matrix
    return partial_trace(state, keep=[mode]).matrix


def q_density(rho1: np.ndarray, x) -> np.ndarray:
    """``<x_q|rho|x_q>`` for a single-mode density matrix."""
    psi = hermite_functions(rho1.shape[0], x)
    return np.maximum(np.real(np.sum(psi.conj() * (rho1 @ psi), axis=0)), 0.0)


def default_q_grid(cutoff: int, n_points: int = 2048) -> tuple[float, float, int]:
    lim = sign_support(cutoff)
    return (-lim, lim, n_points)


def q_marginal(state, grid=None, mode: int = 0, tol: float = 1e-6) -> QMarginal:
    """q-quadrature probability density of one mode on a uniform grid.

    ``grid`` is ``(x_min, x_max, n_points)``; the default spans
    ``+-(sqrt(2D) + 6)`` with 2048 points. Raises ``CutoffError`` when more
    than ``tol`` of the probability lies outside the grid.
    """
    rho1 = reduced_single_mode(state, mode)
    x_min, x_max, npts = default_q_grid(rho1.shape[0]) if grid is None else grid
    x = np.linspace(x_min, x_max, int(npts))
    dens = q_density(rho1, x)
    outside = _mass_outside(rho1, x_min, x_max)
    if outside > tol:
        raise CutoffError(f"grid [{x_min}, {x_max}] misses {outside:.3g} of the q-marginal")
    return QMarginal(x, dens, outside)


def _mass_outside(rho1: np.ndarray, x_min: float, x_max: float) -> float:
    lim = sign_support(rho1.shape[0]) + 4.0
    lo, hi = max(x_min, -lim), min(x_max, lim)
    total = float(np.real(np.trace(rho1)))
    if hi <= lo:
        return total
    t, w = np.polynomial.legendre.leggauss(24)
    edges = np.linspace(lo, hi, max(8, math.ceil((hi - lo) / 0.25)) + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    xs, ws = (mid + half * t).ravel(), (half * w).ravel()
    return max(total - float(np.sum(ws * q_density(rho1, xs))), 0.0)
