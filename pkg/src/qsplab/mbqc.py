"""Graph states of QSP qubits and adaptive measurement patterns.

Every vertex starts as a displaced-thermal |+_L> encoding and every edge
receives one CPhase. Non-output vertices are then measured in schedule
order in X-Y plane bases (or Z), with angles adapted to earlier outcomes
through a byproduct frame derived from a flow of the open graph.

Two physical backends are provided:

* dense: density matrices, at most two modes;
* trajectory: each trajectory draws one coherent amplitude per mode from
  the thermal ensemble. Because every gate in the pattern is a parity
  phase, a trajectory stays in the span of the even and odd parts of those
  coherent states, so it is stored as a ``(2,)*m`` coefficient tensor plus
  two Fock vectors per mode.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .encoding import LogicalState, PAULI, logical_state
from .fock import (
    CutoffError,
    DensityMatrix,
    apply_diagonal,
    default_q_grid,
    hermite_functions,
    make_sign_q,
    tensor_states,
)
from .gates import cphase
from .measurement import measure_logical_z, measure_xy
from .runtime import chunk_streams, parallel_map
from .states import ThermalParams, coherent_vector, default_cutoff, displaced_thermal, sample_displacements

DENSE_MAX_MODES = 2
TRAJ_MAX_MODES = 6
TRAJ_MAX_CUTOFF = 40
# mean Fock mass lost per sampled coherent state
TRAJ_TAIL_TOL = 1e-5
ORACLE_MAX_QUBITS = 10


class BudgetError(RuntimeError):
    """The requested simulation exceeds the backend's size budget."""


class PatternError(ValueError):
    """The graph pattern is malformed or has no consistent byproduct frame."""


# ---------------------------------------------------------------------------
# pattern description


@dataclass(frozen=True)
class ScheduleEntry:
    vertex: int
    theta: float = 0.0
    basis: str = "XY"
    s_domain: tuple | None = None
    t_domain: tuple | None = None


@dataclass(frozen=True)
class GraphPattern:
    vertices: tuple
    edges: tuple
    schedule: tuple
    outputs: tuple
    roles: dict = field(default_factory=dict)

    def __post_init__(self):
        verts = tuple(int(v) for v in self.vertices)
        if len(set(verts)) != len(verts):
            raise PatternError("duplicate vertex id")
        edges = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        for a, b in edges:
            if a == b:
                raise PatternError(f"self-loop on vertex {a}")
            if a not in verts or b not in verts:
                raise PatternError(f"edge ({a}, {b}) references an unknown vertex")
        if len(set(edges)) != len(edges):
            raise PatternError("duplicate edge")
        outputs = tuple(int(v) for v in self.outputs)
        if any(v not in verts for v in outputs) or len(set(outputs)) != len(outputs):
            raise PatternError("outputs must be distinct known vertices")
        measured = [e.vertex for e in self.schedule]
        if sorted(measured) != sorted(v for v in verts if v not in outputs):
            raise PatternError("schedule must measure every non-output vertex exactly once")
        for e in self.schedule:
            if e.basis not in ("XY", "Z"):
                raise PatternError(f"unknown basis {e.basis!r}")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "schedule", tuple(self.schedule))
        object.__setattr__(self, "roles", {int(k): v for k, v in dict(self.roles).items()})
        derive_domains(self)

    @property
    def inputs(self) -> tuple:
        return tuple(v for v in self.vertices if self.roles.get(v) == "input")

    def neighbors(self, v: int) -> set:
        return {b if a == v else a for a, b in self.edges if v in (a, b)}

    def mode_of(self, v: int) -> int:
        return self.vertices.index(v)

    @classmethod
    def from_dict(cls, doc: dict) -> GraphPattern:
        try:
            verts = [int(v["id"]) for v in doc["vertices"]]
            roles = {int(v["id"]): v.get("role", "aux") for v in doc["vertices"]}
            sched = []
            for s in doc.get("schedule", []):
                adapt = s.get("adapt")
                sched.append(
                    ScheduleEntry(
                        int(s["vertex"]),
                        float(s.get("theta", 0.0)),
                        s.get("basis", "XY"),
                        None if adapt is None else tuple(sorted(int(i) for i in adapt.get("s_domain", []))),
                        None if adapt is None else tuple(sorted(int(i) for i in adapt.get("t_domain", []))),
                    )
                )
            return cls(tuple(verts), tuple(tuple(e) for e in doc.get("edges", [])), tuple(sched),
                       tuple(int(v) for v in doc.get("outputs", [])), roles)
        except (KeyError, TypeError) as exc:
            raise PatternError(f"malformed pattern document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> GraphPattern:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        meas, _ = derive_domains(self)
        sched = []
        for e in self.schedule:
            s, t = meas[e.vertex]
            item = {"vertex": e.vertex, "theta": e.theta, "adapt": {"s_domain": sorted(s), "t_domain": sorted(t)}}
            if e.basis != "XY":
                item["basis"] = e.basis
            sched.append(item)
        return {
            "vertices": [{"id": v, "role": self.roles.get(v, "output" if v in self.outputs else "aux")} for v in self.vertices],
            "edges": [list(e) for e in self.edges],
            "schedule": sched,
            "outputs": list(self.outputs),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def wire_pattern(theta: float = 0.0) -> GraphPattern:
    """Two-vertex wire: vertex 0 (input, |+>) measured at ``theta``, vertex 1 is the output."""
    return GraphPattern((0, 1), ((0, 1),), (ScheduleEntry(0, theta),), (1,), {0: "input", 1: "output"})


def cluster_pattern(n: int = 2) -> GraphPattern:
    """Linear cluster with no measurements (all vertices are outputs)."""
    verts = tuple(range(n))
    return GraphPattern(verts, tuple((i, i + 1) for i in range(n - 1)), (), verts, {v: "output" for v in verts})


# ---------------------------------------------------------------------------
# flow and byproduct frame


def find_flow(pattern: GraphPattern) -> dict:
    """A flow ``f`` for the XY-measured vertices, found by backtracking.

    ``f(j)`` is a neighbour of ``j`` that is not an input, is measured after
    ``j`` (or is an output), is used once, and all of whose other neighbours
    are measured after ``j`` or are outputs. Z-measured vertices are removed
    from the graph first.
    """
    zset = {e.vertex for e in pattern.schedule if e.basis == "Z"}
    order = {e.vertex: i for i, e in enumerate(pattern.schedule)}
    inf = len(order) + 1
    late = {v: order.get(v, inf) for v in pattern.vertices}
    nbr = {v: pattern.neighbors(v) - zset for v in pattern.vertices if v not in zset}
    inputs = set(pattern.inputs)
    xy = [e.vertex for e in pattern.schedule if e.basis == "XY"]
    flow: dict = {}

    def ok(j, c):
        if c in inputs or c in flow.values() or late[c] <= late[j]:
            return False
        return all(late[k] > late[j] for k in nbr[c] if k != j)

    def search(i):
        if i == len(xy):
            return True
        j = xy[i]
        for c in sorted(nbr[j]):
            if ok(j, c):
                flow[j] = c
                if search(i + 1):
                    return True
                del flow[j]
        return False

    if not search(0):
        raise PatternError("the measurement schedule admits no flow; byproducts cannot be tracked")
    return flow


def derive_domains(pattern: GraphPattern):
    """Symbolic byproduct domains.

    Returns ``(measured, outputs)``: for each measured vertex its
    ``(s_domain, t_domain)`` (outcomes whose parity flips the angle sign /
    adds pi) and for each output its ``(x_domain, z_domain)``. Explicit
    domains given in the schedule must agree with the derived ones.
    """
    zset = {e.vertex for e in pattern.schedule if e.basis == "Z"}
    seen_xy = False
    for e in pattern.schedule:
        if e.basis == "XY":
            seen_xy = True
        elif seen_xy:
            raise PatternError("Z measurements must be scheduled before all X-Y plane measurements")
    flow = find_flow(pattern)
    fx = {v: frozenset() for v in pattern.vertices}
    fz = {v: frozenset() for v in pattern.vertices}
    measured = {}
    for e in pattern.schedule:
        j = e.vertex
        measured[j] = (fx[j], fz[j])
        if e.s_domain is not None and (frozenset(e.s_domain), frozenset(e.t_domain)) != measured[j]:
            raise PatternError(
                f"adapt domains for vertex {j} disagree with the flow: expected "
                f"s={sorted(fx[j])}, t={sorted(fz[j])}"
            )
        if e.basis == "Z":
            # the effective outcome also absorbs any X byproduct on j
            flip = frozenset({j}) ^ fx[j]
            for k in pattern.neighbors(j):
                fz[k] = fz[k] ^ flip
        else:
            c = flow[j]
            fx[c] = fx[c] ^ {j}
            for k in pattern.neighbors(c) - zset - {j}:
                fz[k] = fz[k] ^ {j}
    outputs = {v: (fx[v], fz[v]) for v in pattern.outputs}
    return measured, outputs


def _parity(domain, outcomes: dict) -> int:
    return sum(outcomes[v] for v in domain) % 2


def adapted_angle(theta: float, s: int, t: int) -> float:
    """``(-1)^s theta + t pi``."""
    return (-theta if s else theta) + (math.pi if t else 0.0)


@dataclass
class ByproductFrame:
    """Accumulated X and Z byproduct bits per output vertex."""

    x: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)

    @classmethod
    def from_outcomes(cls, pattern: GraphPattern, outcomes: dict) -> ByproductFrame:
        _, outs = derive_domains(pattern)
        return cls({v: _parity(d[0], outcomes) for v, d in outs.items()}, {v: _parity(d[1], outcomes) for v, d in outs.items()})

    def compose(self, other: ByproductFrame) -> ByproductFrame:
        keys = set(self.x) | set(other.x)
        return ByproductFrame({k: self.x.get(k, 0) ^ other.x.get(k, 0) for k in keys},
                              {k: self.z.get(k, 0) ^ other.z.get(k, 0) for k in keys})

    def correction(self, outputs) -> np.ndarray:
        """``(x) Z^z X^x`` over ``outputs``: undoes the byproduct on the logical state."""
        u = np.ones((1, 1), dtype=complex)
        for v in outputs:
            u = np.kron(u, np.linalg.matrix_power(PAULI[3], self.z.get(v, 0)) @ np.linalg.matrix_power(PAULI[1], self.x.get(v, 0)))
        return u

    def pauli_signs(self, outputs) -> np.ndarray:
        """Signs by which correction multiplies each Pauli expectation, shape ``(4,)*N``."""
        out = np.ones((4,) * len(outputs))
        for mu in itertools.product(range(4), repeat=len(outputs)):
            s = 1
            for m, v in zip(mu, outputs):
                if self.x.get(v, 0) and m in (2, 3):
                    s = -s
                if self.z.get(v, 0) and m in (1, 2):
                    s = -s
            out[mu] = s
        return out


# ---------------------------------------------------------------------------
# qubit-level oracle


@dataclass
class OracleResult:
    logical: LogicalState
    raw: LogicalState
    probability: float
    frame: ByproductFrame


def _plus_theta(theta: float, s: int) -> np.ndarray:
    sign = -1 if s else 1
    return np.array([1.0, sign * np.exp(1j * theta)]) / math.sqrt(2)


def qubit_oracle(pattern: GraphPattern, inputs: dict | None = None, outcomes: dict | None = None) -> OracleResult:
    """Exact one-way-model simulation on qubits for one outcome branch.

    Inputs default to |+>; outcomes (0 for +, 1 for -) default to all 0.
    ``logical`` is the frame-corrected output state, ``raw`` the uncorrected
    one and ``probability`` the branch probability.
    """
    if len(pattern.vertices) > ORACLE_MAX_QUBITS:
        raise BudgetError(f"oracle is limited to {ORACLE_MAX_QUBITS} qubits")
    inputs = inputs or {}
    outcomes = dict(outcomes or {})
    live = list(pattern.vertices)
    psi = np.ones((1,), dtype=complex)
    for v in live:
        vec = np.asarray(inputs.get(v, [1, 1]), dtype=complex)
        psi = np.kron(psi, vec / np.linalg.norm(vec))
    psi = psi.reshape((2,) * len(live))
    for a, b in pattern.edges:
        idx = [slice(None)] * len(live)
        idx[live.index(a)] = 1
        idx[live.index(b)] = 1
        psi[tuple(idx)] *= -1
    meas, _ = derive_domains(pattern)
    eff: dict = {}
    prob = 1.0
    for e in pattern.schedule:
        j = e.vertex
        raw = int(outcomes.get(j, 0))
        sdom, tdom = meas[j]
        if e.basis == "Z":
            bra = np.eye(2)[raw]
            eff[j] = raw ^ _parity(sdom, eff)
        else:
            bra = _plus_theta(adapted_angle(e.theta, _parity(sdom, eff), _parity(tdom, eff)), raw).conj()
            eff[j] = raw
        k = live.index(j)
        new = np.tensordot(bra, psi, axes=([0], [k]))
        p = float(np.vdot(new, new).real) / float(np.vdot(psi, psi).real)
        prob *= p
        nrm = np.linalg.norm(new)
        psi = new / nrm if nrm > 0 else new
        live.pop(k)
    order = [live.index(v) for v in pattern.outputs]
    vec = np.transpose(psi, order).reshape(-1) if order else psi.reshape(-1)
    frame = ByproductFrame.from_outcomes(pattern, eff)
    raw_state = LogicalState.from_vector(vec) if np.linalg.norm(vec) > 0 else LogicalState(np.zeros((2 ** len(order),) * 2), len(order))
    corrected = raw_state.apply_unitary(frame.correction(pattern.outputs))
    return OracleResult(corrected, raw_state, prob, frame)


# ---------------------------------------------------------------------------
# physical backends


@dataclass
class SectorEnsemble:
    """Trajectory backend in the parity-sector representation.

    ``coeffs[t]`` is a ``(2,)*m`` tensor over the live modes and
    ``parts[t, k, p]`` the parity-``p`` part of trajectory ``t``'s coherent
    state on live mode ``k``; the state is
    ``sum_p coeffs[t, p] (x)_k parts[t, k, p_k]``.
    """

    coeffs: np.ndarray
    parts: np.ndarray
    vertices: list
    cutoff: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_traj(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.vertices)

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.parts) ** 2, axis=-1)

    def _broadcast(self, k: int, values: np.ndarray) -> np.ndarray:
        """Shape ``(N, 2)`` or ``(2,)`` values on mode ``k`` broadcast against ``coeffs``."""
        values = np.asarray(values)
        shape = [1] * (self.n_modes + 1)
        if values.ndim == 2:
            shape[0] = values.shape[0]
        shape[k + 1] = 2
        return values.reshape(shape)

    def phase(self, k: int, even, odd) -> None:
        """Multiply the even / odd sector of live mode ``k`` by the given phases."""
        n = self.n_traj
        vals = np.stack([np.broadcast_to(even, (n,)), np.broadcast_to(odd, (n,))], axis=1)
        self.coeffs = self.coeffs * self._broadcast(k, vals)

    def cphase(self, k: int, l: int) -> None:
        sign = np.ones((2, 2))
        sign[1, 1] = -1
        shape = [1] * (self.n_modes + 1)
        shape[k + 1] = shape[l + 1] = 2
        if k > l:
            sign = sign.T
        self.coeffs = self.coeffs * np.exp(-1j * math.pi / 4) * sign.reshape(shape)

    def weighted_coeffs(self, skip: int | None = None) -> np.ndarray:
        c = self.coeffs
        nrm = np.sqrt(self.norms())
        for k in range(self.n_modes):
            if k != skip:
                c = c * self._broadcast(k, nrm[:, k, :])
        return c

    def normalize(self) -> None:
        total = np.sum(np.abs(self.weighted_coeffs()) ** 2, axis=tuple(range(1, self.n_modes + 1)))
        self.coeffs = self.coeffs / np.sqrt(total).reshape((-1,) + (1,) * self.n_modes)

    def drop(self, k: int, new_coeffs: np.ndarray) -> None:
        self.coeffs = new_coeffs
        self.parts = np.delete(self.parts, k, axis=1)
        self.vertices.pop(k)
        self.normalize()

    def apo_blocks(self) -> np.ndarray:
        """``<v_{k,p'}| Q_E |v_{k,p}>`` for Q in I, X, Y, Z: shape ``(N, m, 4, 2, 2)``."""
        s = make_sign_q(self.cutoff).matrix.real
        n = self.norms()
        v = self.parts
        xs = np.einsum("tkan,nm,tkbm->tkab", v.conj(), s, v)
        out = np.zeros(v.shape[:2] + (4, 2, 2), dtype=complex)
        out[:, :, 0, 0, 0] = n[:, :, 0]
        out[:, :, 0, 1, 1] = n[:, :, 1]
        out[:, :, 3, 0, 0] = n[:, :, 0]
        out[:, :, 3, 1, 1] = -n[:, :, 1]
        out[:, :, 1] = xs
        out[:, :, 2] = 1j * xs * np.array([1.0, -1.0])
        return out

    def pauli_samples(self) -> np.ndarray:
        """Per-trajectory Pauli expectations over all live modes, shape ``(N,) + (4,)*m``."""
        m = self.n_modes
        letters = "abcdefghijklmnopqrs"
        bra = letters[:m]
        ket = letters[m : 2 * m]
        pauli = letters[2 * m : 3 * m]
        blocks = self.apo_blocks()
        ops = [blocks[:, k] for k in range(m)]
        subs = [f"z{bra}", f"z{ket}"] + [f"z{pauli[k]}{bra[k]}{ket[k]}" for k in range(m)]
        vals = np.einsum(",".join(subs) + f"->z{pauli}", self.coeffs.conj(), self.coeffs, *ops)
        return np.real(vals)


def _hermite_grid(cutoff: int):
    x_min, x_max, npts = default_q_grid(cutoff)
    x = np.linspace(x_min, x_max, npts)
    return x, hermite_functions(cutoff, x)


def _sample_homodyne(ens: SectorEnsemble, k: int, rng: np.random.Generator):
    """Sample q outcomes on live mode ``k`` and condition the other modes on them."""
    x, herm = _hermite_grid(ens.cutoff)
    cw = np.moveaxis(ens.weighted_coeffs(skip=k), k + 1, 1).reshape(ens.n_traj, 2, -1)
    gram = np.einsum("tar,tbr->tab", cw.conj(), cw)
    wave = ens.parts[:, k] @ herm
    dens = np.real(np.einsum("tax,tab,tbx->tx", wave.conj(), gram, wave))
    dens = np.maximum(dens, 0.0)
    dx = x[1] - x[0]
    cdf = np.concatenate([np.zeros((ens.n_traj, 1)), np.cumsum(0.5 * (dens[:, 1:] + dens[:, :-1]) * dx, axis=1)], axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random(ens.n_traj)
    idx = np.clip(np.sum(cdf < u[:, None], axis=1), 1, x.size - 1)
    rows = np.arange(ens.n_traj)
    lo, hi = cdf[rows, idx - 1], cdf[rows, idx]
    frac = np.where(hi > lo, (u - lo) / np.where(hi > lo, hi - lo, 1.0), 0.5)
    xs = x[idx - 1] + frac * dx
    z = np.clip(np.searchsorted(x, 0.0), 1, x.size - 1)
    cdf0 = cdf[:, z - 1] + (cdf[:, z] - cdf[:, z - 1]) * (0.0 - x[z - 1]) / dx
    p_plus = 1.0 - cdf0
    at = hermite_functions(ens.cutoff, xs)
    w = np.einsum("tpn,nt->tp", ens.parts[:, k], at)
    c = np.moveaxis(ens.coeffs, k + 1, 1)
    new = np.einsum("tp...,tp->t...", c, w)
    ens.drop(k, new)
    return xs, np.clip(p_plus, 0.0, 1.0)


def _sample_parity(ens: SectorEnsemble, k: int, rng: np.random.Generator):
    cw = np.moveaxis(ens.weighted_coeffs(), k + 1, 1).reshape(ens.n_traj, 2, -1)
    p = np.sum(np.abs(cw) ** 2, axis=2)
    p_even = p[:, 0] / p.sum(axis=1)
    odd = (rng.random(ens.n_traj) >= p_even).astype(int)
    c = np.moveaxis(ens.coeffs, k + 1, 1)
    new = np.take_along_axis(c, odd.reshape((-1, 1) + (1,) * (c.ndim - 2)), axis=1)[:, 0]
    ens.drop(k, new)
    return odd, p_even


def _coherent_parts(amps: np.ndarray, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Even / odd parts of normalised truncated coherent states, and the tail each one lost."""
    n = amps.size
    parts = np.zeros((n, 2, cutoff), dtype=complex)
    odd = np.arange(cutoff) % 2
    tails = np.zeros(n)
    for i, g in enumerate(amps):
        vec, tails[i] = coherent_vector(g, cutoff)
        vec = vec / np.linalg.norm(vec)
        parts[i, 0] = vec * (odd == 0)
        parts[i, 1] = vec * (odd == 1)
    return parts, tails


def pattern_cutoff(alpha: float, n_bar: float, backend: str) -> int:
    """Default cutoff: the state policy, capped at the trajectory budget."""
    d = default_cutoff(alpha, n_bar)
    return min(d, TRAJ_MAX_CUTOFF) if backend == "trajectory" else d


def _check_budget(n_modes: int, backend: str, cutoff: int):
    if backend == "dense":
        if n_modes > DENSE_MAX_MODES:
            raise BudgetError(f"dense backend handles at most {DENSE_MAX_MODES} modes, pattern has {n_modes}")
    elif backend == "trajectory":
        if n_modes > TRAJ_MAX_MODES or cutoff > TRAJ_MAX_CUTOFF:
            raise BudgetError(
                f"trajectory backend handles at most {TRAJ_MAX_MODES} modes at cutoff <= {TRAJ_MAX_CUTOFF} "
                f"(got {n_modes} modes, cutoff {cutoff})"
            )
    else:
        raise ValueError(f"unknown backend {backend!r}")


def build_cluster(pattern: GraphPattern, alpha: float, n_bar: float, backend: str = "dense", rng=None,
                  cutoff: int | None = None, n_traj: int = 1000):
    """Prepare every vertex as displaced-thermal |+_L> and apply CPhase on every edge.

    Dense: returns a ``DensityMatrix`` with mode ``i`` = ``pattern.vertices[i]``.
    Trajectory: returns a ``SectorEnsemble`` of ``n_traj`` trajectories.
    """
    params = ThermalParams(n_bar, alpha)
    m = len(pattern.vertices)
    cutoff = pattern_cutoff(alpha, n_bar, backend) if cutoff is None else int(cutoff)
    _check_budget(m, backend, cutoff)
    if backend == "dense":
        plus = displaced_thermal(params, cutoff)
        rho = tensor_states([plus] * m) if m > 1 else plus
        for a, b in pattern.edges:
            rho = apply_diagonal(cphase(cutoff, (pattern.mode_of(a), pattern.mode_of(b))), rho)
        return rho
    if rng is None:
        raise ValueError("the trajectory backend needs a random generator")
    amps = sample_displacements(params, rng, n_traj * m).reshape(n_traj, m)
    parts = np.zeros((n_traj, m, 2, cutoff), dtype=complex)
    tails = np.zeros((n_traj, m))
    for k in range(m):
        parts[:, k], tails[:, k] = _coherent_parts(amps[:, k], cutoff)
    mean_tail = float(tails.mean())
    if mean_tail > TRAJ_TAIL_TOL:
        raise CutoffError(f"sampled coherent states lose {mean_tail:.3g} of their norm on average at cutoff {cutoff}")
    worst = float(tails.max())
    ens = SectorEnsemble(np.ones((n_traj,) + (2,) * m, dtype=complex), parts, list(pattern.vertices), cutoff,
                         {"max_tail": worst, "mean_tail": mean_tail})
    ens.normalize()
    for a, b in pattern.edges:
        ens.cphase(ens.vertices.index(a), ens.vertices.index(b))
    return ens


@dataclass
class RunResult:
    outcomes: list
    frame: ByproductFrame
    logical: LogicalState
    raw: LogicalState | None = None
    weight: float = 1.0


def run_pattern(state, pattern: GraphPattern, rng=None, postselect: dict | None = None) -> RunResult:
    """Execute the measurement schedule on a state from ``build_cluster``.

    Dense states follow one branch (sampled, or forced by ``postselect``,
    a map vertex -> outcome bit 0/1); the result carries the branch weight.
    Sector ensembles sample each trajectory independently, apply each
    trajectory's byproduct correction at the logical level and average.
    """
    if isinstance(state, SectorEnsemble):
        if postselect:
            raise ValueError("post-selection needs the dense backend")
        return _run_sector(state, pattern, rng)
    return _run_dense(state, pattern, rng, postselect or {})


def _run_dense(rho: DensityMatrix, pattern: GraphPattern, rng, postselect: dict) -> RunResult:
    meas, _ = derive_domains(pattern)
    live = list(pattern.vertices)
    eff: dict = {}
    log = []
    weight = 1.0
    for e in pattern.schedule:
        j = e.vertex
        k = live.index(j)
        sdom, tdom = meas[j]
        forced = postselect.get(j)
        ps = None if forced is None else (1 if forced == 0 else -1)
        if e.basis == "Z":
            rec, rho = measure_logical_z(rho, k, rng, ps, keep_mode=False)
            eff[j] = rec.outcome ^ _parity(sdom, eff)
        else:
            theta = adapted_angle(e.theta, _parity(sdom, eff), _parity(tdom, eff))
            rec, rho = measure_xy(rho, k, theta, rng, ps, keep_mode=False)
            eff[j] = rec.outcome
        weight *= rec.weight
        log.append((j, rec))
        live.pop(k)
    frame = ByproductFrame.from_outcomes(pattern, eff)
    raw = logical_state(rho, [live.index(v) for v in pattern.outputs])
    corrected = raw.apply_unitary(frame.correction(pattern.outputs))
    return RunResult(log, frame, corrected, raw, weight)


def _frame_signs(xbits: np.ndarray, zbits: np.ndarray) -> np.ndarray:
    """Per-trajectory Pauli signs of the correction ``Z^z X^x`` on one qubit, shape ``(N, 4)``."""
    sx = 1 - 2 * xbits
    sz = 1 - 2 * zbits
    return np.stack([np.ones_like(sx), sz, sx * sz, sx], axis=1)


def _sector_samples(ens: SectorEnsemble, pattern: GraphPattern, rng):
    """Run the schedule on every trajectory; return corrected and raw Pauli samples and the outcome log."""
    meas, outs = derive_domains(pattern)
    n = ens.n_traj
    eff: dict = {}
    log = []
    for e in pattern.schedule:
        j = e.vertex
        k = ens.vertices.index(j)
        sdom, tdom = meas[j]
        s = np.zeros(n, dtype=int)
        t = np.zeros(n, dtype=int)
        for v in sdom:
            s ^= eff[v]
        for v in tdom:
            t ^= eff[v]
        if e.basis == "Z":
            odd, p_even = _sample_parity(ens, k, rng)
            eff[j] = odd ^ s
            log.append((j, {"bit": 1 - 2 * odd, "weight": np.where(odd == 0, p_even, 1 - p_even)}))
        else:
            theta = np.where(s == 1, -e.theta, e.theta) + np.where(t == 1, math.pi, 0.0)
            ens.phase(k, np.exp(0.5j * theta), np.exp(-0.5j * theta))
            xs, p_plus = _sample_homodyne(ens, k, rng)
            bits = np.where(xs >= 0, 1, -1)
            eff[j] = (bits < 0).astype(int)
            log.append((j, {"x": xs, "bit": bits, "theta": theta, "weight": np.where(bits > 0, p_plus, 1 - p_plus)}))
    order = [ens.vertices.index(v) for v in pattern.outputs]
    raw = np.transpose(ens.pauli_samples(), [0] + [o + 1 for o in order])
    signs = np.ones((n,) + (4,) * len(order))
    for i, v in enumerate(pattern.outputs):
        xd, zd = outs[v]
        xb = np.zeros(n, dtype=int)
        zb = np.zeros(n, dtype=int)
        for u in xd:
            xb ^= eff[u]
        for u in zd:
            zb ^= eff[u]
        shape = [n] + [1] * len(order)
        shape[i + 1] = 4
        signs = signs * _frame_signs(xb, zb).reshape(shape)
    return raw * signs, raw, log


def _run_sector(ens: SectorEnsemble, pattern: GraphPattern, rng) -> RunResult:
    corrected, raw, log = _sector_samples(ens, pattern, rng)
    n = corrected.shape[0]
    mean = corrected.mean(axis=0)
    stderr = corrected.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    diag = {"n_trajectories": n, "stderr": stderr, "max_tail": ens.diagnostics.get("max_tail", 0.0)}
    logical = LogicalState.from_pauli(mean, pattern.outputs, diag)
    raw_state = LogicalState.from_pauli(raw.mean(axis=0), pattern.outputs, {"n_trajectories": n})
    return RunResult(log, ByproductFrame(), logical, raw_state, 1.0)


@dataclass
class EnsembleRun:
    logical: LogicalState
    pauli_sum: np.ndarray
    pauli_sq_sum: np.ndarray
    n: int
    outcome_counts: dict


def _chunk_task(args):
    pattern, alpha, n_bar, cutoff, size, rng = args
    ens = build_cluster(pattern, alpha, n_bar, "trajectory", rng, cutoff, size)
    corrected, _, log = _sector_samples(ens, pattern, rng)
    counts = {j: int(np.sum(np.asarray(rec["bit"]) > 0)) for j, rec in log}
    return corrected.sum(axis=0), (corrected**2).sum(axis=0), size, counts


def simulate_pattern(pattern: GraphPattern, alpha: float, n_bar: float, n_traj: int = 10_000, seed=0,
                     cutoff: int | None = None) -> EnsembleRun:
    """Trajectory-backend run split into fixed chunks with independent streams.

    Result is independent of ``QSPLAB_THREADS``. ``logical.diagnostics``
    carries per-Pauli standard errors.
    """
    cutoff = pattern_cutoff(alpha, n_bar, "trajectory") if cutoff is None else int(cutoff)
    _check_budget(len(pattern.vertices), "trajectory", cutoff)
    tasks = [(pattern, alpha, n_bar, cutoff, size, rng) for size, rng in chunk_streams(seed, n_traj)]
    parts = parallel_map(_chunk_task, tasks)
    total = sum(p[0] for p in parts)
    sq = sum(p[1] for p in parts)
    n = sum(p[2] for p in parts)
    counts: dict = {}
    for p in parts:
        for j, c in p[3].items():
            counts[j] = counts.get(j, 0) + c
    mean = total / n
    var = np.maximum(sq / n - mean**2, 0.0) * n / max(n - 1, 1)
    diag = {"n_trajectories": n, "stderr": np.sqrt(var / n), "plus_counts": counts, "cutoff": cutoff}
    logical = LogicalState.from_pauli(mean, pattern.outputs, diag)
    return EnsembleRun(logical, total, sq, n, counts)
