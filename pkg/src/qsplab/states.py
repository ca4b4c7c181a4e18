"""Physical state preparation and the dephasing channel.

Thermal and displaced thermal states (dense backend), Gaussian ensembles of
coherent states (trajectory backend), and pure dephasing in both backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, gammaln

from .fock import (
    CutoffError,
    DensityMatrix,
    FockSpace,
    StateVector,
    TrajectoryEnsemble,
    _as_space,
    apply_local,
    make_displacement,
    parity_diagonal,
)

TAIL_TOL = 1e-6


@dataclass(frozen=True)
class ThermalParams:
    n_bar: float
    alpha: complex = 0.0

    def __post_init__(self):
        if not self.n_bar >= 0:
            raise ValueError(f"n_bar must be >= 0, got {self.n_bar}")
        object.__setattr__(self, "n_bar", float(self.n_bar))
        object.__setattr__(self, "alpha", complex(self.alpha))

    @classmethod
    def from_config(cls, doc: dict) -> ThermalParams:
        return cls(float(doc["n_bar"]), complex(float(doc.get("alpha_re", 0.0)), float(doc.get("alpha_im", 0.0))))

    def to_config(self) -> dict:
        return {"n_bar": self.n_bar, "alpha_re": self.alpha.real, "alpha_im": self.alpha.imag}


@dataclass(frozen=True)
class DephasingParams:
    kappa_t: float

    def __post_init__(self):
        if not self.kappa_t >= 0:
            raise ValueError(f"kappa*t must be >= 0, got {self.kappa_t}")


def default_cutoff(alpha: complex = 0.0, n_bar: float = 0.0, tail_tol: float = TAIL_TOL) -> int:
    """Cutoff policy ``max(16, ceil(2.5 (|alpha| + sqrt(3 n_bar))^2 + 10))``.

    Raised, when needed, so the thermal tail ``(n/(n+1))^D`` sits a decade
    below ``tail_tol`` with ``|alpha|^2 + 4|alpha|`` spare levels for the
    displacement, so the policy does not violate the tail invariant.
    """
    r = abs(complex(alpha)) + math.sqrt(3.0 * n_bar)
    d = max(16, math.ceil(2.5 * r * r + 10.0 - 1e-9))
    if n_bar > 0:
        a = abs(complex(alpha))
        spare = math.ceil(a * a + 4.0 * a)
        d = max(d, math.ceil(math.log(0.1 * tail_tol) / math.log(n_bar / (n_bar + 1.0))) + spare)
    return d


def thermal_populations(n_bar: float, cutoff: int) -> tuple[np.ndarray, float]:
    """Geometric populations on levels < cutoff and the tail mass beyond."""
    n = np.arange(cutoff)
    if n_bar == 0:
        return (n == 0).astype(float), 0.0
    ratio = n_bar / (n_bar + 1.0)
    p = np.exp(n * math.log(ratio)) / (n_bar + 1.0)
    return p, ratio**cutoff


def thermal_state(n_bar: float, space, tail_tol: float = TAIL_TOL) -> DensityMatrix:
    space = _as_space(space)
    p, tail = thermal_populations(n_bar, space.cutoff)
    if tail > tail_tol:
        raise CutoffError(f"thermal n_bar={n_bar} leaves {tail:.3g} above cutoff {space.cutoff}")
    return DensityMatrix(np.diag(p / p.sum()).astype(complex), space.cutoff, 1, tail)


def displace(rho, alpha: complex, mode: int = 0, tail_tol: float = TAIL_TOL):
    """Displace any state on ``mode``; also the re-initialisation route for
    arbitrary post-measurement states."""
    dmat = make_displacement(alpha, rho.cutoff, defect_tol=None)
    out = apply_local(dmat.matrix, rho, mode)
    if isinstance(out, StateVector):
        leak = 1.0 - out.norm() ** 2
        if leak > tail_tol:
            raise CutoffError(f"displacement by {alpha} leaks {leak:.3g} past cutoff {rho.cutoff}")
        return out.normalized()
    leak = 1.0 - out.trace().real
    if leak > tail_tol:
        raise CutoffError(f"displacement by {alpha} leaks {leak:.3g} past cutoff {rho.cutoff}")
    norm = out.normalized()
    return DensityMatrix(norm.matrix, norm.cutoff, norm.n_modes, max(abs(leak), rho.trace_defect))


def displaced_thermal(params: ThermalParams, space=None, tail_tol: float = TAIL_TOL) -> DensityMatrix:
    """``D(alpha) rho_th D(alpha)^dag`` on the given (or default-policy) cutoff."""
    if space is None:
        space = FockSpace(default_cutoff(params.alpha, params.n_bar))
    space = _as_space(space)
    p, tail = thermal_populations(params.n_bar, space.cutoff)
    if tail > tail_tol:
        raise CutoffError(f"thermal n_bar={params.n_bar} leaves {tail:.3g} above cutoff {space.cutoff}")
    if params.alpha == 0:
        return DensityMatrix(np.diag(p / p.sum()).astype(complex), space.cutoff, 1, tail)
    dmat = make_displacement(params.alpha, space, defect_tol=None).matrix
    rho = (dmat * p) @ dmat.conj().T
    leak = 1.0 - np.trace(rho).real
    if leak + tail > tail_tol:
        raise CutoffError(
            f"displaced thermal (alpha={params.alpha}, n_bar={params.n_bar}) leaks {leak + tail:.3g} "
            f"past cutoff {space.cutoff}"
        )
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real, space.cutoff, 1, leak + tail)


def init_infidelity_analytic(n_bar: float, alpha: float) -> float:
    """Logical infidelity of a displaced thermal state to |+_L>: erfc(alpha / sqrt(n_bar + 1/2)) / 2."""
    if alpha < 0:
        raise ValueError("alpha must be real and non-negative")
    return 0.5 * float(erfc(alpha / math.sqrt(n_bar + 0.5)))


def coherent_vector(gamma: complex, cutoff: int) -> tuple[np.ndarray, float]:
    """Truncated coherent-state amplitudes and the probability lost above the cutoff."""
    n = np.arange(cutoff)
    gamma = complex(gamma)
    if gamma == 0:
        vec = (n == 0).astype(complex)
        return vec, 0.0
    log_mag = -0.5 * abs(gamma) ** 2 + n * math.log(abs(gamma)) - 0.5 * gammaln(n + 1)
    vec = np.exp(log_mag) * np.exp(1j * n * np.angle(gamma))
    return vec, max(0.0, 1.0 - float(np.vdot(vec, vec).real))


def coherent_state(gamma: complex, space, tail_tol: float = TAIL_TOL) -> StateVector:
    space = _as_space(space)
    vec, tail = coherent_vector(gamma, space.cutoff)
    if tail > tail_tol:
        raise CutoffError(f"coherent amplitude {gamma} leaves {tail:.3g} above cutoff {space.cutoff}")
    return StateVector(vec / np.linalg.norm(vec), space.cutoff, 1, tail)


def sample_displacements(params: ThermalParams, rng: np.random.Generator, count: int) -> np.ndarray:
    """Coherent amplitudes ``alpha + beta`` with Re/Im beta ~ N(0, n_bar/2)."""
    if params.n_bar == 0:
        return np.full(count, params.alpha, dtype=complex)
    sigma = math.sqrt(params.n_bar / 2.0)
    beta = rng.normal(0.0, sigma, size=(count, 2))
    return params.alpha + beta[:, 0] + 1j * beta[:, 1]


def sample_coherent_ensemble(params: ThermalParams, rng: np.random.Generator, count: int, space=None) -> TrajectoryEnsemble:
    """Displaced thermal state as an equal-weight ensemble of coherent states.

    Rare draws whose amplitude spills past the cutoff are renormalised; the
    largest such loss is kept on each state's ``trace_defect``.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if space is None:
        space = FockSpace(default_cutoff(params.alpha, params.n_bar))
    space = _as_space(space)
    states = []
    for gamma in sample_displacements(params, rng, count):
        vec, tail = coherent_vector(gamma, space.cutoff)
        states.append(StateVector(vec / np.linalg.norm(vec), space.cutoff, 1, tail))
    return TrajectoryEnsemble.uniform(states)


def parity_project(rho, parity: int, mode: int = 0):
    """Project ``mode`` onto even (``parity=+1``) or odd (``-1``) boson number and renormalise.

    Applied to a displaced thermal |+_L> this yields mixed |0_L> / |1_L> inputs.
    """
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    proj = np.diag((parity_diagonal(rho.cutoff) == parity).astype(complex))
    return apply_local(proj, rho, mode).normalized()


def dephasing_factors(cutoff: int, kappa_t: float) -> np.ndarray:
    n = np.arange(cutoff)
    return np.exp(-0.5 * kappa_t * np.subtract.outer(n, n) ** 2)


def dephase(rho: DensityMatrix, kappa_t: float, modes=None) -> DensityMatrix:
    """Exact pure-dephasing channel: ``rho_mn -> rho_mn exp(-kappa t (m - n)^2 / 2)`` on each mode."""
    DephasingParams(kappa_t)
    if kappa_t == 0:
        return rho
    modes = range(rho.n_modes) if modes is None else modes
    damp = dephasing_factors(rho.cutoff, kappa_t)
    m = rho.n_modes
    t = rho.tensor.copy()
    for k in modes:
        shape = [1] * (2 * m)
        shape[k] = shape[m + k] = rho.cutoff
        t *= damp.reshape(shape)
    return DensityMatrix(t.reshape(rho.dim, rho.dim), rho.cutoff, m, rho.trace_defect)


def dephase_trajectory(psi: StateVector, kappa_t: float, rng: np.random.Generator, modes=None) -> StateVector:
    """Random rotation ``exp(-i phi n)`` with ``phi ~ N(0, kappa t)`` drawn per mode."""
    DephasingParams(kappa_t)
    if kappa_t == 0:
        return psi
    modes = range(psi.n_modes) if modes is None else modes
    n = np.arange(psi.cutoff)
    t = psi.tensor.copy()
    for k in modes:
        phi = rng.normal(0.0, math.sqrt(kappa_t))
        shape = [1] * psi.n_modes
        shape[k] = psi.cutoff
        t *= np.exp(-1j * phi * n).reshape(shape)
    return StateVector(t.reshape(-1), psi.cutoff, psi.n_modes, psi.trace_defect)
