"""Dephasing tolerance of cat-code qubits read physically and through the QSP encoding.

A cat qubit ``|theta, phi> = cos(theta/2)|0_cs> + e^{i phi} sin(theta/2)|1_cs>``
is dephased in closed form. Its physical fidelity to the initial state is
compared with the logical fidelity of the QSP logical state reconstructed
from the dephased state against the ideal Bloch-vector state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .encoding import apo_set
from .fock import CutoffError, parity_diagonal
from .states import TAIL_TOL, coherent_vector, dephasing_factors

CAT_CUTOFF = 60
QUAD_TOL = 1e-4


class ConvergenceError(RuntimeError):
    """Sphere-average quadrature did not converge under node doubling."""


@dataclass(frozen=True)
class CatParams:
    alpha: float
    cutoff: int = CAT_CUTOFF

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("cat amplitude must be real and positive")

    @property
    def n_plus(self) -> float:
        return math.sqrt(2.0 * (1.0 + math.exp(-2.0 * self.alpha**2)))

    @property
    def n_minus(self) -> float:
        return math.sqrt(2.0 * (1.0 - math.exp(-2.0 * self.alpha**2)))


def cat_basis(params: CatParams) -> tuple[np.ndarray, np.ndarray]:
    """``|0_cs>, |1_cs>`` on the truncated space (raises if the tail exceeds tolerance)."""
    plus, tail = coherent_vector(params.alpha, params.cutoff)
    if tail > TAIL_TOL:
        raise CutoffError(f"cat amplitude {params.alpha} leaves {tail:.3g} above cutoff {params.cutoff}")
    minus = plus * parity_diagonal(params.cutoff)
    zero = (plus + minus) / params.n_plus
    one = (plus - minus) / params.n_minus
    return zero / np.linalg.norm(zero), one / np.linalg.norm(one)


def cat_qubit(theta: float, phi: float, params: CatParams) -> np.ndarray:
    zero, one = cat_basis(params)
    return math.cos(theta / 2) * zero + np.exp(1j * phi) * math.sin(theta / 2) * one


def _bloch(theta, phi):
    return np.array([np.cos(phi) * np.sin(theta), np.sin(phi) * np.sin(theta), np.cos(theta)])


def fidelity_cs(theta: float, phi: float, kappa_t: float, params: CatParams) -> float:
    """``<theta, phi| rho(t) |theta, phi>`` with the closed-form dephased state."""
    pop = np.abs(cat_qubit(theta, phi, params)) ** 2
    return float(pop @ dephasing_factors(params.cutoff, kappa_t) @ pop)


class QspResponse:
    """Pauli expectations of dephased cat-basis dyads.

    ``rho(t)`` is linear in the dyads ``|i_cs><j_cs|``, so the APO
    expectations of any dephased cat qubit follow from a 4x2x2 table.
    """

    def __init__(self, params: CatParams, kappa_t: float):
        apo = apo_set(params.cutoff)
        basis = cat_basis(params)
        damp = dephasing_factors(params.cutoff, kappa_t)
        table = np.zeros((4, 2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                dyad = np.outer(basis[i], basis[j].conj()) * damp
                for q, op in enumerate(apo.as_list()):
                    table[q, i, j] = np.sum(op * dyad.T)
        self.table = table

    def pauli(self, amps: np.ndarray) -> np.ndarray:
        """``<Q_E>`` for cat amplitude vectors ``amps`` of shape ``(..., 2)``."""
        return np.real(np.einsum("...i,qij,...j->...q", amps, self.table, amps.conj()))


def _amplitudes(theta, phi):
    return np.stack([np.cos(theta / 2) + 0j * phi, np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


def fidelity_qsp(theta: float, phi: float, kappa_t: float, params: CatParams, response: QspResponse | None = None) -> float:
    """``Tr(rho_L(t) rho_L(0))`` with ``rho_L(0)`` the ideal Bloch-vector state."""
    response = response or QspResponse(params, kappa_t)
    vals = response.pauli(_amplitudes(np.asarray(theta), np.asarray(phi)))
    bloch = vals[..., 1:] / vals[..., :1]
    return float(0.5 * (1.0 + np.sum(bloch * _bloch(theta, phi))))


def _sphere_nodes(n_theta: int, n_phi: int):
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(u)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    w = np.outer(wu, np.full(n_phi, 1.0 / n_phi)) / 2.0
    return tt, pp, w


def _sphere_average(code: str, kappa_t: float, params: CatParams, n_theta: int, n_phi: int, response=None) -> float:
    tt, pp, w = _sphere_nodes(n_theta, n_phi)
    amps = _amplitudes(tt, pp)
    if code == "qsp":
        vals = response.pauli(amps)
        bloch = vals[..., 1:] / vals[..., :1]
        ideal = np.stack([np.cos(pp) * np.sin(tt), np.sin(pp) * np.sin(tt), np.cos(tt)], axis=-1)
        f = 0.5 * (1.0 + np.sum(bloch * ideal, axis=-1))
    elif code == "cs":
        zero, one = cat_basis(params)
        psi = amps[..., :1] * zero + amps[..., 1:] * one
        pop = np.abs(psi) ** 2
        f = np.einsum("...m,mn,...n->...", pop, dephasing_factors(params.cutoff, kappa_t), pop)
    else:
        raise ValueError(f"unknown code {code!r}; expected 'cs' or 'qsp'")
    return float(np.sum(w * f))


def avg_fidelity(code: str, kappa_t: float, params: CatParams, n_theta: int = 16, n_phi: int = 16,
                 tol: float = QUAD_TOL) -> tuple[float, float]:
    """Sphere-averaged fidelity and the change under node doubling.

    Gauss-Legendre in ``cos(theta)`` times a trapezoid rule in ``phi``.
    Raises ``ConvergenceError`` if doubling changes the result by more than ``tol``.
    """
    response = QspResponse(params, kappa_t) if code == "qsp" else None
    base = _sphere_average(code, kappa_t, params, n_theta, n_phi, response)
    fine = _sphere_average(code, kappa_t, params, 2 * n_theta, 2 * n_phi, response)
    err = abs(fine - base)
    if err > tol:
        raise ConvergenceError(f"{code} sphere average changes by {err:.3g} under node doubling")
    return base, err


@dataclass
class FidelityCurve:
    code: str
    kappa_t: np.ndarray
    fidelity: np.ndarray
    quad_error: np.ndarray


def fidelity_curve(code: str, grid, params: CatParams, **quad) -> FidelityCurve:
    grid = np.asarray(grid, dtype=float)
    vals = [avg_fidelity(code, kt, params, **quad) for kt in grid]
    return FidelityCurve(code, grid, np.array([v[0] for v in vals]), np.array([v[1] for v in vals]))


def x_retention(kappa_t: float, params: CatParams) -> float:
    """``<X_E>(t) / <X_E>(0)`` for the cat |+_cs> state."""
    amps = _amplitudes(np.array(math.pi / 2), np.array(0.0))
    x0 = QspResponse(params, 0.0).pauli(amps)[1]
    return float(QspResponse(params, kappa_t).pauli(amps)[1] / x0)


def plus_fidelity_cs(kappa_t: float, params: CatParams) -> float:
    return fidelity_cs(math.pi / 2, 0.0, kappa_t, params)


def threshold_scan(code: str, params: CatParams, drop_level: float = 0.9, xtol: float = 1e-3) -> float:
    """Dephasing ``kappa t`` at which the X-information figure falls to ``drop_level``.

    Cat code: physical fidelity of |+_cs>. QSP: retention of ``<X_E>``.
    """
    if not 0 < drop_level < 1:
        raise ValueError("drop_level must lie in (0, 1)")
    figure = {"cs": plus_fidelity_cs, "qsp": x_retention}.get(code)
    if figure is None:
        raise ValueError(f"unknown code {code!r}; expected 'cs' or 'qsp'")
    hi = 0.01
    while figure(hi, params) > drop_level:
        hi *= 2
        if hi > 1e3:
            raise ConvergenceError(f"{code} figure never drops to {drop_level}")
    return brentq(lambda kt: figure(kt, params) - drop_level, 0.0, hi, xtol=xtol)


def z_invariance_defect(kappa_t: float, params: CatParams, theta: float = 1.0, phi: float = 0.3) -> float:
    """``|<Z_E>(t) - <Z_E>(0)|`` for one cat qubit."""
    amps = _amplitudes(np.array(theta), np.array(phi))
    z0 = QspResponse(params, 0.0).pauli(amps)[3]
    return float(abs(QspResponse(params, kappa_t).pauli(amps)[3] - z0))


__all__ = [
    "CatParams",
    "ConvergenceError",
    "FidelityCurve",
    "avg_fidelity",
    "cat_basis",
    "cat_qubit",
    "fidelity_cs",
    "fidelity_curve",
    "fidelity_qsp",
    "plus_fidelity_cs",
    "threshold_scan",
    "x_retention",
    "z_invariance_defect",
]
