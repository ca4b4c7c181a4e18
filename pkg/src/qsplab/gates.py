"""Exponential-parity gate set and the truncated parity-series construction.

All exact gates are Fock-diagonal and are built directly from their
diagonals. The truncated construction replaces the parity ``(-1)^n`` by its
exponential series cut at order ``k_max`` and quantifies the resulting error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from mpmath import iv
from scipy.special import gammaln

from .fock import DiagonalOperator, _as_space, apply, parity_diagonal
from .states import parity_project

SERIES_PREC_BITS = 192
MIN_PREC_BITS = 160
GUARD_BITS = 96
INTERVAL_TOL = 1e-12


class PrecisionError(ArithmeticError):
    """Extended-precision accumulation lost too many digits to cancellation."""


def parity_rotation(theta: float, space, mode: int = 0) -> DiagonalOperator:
    """``R(theta) = exp(i theta P)``: phase ``e^{i theta (-1)^n}`` on level n."""
    space = _as_space(space)
    return DiagonalOperator(np.exp(1j * theta * parity_diagonal(space.cutoff)), space.cutoff, (mode,))


def joint_parity(theta: float, space, modes=(0, 1)) -> DiagonalOperator:
    """``E(theta) = exp(i theta P_j P_l)`` on two distinct modes."""
    space = _as_space(space)
    modes = tuple(modes)
    if len(modes) != 2 or modes[0] == modes[1]:
        raise ValueError(f"joint parity needs two distinct modes, got {modes}")
    p = parity_diagonal(space.cutoff)
    return DiagonalOperator(np.exp(1j * theta * np.outer(p, p)).reshape(-1), space.cutoff, modes)


def cphase(space, modes=(0, 1)) -> DiagonalOperator:
    """Controlled phase as ``R_j(-pi/4) R_l(-pi/4) E_jl(pi/4)``."""
    space = _as_space(space)
    j, l = tuple(modes)
    return parity_rotation(-math.pi / 4, space, j) @ parity_rotation(-math.pi / 4, space, l) @ joint_parity(
        math.pi / 4, space, (j, l)
    )


def cphase_direct(space, modes=(0, 1)) -> DiagonalOperator:
    """``e^{-i pi/4}`` times the sign flip on levels where both parities are odd."""
    space = _as_space(space)
    odd = np.arange(space.cutoff) % 2 == 1
    diag = np.where(np.logical_and.outer(odd, odd), -1.0, 1.0) * np.exp(-1j * math.pi / 4)
    return DiagonalOperator(diag.reshape(-1), space.cutoff, tuple(modes))


def t_state_prep(plus_state, mode: int = 0):
    """Rotate a |+_L> encoding into |T_L> = (|0_L> + e^{i pi/4} |1_L>)/sqrt(2).

    ``exp(i theta P)`` sends the logical Bloch vector (1, 0, 0) to
    ``(cos 2theta, -sin 2theta, 0)``, so the rotation angle is ``-pi/8``.
    """
    return apply(parity_rotation(-math.pi / 8, plus_state.cutoff, mode), plus_state)


def logical_basis_input(plus_state, label: str, mode: int = 0):
    """Logical input ``label`` in {'+', '-', '0', '1', '+i', '-i'} from a |+_L> encoding."""
    if label == "+":
        return plus_state
    if label == "-":
        return apply(parity_rotation(math.pi / 2, plus_state.cutoff, mode), plus_state)
    if label in ("0", "1"):
        return parity_project(plus_state, 1 if label == "0" else -1, mode)
    if label in ("+i", "-i"):
        sign = -1 if label == "+i" else 1
        return apply(parity_rotation(sign * math.pi / 4, plus_state.cutoff, mode), plus_state)
    raise ValueError(f"unknown logical input label {label!r}")


# ---------------------------------------------------------------------------
# truncation budget


@dataclass(frozen=True)
class TruncationBudget:
    n_bar: float
    lam: float
    r_max: int
    k_max: int
    tol: float = 0.01


def log_tail_bound(x: float, order: int) -> float:
    """log of ``x^K / K! / (1 - x/(K+1))``, a majorant of ``|sum_{k>=K} (i x)^k / k!|``."""
    if order + 1 <= x:
        return math.inf
    if x == 0:
        return 0.0 if order == 0 else -math.inf
    return order * math.log(x) - float(gammaln(order + 1)) - math.log1p(-x / (order + 1))


def k_max_bound(r: int, tol: float = 0.01) -> int:
    """Smallest K with ``K + 1 > pi r`` and tail majorant ``<= tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = math.pi * r
    k = int(math.floor(x))
    log_tol = math.log(tol)
    while log_tail_bound(x, k) > log_tol:
        k += 1
    return k


def truncation_budget(n_bar: float, tol: float = 0.01) -> TruncationBudget:
    """``lambda = 12 (n_bar + 1/2)``, ``r_max = ceil(30 (n_bar + 1/2))`` and the series order."""
    if not n_bar >= 0:
        raise ValueError(f"n_bar must be >= 0, got {n_bar}")
    lam = 12.0 * (n_bar + 0.5)
    r_max = math.ceil(30.0 * (n_bar + 0.5) - 1e-9)
    return TruncationBudget(float(n_bar), lam, r_max, k_max_bound(r_max, tol), tol)


def series_precision(n: int) -> int:
    """Working bits for level ``n``: the largest term is about ``e^(pi n)``, plus guard bits."""
    return max(SERIES_PREC_BITS, math.ceil(math.pi * n / math.log(2)) + GUARD_BITS)


def truncated_parity_series(n: int, k_max: int, prec: int | None = None) -> complex:
    """``sum_{k<=k_max} (i pi n)^k / k!`` in interval arithmetic at ``prec`` bits.

    ``prec`` defaults to ``series_precision(n)``.

    Real and imaginary parts are accumulated separately. The interval width
    bounds the accumulated rounding error; if it exceeds ``INTERVAL_TOL`` the
    cancellation was not resolved and ``PrecisionError`` is raised.
    """
    if prec is None:
        prec = series_precision(n)
    if prec < MIN_PREC_BITS:
        raise ValueError(f"at least {MIN_PREC_BITS} bits are required")
    if n == 0:
        return 1.0 + 0.0j
    old = iv.prec
    iv.prec = prec
    try:
        x = iv.pi * n
        term = iv.mpf(1)
        parts = [iv.mpf(1), iv.mpf(0)]
        for k in range(1, k_max + 1):
            term = term * x / k
            sign = 1 if k % 4 in (0, 1) else -1
            parts[k % 2] = parts[k % 2] + sign * term
        width = max(float(parts[0].delta), float(parts[1].delta))
        if width > INTERVAL_TOL:
            raise PrecisionError(f"series at n={n} has interval width {width:.3g} at {prec} bits")
        return complex(float(parts[0].mid), float(parts[1].mid))
    finally:
        iv.prec = old


def naive_parity_series(n: int, k_max: int) -> complex:
    """Same partial sum in double precision (for demonstrating cancellation failure)."""
    total = 0j
    term = 1 + 0j
    z = 1j * math.pi * n
    for k in range(k_max + 1):
        if k:
            term = term * z / k
        total += term
    return total


@dataclass
class GateErrorReport:
    theta: float
    k_max: int
    defect: np.ndarray
    population: np.ndarray | None = None
    per_level_error: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def weighted_error(self) -> float:
        if self.population is None:
            return math.nan
        return float(np.sum(self.population * self.per_level_error))

    def rows(self):
        pop = self.population if self.population is not None else np.full(self.defect.size, np.nan)
        cum = np.cumsum(pop * self.per_level_error)
        for n in range(self.defect.size):
            yield n, float(self.defect[n]), float(pop[n]), float(cum[n])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "defect", "population", "weighted_error"])
        for n, d, p, e in self.rows():
            w.writerow([n, f"{d:.17g}", f"{p:.17g}", f"{e:.17g}"])
        return buf.getvalue()


def truncated_parity_gate(budget: TruncationBudget, theta: float, space, rho=None, mode: int = 0,
                          prec: int | None = None):
    """Gate ``exp(i theta P~_n)`` from the truncated series, with its error report.

    If ``rho`` is given, ``population`` holds its Fock populations on ``mode``
    and ``weighted_error`` is ``sum_n p_n |u~_n - u_n|`` against the exact
    parity rotation.
    """
    space = _as_space(space)
    if space.cutoff < budget.r_max:
        raise ValueError(f"cutoff {space.cutoff} is below r_max = {budget.r_max}")
    series = np.array([truncated_parity_series(n, budget.k_max, prec) for n in range(space.cutoff)])
    exact = parity_diagonal(space.cutoff)
    approx = np.exp(1j * theta * series)
    gate = DiagonalOperator(approx, space.cutoff, (mode,))
    report = GateErrorReport(
        theta=theta,
        k_max=budget.k_max,
        defect=np.abs(series - exact),
        per_level_error=np.abs(approx - np.exp(1j * theta * exact)),
        diagnostics={"r_max": budget.r_max, "lambda": budget.lam, "prec_bits": prec or series_precision(space.cutoff - 1)},
    )
    if rho is not None:
        report.population = rho.populations(mode)
    return gate, report
