"""Independent reference computations used by the tests."""

import mpmath


def tail_oracle(r: int, tol: float, dps: int = 80) -> int:
    """Smallest K with |sum_{k >= K'} (i pi r)^k / k!| <= tol for every K' >= K, by direct summation."""
    with mpmath.workdps(dps):
        x = mpmath.pi * r
        total = mpmath.expj(x)
        partial = mpmath.mpc(0)
        term = mpmath.mpc(1)
        last_bad = -1
        k = 0
        # beyond 3x + 60 terms the tail is far below any tolerance used here
        while k <= 3 * x + 60:
            if abs(total - partial) > tol:
                last_bad = k
            partial += term
            k += 1
            term = term * 1j * x / k
        return last_bad + 1
