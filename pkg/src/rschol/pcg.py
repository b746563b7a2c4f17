"""Preconditioned conjugate gradients with convergence reporting."""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BreakdownNonSPD, DimensionMismatch, NonPositiveDiagonal

__all__ = ["SolveReport", "apply_preconditioner", "jacobi_preconditioner", "pcg_solve"]


@dataclass
class SolveReport:
    """Outcome of one PCG solve.

    ``relative_residual_history[k]`` is the recursive relative residual
    after k iterations (entry 0 is 1 for a nonzero right-hand side);
    convergence is only declared after the true residual is recomputed
    and passes the tolerance.
    """

    iterations: int = 0
    converged: bool = False
    relative_residual: float = np.inf
    relative_residual_history: list = field(default_factory=list)
    wall_times: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "relative_residual": self.relative_residual,
            "relative_residual_history": self.relative_residual_history,
            "wall_times": self.wall_times,
        }


def apply_preconditioner(F, r):
    """Apply a rank-structured factor (or any operator) to a residual."""
    if hasattr(F, "apply"):
        return F.apply(r)
    return F(r)


class _Jacobi:
    def __init__(self, diag):
        self.inv_diag = 1.0 / diag

    def apply(self, r):
        return self.inv_diag * r

    __call__ = apply


def jacobi_preconditioner(A):
    """Diagonal preconditioner z_i = r_i / a_ii."""
    d = A.diagonal()
    if np.any(d <= 0.0):
        raise NonPositiveDiagonal("Jacobi preconditioner needs a positive diagonal")
    return _Jacobi(d)


def pcg_solve(A, b, preconditioner=None, tol=1e-5, max_iter=None, x0=None,
              setup_time=0.0):
    """Conjugate gradients on A x = b with an optional SPD preconditioner.

    Terminates when the true relative residual ||b - A x|| / ||b|| falls
    below ``tol`` (the recursive residual only triggers the check) or
    after ``max_iter`` iterations (default 10 n, reported with
    ``converged=False``).  Raises :class:`BreakdownNonSPD` on negative
    curvature, which signals a non-SPD matrix or preconditioner.
    """
    b = np.asarray(b, dtype=np.float64)
    n = A.n
    if b.shape != (n,):
        raise DimensionMismatch(f"b must have length {n}")
    if max_iter is None:
        max_iter = 10 * n
    op = A.to_csr_full()
    apply_m = (lambda r: r.copy()) if preconditioner is None else (
        preconditioner.apply if hasattr(preconditioner, "apply") else preconditioner
    )

    t0 = time.perf_counter()
    normb = float(np.linalg.norm(b))
    report = SolveReport(wall_times={"setup": setup_time})
    if normb == 0.0:
        report.converged = True
        report.relative_residual = 0.0
        report.relative_residual_history = [0.0]
        report.wall_times["solve"] = time.perf_counter() - t0
        return np.zeros(n), report

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    r = b - op @ x if x0 is not None else b.copy()
    hist = [float(np.linalg.norm(r)) / normb]
    z = apply_m(r)
    p = z.copy()
    rz = float(r @ z)
    it = 0
    converged = False
    relres = hist[0]
    while it < max_iter:
        Ap = op @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise BreakdownNonSPD(f"p^T A p = {pAp:g} <= 0 at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        relres = float(np.linalg.norm(r)) / normb
        hist.append(relres)
        if relres <= tol:
            true_r = b - op @ x
            true_rel = float(np.linalg.norm(true_r)) / normb
            if true_rel <= tol:
                converged = True
                relres = true_rel
                break
            r = true_r  # keep iterating on the recomputed residual
            relres = true_rel
            hist[-1] = true_rel
        z = apply_m(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    report.iterations = it
    report.converged = converged
    report.relative_residual = relres
    report.relative_residual_history = hist
    report.wall_times["solve"] = time.perf_counter() - t0
    return x, report
