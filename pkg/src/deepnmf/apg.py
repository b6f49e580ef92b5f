"""Accelerated projected-gradient solver for nonneg-constrained blocks.

One block subproblem is a convex function F over a matrix block V >= 0,
handed to the solver as a gradient oracle plus a Lipschitz constant for that
gradient. The solver runs Nesterov's accelerated scheme with the fixed step
1/LC: no line search, no restarts.

Quadratic blocks (every linear-model block in this package) additionally
carry their affine gradient structure in a :class:`QuadGradient`, which lets
:func:`apg_solve` dispatch the whole iteration to the compiled kernel in
:mod:`deepnmf.kernels`.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError, NumericalError
from . import kernels


@dataclass(frozen=True)
class QuadGradient:
    """Affine gradient grad(V) = left @ V @ right + lin + extras.

    ``left``/``right`` of None stand for identity factors (the product term
    is always present). ``colsum`` weights an all-ones gram term applied as
    a column-sum broadcast (never materialized); ``ridge`` weights an
    identity term. The implied block objective is
    0.5*<V, grad(V) - lin> + <lin, V> + const, whose gradient is exactly
    ``grad`` because every operator here is self-adjoint.
    """

    lin: np.ndarray
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None
    colsum: float = 0.0
    ridge: float = 0.0
    const: float = 0.0

    def apply(self, v):
        """The quadratic operator part of the gradient (everything but lin)."""
        a = v
        if self.left is not None:
            a = self.left @ a
        if self.right is not None:
            a = a @ self.right
        if self.left is None and self.right is None:
            a = a.copy()
        if self.ridge != 0.0:
            a = a + self.ridge * v
        if self.colsum != 0.0:
            a = a + self.colsum * v.sum(axis=0)
        return a

    def grad(self, v):
        return self.apply(v) + self.lin

    def objective(self, v):
        return float(0.5 * np.sum(v * self.apply(v)) + np.sum(self.lin * v)
                     + self.const)


@dataclass(frozen=True)
class StopRule:
    """Inner stopping rule: iteration cap plus relative projected-gradient tol."""

    max_iters: int = 500
    grad_tol: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.grad_tol <= 0:
            raise InvalidInputError(f"grad_tol must be > 0, got {self.grad_tol}")


@dataclass
class ApgProblem:
    """One nonneg-constrained block subproblem.

    ``grad`` maps a candidate block to its gradient; ``lipschitz`` bounds the
    gradient's variation and fixes the step size. ``objective`` is optional
    and enables divergence checks and the monotone-return guard; ``quad``
    carries the affine structure for the compiled fast path.
    """

    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    shape: tuple
    objective: Optional[Callable[[np.ndarray], float]] = None
    quad: Optional[QuadGradient] = None

    def __post_init__(self):
        if not np.isfinite(self.lipschitz) or self.lipschitz <= 0:
            raise InvalidInputError(
                f"lipschitz must be positive and finite, got {self.lipschitz}")
        self.shape = (int(self.shape[0]), int(self.shape[1]))

    @classmethod
    def from_quad(cls, quad, lipschitz):
        return cls(grad=quad.grad, lipschitz=lipschitz, shape=quad.lin.shape,
                   objective=quad.objective, quad=quad)


@dataclass
class ApgState:
    """Solver state: the last two iterates, the search point, and momentum."""

    current: np.ndarray
    previous: np.ndarray
    search_point: np.ndarray
    alpha: float = 1.0
    iter: int = 0


def initial_state(v0):
    v0 = np.array(v0, dtype=np.float64)
    return ApgState(current=v0, previous=v0.copy(), search_point=v0.copy())


def next_momentum(alpha):
    """Momentum recursion a_{k+1} = (1 + sqrt(4 a_k^2 + 1)) / 2."""
    return 0.5 * (1.0 + np.sqrt(4.0 * alpha * alpha + 1.0))


def projected_grad_norm(v, g):
    """KKT residual: Frobenius norm of the gradient restricted to entries
    that are either negative or sit at a strictly positive variable."""
    return kernels.kkt_norm(v, g)


def apg_step(state, problem):
    """One accelerated step: project the gradient step taken at the search
    point, advance the momentum coefficient, extrapolate the next search
    point. The search point is not projected; only ``current`` stays
    feasible."""
    g = problem.grad(state.search_point)
    if not np.all(np.isfinite(g)):
        raise NumericalError("gradient produced non-finite entries")
    new = np.maximum(state.search_point - g / problem.lipschitz, 0.0)
    alpha_next = next_momentum(state.alpha)
    search = new + ((state.alpha - 1.0) / alpha_next) * (new - state.current)
    return ApgState(current=new, previous=state.current, search_point=search,
                    alpha=alpha_next, iter=state.iter + 1)


def _check_initial(initial, problem):
    initial = np.ascontiguousarray(initial, dtype=np.float64)
    if initial.shape != problem.shape:
        raise InvalidInputError(
            f"initial has shape {initial.shape}, problem expects {problem.shape}")
    if np.min(initial) < 0:
        raise InvalidInputError("initial point must be nonnegative")
    return initial


def apg_solve(initial, problem, stop=StopRule(), full_output=False):
    """Run the accelerated iteration until the projected-gradient residual
    falls below ``stop.grad_tol`` times its value at ``initial`` or the
    iteration cap is hit.

    The returned block never has a higher objective than ``initial`` (when an
    objective is available to compare): acceleration is not monotone, so the
    best iterate seen is kept as a fallback. An objective rising past 10x the
    starting value aborts with NumericalError, which almost always means the
    supplied Lipschitz constant is too small.

    With ``full_output=True`` also returns a dict with ``iters``,
    ``converged``, ``rel_residual`` and ``objective`` entries.
    """
    initial = _check_initial(initial, problem)

    if problem.quad is not None:
        v, iters, status, rel, f_val = kernels.apg_quad_solve(
            initial, problem.quad.left, problem.quad.right, problem.quad.lin,
            problem.quad.colsum, problem.quad.ridge, problem.quad.const,
            problem.lipschitz, stop.grad_tol, stop.max_iters)
        if status == kernels.NONFINITE:
            raise NumericalError("gradient produced non-finite entries")
        if status == kernels.DIVERGED:
            raise NumericalError(
                "objective grew past 10x its starting value; the Lipschitz "
                "constant is likely wrong")
        if full_output:
            return v, {"iters": int(iters), "converged": status == kernels.CONVERGED,
                       "rel_residual": float(rel), "objective": float(f_val)}
        return v

    # Generic oracle path (non-quadratic problems, e.g. tests).
    g0 = problem.grad(initial)
    if not np.all(np.isfinite(g0)):
        raise NumericalError("gradient produced non-finite entries")
    r0 = projected_grad_norm(initial, g0)
    f = problem.objective
    f0 = f(initial) if f is not None else None
    if r0 == 0.0:
        if full_output:
            return initial.copy(), {"iters": 0, "converged": True,
                                    "rel_residual": 0.0, "objective": f0}
        return initial.copy()

    state = initial_state(initial)
    best_f, best_v = f0, initial.copy()
    div_floor = 2.5e-14 * (1.0 + abs(f0)) if f0 is not None else None
    rel, f_cur, converged = 1.0, f0, False
    for _ in range(stop.max_iters):
        state = apg_step(state, problem)
        g = problem.grad(state.current)
        rel = projected_grad_norm(state.current, g) / r0
        if f is not None:
            f_cur = f(state.current)
            if f_cur < best_f:
                best_f, best_v = f_cur, state.current.copy()
            if f_cur > 10.0 * max(f0, 0.0) + div_floor:
                raise NumericalError(
                    "objective grew past 10x its starting value; the "
                    "Lipschitz constant is likely wrong")
        if rel <= stop.grad_tol:
            converged = True
            break

    result = state.current
    if f is not None and f_cur > f0:
        result, f_cur = best_v, best_f
        rel = projected_grad_norm(result, problem.grad(result)) / r0
        converged = converged and rel <= stop.grad_tol
    if full_output:
        return result, {"iters": state.iter, "converged": converged,
                        "rel_residual": float(rel), "objective": f_cur}
    return result
