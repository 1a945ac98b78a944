"""Quadratic minimization over matrices with orthonormal columns.

Solves ``min vec(X)^T A vec(X)  s.t.  X^T X = I`` with a feasible
curvilinear search: Cayley-transform retractions, Barzilai-Borwein step
sizes and a nonmonotone backtracking line search. ``vec`` is column-major,
matching :func:`ttdisc.tensor.vec`.
"""
import csv
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

__all__ = [
    "SolverConfig",
    "StiefelResult",
    "check_stiefel",
    "quad_objective_grad",
    "cayley_retract",
    "minimize_on_stiefel",
    "write_trace_csv",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 500
    grad_tol: float = 1e-6
    step_init: float = 1e-3
    # relative objective / iterate change, averaged over `window` iterations
    ftol: float = 1e-12
    xtol: float = 1e-10
    sufficient_decrease: float = 1e-4
    backtrack: float = 0.5
    window: int = 5
    max_backtracks: int = 30
    seed: int = 0

    def __post_init__(self):
        for name in ("grad_tol", "step_init", "sufficient_decrease"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.window < 1 or self.max_iter < 0 or self.max_backtracks < 1:
            raise ValueError("window, max_iter and max_backtracks must be positive")


@dataclass
class StiefelResult:
    x: np.ndarray
    fun: float
    n_iter: int
    converged: bool
    message: str
    objective: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    feasibility: list = field(default_factory=list)


def check_stiefel(x, tol=1e-10):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < x.shape[1]:
        raise ValueError(f"expected a tall p x q matrix, got shape {x.shape}")
    err = float(np.max(np.abs(x.T @ x - np.eye(x.shape[1]))))
    if err > tol:
        raise ValueError(f"point is not on the Stiefel manifold (error {err:.2e})")
    return x


def _symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def quad_objective_grad(a, x, symmetrize=True):
    """Value and Euclidean gradient of ``vec(X)^T A vec(X)``."""
    a = _symmetrize(a) if symmetrize else np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if a.shape != (x.size, x.size):
        raise ValueError(f"A of shape {a.shape} does not match X of shape {x.shape}")
    v = x.reshape(-1, order="F")
    av = a @ v
    return float(v @ av), (2.0 * av).reshape(x.shape, order="F")


def cayley_retract(x, grad, tau, method="auto"):
    """Curve ``Y(tau) = (I + tau/2 W)^{-1} (I - tau/2 W) X`` with ``W = G X^T - X G^T``.

    ``method="woodbury"`` uses the rank-2q form ``W = U V^T`` and only solves a
    ``2q x 2q`` system; ``"direct"`` forms the ``p x p`` inverse. ``"auto"``
    picks Woodbury when ``p > 2q``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(grad, dtype=float)
    p, q = x.shape
    if g.shape != x.shape:
        raise ValueError(f"gradient shape {g.shape} does not match point shape {x.shape}")
    if tau == 0:
        return x.copy()
    if method == "auto":
        method = "woodbury" if p > 2 * q else "direct"
    try:
        if method == "direct":
            w = g @ x.T - x @ g.T
            eye = np.eye(p)
            return linalg.solve(eye + 0.5 * tau * w, (eye - 0.5 * tau * w) @ x)
        if method == "woodbury":
            u = np.hstack([g, x])
            v = np.hstack([x, -g])
            vx = v.T @ x
            m = np.eye(2 * q) + 0.5 * tau * (v.T @ u)
            return x - tau * (u @ linalg.solve(m, vx))
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError(f"Cayley system is singular at step {tau}") from exc
    raise ValueError(f"unknown method {method!r}")


def minimize_on_stiefel(a, x0, config=None):
    """Minimize ``vec(X)^T A vec(X)`` over ``X^T X = I`` starting at ``x0``.

    Returns the best iterate seen, so the final objective never exceeds the
    starting one. The traces in the result cover every accepted iterate.
    """
    cfg = config or SolverConfig()
    a = _symmetrize(a)
    x = check_stiefel(np.array(x0, dtype=float), tol=1e-8)
    q = x.shape[1]

    f, g = quad_objective_grad(a, x, symmetrize=False)
    if not np.isfinite(f):
        raise FloatingPointError("objective is not finite; check A")

    def tangent(x, g):
        return g - x @ (g.T @ x)

    dtx = tangent(x, g)
    gnorm = float(np.linalg.norm(dtx))
    res = StiefelResult(x=x, fun=f, n_iter=0, converged=False, message="")
    res.objective.append(f)
    res.grad_norm.append(gnorm)
    res.step.append(0.0)
    res.feasibility.append(float(np.max(np.abs(x.T @ x - np.eye(q)))))
    best_x, best_f = x, f

    tau = cfg.step_init
    hist = deque([f], maxlen=cfg.window)
    xdiffs = deque(maxlen=cfg.window)
    fdiffs = deque(maxlen=cfg.window)
    message = "maximum iterations reached"
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if gnorm <= cfg.grad_tol:
            message = "tangent gradient below tolerance"
            converged = True
            it -= 1
            break
        # <G, W X>: decrease rate along the Cayley curve at tau = 0
        gx = g.T @ x
        deriv = float(np.sum(g * g) - np.sum(gx * gx.T))
        fref = max(hist)
        for _ in range(cfg.max_backtracks):
            try:
                xn = cayley_retract(x, g, tau)
            except linalg.LinAlgError:
                tau *= cfg.backtrack
                continue
            fn, gn = quad_objective_grad(a, xn, symmetrize=False)
            if fn <= fref - cfg.sufficient_decrease * tau * deriv:
                break
            tau *= cfg.backtrack
        else:
            message = "line search failed; keeping current point"
            logger.debug("stiefel: %s at iteration %d", message, it)
            it -= 1
            break

        dtxn = tangent(xn, gn)
        s = xn - x
        yv = dtxn - dtx
        xdiffs.append(np.linalg.norm(s) / np.sqrt(q))
        fdiffs.append(abs(f - fn) / (abs(f) + 1.0))
        x, f, g, dtx = xn, fn, gn, dtxn
        gnorm = float(np.linalg.norm(dtx))
        hist.append(f)
        res.objective.append(f)
        res.grad_norm.append(gnorm)
        res.step.append(tau)
        res.feasibility.append(float(np.max(np.abs(x.T @ x - np.eye(q)))))
        if f < best_f:
            best_x, best_f = x, f

        if gnorm <= cfg.grad_tol:
            message = "tangent gradient below tolerance"
            converged = True
            break
        if len(xdiffs) == cfg.window and (
            np.mean(xdiffs) < cfg.xtol or np.mean(fdiffs) < cfg.ftol
        ):
            message = "iterates stalled below tolerance"
            converged = True
            break

        sy = abs(float(np.sum(s * yv)))
        if sy > 0:
            if it % 2 == 0:
                tau = float(np.sum(s * s)) / sy
            else:
                tau = sy / float(np.sum(yv * yv))
        tau = min(max(tau, 1e-20), 1e20)

    res.x = best_x
    res.fun = best_f
    res.n_iter = it
    res.converged = converged
    res.message = message
    return res


def write_trace_csv(result, path):
    """Iteration trace as CSV: ``iter,objective,grad_norm,step``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "objective", "grad_norm", "step"])
        for i, (f, gn, st) in enumerate(zip(result.objective, result.grad_norm, result.step)):
            w.writerow([i, repr(f), repr(gn), repr(st)])
