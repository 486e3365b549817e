"""Mass-action ODE: right-hand side, integration and convergence checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .equilibrium import positive_state
from .errors import StepSizeUnderflow
from .kirchhoff import check_rates
from .netmodel import EGraph, StoichDecomp, stoich_decomp

# Dormand-Prince 5(4) tableau
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    h0: float | None = None
    max_steps: int = 200_000
    min_step: float = 1e-14


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # one row per accepted step
    conserved_drift: np.ndarray  # max_t |v.(x(t) - x0)| for each S-perp basis vector
    rejected: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class ConvergenceReport:
    final_distance: float
    monotone_tail: bool


def _rhs_factory(g: EGraph, k: np.ndarray):
    Ysrc = g.source_exponents
    R = g.reaction_vectors.T  # n x |E|

    def rhs(x: np.ndarray) -> np.ndarray:
        return R @ (k * np.exp(Ysrc @ np.log(x)))

    return rhs


def mass_action_rhs(g: EGraph, k, x) -> np.ndarray:
    """``sum_e k_e x^{y_src(e)} (y_tgt(e) - y_src(e))``, monomials via ``exp(y . ln x)``.

    Raises:
        NonPositiveState: some entry of ``x`` is not strictly positive.
    """
    k = check_rates(g, k)
    x = positive_state(x, "x")
    return _rhs_factory(g, k)(x)


def integrate(
    g: EGraph,
    k,
    x0,
    t_end: float,
    opts: IntegratorOptions | None = None,
    sd: StoichDecomp | None = None,
) -> Trajectory:
    """Adaptive Dormand-Prince integration on ``[0, t_end]``.

    A step whose stages or result leave the open positive orthant is
    rejected and the step size halved.

    Raises:
        StepSizeUnderflow: the step size fell below ``opts.min_step`` (scaled by t).
    """
    opts = opts or IntegratorOptions()
    k = check_rates(g, k)
    x0 = positive_state(x0)
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    sd = sd or stoich_decomp(g)
    rhs = _rhs_factory(g, k)

    times = [0.0]
    states = [x0.copy()]
    if t_end == 0:
        return Trajectory(np.array(times), np.array(states), np.zeros(sd.basis_Sperp.shape[0]))

    x = x0.copy()
    t = 0.0
    f = rhs(x)
    h = opts.h0
    if h is None:
        scale = opts.atol + opts.rtol * np.abs(x)
        d0, d1 = np.linalg.norm(x / scale), np.linalg.norm(f / scale)
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(h, t_end)
    rejected = 0
    K = np.empty((7, x.size))
    for _ in range(opts.max_steps):
        if t >= t_end:
            break
        h = min(h, t_end - t)
        if h < opts.min_step * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size {h:.3e} underflow at t={t:.6g}")
        K[0] = f
        ok = True
        for s in range(1, 7):
            xs = x + h * (np.dot(_A[s], K[:s]))
            if np.any(xs <= 0):
                ok = False
                break
            K[s] = rhs(xs)
        if not ok:
            h *= 0.5
            rejected += 1
            continue
        x_new = xs  # FSAL: stage 7 is the 5th-order solution
        err_vec = h * (_E @ K)
        scale = opts.atol + opts.rtol * np.maximum(np.abs(x), np.abs(x_new))
        err = np.sqrt(np.mean((err_vec / scale) ** 2))
        if err <= 1.0:
            t = t + h
            if t_end - t <= 1e-14 * t_end:
                t = t_end
            x = x_new
            f = K[6]
            times.append(t)
            states.append(x.copy())
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            rejected += 1
            factor = max(0.2, 0.9 * err ** -0.2)
        h *= factor
    else:
        raise StepSizeUnderflow(f"exceeded {opts.max_steps} steps before t_end={t_end}")

    S = np.array(states)
    drift = np.max(np.abs((S - x0) @ sd.basis_Sperp.T), axis=0) if sd.basis_Sperp.size else np.zeros(0)
    return Trajectory(np.array(times), S, drift, rejected)


def convergence_report(traj: Trajectory, x_star, rel_slack: float = 1e-8) -> ConvergenceReport:
    """Final distance to ``x_star`` and whether distance is non-increasing over the last quarter.

    Increases smaller than ``rel_slack * |x_star|`` count as non-increasing;
    the default matches the integrator's relative tolerance.
    """
    x_star = np.asarray(x_star, dtype=float)
    dist = np.linalg.norm(traj.states - x_star, axis=1)
    tail = dist[len(dist) - max(1, len(dist) // 4):]
    slack = rel_slack * max(1.0, float(np.linalg.norm(x_star)))
    monotone = bool(np.all(np.diff(tail) <= slack))
    return ConvergenceReport(final_distance=float(dist[-1]), monotone_tail=monotone)


def write_csv(traj: Trajectory, path) -> None:
    """Header ``t,x1,...,xn``; one row per accepted step."""
    n = traj.states.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *[f"x{i + 1}" for i in range(n)]])
        for t, row in zip(traj.times, traj.states):
            writer.writerow([repr(float(t)), *[repr(float(v)) for v in row]])

