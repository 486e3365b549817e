"""Complex-balanced equilibria from rate constants and initial conditions.

The pipeline has two stages:

1. :func:`solve_log_equilibrium` finds the unique ``X*`` in S with
   ``exp(X*)`` complex balanced, by solving the pair-difference log system
   restricted to ``s`` independent rows, augmented with a basis of S-perp.
2. :func:`birch_solve` moves ``exp(X*)`` along ``exp(X* + S-perp)`` until
   it meets the affine class ``x0 + S``.

:func:`equilibrium_from_rates` composes both for one ``x0``;
:class:`InitialConditionMap` fixes the rates and varies ``x0``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateBasis,
    MaxIterations,
    NonPositiveState,
    NotInToricLocus,
    SingularSystem,
)
from .kirchhoff import (
    DEFAULT_MEMBERSHIP_TOL,
    check_rates,
    locus_residual,
    locus_residual_jacobian,
    log_system,
    toric_membership,
    tree_constants,
)
from .lincore import independent_rows
from .netmodel import EGraph, StoichDecomp, stoich_decomp

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class LogEquilibrium:
    X_star: np.ndarray
    system_rows_used: tuple[int, ...]
    method: str  # "full-rank" or "augmented"


@dataclass(frozen=True)
class BirchOptions:
    grad_tol: float = 1e-12
    max_iter: int = 200
    armijo: float = 1e-4
    max_halvings: int = 60


@dataclass(frozen=True)
class BirchResult:
    x_star: np.ndarray
    w: np.ndarray
    iterations: int
    final_grad_norm: float
    potential_trace: tuple[float, ...] = field(default=(), repr=False)
    w_trace: tuple[np.ndarray, ...] = field(default=(), repr=False)


def positive_state(x, name: str = "x0") -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise NonPositiveState(f"{name} must be strictly positive, got {x.tolist()}")
    return x


def solve_log_equilibrium(
    g: EGraph, k, sd: StoichDecomp | None = None, tol: float = DEFAULT_MEMBERSHIP_TOL
) -> LogEquilibrium:
    """Unique ``X*`` in S such that ``exp(X*)`` is complex balanced for ``k``.

    Raises:
        NotInToricLocus: ``k`` fails the membership test at ``tol``.
        SingularSystem: the selected rows plus the S-perp basis are not invertible.
    """
    k = check_rates(g, k)
    sd = sd or stoich_decomp(g)
    member = toric_membership(g, k, tol)
    if not member.is_member:
        raise NotInToricLocus(
            f"rates are not in the toric locus (residual {member.residual:.3e} > {tol:.1e})",
            residual=member.residual,
        )
    dy, rhs = log_system(g, tree_constants(g, k))
    rows = independent_rows(dy, sd.s)
    M = np.vstack([dy[rows], sd.basis_Sperp])
    b = np.concatenate([rhs[rows], np.zeros(sd.n - sd.s)])
    if M.shape != (sd.n, sd.n):
        raise SingularSystem(f"augmented system has shape {M.shape}, expected {(sd.n, sd.n)}")
    sv = linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e3 * _EPS * sv[0] * sd.n:
        raise SingularSystem(f"augmented system is singular (condition {sv[0] / sv[-1]:.3e})")
    X = linalg.solve(M, b)
    return LogEquilibrium(
        X_star=X,
        system_rows_used=tuple(rows),
        method="full-rank" if sd.s == sd.n else "augmented",
    )


def _check_orthonormal(V: np.ndarray) -> None:
    if V.shape[0] and np.max(np.abs(V @ V.T - np.eye(V.shape[0]))) > 1e-10:
        raise DegenerateBasis("S-perp basis is not orthonormal")


def birch_solve(X_star, x0, sd: StoichDecomp, opts: BirchOptions | None = None) -> BirchResult:
    """Intersect ``exp(X* + S-perp)`` with ``x0 + S``.

    Minimizes the strictly convex potential
    ``g(w) = sum(exp(X* + V^T w)) - (V x0) . w`` whose gradient is
    ``V exp(X* + V^T w) - V x0`` and Hessian ``V diag(x) V^T``; damped
    Newton with Armijo backtracking, started from ``w = 0``.

    Raises:
        MaxIterations: gradient above tolerance after ``opts.max_iter`` steps.
        DegenerateBasis: rows of ``sd.basis_Sperp`` are not orthonormal.
    """
    opts = opts or BirchOptions()
    X_star = np.asarray(X_star, dtype=float)
    x0 = positive_state(x0)
    V = sd.basis_Sperp
    _check_orthonormal(V)
    if V.shape[0] == 0:
        return BirchResult(np.exp(X_star), np.zeros(0), 0, 0.0)

    target = V @ x0

    def state(w):
        return np.exp(X_star + V.T @ w)

    def potential(w, x):
        return float(np.sum(x) - target @ w)

    w = np.zeros(V.shape[0])
    x = state(w)
    grad = V @ x - target
    pot = potential(w, x)
    pots, ws = [pot], [w.copy()]
    absV = np.abs(V)

    def converged(x, grad):
        # entries of V x are sums of n terms, so roundoff bounds attainable accuracy
        floor = 8 * sd.n * _EPS * max(np.max(absV @ x), np.max(absV @ x0))
        return np.max(np.abs(grad)) <= max(opts.grad_tol, floor)

    it = 0
    while not converged(x, grad):
        if it >= opts.max_iter:
            raise MaxIterations(
                f"Birch solve did not converge in {opts.max_iter} iterations "
                f"(|grad|_inf = {np.max(np.abs(grad)):.3e})",
                final_grad_norm=float(np.max(np.abs(grad))),
            )
        H = (V * x) @ V.T
        step = -linalg.solve(H, grad, assume_a="pos")
        slope = float(grad @ step)
        t = 1.0
        if -slope <= 64 * _EPS * max(abs(pot), float(np.sum(x))):
            # decrease below the potential's resolution: plain Newton is safe here
            w = w + step
            x = state(w)
            pot = potential(w, x)
            grad = V @ x - target
            pots.append(pot)
            ws.append(w.copy())
            it += 1
            continue
        with np.errstate(over="ignore"):
            for _ in range(opts.max_halvings):
                w_new = w + t * step
                x_new = state(w_new)
                pot_new = potential(w_new, x_new)
                if np.isfinite(pot_new) and pot_new <= pot + opts.armijo * t * slope:
                    break
                t *= 0.5
            else:
                # no decrease representable: we sit at the roundoff floor
                break
        w, x, pot = w_new, x_new, pot_new
        grad = V @ x - target
        pots.append(pot)
        ws.append(w.copy())
        it += 1
    return BirchResult(
        x_star=x,
        w=w,
        iterations=it,
        final_grad_norm=float(np.max(np.abs(grad))),
        potential_trace=tuple(pots),
        w_trace=tuple(ws),
    )


def equilibrium_from_rates(
    g: EGraph,
    k,
    x0,
    sd: StoichDecomp | None = None,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
    opts: BirchOptions | None = None,
) -> BirchResult:
    """The complex-balanced equilibrium of ``(g, k)`` inside ``(x0 + S) ∩ R^n_{>0}``."""
    sd = sd or stoich_decomp(g)
    log_eq = solve_log_equilibrium(g, k, sd, tol)
    return birch_solve(log_eq.X_star, x0, sd, opts)


class InitialConditionMap:
    """``x0 -> x*`` for fixed rates; ``X*`` is computed once and shared."""

    def __init__(
        self,
        g: EGraph,
        k,
        sd: StoichDecomp | None = None,
        tol: float = DEFAULT_MEMBERSHIP_TOL,
        opts: BirchOptions | None = None,
    ):
        self.graph = g
        self.sd = sd or stoich_decomp(g)
        self.log_equilibrium = solve_log_equilibrium(g, k, self.sd, tol)
        self.opts = opts

    @property
    def X_star(self) -> np.ndarray:
        return self.log_equilibrium.X_star

    def __call__(self, x0) -> BirchResult:
        return birch_solve(self.X_star, x0, self.sd, self.opts)

    def map(self, x0s, jobs: int = 1) -> list[BirchResult]:
        """Evaluate many initial conditions; results keep the input order."""
        if jobs <= 1:
            return [self(x0) for x0 in x0s]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(self, x0s))


def equilibrium_from_initial(
    g: EGraph, k, sd: StoichDecomp | None = None, tol: float = DEFAULT_MEMBERSHIP_TOL
) -> InitialConditionMap:
    return InitialConditionMap(g, k, sd, tol)


def project_to_locus(g: EGraph, k_ref, k_trial, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Move ``k_trial`` onto the toric locus along the normal space at ``k_ref``.

    Solves ``c(k_trial + J0^T lam) = 0`` for ``lam`` by Newton, with ``c`` the
    locus constraints and ``J0`` their Jacobian at ``k_ref``.  The result is
    a smooth function of ``k_trial`` near ``k_ref``.

    Raises:
        NotInToricLocus: the projection does not converge or leaves the positive orthant.
    """
    k_trial = check_rates(g, k_trial)
    J0 = locus_residual_jacobian(g, k_ref)
    if J0.shape[0] == 0:
        return k_trial
    lam = np.zeros(J0.shape[0])
    k = k_trial
    for _ in range(max_iter):
        c = locus_residual(g, k)
        if np.max(np.abs(c)) <= tol:
            return k
        A = locus_residual_jacobian(g, k) @ J0.T
        lam = lam - linalg.solve(A, c)
        k = k_trial + J0.T @ lam
        if np.any(k <= 0):
            raise NotInToricLocus("projection onto the toric locus left the positive orthant")
    raise NotInToricLocus(
        "projection onto the toric locus did not converge",
        residual=float(np.linalg.norm(locus_residual(g, k))),
    )


@dataclass(frozen=True)
class ProbeResult:
    """Central differences at each step size and Richardson ratios between them.

    ``ratios[j] = |D(h_j) - D(h_{j+1})| / |D(h_{j+1}) - D(h_{j+2})|``, which
    tends to 4 for a smooth map when the steps halve.  ``nan`` marks a
    vanishing denominator.
    """

    kind: str
    steps: np.ndarray
    estimates: np.ndarray
    ratios: np.ndarray
    x_star: np.ndarray


def richardson_ratios(estimates) -> np.ndarray:
    est = np.asarray(estimates, dtype=float)
    diffs = np.linalg.norm(np.diff(est, axis=0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = diffs[:-1] / diffs[1:]
    return np.where(diffs[1:] > 0, ratios, np.nan)


def smooth_dependence_probe(
    g: EGraph,
    k,
    x0,
    direction,
    h_list,
    kind: str = "x0",
    sd: StoichDecomp | None = None,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
    project: bool = True,
    jobs: int = 1,
) -> ProbeResult:
    """Finite-difference derivative of ``x*`` along ``direction``.

    Args:
        kind: ``"x0"`` perturbs the initial condition, ``"rates"`` the rate
            vector.  Rate perturbations ``k + h d`` are pulled back onto the
            toric locus with :func:`project_to_locus` unless ``project`` is
            false, in which case off-locus points raise.
        h_list: step sizes, normally successive halvings.

    Raises:
        NotInToricLocus: ``k`` or a perturbed rate vector is off the locus.
    """
    k = check_rates(g, k)
    x0 = positive_state(x0)
    sd = sd or stoich_decomp(g)
    d = np.asarray(direction, dtype=float).reshape(-1)
    steps = np.asarray(h_list, dtype=float)

    if kind == "x0":
        if d.shape != (g.n,):
            raise ValueError(f"x0 direction needs {g.n} entries")
        qmap = InitialConditionMap(g, k, sd, tol)
        centre = qmap(x0).x_star

        def evaluate(point):
            h, sgn = point
            return qmap(x0 + sgn * h * d).x_star

    elif kind == "rates":
        if d.shape != (g.n_edges,):
            raise ValueError(f"rate direction needs {g.n_edges} entries")
        centre = equilibrium_from_rates(g, k, x0, sd, tol).x_star

        def evaluate(point):
            h, sgn = point
            trial = k + sgn * h * d
            if project:
                trial = project_to_locus(g, k, trial)
            return equilibrium_from_rates(g, trial, x0, sd, tol).x_star

    else:
        raise ValueError(f"unknown probe kind {kind!r}")

    points = [(h, s) for h in steps for s in (1.0, -1.0)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(evaluate, points))
    else:
        values = [evaluate(p) for p in points]
    values = np.array(values).reshape(len(steps), 2, g.n)
    estimates = (values[:, 0] - values[:, 1]) / (2 * steps[:, None])
    return ProbeResult(
        kind=kind,
        steps=steps,
        estimates=estimates,
        ratios=richardson_ratios(estimates) if len(steps) >= 3 else np.zeros(0),
        x_star=centre,
    )
