"""Complex-balanced fluxes and the parametrization of the toric locus.

A flux vector ``beta`` (one entry per edge) is complex balanced when every
vertex has equal inflow and outflow.  Pairing a positive state ``x`` with a
positive balanced flux gives rates ``k_e = beta_e / x^{y_source(e)}``; this
map is a homeomorphism from ``S_{x0} x B(G)`` onto the toric locus and an
immersion, which the functions below check numerically.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .equilibrium import equilibrium_from_rates, positive_state
from .errors import NotWeaklyReversible, UnbalancedFlux
from .kirchhoff import DEFAULT_MEMBERSHIP_TOL, check_rates
from .lincore import DEFAULT_RANK_TOL, numerical_rank, orthonormal_nullspace
from .netmodel import EGraph, StoichDecomp, stoich_decomp

BALANCE_TOL = 1e-10
IMMERSION_RANK_TOL = 1e-8


@dataclass(frozen=True)
class FluxSpace:
    balance_matrix: np.ndarray
    basis: np.ndarray  # one orthonormal kernel vector per row
    dim: int


@dataclass(frozen=True)
class RankCheck:
    rank: int
    expected: int
    passed: bool
    singular_values: np.ndarray


def balance_matrix(g: EGraph) -> np.ndarray:
    """``m x |E|`` incidence matrix: +1 where the edge enters the vertex, -1 where it leaves."""
    B = np.zeros((g.m, g.n_edges))
    B[g.targets, np.arange(g.n_edges)] += 1.0
    B[g.sources, np.arange(g.n_edges)] -= 1.0
    return B


def flux_space(g: EGraph, rank_tol: float = DEFAULT_RANK_TOL) -> FluxSpace:
    B = balance_matrix(g)
    basis = orthonormal_nullspace(B, rank_tol)
    return FluxSpace(balance_matrix=B, basis=basis, dim=basis.shape[0])


def flux_imbalance(g: EGraph, beta) -> float:
    """Largest vertex imbalance relative to the largest flux entry."""
    beta = np.asarray(beta, dtype=float)
    scale = max(np.max(np.abs(beta)), np.finfo(float).tiny)
    return float(np.max(np.abs(balance_matrix(g) @ beta)) / scale)


def _return_path(g: EGraph, start: int, goal: int) -> list[int] | None:
    """Edge indices of a shortest directed path, by BFS over outgoing edges."""
    out_edges: dict[int, list[int]] = {}
    for e in g.edges:
        out_edges.setdefault(e.source, []).append(e.index)
    prev: dict[int, int | None] = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v == goal:
            break
        for ei in out_edges.get(v, ()):
            t = g.edges[ei].target
            if t not in prev:
                prev[t] = ei
                queue.append(t)
    if goal not in prev:
        return None
    path, v = [], goal
    while prev[v] is not None:
        ei = prev[v]
        path.append(ei)
        v = g.edges[ei].source
    return path[::-1]


def cycle_cover(g: EGraph) -> list[tuple[int, ...]]:
    """Directed cycles (as sorted edge-index tuples) that together cover every edge.

    Raises:
        NotWeaklyReversible: some edge lies on no directed cycle.
    """
    cycles: list[tuple[int, ...]] = []
    covered = np.zeros(g.n_edges, dtype=bool)
    for e in g.edges:
        if covered[e.index]:
            continue
        back = _return_path(g, e.target, e.source)
        if back is None:
            raise NotWeaklyReversible(
                f"edge {g.vertices[e.source].label} -> {g.vertices[e.target].label} "
                "lies on no directed cycle, so no positive balanced flux exists"
            )
        cyc = tuple(sorted([e.index, *back]))
        cycles.append(cyc)
        covered[list(cyc)] = True
    return cycles


def sample_flux(g: EGraph, fs: FluxSpace | None = None, seed: int = 0) -> np.ndarray:
    """Strictly positive balanced flux: a weighted sum of covering cycles.

    Cycle weights are drawn uniformly from [0.5, 1.5] with ``seed``.
    """
    fs = fs or flux_space(g)
    rng = np.random.default_rng(seed)
    beta = np.zeros(g.n_edges)
    for cyc in cycle_cover(g):
        beta[list(cyc)] += rng.uniform(0.5, 1.5)
    if np.any(beta <= 0) or fs.dim == 0:
        raise NotWeaklyReversible("no strictly positive balanced flux")
    return beta


def phi_embedding(x, beta, g: EGraph, tol: float = BALANCE_TOL) -> np.ndarray:
    """Rates ``k_e = beta_e / x^{y_source(e)}``.

    Raises:
        UnbalancedFlux: ``beta`` violates vertex balance beyond ``tol`` (relative).
    """
    x = positive_state(x, "x")
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape != (g.n_edges,):
        raise ValueError(f"expected {g.n_edges} flux entries, got {beta.size}")
    if np.any(beta <= 0):
        raise ValueError("flux must be strictly positive")
    imbalance = flux_imbalance(g, beta)
    if imbalance > tol:
        raise UnbalancedFlux(f"flux is not complex balanced (imbalance {imbalance:.3e})", imbalance)
    return phi_hat(x, beta, g)


def phi_hat(x, beta, g: EGraph) -> np.ndarray:
    """Same formula as :func:`phi_embedding` on all of ``R^n_{>0} x R^E``, unchecked."""
    x = np.asarray(x, dtype=float)
    return np.asarray(beta, dtype=float) * np.exp(-g.source_exponents @ np.log(x))


def phi_inverse(
    g: EGraph,
    k,
    x0,
    sd: StoichDecomp | None = None,
    tol: float = DEFAULT_MEMBERSHIP_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """``(x, beta)`` with ``x`` the equilibrium in the class of ``x0`` and ``beta_e = k_e x^{y_src}``."""
    k = check_rates(g, k)
    x = equilibrium_from_rates(g, k, x0, sd, tol).x_star
    beta = k * np.exp(g.source_exponents @ np.log(x))
    return x, beta


def phi_hat_jacobian(x, beta, g: EGraph) -> np.ndarray:
    """Analytic Jacobian of :func:`phi_hat`, shape ``|E| x (n + |E|)``.

    The x-block row of edge e is ``-(beta_e / x^y) * y / x``; the flux block
    is ``diag(1 / x^y)``.
    """
    x = positive_state(x, "x")
    beta = np.asarray(beta, dtype=float)
    inv_mono = np.exp(-g.source_exponents @ np.log(x))
    dx = -(beta * inv_mono)[:, None] * g.source_exponents / x[None, :]
    return np.hstack([dx, np.diag(inv_mono)])


def finite_difference_jacobian(x, beta, g: EGraph, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of :func:`phi_hat`; steps scale with each coordinate."""
    point = np.concatenate([np.asarray(x, dtype=float), np.asarray(beta, dtype=float)])
    n = g.n
    J = np.empty((g.n_edges, point.size))
    for c in range(point.size):
        h = rel_step * max(abs(point[c]), 1.0)
        up, dn = point.copy(), point.copy()
        up[c] += h
        dn[c] -= h
        J[:, c] = (phi_hat(up[:n], up[n:], g) - phi_hat(dn[:n], dn[n:], g)) / (2 * h)
    return J


def jacobian_max_rel_error(x, beta, g: EGraph) -> float:
    """Analytic vs. central-difference Jacobian, max error over the largest entry."""
    J = phi_hat_jacobian(x, beta, g)
    F = finite_difference_jacobian(x, beta, g)
    return float(np.max(np.abs(J - F)) / max(np.max(np.abs(J)), np.finfo(float).tiny))


def immersion_rank_check(
    x,
    beta,
    g: EGraph,
    sd: StoichDecomp | None = None,
    fs: FluxSpace | None = None,
    rank_tol: float = IMMERSION_RANK_TOL,
) -> RankCheck:
    """Rank of the Jacobian restricted to the tangent space ``S x flux-space``."""
    sd = sd or stoich_decomp(g)
    fs = fs or flux_space(g)
    n, ne = g.n, g.n_edges
    T = np.zeros((n + ne, sd.s + fs.dim))
    T[:n, : sd.s] = sd.basis_S.T
    T[n:, sd.s:] = fs.basis.T
    R = phi_hat_jacobian(x, beta, g) @ T
    sv = np.linalg.svd(R, compute_uv=False)
    rank = numerical_rank(R, rank_tol)
    expected = sd.s + fs.dim
    return RankCheck(rank=rank, expected=expected, passed=rank == expected, singular_values=sv)


def complex_balance_residual(g: EGraph, k, x) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex ``|inflow - outflow|`` of the mass-action fluxes at ``x``, and outflow per vertex."""
    k = check_rates(g, k)
    x = positive_state(x, "x")
    flux = k * np.exp(g.source_exponents @ np.log(x))
    outflow = np.zeros(g.m)
    np.add.at(outflow, g.sources, flux)
    return np.abs(balance_matrix(g) @ flux), outflow
