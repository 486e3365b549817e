"""Kirchhoff matrices, tree constants and the toric-locus membership test.

For a weakly reversible network, ``x`` is complex balanced for rates ``k``
iff ``K_i x^{y_j} = K_j x^{y_i}`` for every pair of vertices in the same
linkage class, where ``K_i`` is the (sign-normalized) principal minor of
the Kirchhoff matrix at vertex ``i``.  Taking logs turns this into the
linear system ``ln(K_i/K_j) = (y_i - y_j) . X`` and membership of ``k`` in
the toric locus becomes consistency of that system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotWeaklyReversible
from .lincore import least_squares, orthonormal_nullspace, principal_minor
from .netmodel import EGraph

DEFAULT_MEMBERSHIP_TOL = 1e-9
STRUCTURAL_ZERO = 1e-14


@dataclass(frozen=True)
class KirchhoffData:
    matrices: tuple[np.ndarray, ...]
    tree_constants: np.ndarray


@dataclass(frozen=True)
class MembershipResult:
    is_member: bool
    log_solution: np.ndarray
    residual: float
    tolerance_used: float


def check_rates(g: EGraph, k) -> np.ndarray:
    k = np.asarray(k, dtype=float).reshape(-1)
    if k.shape != (g.n_edges,):
        raise ValueError(f"expected {g.n_edges} rates, got {k.size}")
    if not np.all(np.isfinite(k)) or np.any(k <= 0):
        raise ValueError("rate constants must be finite and positive")
    return k


def kirchhoff_matrix(g: EGraph, k, component: int) -> np.ndarray:
    """Column-Laplacian of one linkage class: ``A[j, i] = k_{i->j}``, columns sum to 0.

    Rows and columns follow the vertex order inside the component.
    """
    k = check_rates(g, k)
    verts = g.components[component]
    local = {v: pos for pos, v in enumerate(verts)}
    A = np.zeros((len(verts), len(verts)))
    for e in g.edges:
        if e.source in local:
            i, j = local[e.source], local[e.target]
            A[j, i] += k[e.index]
            A[i, i] -= k[e.index]
    return A


def kirchhoff_data(g: EGraph, k, tol: float = STRUCTURAL_ZERO) -> KirchhoffData:
    k = check_rates(g, k)
    mats = tuple(kirchhoff_matrix(g, k, p) for p in range(len(g.components)))
    K = np.empty(g.m)
    for comp, A in zip(g.components, mats):
        size = len(comp)
        sign = -1.0 if (size - 1) % 2 else 1.0
        vals = np.array([sign * principal_minor(A, i) for i in range(size)])
        top = vals.max()
        if top <= 0 or np.any(vals <= tol * top):
            bad = [g.vertices[comp[i]].label for i in np.flatnonzero(vals <= tol * max(top, 0))]
            raise NotWeaklyReversible(
                f"linkage class containing {g.vertices[comp[0]].label} is not strongly "
                f"connected (zero tree constant at {', '.join(bad)})"
            )
        K[list(comp)] = vals
    return KirchhoffData(matrices=mats, tree_constants=K)


def tree_constants(g: EGraph, k, tol: float = STRUCTURAL_ZERO) -> np.ndarray:
    """Positive tree constant for every vertex (rooted spanning-tree weight sums).

    Raises:
        NotWeaklyReversible: some constant is structurally zero.
    """
    return kirchhoff_data(g, k, tol).tree_constants


def consecutive_pairs(g: EGraph) -> list[tuple[int, int]]:
    """Vertex pairs (v_1, v_2), (v_2, v_3), ... within each linkage class."""
    pairs = []
    for comp in g.components:
        pairs.extend(zip(comp[:-1], comp[1:]))
    return pairs


def log_system(g: EGraph, K) -> tuple[np.ndarray, np.ndarray]:
    """Stacked system ``delta_y @ X = ln(delta_K)`` over consecutive pairs."""
    pairs = consecutive_pairs(g)
    K = np.asarray(K, dtype=float)
    if not pairs:
        return np.zeros((0, g.n)), np.zeros(0)
    i, j = np.array(pairs).T
    return g.Y[i] - g.Y[j], np.log(K[i]) - np.log(K[j])


def toric_membership(g: EGraph, k, tol: float = DEFAULT_MEMBERSHIP_TOL) -> MembershipResult:
    K = tree_constants(g, k)
    dy, rhs = log_system(g, K)
    if dy.shape[0] == 0:
        return MembershipResult(True, np.zeros(g.n), 0.0, tol)
    ls = least_squares(dy, rhs)
    return MembershipResult(
        is_member=bool(ls.residual_norm <= tol),
        log_solution=ls.solution,
        residual=ls.residual_norm,
        tolerance_used=tol,
    )


def log_tree_constant_jacobian(g: EGraph, k) -> np.ndarray:
    """``d ln K_i / d k_e`` as an ``m x |E|`` matrix (Jacobi's formula on each minor)."""
    k = check_rates(g, k)
    data = kirchhoff_data(g, k)
    J = np.zeros((g.m, g.n_edges))
    for comp, A in zip(g.components, data.matrices):
        local = {v: pos for pos, v in enumerate(comp)}
        size = len(comp)
        if size == 1:
            continue
        comp_edges = [e for e in g.edges if e.source in local]
        for r in range(size):
            keep = [c for c in range(size) if c != r]
            pos = {c: q for q, c in enumerate(keep)}
            inv = np.linalg.inv(A[np.ix_(keep, keep)])
            for e in comp_edges:
                a, b = local[e.source], local[e.target]
                # dA/dk_e = E[b, a] - E[a, a]; trace(inv @ E[p, q]) = inv[q, p]
                val = 0.0
                if a != r:
                    if b != r:
                        val += inv[pos[a], pos[b]]
                    val -= inv[pos[a], pos[a]]
                J[comp[r], e.index] = val
    return J


def locus_constraints(g: EGraph) -> np.ndarray:
    """Orthonormal rows spanning the left kernel of the pair-difference matrix.

    ``k`` is in the toric locus iff ``C @ ln(delta_K(k)) = 0``; the number of
    rows is the codimension of the locus (the deficiency).
    """
    dy, _ = log_system(g, np.ones(g.m))
    if dy.shape[0] == 0:
        return np.zeros((0, 0))
    return orthonormal_nullspace(dy.T)


def locus_residual(g: EGraph, k) -> np.ndarray:
    _, rhs = log_system(g, tree_constants(g, k))
    C = locus_constraints(g)
    return C @ rhs if C.size else np.zeros(0)


def locus_residual_jacobian(g: EGraph, k) -> np.ndarray:
    C = locus_constraints(g)
    if not C.size:
        return np.zeros((0, g.n_edges))
    JK = log_tree_constant_jacobian(g, k)
    i, j = np.array(consecutive_pairs(g)).T
    return C @ (JK[i] - JK[j])
