"""Reaction-network DSL and the Euclidean embedded graph it describes.

Grammar, one statement per line, ``#`` starts a comment::

    species A B C
    3A -> 2A + B : 2.0
    A + 2B <-> 3B : 4.0, $kr

A complex is a ``+``-separated list of ``coeff*Species``, ``coeffSpecies``
or bare ``Species`` terms; ``0`` is the zero complex. Rates are decimal
literals or ``$name`` placeholders bound later through ``params``.

Vertices are deduplicated by exponent vector and numbered by first
appearance; edges are numbered in file order, a ``<->`` line producing the
forward edge and then the reverse edge.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .errors import ParseError, StructureError
from .lincore import DEFAULT_RANK_TOL, row_space_split

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_TERM_RE = re.compile(rf"^(?:({_NUMBER})\s*\*?\s*)?({_NAME})$")
_RATE_RE = re.compile(rf"^(?:({_NUMBER})|\$({_NAME}))$")
_NAME_RE = re.compile(rf"^{_NAME}$")


class Species(NamedTuple):
    name: str
    index: int


class Vertex(NamedTuple):
    exponents: tuple[float, ...]
    label: str


class Edge(NamedTuple):
    source: int
    target: int
    index: int


@dataclass(frozen=True)
class StoichDecomp:
    """Orthonormal bases of S (span of reaction vectors) and of its complement.

    Bases are stored one vector per row: ``basis_S`` is ``s x n`` and
    ``basis_Sperp`` is ``(n - s) x n``.
    """

    s: int
    basis_S: np.ndarray
    basis_Sperp: np.ndarray

    @property
    def n(self) -> int:
        return self.basis_S.shape[1]

    def project_S(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.basis_S.T @ (self.basis_S @ v)

    def project_Sperp(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.basis_Sperp.T @ (self.basis_Sperp @ v)


@dataclass(frozen=True)
class EGraph:
    """Euclidean embedded graph: complexes as points in R^n joined by reactions.

    ``rates`` holds the literal rate of each edge (``None`` for a ``$name``
    placeholder or an omitted rate) and ``rate_names`` the placeholder names.
    """

    species: tuple[str, ...]
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    rates: tuple[float | None, ...]
    rate_names: tuple[str | None, ...]

    @property
    def n(self) -> int:
        return len(self.species)

    @property
    def m(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def Y(self) -> np.ndarray:
        """Vertex coordinates, ``m x n``."""
        return np.array([v.exponents for v in self.vertices], dtype=float).reshape(self.m, self.n)

    @cached_property
    def sources(self) -> np.ndarray:
        return np.array([e.source for e in self.edges], dtype=int)

    @cached_property
    def targets(self) -> np.ndarray:
        return np.array([e.target for e in self.edges], dtype=int)

    @cached_property
    def source_exponents(self) -> np.ndarray:
        """Exponent vector of the source complex of each edge, ``|E| x n``."""
        return self.Y[self.sources]

    @cached_property
    def reaction_vectors(self) -> np.ndarray:
        """``y_target - y_source`` per edge, ``|E| x n``."""
        return self.Y[self.targets] - self.Y[self.sources]

    @cached_property
    def components(self) -> tuple[tuple[int, ...], ...]:
        return connected_components(self)

    @cached_property
    def component_of(self) -> np.ndarray:
        out = np.empty(self.m, dtype=int)
        for p, comp in enumerate(self.components):
            out[list(comp)] = p
        return out

    def species_index(self, name: str) -> int:
        return self.species.index(name)

    def resolve_rates(self, params: Mapping[str, float] | None = None) -> np.ndarray:
        """Rate vector in edge order, filling ``$name`` placeholders from ``params``."""
        params = dict(params or {})
        out = np.empty(self.n_edges)
        for e, (val, name) in enumerate(zip(self.rates, self.rate_names)):
            if name is not None:
                if name not in params:
                    raise ParseError(f"rate placeholder ${name} has no value")
                val = float(params[name])
            if val is None:
                raise ParseError(f"edge {e} has no rate")
            out[e] = val
        return out

    def to_dict(self) -> dict:
        edges = []
        for e, val, name in zip(self.edges, self.rates, self.rate_names):
            item = {"src": e.source, "dst": e.target, "index": e.index}
            if name is not None:
                item["rate"] = "$" + name
            elif val is not None:
                item["rate"] = val
            edges.append(item)
        return {
            "species": list(self.species),
            "vertices": [{"label": v.label, "exponents": list(v.exponents)} for v in self.vertices],
            "edges": edges,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_dsl(self) -> str:
        """Canonical DSL text; parsing it reproduces this graph exactly."""
        lines = ["species " + " ".join(self.species)]
        for e, val, name in zip(self.edges, self.rates, self.rate_names):
            line = f"{self.vertices[e.source].label} -> {self.vertices[e.target].label}"
            if name is not None:
                line += f" : ${name}"
            elif val is not None:
                line += f" : {val!r}"
            lines.append(line)
        return "\n".join(lines) + "\n"


def _fmt_coeff(c: float) -> str:
    if float(c).is_integer():
        return str(int(c))
    return repr(float(c))


def complex_label(exponents, species) -> str:
    terms = []
    for c, name in zip(exponents, species):
        if c == 0:
            continue
        terms.append(name if c == 1 else f"{_fmt_coeff(c)}{name}")
    return "+".join(terms) if terms else "0"


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def _parse_complex(text: str, lineno: int, col0: int, lookup) -> dict[str, float]:
    stripped = text.strip()
    if stripped == "0":
        return {}
    if not stripped:
        raise ParseError("empty complex", lineno, col0 + 1)
    coeffs: dict[str, float] = {}
    offset = 0
    for raw in text.split("+"):
        term = raw.strip()
        col = col0 + offset + (len(raw) - len(raw.lstrip())) + 1
        offset += len(raw) + 1
        match = _TERM_RE.match(term)
        if not match:
            raise ParseError(f"cannot parse term {term!r}", lineno, col)
        coeff = float(match.group(1)) if match.group(1) else 1.0
        name = match.group(2)
        if coeff <= 0:
            raise ParseError(f"coefficient of {name} must be positive", lineno, col)
        lookup(name, lineno, col)
        coeffs[name] = coeffs.get(name, 0.0) + coeff
    return coeffs


def _parse_rate(text: str, lineno: int, col: int) -> tuple[float | None, str | None]:
    match = _RATE_RE.match(text.strip())
    if not match:
        raise ParseError(f"bad rate {text.strip()!r}", lineno, col)
    if match.group(2):
        return None, match.group(2)
    value = float(match.group(1))
    if not np.isfinite(value) or value <= 0:
        raise ParseError(f"rate must be positive, got {value}", lineno, col)
    return value, None


def parse_network(text: str) -> EGraph:
    """Parse DSL source into an :class:`EGraph`.

    When the source has ``species`` declarations every species used in a
    reaction must be declared; otherwise species are numbered by first
    appearance.

    Raises:
        ParseError: syntax errors and undeclared species.
        StructureError: self-loops and duplicate edges.
    """
    lines = text.splitlines()
    declared: list[str] = []
    for lineno, line in enumerate(lines, 1):
        body = _strip_comment(line).strip()
        if body.split(None, 1)[:1] == ["species"]:
            for name in body.split()[1:]:
                if not _NAME_RE.match(name):
                    raise ParseError(f"bad species name {name!r}", lineno, line.find(name) + 1)
                if name in declared:
                    raise ParseError(f"species {name} declared twice", lineno, line.find(name) + 1)
                declared.append(name)
    strict = bool(declared)
    species = list(declared)

    def lookup(name: str, lineno: int, col: int) -> None:
        if name not in species:
            if strict:
                raise ParseError(f"unknown species {name}", lineno, col)
            species.append(name)

    raw_reactions: list[tuple[dict, dict, float | None, str | None, int]] = []
    for lineno, line in enumerate(lines, 1):
        body = _strip_comment(line)
        if not body.strip() or body.split(None, 1)[:1] == ["species"]:
            continue
        lhs_rhs, sep, rate_text = body.partition(":")
        if "<->" in lhs_rhs:
            arrow, reversible = "<->", True
        elif "->" in lhs_rhs:
            arrow, reversible = "->", False
        else:
            raise ParseError("expected '->' or '<->'", lineno, 1)
        if lhs_rhs.count("->") != 1:
            raise ParseError("more than one arrow", lineno, lhs_rhs.find(arrow) + 1)
        apos = lhs_rhs.index(arrow)
        lhs = _parse_complex(lhs_rhs[:apos], lineno, 0, lookup)
        rhs = _parse_complex(lhs_rhs[apos + len(arrow):], lineno, apos + len(arrow), lookup)

        rates: list[tuple[float | None, str | None]] = []
        if sep:
            col = len(lhs_rhs) + 2
            parts = rate_text.split(",")
            want = 2 if reversible else 1
            if len(parts) != want:
                lead = len(rate_text) - len(rate_text.lstrip())
                raise ParseError(f"'{arrow}' takes {want} rate(s), got {len(parts)}", lineno, col + lead)
            for part in parts:
                lead = len(part) - len(part.lstrip())
                rates.append(_parse_rate(part, lineno, col + lead))
                col += len(part) + 1
        else:
            rates = [(None, None)] * (2 if reversible else 1)

        raw_reactions.append((lhs, rhs, *rates[0], lineno))
        if reversible:
            raw_reactions.append((rhs, lhs, *rates[1], lineno))

    n = len(species)
    vertex_ids: dict[tuple[float, ...], int] = {}
    vertices: list[Vertex] = []

    def vertex(cx: dict[str, float]) -> int:
        vec = tuple(float(cx.get(s, 0.0)) for s in species)
        if vec not in vertex_ids:
            vertex_ids[vec] = len(vertices)
            vertices.append(Vertex(vec, complex_label(vec, species)))
        return vertex_ids[vec]

    edges: list[Edge] = []
    seen: dict[tuple[int, int], int] = {}
    rates_out: list[float | None] = []
    names_out: list[str | None] = []
    for lhs, rhs, val, name, lineno in raw_reactions:
        src, dst = vertex(lhs), vertex(rhs)
        if src == dst:
            raise StructureError(f"line {lineno}: self-loop on complex {vertices[src].label}")
        if (src, dst) in seen:
            raise StructureError(
                f"line {lineno}: duplicate edge {vertices[src].label} -> {vertices[dst].label}"
            )
        seen[(src, dst)] = len(edges)
        edges.append(Edge(src, dst, len(edges)))
        rates_out.append(val)
        names_out.append(name)

    if n == 0:
        raise ParseError("network declares no species")
    return EGraph(
        species=tuple(species),
        vertices=tuple(vertices),
        edges=tuple(edges),
        rates=tuple(rates_out),
        rate_names=tuple(names_out),
    )


def graph_from_dict(data: Mapping) -> EGraph:
    """Inverse of :meth:`EGraph.to_dict`."""
    species = tuple(data["species"])
    vertices = tuple(
        Vertex(tuple(float(c) for c in v["exponents"]), v["label"]) for v in data["vertices"]
    )
    edges, rates, names = [], [], []
    for pos, item in enumerate(data["edges"]):
        if item.get("index", pos) != pos:
            raise StructureError("edge indices must be contiguous and in order")
        if item["src"] == item["dst"]:
            raise StructureError(f"self-loop at edge {pos}")
        edges.append(Edge(int(item["src"]), int(item["dst"]), pos))
        rate = item.get("rate")
        if isinstance(rate, str) and rate.startswith("$"):
            rates.append(None)
            names.append(rate[1:])
        else:
            rates.append(None if rate is None else float(rate))
            names.append(None)
    if len({(e.source, e.target) for e in edges}) != len(edges):
        raise StructureError("duplicate edge")
    return EGraph(species, vertices, tuple(edges), tuple(rates), tuple(names))


def _adjacency(g: EGraph) -> csr_matrix:
    data = np.ones(g.n_edges)
    return csr_matrix((data, (g.sources, g.targets)), shape=(g.m, g.m))


def connected_components(g: EGraph) -> tuple[tuple[int, ...], ...]:
    """Linkage classes, each a sorted tuple of vertex indices.

    Components are numbered by their smallest vertex index.
    """
    if g.m == 0:
        return ()
    _, labels = _cc(_adjacency(g), directed=True, connection="weak")
    groups: dict[int, list[int]] = {}
    for v, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(v)
    return tuple(sorted((tuple(vs) for vs in groups.values()), key=lambda c: c[0]))


def is_weakly_reversible(g: EGraph) -> bool:
    """True iff every linkage class is strongly connected."""
    if g.m == 0:
        return True
    n_strong, _ = _cc(_adjacency(g), directed=True, connection="strong")
    return n_strong == len(g.components)


def stoich_decomp(g: EGraph, rank_tol: float = DEFAULT_RANK_TOL) -> StoichDecomp:
    basis_S, basis_Sperp = row_space_split(g.reaction_vectors.reshape(-1, g.n), rank_tol)
    return StoichDecomp(s=basis_S.shape[0], basis_S=basis_S, basis_Sperp=basis_Sperp)


def load_network(path) -> EGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())
