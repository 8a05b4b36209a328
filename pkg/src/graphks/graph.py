"""Compact oriented metric graphs, directed-edge doubling, scattering, path enumeration.

A metric graph is a finite connected multigraph whose edges carry positive
lengths.  Every edge comes in two orientations; vertex scattering assigns the
weight 2/deg to a transmission and 2/deg - 1 to a backscatter, which makes the
scattering matrix row-stochastic.  Bounded-length chains of directed edges,
each weighted by the product of its per-step scattering coefficients, are the
combinatorial backbone of the heat-kernel path sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .errors import (
    DisconnectedGraph,
    NonpositiveLength,
    ParseError,
    PathBudgetExceeded,
    UnknownEdge,
)

DEFAULT_PATH_CAP = 10**7


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    length: float


@dataclass(frozen=True)
class DirectedEdge:
    """One orientation of an edge: forward runs src -> dst, reversed dst -> src."""

    edge: str
    forward: bool = True

    def reverse(self) -> "DirectedEdge":
        return DirectedEdge(self.edge, not self.forward)

    @property
    def sign(self) -> str:
        return "+" if self.forward else "-"


@dataclass(frozen=True)
class EdgePoint:
    """Point on the graph: coordinate xi in [0, length] along an edge."""

    edge: str
    xi: float


@dataclass(frozen=True)
class Path:
    """Chained directed-edge sequence; length excludes the final edge."""

    edges: tuple[DirectedEdge, ...]
    length: float
    weight: float

    @property
    def steps(self) -> int:
        return len(self.edges) - 1


class MetricGraph:
    """Immutable compact metric graph; safe for concurrent reads."""

    def __init__(self, vertices: Iterable[str], edges: Iterable[Edge]):
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        if not self.edges:
            raise ParseError("graph needs at least one edge")
        self._vindex = {v: i for i, v in enumerate(self.vertices)}
        if len(self._vindex) != len(self.vertices):
            raise ParseError("duplicate vertex id")
        self._eindex = {e.id: i for i, e in enumerate(self.edges)}
        if len(self._eindex) != len(self.edges):
            raise ParseError("duplicate edge id")
        for e in self.edges:
            if e.src not in self._vindex or e.dst not in self._vindex:
                raise ParseError(f"edge {e.id!r} references undeclared vertex")
            if not (e.length > 0.0) or not (e.length < float("inf")):
                raise NonpositiveLength(f"edge {e.id!r} has length {e.length}")
        # degree counts edge-ends: a self-loop contributes 2
        self.degree = {v: 0 for v in self.vertices}
        for e in self.edges:
            self.degree[e.src] += 1
            self.degree[e.dst] += 1
        if any(d < 1 for d in self.degree.values()):
            raise DisconnectedGraph("isolated vertex")
        self._check_connected()
        # directed index: 2k forward, 2k+1 reversed; successor lists by tail vertex
        nE = len(self.edges)
        out: list[list[int]] = [[] for _ in self.vertices]
        for k, e in enumerate(self.edges):
            out[self._vindex[e.src]].append(2 * k)
            out[self._vindex[e.dst]].append(2 * k + 1)
        self._out = [tuple(sorted(lst)) for lst in out]
        self._nE = nE
        self.total_length = sum(e.length for e in self.edges)
        self.min_length = min(e.length for e in self.edges)
        self.max_length = max(e.length for e in self.edges)
        self.max_degree = max(self.degree.values())

    def _check_connected(self) -> None:
        adj: dict[str, set[str]] = {v: set() for v in self.vertices}
        for e in self.edges:
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != len(self.vertices):
            raise DisconnectedGraph(
                f"graph has unreachable vertices: {sorted(set(self.vertices) - seen)}"
            )

    # -- directed-edge helpers ------------------------------------------------

    def edge_length(self, edge_id: str) -> float:
        return self.edges[self.edge_index(edge_id)].length

    def edge_index(self, edge_id: str) -> int:
        try:
            return self._eindex[edge_id]
        except KeyError:
            raise UnknownEdge(f"unknown edge {edge_id!r}") from None

    def directed_index(self, d: DirectedEdge) -> int:
        return 2 * self.edge_index(d.edge) + (0 if d.forward else 1)

    def directed_edge(self, idx: int) -> DirectedEdge:
        return DirectedEdge(self.edges[idx // 2].id, idx % 2 == 0)

    def initial_vertex(self, d: DirectedEdge) -> str:
        e = self.edges[self.edge_index(d.edge)]
        return e.src if d.forward else e.dst

    def terminal_vertex(self, d: DirectedEdge) -> str:
        e = self.edges[self.edge_index(d.edge)]
        return e.dst if d.forward else e.src

    def _tail_vertex_index(self, idx: int) -> int:
        e = self.edges[idx // 2]
        v = e.dst if idx % 2 == 0 else e.src
        return self._vindex[v]

    def successors(self, idx: int) -> tuple[int, ...]:
        """Directed indices whose initial vertex is the terminal vertex of idx."""
        return self._out[self._tail_vertex_index(idx)]

    def _step_weight(self, idx: int, nxt: int) -> float:
        deg = self.degree[self.vertices[self._tail_vertex_index(idx)]]
        w = 2.0 / deg
        if nxt == idx ^ 1:  # backscatter onto the reversed edge
            w -= 1.0
        return w

    def scattering_coefficient(self, d: DirectedEdge, d2: DirectedEdge) -> float:
        """Entry S_{d,d2} of the 2|E| x 2|E| scattering matrix."""
        i, j = self.directed_index(d), self.directed_index(d2)
        if j not in self.successors(i):
            return 0.0
        return self._step_weight(i, j)

    def directed_edges(self) -> list[DirectedEdge]:
        return [self.directed_edge(i) for i in range(2 * self._nE)]

    # -- path enumeration -----------------------------------------------------

    def _walk(self, start: int, cutoff: float, max_paths: int):
        """DFS over directed-edge chains from `start` with metric length <= cutoff.

        Yields raw records (end_idx, length, weight, seq) for every visit of any
        directed edge, m >= 1.  Zero-weight branches are pruned.  `seq` is the
        directed-index tuple including both endpoints.
        """
        lengths = [e.length for e in self.edges]
        found: list[tuple[int, float, float, tuple[int, ...]]] = []
        stack = [(start, 0.0, 1.0, (start,))]
        while stack:
            idx, acc, wgt, seq = stack.pop()
            step = lengths[idx // 2]
            new_acc = acc + step
            if new_acc > cutoff:
                continue
            for nxt in self.successors(idx):
                sw = self._step_weight(idx, nxt)
                if sw == 0.0:
                    continue
                w = wgt * sw
                found.append((nxt, new_acc, w, seq + (nxt,)))
                if len(found) > max_paths:
                    raise PathBudgetExceeded(
                        f"more than {max_paths} paths below cutoff {cutoff}"
                    )
                stack.append((nxt, new_acc, w, seq + (nxt,)))
        return found

    def enumerate_paths(
        self,
        d: DirectedEdge,
        d2: DirectedEdge,
        max_metric_length: float,
        max_paths: int = DEFAULT_PATH_CAP,
    ) -> list[Path]:
        """All chained paths from d to d2 with |P| <= max_metric_length.

        The m = 0 path (weight 1, length 0) is included iff d == d2.  Output is
        in canonical order: ascending length, ties broken lexicographically by
        the (edge id, sign) sequence.
        """
        if max_metric_length < 0:
            raise ValueError("max_metric_length must be >= 0")
        i, j = self.directed_index(d), self.directed_index(d2)
        out: list[Path] = []
        if i == j:
            out.append(Path((d,), 0.0, 1.0))
        for end, length, weight, seq in self._walk(i, max_metric_length, max_paths):
            if end == j:
                out.append(
                    Path(tuple(self.directed_edge(s) for s in seq), length, weight)
                )
        out.sort(key=lambda p: (p.length, tuple((q.edge, q.sign) for q in p.edges)))
        return out


def build_graph(spec, strict: bool = True) -> MetricGraph:
    """Build a MetricGraph from a GraphSpec JSON string or parsed dict."""
    if isinstance(spec, (str, bytes)):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"malformed graph spec: {exc.msg}", line=exc.lineno, column=exc.colno
            ) from exc
    if not isinstance(spec, dict):
        raise ParseError("graph spec must be a JSON object")
    known = {"vertices", "edges"}
    extra = set(spec) - known
    if extra:
        if strict:
            raise ParseError(f"unknown keys in graph spec: {sorted(extra)}")
        import warnings

        warnings.warn(f"ignoring unknown graph spec keys: {sorted(extra)}")
    try:
        vertices = [str(v) for v in spec["vertices"]]
        raw_edges = spec["edges"]
    except KeyError as exc:
        raise ParseError(f"graph spec missing key {exc.args[0]!r}") from None
    edges = []
    for item in raw_edges:
        if not isinstance(item, dict):
            raise ParseError("each edge must be an object")
        missing = {"id", "from", "to", "length"} - set(item)
        if missing:
            raise ParseError(f"edge missing keys: {sorted(missing)}")
        unknown = set(item) - {"id", "from", "to", "length"}
        if unknown and strict:
            raise ParseError(f"unknown edge keys: {sorted(unknown)}")
        edges.append(
            Edge(str(item["id"]), str(item["from"]), str(item["to"]), float(item["length"]))
        )
    return MetricGraph(vertices, edges)


def load_graph(path, strict: bool = True) -> MetricGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return build_graph(fh.read(), strict=strict)


def interval_graph(length: float = 1.0) -> MetricGraph:
    return MetricGraph(("v0", "v1"), (Edge("e0", "v0", "v1", length),))


def star_graph(arms: int = 3, length: float = 1.0) -> MetricGraph:
    verts = ["c"] + [f"a{i}" for i in range(arms)]
    edges = tuple(Edge(f"e{i}", "c", f"a{i}", length) for i in range(arms))
    return MetricGraph(verts, edges)
