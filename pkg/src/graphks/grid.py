"""Uniform edge grids and edge-wise sampled scalar fields.

Every edge carries n_e + 1 equispaced nodes including both endpoints; vertex
values are stored redundantly on each incident edge.  The shared-node view
(one unknown per vertex) is what the discrete Laplacian acts on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshMismatch, MeshTooCoarse
from .graph import MetricGraph


class Mesh:
    """Uniform per-edge grids with shared vertex unknowns."""

    def __init__(self, graph: MetricGraph, nodes_per_unit_length: int):
        if nodes_per_unit_length * graph.min_length < 2:
            raise MeshTooCoarse(
                "need at least 2 intervals on the shortest edge; "
                f"got {nodes_per_unit_length} nodes per unit length"
            )
        self.graph = graph
        self.nodes_per_unit_length = nodes_per_unit_length
        # even interval counts so composite Simpson applies edge-wise
        self.n = [
            max(2, 2 * math.ceil(e.length * nodes_per_unit_length / 2))
            for e in graph.edges
        ]
        self.h = [e.length / n for e, n in zip(graph.edges, self.n)]
        self.x = [np.linspace(0.0, e.length, n + 1) for e, n in zip(graph.edges, self.n)]
        # flat (edge-concatenated, duplicated vertices) layout
        self.offsets = np.cumsum([0] + [n + 1 for n in self.n])
        self.size_flat = int(self.offsets[-1])
        # shared layout: vertices first, then edge interiors
        vidx = {v: i for i, v in enumerate(graph.vertices)}
        self.n_vertices = len(graph.vertices)
        self.shared_index = []
        pos = self.n_vertices
        for k, e in enumerate(graph.edges):
            idx = np.empty(self.n[k] + 1, dtype=np.int64)
            idx[0] = vidx[e.src]
            idx[-1] = vidx[e.dst]
            idx[1:-1] = np.arange(pos, pos + self.n[k] - 1)
            pos += self.n[k] - 1
            self.shared_index.append(idx)
        self.size_shared = pos
        # quadrature weights
        self.trapezoid = []
        self.simpson = []
        for k in range(len(graph.edges)):
            n, h = self.n[k], self.h[k]
            wt = np.full(n + 1, h)
            wt[0] = wt[-1] = h / 2
            self.trapezoid.append(wt)
            ws = np.empty(n + 1)
            ws[0::2] = 2.0
            ws[1::2] = 4.0
            ws[0] = ws[-1] = 1.0
            self.simpson.append(ws * h / 3.0)
        self.trapezoid_flat = np.concatenate(self.trapezoid)
        self.simpson_flat = np.concatenate(self.simpson)
        # shared-node weights (summed trapezoid contributions at vertices)
        w = np.zeros(self.size_shared)
        for k in range(len(graph.edges)):
            np.add.at(w, self.shared_index[k], self.trapezoid[k])
        self.shared_weights = w
        self.h_min = min(self.h)
        self.h_uniform = max(self.h) - self.h_min < 1e-12 * self.h_min

    def same_as(self, other: "Mesh") -> bool:
        return self.graph is other.graph and self.n == other.n

    def zeros(self) -> "GridFunction":
        return GridFunction(self, [np.zeros(n + 1) for n in self.n])

    def constant(self, c: float) -> "GridFunction":
        return GridFunction(self, [np.full(n + 1, float(c)) for n in self.n])

    def sample(self, fn) -> "GridFunction":
        """Sample fn(edge_id, x_array) -> array edge-wise."""
        vals = [
            np.asarray(fn(e.id, self.x[k]), dtype=float) + np.zeros(self.n[k] + 1)
            for k, e in enumerate(self.graph.edges)
        ]
        return GridFunction(self, vals)


@dataclass
class GridFunction:
    """Edge-wise uniform samples of a scalar field on the graph."""

    mesh: Mesh
    samples: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.samples) != len(self.mesh.n):
            raise MeshMismatch("sample arrays do not match mesh edges")
        for arr, n in zip(self.samples, self.mesh.n):
            if len(arr) != n + 1:
                raise MeshMismatch("sample array length mismatch")

    def copy(self) -> "GridFunction":
        return GridFunction(self.mesh, [a.copy() for a in self.samples])

    def to_flat(self) -> np.ndarray:
        return np.concatenate(self.samples)

    @classmethod
    def from_flat(cls, mesh: Mesh, flat: np.ndarray) -> "GridFunction":
        off = mesh.offsets
        return cls(mesh, [flat[off[k] : off[k + 1]].copy() for k in range(len(mesh.n))])

    def to_shared(self) -> np.ndarray:
        """Project to one unknown per vertex (trapezoid-weighted average of ends)."""
        m = self.mesh
        num = np.zeros(m.size_shared)
        den = np.zeros(m.size_shared)
        for k, arr in enumerate(self.samples):
            np.add.at(num, m.shared_index[k], m.trapezoid[k] * arr)
            np.add.at(den, m.shared_index[k], m.trapezoid[k])
        return num / den

    @classmethod
    def from_shared(cls, mesh: Mesh, vec: np.ndarray) -> "GridFunction":
        return cls(mesh, [vec[idx].copy() for idx in mesh.shared_index])

    def derivative(self) -> "GridFunction":
        """Edge-wise grid derivative: central interior, one-sided second order at ends."""
        out = []
        for arr, h in zip(self.samples, self.mesh.h):
            d = np.empty_like(arr)
            d[1:-1] = (arr[2:] - arr[:-2]) / (2 * h)
            d[0] = (-3 * arr[0] + 4 * arr[1] - arr[2]) / (2 * h)
            d[-1] = (3 * arr[-1] - 4 * arr[-2] + arr[-3]) / (2 * h)
            out.append(d)
        return GridFunction(self.mesh, out)

    def integral(self) -> float:
        return float(
            sum(w @ a for w, a in zip(self.mesh.trapezoid, self.samples))
        )

    def min(self) -> float:
        return float(min(a.min() for a in self.samples))

    def max(self) -> float:
        return float(max(a.max() for a in self.samples))

    def vertex_continuous(self, rtol: float = 1e-12) -> bool:
        m = self.mesh
        scale = max(1.0, max(abs(a).max() for a in self.samples))
        ends: dict[int, list[float]] = {}
        for k, arr in enumerate(self.samples):
            ends.setdefault(int(m.shared_index[k][0]), []).append(arr[0])
            ends.setdefault(int(m.shared_index[k][-1]), []).append(arr[-1])
        for vals in ends.values():
            if max(vals) - min(vals) > rtol * scale:
                return False
        return True

    def map(self, fn) -> "GridFunction":
        return GridFunction(self.mesh, [np.asarray(fn(a), dtype=float) for a in self.samples])

    # pointwise arithmetic (same mesh assumed)
    def _bin(self, other, op) -> "GridFunction":
        if isinstance(other, GridFunction):
            if not self.mesh.same_as(other.mesh):
                raise MeshMismatch("operands live on different meshes")
            return GridFunction(
                self.mesh, [op(a, b) for a, b in zip(self.samples, other.samples)]
            )
        return GridFunction(self.mesh, [op(a, other) for a in self.samples])

    def __add__(self, other):
        return self._bin(other, lambda a, b: a + b)

    def __radd__(self, other):
        return self._bin(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._bin(other, lambda a, b: a - b)

    def __mul__(self, other):
        return self._bin(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)
