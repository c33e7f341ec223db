"""Metric graphs and boundary data in the vertex-grouped (threaded) layout.

Every edge is an interval ``[0, l]``.  Boundary data of a function on the
graph is stored vertex by vertex: the block of vertex ``nu`` lists the values
at the endpoints attached to ``nu`` in the order fixed by
:class:`VertexSpec`.  Normal derivatives point outwards, so a left endpoint
(``x = 0``) stores ``-Phi'(0)`` and a right endpoint stores ``+Phi'(l)``.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .exceptions import InvalidArgumentError

LEFT = "left"
RIGHT = "right"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EdgeSpec:
    id: int
    kind: str
    length: float
    cell: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.length) or self.length <= 0:
            raise InvalidArgumentError(f"edge {self.id}: length must be positive, got {self.length}")
        if not self.kind:
            raise InvalidArgumentError(f"edge {self.id}: empty kind label")


@dataclass(frozen=True)
class EndpointRef:
    edge: int
    end: str

    def __post_init__(self):
        if self.end not in (LEFT, RIGHT):
            raise InvalidArgumentError(f"endpoint end must be 'left' or 'right', got {self.end!r}")


@dataclass(frozen=True)
class VertexSpec:
    id: int
    endpoints: tuple[EndpointRef, ...]

    def __post_init__(self):
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        if len(self.endpoints) < 1:
            raise InvalidArgumentError(f"vertex {self.id} has no endpoints")

    @property
    def degree(self) -> int:
        return len(self.endpoints)


@dataclass(frozen=True)
class MetricGraph:
    """Edges plus vertices given as ordered endpoint groupings.

    ``open_ends`` lists the endpoints not attached to any vertex; only
    windowed graphs (finite cut-outs of infinite ones) may have them.
    """

    edges: tuple[EdgeSpec, ...]
    vertices: tuple[VertexSpec, ...]
    open_ends: tuple[EndpointRef, ...] = ()
    windowed: bool = False
    _slot: dict = field(default=None, init=False, repr=False, compare=False)
    _eidx: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "open_ends", tuple(self.open_ends))
        ids = [e.id for e in self.edges]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("edge ids must be unique")
        vids = [v.id for v in self.vertices]
        if len(set(vids)) != len(vids):
            raise InvalidArgumentError("vertex ids must be unique")
        if self.open_ends and not self.windowed:
            raise InvalidArgumentError("open endpoints are only allowed on windowed graphs")

        known = {(e.id, end) for e in self.edges for end in (LEFT, RIGHT)}
        slot = {}
        offset = 0
        for vpos, v in enumerate(self.vertices):
            for j, ep in enumerate(v.endpoints):
                key = (ep.edge, ep.end)
                if key not in known:
                    raise InvalidArgumentError(f"vertex {v.id} references unknown endpoint {key}")
                if key in slot:
                    raise InvalidArgumentError(f"endpoint {key} appears in more than one vertex")
                slot[key] = (vpos, j, offset + j)
            offset += v.degree
        for ep in self.open_ends:
            key = (ep.edge, ep.end)
            if key not in known or key in slot:
                raise InvalidArgumentError(f"open endpoint {key} is unknown or attached")
        covered = len(slot) + len(self.open_ends)
        if covered != len(known):
            raise InvalidArgumentError(
                f"vertices and open ends cover {covered} of {len(known)} endpoints"
            )
        object.__setattr__(self, "_slot", slot)
        object.__setattr__(self, "_eidx", {e.id: e for e in self.edges})

    @property
    def dimension(self) -> int:
        return sum(v.degree for v in self.vertices)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(v.degree for v in self.vertices)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(np.concatenate([[0], np.cumsum(self.degrees)]).astype(int).tolist())

    def edge(self, edge_id: int) -> EdgeSpec:
        return self._eidx[edge_id]

    def edge_at(self, cell: int, kind: str) -> EdgeSpec:
        for e in self.edges:
            if e.cell == cell and e.kind == kind:
                return e
        raise KeyError((cell, kind))

    def locate(self, ep: EndpointRef) -> tuple[int, int, int]:
        """Return ``(vertex position, slot in vertex, flat index)`` of an endpoint."""
        return self._slot[(ep.edge, ep.end)]

    def endpoint_at(self, flat_index: int) -> EndpointRef:
        vpos = int(np.searchsorted(self.offsets, flat_index, side="right")) - 1
        return self.vertices[vpos].endpoints[flat_index - self.offsets[vpos]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "edges": [
                {"id": e.id, "kind": e.kind, "length": e.length, **({"cell": e.cell} if e.cell is not None else {})}
                for e in self.edges
            ],
            "vertices": [
                {"id": v.id, "endpoints": [[ep.edge, ep.end] for ep in v.endpoints]}
                for v in self.vertices
            ],
            "open_ends": [[ep.edge, ep.end] for ep in self.open_ends],
            "windowed": self.windowed,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "MetricGraph":
        try:
            edges = [
                EdgeSpec(int(e["id"]), str(e.get("kind", "u")), float(e["length"]), e.get("cell"))
                for e in doc["edges"]
            ]
            vertices = [
                VertexSpec(int(v["id"]), tuple(EndpointRef(int(a), str(b)) for a, b in v["endpoints"]))
                for v in doc["vertices"]
            ]
            open_ends = tuple(EndpointRef(int(a), str(b)) for a, b in doc.get("open_ends", []))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidArgumentError):
                raise
            raise InvalidArgumentError(f"malformed graph description: {exc!r}") from exc
        return cls(tuple(edges), tuple(vertices), open_ends, bool(doc.get("windowed", bool(open_ends))))


@dataclass(frozen=True, eq=False)
class BoundaryVector:
    """Concatenated per-vertex complex blocks."""

    data: np.ndarray
    offsets: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen(self.data))
        if len(self.data) != self.offsets[-1]:
            raise InvalidArgumentError("block offsets do not match data length")

    def block(self, vpos: int) -> np.ndarray:
        return self.data[self.offsets[vpos]:self.offsets[vpos + 1]]

    @property
    def n_blocks(self) -> int:
        return len(self.offsets) - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


@dataclass(frozen=True, eq=False)
class TraceData:
    phi: BoundaryVector
    phidot: BoundaryVector


def build_chain_graph(cell_range: Iterable[int], l_u: float, l_v: float) -> MetricGraph:
    """Window of the chain with a loop at every node.

    Vertex ``i`` groups ``(I_i^u right, I_i^v left, I_i^v right,
    I_{i+1}^u left)``.  The window holds the chain edges ``I_i^u`` for every
    cell in range plus the trailing ``I_{i_max+1}^u`` that the last vertex
    needs; the left end of the first chain edge and the right end of the
    trailing one are open.
    """
    cells = sorted(set(int(c) for c in cell_range))
    if not cells:
        raise InvalidArgumentError("cell range is empty")
    if cells != list(range(cells[0], cells[-1] + 1)):
        raise InvalidArgumentError("cell range must be contiguous")
    if not (l_u > 0 and l_v > 0):
        raise InvalidArgumentError(f"edge lengths must be positive, got l_u={l_u}, l_v={l_v}")

    edges = []
    uid = {}
    vid = {}
    for c in cells + [cells[-1] + 1]:
        uid[c] = len(edges)
        edges.append(EdgeSpec(uid[c], "u", float(l_u), c))
    for c in cells:
        vid[c] = len(edges)
        edges.append(EdgeSpec(vid[c], "v", float(l_v), c))
    vertices = [
        VertexSpec(
            c,
            (
                EndpointRef(uid[c], RIGHT),
                EndpointRef(vid[c], LEFT),
                EndpointRef(vid[c], RIGHT),
                EndpointRef(uid[c + 1], LEFT),
            ),
        )
        for c in cells
    ]
    open_ends = (EndpointRef(uid[cells[0]], LEFT), EndpointRef(uid[cells[-1] + 1], RIGHT))
    return MetricGraph(tuple(edges), tuple(vertices), open_ends, windowed=True)


def trace_of_plane_wave(
    graph: MetricGraph, k: float, coeffs: Mapping[int, tuple[complex, complex]]
) -> TraceData:
    """Boundary data of ``Phi_e(x) = A e^{ikx} + B e^{-ikx}`` on every edge."""
    missing = [e.id for e in graph.edges if e.id not in coeffs]
    if missing:
        raise InvalidArgumentError(f"missing plane-wave coefficients for edges {missing}")
    phi = np.zeros(graph.dimension, dtype=complex)
    dphi = np.zeros(graph.dimension, dtype=complex)
    for v in graph.vertices:
        for ep in v.endpoints:
            A, B = coeffs[ep.edge]
            _, _, idx = graph.locate(ep)
            if ep.end == LEFT:
                phi[idx] = A + B
                dphi[idx] = -1j * k * (A - B)
            else:
                e = np.exp(1j * k * graph.edge(ep.edge).length)
                phi[idx] = A * e + B / e
                dphi[idx] = 1j * k * (A * e - B / e)
    off = graph.offsets
    return TraceData(BoundaryVector(phi, off), BoundaryVector(dphi, off))
