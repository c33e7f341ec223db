"""JSON run configuration.

A document may hold a ``chain`` block (window, lengths, delta, alphas,
optional alpha_step and theta), a general ``graph`` with ``vertex_params``,
a ``pointint`` block, and defaults for command parameters.  Angles are in
radians.  Per-cell values are given either as a list indexed by absolute
cell index or as an object keyed by cell index; cells past the last entry
reuse it.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .chain import ChainConfig
from .exceptions import QGraphError
from .extensions import QuasiDeltaParams
from .graph import MetricGraph
from .symmetry import ThetaAssignment

COMMAND_KEYS = ("k", "k_min", "k_max", "samples", "m", "cells", "points_per_edge", "points")


class ConfigError(QGraphError):
    """Malformed configuration document; reported with the offending field."""


def _real(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return float(value)


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _triple(value, where: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{where}: expected three angles, got {value!r}")
    return tuple(_real(v, f"{where}[{i}]") for i, v in enumerate(value))


def _cell_key(key, where: str) -> int:
    try:
        return int(key)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cell index {key!r} is not an integer") from None


def _per_cell(value, where: str, leaf):
    """Constant, list by absolute cell index, or object keyed by cell."""
    if isinstance(value, Mapping):
        if not value:
            raise ConfigError(f"{where}: empty per-cell object")
        return {_cell_key(c, where): leaf(v, f"{where}.{c}") for c, v in value.items()}
    if leaf is _triple and isinstance(value, (list, tuple)) and value and isinstance(value[0], (list, tuple)):
        return {i: _triple(v, f"{where}[{i}]") for i, v in enumerate(value)}
    if leaf is _real and isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError(f"{where}: empty per-cell list")
        return {i: _real(v, f"{where}[{i}]") for i, v in enumerate(value)}
    return leaf(value, where)


def _theta(doc, where: str) -> ThetaAssignment:
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: expected an object {{kind: {{cell: angle}}}}")
    raw = {}
    for kind, cells in doc.items():
        if not isinstance(cells, Mapping):
            raise ConfigError(f"{where}.{kind}: expected an object {{cell: angle}}")
        for c, ang in cells.items():
            raw[(_cell_key(c, f"{where}.{kind}"), str(kind))] = _real(
                ang, f"{where}.{kind}.{c} (theta must be constant on each edge)"
            )
    return ThetaAssignment(raw)


def parse_chain(doc: Mapping[str, Any], where: str = "chain") -> tuple[ChainConfig, ThetaAssignment | None]:
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: expected an object")
    known = {"window", "l_u", "l_v", "delta", "alphas", "alpha_step", "theta"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")
    kw: dict[str, Any] = {}
    if "window" in doc:
        w = doc["window"]
        if not isinstance(w, (list, tuple)) or len(w) != 2:
            raise ConfigError(f"{where}.window: expected [first, last]")
        kw["window"] = (_int(w[0], f"{where}.window[0]"), _int(w[1], f"{where}.window[1]"))
        if kw["window"][1] < kw["window"][0]:
            raise ConfigError(f"{where}.window: last cell precedes first")
    for key in ("l_u", "l_v"):
        if key in doc:
            kw[key] = _real(doc[key], f"{where}.{key}")
            if kw[key] <= 0:
                raise ConfigError(f"{where}.{key}: must be positive")
    if "delta" in doc:
        kw["delta"] = _per_cell(doc["delta"], f"{where}.delta", _real)
    if "alphas" in doc:
        kw["alphas"] = _per_cell(doc["alphas"], f"{where}.alphas", _triple)
    if "alpha_step" in doc:
        kw["alpha_step"] = _triple(doc["alpha_step"], f"{where}.alpha_step")
    try:
        cfg = ChainConfig(**kw)
        for c in cfg.cells:
            cfg.params(c)
    except QGraphError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    theta = _theta(doc["theta"], f"{where}.theta") if "theta" in doc else None
    return cfg, theta


def parse_vertex_params(doc, graph: MetricGraph, where: str = "vertex_params") -> dict[int, QuasiDeltaParams]:
    doc = doc or {}
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: expected an object keyed by vertex id")
    default = doc.get("default")
    out = {}
    for v in graph.vertices:
        entry = doc.get(str(v.id), default)
        w = f"{where}.{v.id}"
        if entry is None:
            raise ConfigError(f"{w}: no parameters for vertex {v.id} and no default")
        delta = _real(entry.get("delta", 0.0), f"{w}.delta")
        alphas = entry.get("alphas", [0.0] * (v.degree - 1))
        if not isinstance(alphas, (list, tuple)) or len(alphas) != v.degree - 1:
            raise ConfigError(f"{w}.alphas: vertex {v.id} has degree {v.degree}, needs {v.degree - 1} angles")
        try:
            out[v.id] = QuasiDeltaParams(delta, tuple(_real(a, f"{w}.alphas") for a in alphas))
        except QGraphError as exc:
            raise ConfigError(f"{w}: {exc}") from exc
    return out


@dataclass(frozen=True, eq=False)
class RunConfig:
    chain: ChainConfig | None = None
    theta: ThetaAssignment | None = None
    graph: MetricGraph | None = None
    vertex_params: Mapping[int, QuasiDeltaParams] | None = None
    pointint: Mapping[str, float] | None = None
    params: Mapping[str, Any] = field(default_factory=dict)


def parse_config(doc: Mapping[str, Any]) -> RunConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("top level: expected a JSON object")
    extra = set(doc) - {"chain", "graph", "vertex_params", "pointint", *COMMAND_KEYS}
    if extra:
        raise ConfigError(f"top level: unknown field(s) {sorted(extra)}")
    chain = theta = graph = vparams = pint = None
    if "chain" in doc:
        chain, theta = parse_chain(doc["chain"])
    if "graph" in doc:
        try:
            graph = MetricGraph.from_dict(doc["graph"])
        except QGraphError as exc:
            raise ConfigError(f"graph: {exc}") from exc
        vparams = parse_vertex_params(doc.get("vertex_params"), graph)
    if "pointint" in doc:
        p = doc["pointint"]
        if not isinstance(p, Mapping) or "alpha" not in p:
            raise ConfigError("pointint: expected an object with 'alpha'")
        pint = {
            "alpha": _real(p["alpha"], "pointint.alpha"),
            "x_min": _real(p.get("x_min", -5.0), "pointint.x_min"),
            "x_max": _real(p.get("x_max", 5.0), "pointint.x_max"),
        }
        if pint["x_max"] <= pint["x_min"]:
            raise ConfigError("pointint: x_max must exceed x_min")
    params = {key: doc[key] for key in COMMAND_KEYS if key in doc}
    return RunConfig(chain, theta, graph, vparams, pint, params)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc)


def _rule_to_json(rule, leaf):
    if isinstance(rule, Mapping):
        return {str(c): leaf(rule[c]) for c in sorted(rule)}
    return leaf(rule)


def canonical_config(run: RunConfig) -> dict[str, Any]:
    """Normalised document that parses back to the same configuration."""
    out: dict[str, Any] = {}
    if run.chain is not None:
        c = run.chain
        out["chain"] = {
            "window": list(c.window),
            "l_u": float(c.l_u),
            "l_v": float(c.l_v),
            "delta": _rule_to_json(c.delta, float),
            "alphas": _rule_to_json(c.alphas, lambda t: [float(a) for a in t]),
            "alpha_step": [float(a) for a in c.alpha_step],
        }
        if run.theta is not None:
            out["chain"]["theta"] = run.theta.to_dict()
    if run.graph is not None:
        out["graph"] = run.graph.to_dict()
        out["vertex_params"] = {
            str(v): {"delta": p.delta, "alphas": list(p.alphas)} for v, p in sorted(run.vertex_params.items())
        }
    if run.pointint is not None:
        out["pointint"] = dict(run.pointint)
    out.update(run.params)
    return out
