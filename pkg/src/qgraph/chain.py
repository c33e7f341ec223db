"""Spectral problems on the chain with a loop at every node.

On each edge the eigenfunction with eigenvalue ``k**2`` is
``Phi(x) = A e^{ikx} + B e^{-ikx}``, ``x in [0, l]``.  At node ``i`` the
quasi-delta conditions become four linear equations in

    (A_i^u, B_i^u, A_i^v, B_i^v, A_{i+1}^u, B_{i+1}^u)

(:func:`assemble_node_system`).  Eliminating the loop amplitudes gives a
2x2 transfer matrix from one chain edge to the next.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.optimize

from .exceptions import (
    InvalidArgumentError,
    NotInBandError,
    SingularEliminationError,
    UnsupportedReductionError,
)
from .extensions import QuasiDeltaParams
from .graph import MetricGraph, build_chain_graph

log = logging.getLogger(__name__)

RESONANCE_TOL = 1e-9
UNIT_TOL = 1e-8


def _lookup(rule, cell: int):
    if not isinstance(rule, Mapping):
        return rule
    keys = sorted(rule)
    below = [c for c in keys if c <= cell]
    return rule[below[-1] if below else keys[0]]


@dataclass(frozen=True)
class ChainConfig:
    """Geometry and vertex conditions of a chain window.

    ``delta`` and ``alphas`` are either constants or mappings from absolute
    cell index to values; a cell missing from a mapping takes the entry of
    the nearest listed cell below it (or the first entry).  ``alpha_step``
    adds a linear drift ``cell * alpha_step`` to the alphas.
    """

    window: tuple[int, int] = (0, 15)
    l_u: float = 1.0
    l_v: float = 1.0
    delta: float | Mapping[int, float] = 0.0
    alphas: tuple[float, float, float] | Mapping[int, tuple[float, float, float]] = (0.0, 0.0, 0.0)
    alpha_step: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        w = (int(self.window[0]), int(self.window[1]))
        if w[1] < w[0]:
            raise InvalidArgumentError(f"empty window {self.window}")
        object.__setattr__(self, "window", w)
        if not (self.l_u > 0 and self.l_v > 0):
            raise InvalidArgumentError("edge lengths must be positive")
        for c in (self.window[0], self.window[1]):
            self.params(c)

    __hash__ = None

    @property
    def cells(self) -> range:
        return range(self.window[0], self.window[1] + 1)

    def params(self, cell: int) -> QuasiDeltaParams:
        delta = float(_lookup(self.delta, cell))
        base = np.asarray(_lookup(self.alphas, cell), dtype=float)
        if base.shape != (3,):
            raise InvalidArgumentError(f"cell {cell}: chain nodes need three alphas, got {base.tolist()}")
        return QuasiDeltaParams(delta, tuple(base + cell * np.asarray(self.alpha_step, dtype=float)))

    def cell_params(self, cells=None) -> dict[int, QuasiDeltaParams]:
        return {c: self.params(c) for c in (self.cells if cells is None else cells)}

    def with_window(self, window: tuple[int, int]) -> "ChainConfig":
        return replace(self, window=window)

    def alpha_gap(self, cell: int) -> float:
        a = self.params(cell).alphas
        return a[1] - a[0]

    def is_z_invariant(self, cells=None, tol: float = 1e-12) -> bool:
        """Constant delta and constant loop phase gap over ``cells``."""
        cells = list(self.cells if cells is None else cells)
        p0 = self.params(cells[0])
        g0 = p0.alphas[1] - p0.alphas[0]
        for c in cells[1:]:
            p = self.params(c)
            dg = np.angle(np.exp(1j * (p.alphas[1] - p.alphas[0] - g0)))
            if abs(p.delta - p0.delta) > tol or abs(dg) > tol:
                return False
        return True

    def graph(self) -> MetricGraph:
        return build_chain_graph(self.cells, self.l_u, self.l_v)


class EdgeCoefficients(NamedTuple):
    A: complex
    B: complex


def _phases(cfg: ChainConfig, k: float):
    return np.exp(1j * k * cfg.l_u), np.exp(1j * k * cfg.l_v)


def is_resonant(cfg: ChainConfig, k: float, tol: float = RESONANCE_TOL) -> bool:
    """True when ``k l_v`` is within ``tol`` of a multiple of pi."""
    return abs(np.sin(k * cfg.l_v)) < tol


def assemble_node_system(cfg: ChainConfig, cell: int, k: float) -> np.ndarray:
    """4x6 matrix of the matching equations at node ``cell``.

    Rows: the three trace relations ``phi_0 = e^{i alpha_j} phi_j`` and the
    derivative balance ``4 tan(delta/2) phi_0 = ik [...]``, each written as
    ``row @ x = 0``.
    """
    if not k > 0:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    p = cfg.params(cell)
    a1, a2, a3 = np.exp(1j * np.asarray(p.alphas))
    eu, ev = _phases(cfg, k)
    tr = [eu, 1 / eu]
    N = np.array([
        [*tr, -a1, -a1, 0, 0],
        [*tr, -a2 * ev, -a2 / ev, 0, 0],
        [*tr, 0, 0, -a3, -a3],
        [0, 0, 0, 0, 0, 0],
    ], dtype=complex)
    deriv = np.array([eu, -1 / eu, -a1 + a2 * ev, a1 - a2 / ev, -a3, a3])
    N[3] = 4 * np.tan(p.delta / 2) * np.array([eu, 1 / eu, 0, 0, 0, 0]) - 1j * k * deriv
    return N


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """``matrix`` maps ``(A_i^u, B_i^u)`` to ``(A_{i+1}^u, B_{i+1}^u)``; ``loop`` to ``(A_i^v, B_i^v)``."""

    matrix: np.ndarray
    loop: np.ndarray
    k: float
    cell: int

    def eigenvalues(self) -> np.ndarray:
        return _sorted_eigs(self.matrix)[0]


def _sorted_eigs(T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, V = np.linalg.eig(T)
    order = np.lexsort((np.abs(w), np.round(np.angle(w), 12)))
    return w[order], V[:, order]


def transfer_matrix(cfg: ChainConfig, cell: int, k: float) -> TransferMatrix:
    if is_resonant(cfg, k):
        raise SingularEliminationError(
            f"loop resonance at k={k!r}: k*l_v is a multiple of pi; use the node-system solver"
        )
    N = assemble_node_system(cfg, cell, k)
    y = np.linalg.solve(N[:, 2:], -N[:, :2])
    return TransferMatrix(y[2:], y[:2], float(k), cell)


# --------------------------------------------------------------------------
# band scans


@dataclass(frozen=True, eq=False)
class BandScan:
    k: np.ndarray
    eigenvalues: np.ndarray
    in_band: np.ndarray
    det_abs: np.ndarray

    def rows(self):
        for k, (l1, l2), b in zip(self.k, self.eigenvalues, self.in_band):
            yield float(k), complex(l1), complex(l2), bool(b)

    def gaps(self) -> list[tuple[float, float]]:
        """Contiguous k-intervals of samples without a unit-modulus eigenvalue."""
        out = []
        start = None
        for i, b in enumerate(self.in_band):
            if not b and start is None:
                start = i
            if b and start is not None:
                out.append((float(self.k[start]), float(self.k[i - 1])))
                start = None
        if start is not None:
            out.append((float(self.k[start]), float(self.k[-1])))
        return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QGRAPH_THREADS", "1")))
    except ValueError:
        return 1


def _offset_grid(cfg: ChainConfig, k_min: float, k_max: float, samples: int) -> np.ndarray:
    h = (k_max - k_min) / samples
    ks = k_min + (np.arange(samples) + 0.5) * h
    bad = np.abs(np.sin(ks * cfg.l_v)) < RESONANCE_TOL
    ks[bad] += 0.25 * h
    return ks


def band_structure(cfg: ChainConfig, k_min: float, k_max: float, samples: int = 400) -> BandScan:
    """Transfer eigenvalues on a half-step offset grid over ``[k_min, k_max]``.

    The transfer matrix of the first window cell is used; for Z-invariant
    configurations the other cells differ from it by a scalar phase, which
    does not change moduli.
    """
    if not (0 < k_min < k_max) or samples < 1:
        raise InvalidArgumentError("need 0 < k_min < k_max and samples >= 1")
    if not cfg.is_z_invariant():
        raise InvalidArgumentError("band scans need a Z-invariant configuration")
    ks = _offset_grid(cfg, k_min, k_max, samples)
    cell = cfg.window[0]

    def one(k):
        T = transfer_matrix(cfg, cell, k).matrix
        w, _ = _sorted_eigs(T)
        return w, abs(np.linalg.det(T))

    with ThreadPoolExecutor(_threads()) as ex:
        res = list(ex.map(one, ks))
    lam = np.array([r[0] for r in res])
    det_abs = np.array([r[1] for r in res])
    in_band = np.any(np.abs(np.abs(lam) - 1) <= UNIT_TOL, axis=1)
    return BandScan(ks, lam, in_band, det_abs)


# --------------------------------------------------------------------------
# candidates


@dataclass(frozen=True, eq=False)
class EigenCandidate:
    """Plane-wave amplitudes on a window solving the node equations at ``k``.

    A candidate only solves the vertex conditions; whether it is a genuine
    generalised eigenfunction also depends on its growth, reported as
    ``growth`` (largest transfer-eigenvalue modulus involved, 1 for Bloch
    candidates).  ``residual`` is the largest node defect, each divided by
    the node's largest amplitude when that exceeds 1, so that exponential
    growth inside a gap does not masquerade as an error.
    """

    k: float
    coeffs: Mapping[tuple[int, str], EdgeCoefficients]
    residual: float
    config: ChainConfig
    bloch: complex | None = None
    growth: float = float("nan")

    def coefficient_vector(self) -> np.ndarray:
        return candidate_vector(self.config, self.coeffs)

    def recompute_residual(self) -> float:
        return candidate_residual(self.config, self.k, self.coeffs)

    def node_vector(self, cell: int) -> np.ndarray:
        c = self.coeffs
        return np.array([*c[(cell, "u")], *c[(cell, "v")], *c[(cell + 1, "u")]], dtype=complex)


def _node_defect(N: np.ndarray, x: np.ndarray) -> float:
    """``max |N x|``, measured against the node's amplitudes once they exceed 1."""
    return float(np.max(np.abs(N @ x))) / max(1.0, float(np.max(np.abs(x))))


def candidate_residual(cfg: ChainConfig, k: float, coeffs) -> float:
    worst = 0.0
    for c in cfg.cells:
        x = np.array([*coeffs[(c, "u")], *coeffs[(c, "v")], *coeffs[(c + 1, "u")]], dtype=complex)
        worst = max(worst, _node_defect(assemble_node_system(cfg, c, k), x))
    return worst


def candidate_vector(cfg: ChainConfig, coeffs) -> np.ndarray:
    """Flatten amplitudes as ``[u_c, v_c for c in window] + [u_{last+1}]``."""
    out = []
    for c in cfg.cells:
        out += [*coeffs[(c, "u")], *coeffs[(c, "v")]]
    out += [*coeffs[(cfg.window[1] + 1, "u")]]
    return np.array(out, dtype=complex)


def _gauge_multipliers(cfg: ChainConfig, lam: complex) -> dict[int, complex]:
    """Per-cell Bloch multipliers when ``lam`` is an eigenvalue of the first cell's T."""
    a0 = cfg.params(cfg.window[0]).alphas[2]
    return {c: lam * np.exp(-1j * (cfg.params(c).alphas[2] - a0)) for c in cfg.cells}


def _loop_gauge(cfg: ChainConfig) -> dict[int, complex]:
    """``e^{-i(alpha_1^c - alpha_1^{c0})}``: loop amplitudes of cell ``c`` relative to the first cell."""
    a0 = cfg.params(cfg.window[0]).alphas[0]
    return {c: np.exp(-1j * (cfg.params(c).alphas[0] - a0)) for c in cfg.cells}


def _bloch_seeds(cfg: ChainConfig, k: float, bloch) -> tuple[list[np.ndarray], complex, float]:
    """First-cell solutions ``(A^u, B^u, A^v, B^v)`` with ``u_{c0+1} = lam u_{c0}``.

    Returns the solutions, the multiplier and the largest transfer
    eigenvalue modulus.  At a loop resonance the Bloch-reduced 4x4 node
    system is solved directly and may have a two-dimensional kernel.
    """
    c0 = cfg.window[0]
    if isinstance(bloch, bool):
        if is_resonant(cfg, k):
            raise SingularEliminationError("an explicit Bloch multiplier is needed at a loop resonance")
        tm = transfer_matrix(cfg, c0, k)
        w, V = _sorted_eigs(tm.matrix)
        unit = np.flatnonzero(np.abs(np.abs(w) - 1) <= UNIT_TOL)
        if not len(unit):
            raise NotInBandError(f"no unit-modulus transfer eigenvalue at k={k!r} (|lambda|={np.abs(w)})")
        v = V[:, unit[0]]
        return [np.concatenate([v, tm.loop @ v])], complex(w[unit[0]]), float(np.abs(w).max())
    lam = complex(bloch)
    if abs(abs(lam) - 1) > UNIT_TOL:
        raise InvalidArgumentError(f"Bloch multiplier must have unit modulus, got {lam}")
    if is_resonant(cfg, k):
        N = assemble_node_system(cfg, c0, k)
        M = N[:, :4].copy()
        M[:, :2] += lam * N[:, 4:]
        _, s, Vh = np.linalg.svd(M)
        null = s <= UNIT_TOL * max(1.0, s[0])
        if not null.any():
            raise NotInBandError(f"multiplier {lam} is not admissible at resonant k={k!r}")
        return [row.conj() for row in Vh[null]], lam, 1.0
    # null vector of T - lam rather than an eigenvector: stable at band edges,
    # where T is defective and eig splits the double eigenvalue by ~sqrt(eps)
    tm = transfer_matrix(cfg, c0, k)
    _, s, Vh = np.linalg.svd(tm.matrix - lam * np.eye(2))
    if s[-1] > 1e-6 * max(1.0, s[0]):
        raise NotInBandError(f"{lam} is not a transfer eigenvalue at k={k!r} (eigenvalues {tm.eigenvalues()})")
    v = Vh[-1].conj()
    return [np.concatenate([v, tm.loop @ v])], lam, 1.0


def _bloch_coefficients(cfg: ChainConfig, x0: np.ndarray, lam: complex) -> dict:
    """Amplitudes from the first-cell solution by the exact Bloch recurrence.

    With a constant loop phase gap, cell ``c`` solves the first cell's
    equations after the gauge changes ``u -> e^{-i t_c} u`` on the outgoing
    chain edge and ``v -> e^{-i s_c} v`` on the loop.
    """
    cells = list(cfg.cells)
    x0 = np.asarray(x0, dtype=complex) / np.linalg.norm(x0)
    mult = _gauge_multipliers(cfg, lam)
    gauge = _loop_gauge(cfg)
    coeffs = {}
    scale = 1.0 + 0j
    for i in cells:
        coeffs[(i, "u")] = EdgeCoefficients(*(scale * x0[:2]))
        coeffs[(i, "v")] = EdgeCoefficients(*(scale * gauge[i] * x0[2:]))
        scale = scale * mult[i]
    coeffs[(cells[-1] + 1, "u")] = EdgeCoefficients(*(scale * x0[:2]))
    return coeffs


def build_candidate(
    cfg: ChainConfig,
    k: float,
    seed: EdgeCoefficients | tuple[complex, complex] = EdgeCoefficients(1.0, 0.0),
    bloch: complex | bool | None = None,
) -> EigenCandidate:
    """Propagate amplitudes across the window.

    Without ``bloch`` the chain amplitudes start from ``seed`` on the first
    chain edge and are pushed through the transfer matrices (per-node
    least-squares solves at loop resonances).  With ``bloch=True`` a
    unit-modulus eigenvector of the first cell's transfer matrix is used;
    a complex ``bloch`` selects the eigenvalue closest to it.  Bloch
    amplitudes are set by the exact recurrence
    ``(A_{i+1}, B_{i+1}) = lambda_i (A_i, B_i)``.
    """
    if not k > 0:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    cells = list(cfg.cells)
    coeffs: dict[tuple[int, str], EdgeCoefficients] = {}
    lam = None
    growth = float("nan")
    if bloch is not None and bloch is not False:
        if not cfg.is_z_invariant():
            raise InvalidArgumentError("Bloch candidates need a Z-invariant configuration")
        seeds, lam, growth = _bloch_seeds(cfg, k, bloch)
        coeffs = _bloch_coefficients(cfg, seeds[0], lam)
    else:
        c = np.asarray(seed, dtype=complex)
        resonant = is_resonant(cfg, k)
        if not resonant:
            growth = float(np.abs(transfer_matrix(cfg, cells[0], k).eigenvalues()).max())
        for i in cells:
            if resonant:
                N = assemble_node_system(cfg, i, k)
                y, *_ = np.linalg.lstsq(N[:, 2:], -N[:, :2] @ c, rcond=None)
                loop, nxt = y[:2], y[2:]
            else:
                tm = transfer_matrix(cfg, i, k)
                loop, nxt = tm.loop @ c, tm.matrix @ c
            coeffs[(i, "u")] = EdgeCoefficients(*c)
            coeffs[(i, "v")] = EdgeCoefficients(*loop)
            c = nxt
        coeffs[(cells[-1] + 1, "u")] = EdgeCoefficients(*c)
    residual = candidate_residual(cfg, k, coeffs)
    if bloch is None and is_resonant(cfg, k) and residual > 1e-10:
        raise SingularEliminationError(
            f"seed is incompatible with the loop resonance at k={k!r} (residual {residual:.3e})"
        )
    return EigenCandidate(float(k), coeffs, residual, cfg, lam, growth)


# --------------------------------------------------------------------------
# dense oracle


def stacked_window_system(cfg: ChainConfig, k: float) -> np.ndarray:
    """All node systems of the window stacked on the :func:`candidate_vector` layout."""
    n = len(cfg.cells)
    S = np.zeros((4 * n, 4 * n + 2), dtype=complex)
    for p, c in enumerate(cfg.cells):
        S[4 * p:4 * p + 4, 4 * p:4 * p + 6] = assemble_node_system(cfg, c, k)
    return S


def _backward_vector(cfg: ChainConfig, k: float, seed) -> np.ndarray:
    """Amplitudes obtained by eliminating node by node from the right end."""
    cells = cfg.cells
    out = np.zeros(4 * len(cells) + 2, dtype=complex)
    out[-2:] = seed
    for p in range(len(cells) - 1, -1, -1):
        N = assemble_node_system(cfg, cells[p], k)
        out[4 * p:4 * p + 4] = np.linalg.solve(N[:, :4], -N[:, 4:] @ out[4 * p + 4:4 * p + 6])
        out /= np.abs(out).max()
    return out


def transfer_solution_space(cfg: ChainConfig, k: float) -> np.ndarray:
    """Two window solutions: one propagated from the left end, one from the right.

    Propagating both columns in the same direction loses the decaying
    solution in a spectral gap, so the second column runs the other way.
    """
    left = build_candidate(cfg, k, (1.0, 0.0)).coefficient_vector()
    a, b = left[-2:]
    # an end value orthogonal to the left column's keeps the pair independent
    right = _backward_vector(cfg, k, (-np.conj(b), np.conj(a)))
    return np.column_stack([left / np.abs(left).max(), right])


# --------------------------------------------------------------------------
# closed-form reductions (unit lengths)


def _unit_lengths(cfg: ChainConfig):
    if cfg.l_u != 1.0 or cfg.l_v != 1.0:
        raise UnsupportedReductionError("the closed-form reductions assume l_u = l_v = 1")


def _cell_scale(cand: EigenCandidate, i: int) -> float:
    return max(1.0, float(np.abs(cand.node_vector(i)).max()))


def general_alpha_identity_defects(cfg: ChainConfig, cand: EigenCandidate) -> dict[str, float]:
    """Defects of the in/out amplitude relations for ``delta = 0``.

    With ``A_out = A^v e^{i a2} + A^u_i`` and
    ``A_in = A^v e^{i a1} + A^u_{i+1} e^{i a3}`` (same for B) the node
    equations give ``A_in = A_out e^{ik}``, ``B_in = B_out e^{-ik}``, and
    from these the displayed expressions for ``A^u_i``, ``B^u_i``.
    Defects are scaled by the largest amplitude of the cell when it exceeds 1.
    """
    _unit_lengths(cfg)
    k = cand.k
    e = np.exp
    out: dict[str, float] = {}

    def put(name, val):
        out[name] = max(out.get(name, 0.0), float(val))

    for i in cfg.cells:
        p = cfg.params(i)
        if p.delta != 0.0:
            raise UnsupportedReductionError(f"cell {i}: the in/out reduction holds for delta = 0 only")
        a1, a2, a3 = p.alphas
        al = a2 - a1
        Au, Bu, Av, Bv, An, Bn = cand.node_vector(i)
        s = _cell_scale(cand, i)
        A_out = Av * e(1j * a2) + Au
        B_out = Bv * e(1j * a2) + Bu
        A_in = Av * e(1j * a1) + An * e(1j * a3)
        B_in = Bv * e(1j * a1) + Bn * e(1j * a3)
        put("A_in", abs(A_in - A_out * e(1j * k)) / s)
        put("B_in", abs(B_in - B_out * e(-1j * k)) / s)
        put("A_step", abs(Au - An * e(1j * (a3 + al)) - A_out * (1 - e(1j * (k + al)))) / s)
        put("B_step", abs(Bu - Bn * e(1j * (a3 + al)) - B_out * (1 - e(1j * (al - k)))) / s)
        put("trace_sum", abs(
            Au * (e(-1j * al) + e(1j * k)) + Bu * (e(-1j * al) + e(-1j * k)) - (A_out + B_out) * e(-1j * al)
        ) / s)
        put("trace_next", abs(Au * e(1j * k) + Bu * e(-1j * k) - e(1j * a3) * (An + Bn)) / s)
        put("A_closed", abs(
            2 * Au * (e(2j * k) - 1)
            - (A_out * (e(2j * k) + e(1j * (k + al)) - 2) + B_out * (e(-1j * (k - al)) - 1))
        ) / s)
        put("B_closed", abs(
            2 * Bu * (1 - e(-2j * k))
            - (B_out * (2 - e(-2j * k) - e(-1j * (k - al))) + A_out * (1 - e(1j * (k + al))))
        ) / s)
    return out


def general_alpha_reduction_check(cfg: ChainConfig, cand: EigenCandidate) -> float:
    return max(general_alpha_identity_defects(cfg, cand).values())


def delta_zero_identity_defects(cand: EigenCandidate) -> dict[str, float]:
    """Defects of the ``delta = alpha = 0`` relations between ``A^u_i, B^u_i`` and ``A^(1), B^(1)``."""
    cfg = cand.config
    _unit_lengths(cfg)
    k = cand.k
    e = np.exp
    out: dict[str, float] = {}
    for i in cfg.cells:
        p = cfg.params(i)
        if p.delta != 0.0 or any(a != 0.0 for a in p.alphas):
            raise UnsupportedReductionError(f"cell {i}: these relations need delta = alpha = 0")
        Au, Bu, Av, Bv, An, Bn = cand.node_vector(i)
        s = _cell_scale(cand, i)
        A1, B1 = Av + Au, Bv + Bu
        A0, B0 = Av + An, Bv + Bn
        vals = {
            "A0_A1": abs(A0 - A1 * e(1j * k)),
            "B0_B1": abs(B0 - B1 * e(-1j * k)),
            "A_step": abs(Au - An - A1 * (1 - e(1j * k))),
            "B_step": abs(Bu - Bn - B1 * (1 - e(-1j * k))),
            "A_closed": abs(2 * Au * (1 + e(1j * k)) - (A1 * (2 + e(1j * k)) - B1 * e(-1j * k))),
            "B_closed": abs(2 * Bu * (1 + e(1j * k)) - (B1 * (1 + 2 * e(1j * k)) - A1 * e(2j * k))),
        }
        for name, v in vals.items():
            out[name] = max(out.get(name, 0.0), float(v) / s)
    return out


def a1_b1_cell_spread(cand: EigenCandidate) -> float:
    """Largest change of ``A^(1) = A^v_i + A^u_i`` or ``B^(1)`` across the window."""
    cells = list(cand.config.cells)
    A1 = np.array([cand.coeffs[(i, "v")].A + cand.coeffs[(i, "u")].A for i in cells])
    B1 = np.array([cand.coeffs[(i, "v")].B + cand.coeffs[(i, "u")].B for i in cells])
    return float(max(np.abs(A1 - A1[0]).max(), np.abs(B1 - B1[0]).max()))


# --------------------------------------------------------------------------
# closed m-cell ring


class ClosedRoot(NamedTuple):
    k: float
    n: int
    residual: float


def _ring_twist(ring: ChainConfig) -> float:
    """Mean chain-edge phase minus the first cell's; zero for constant configurations."""
    a3 = np.array([ring.params(c).alphas[2] for c in ring.cells])
    return float(a3.mean() - a3[0])


def _ring_transfer(ring: ChainConfig, k: float) -> np.ndarray:
    return np.exp(-1j * _ring_twist(ring)) * transfer_matrix(ring, 0, k).matrix


def _secular(ring: ChainConfig, k: float, lam: complex) -> float:
    if is_resonant(ring, k):
        return np.inf
    T = _ring_transfer(ring, k)
    return float(abs(lam * lam - np.trace(T) * lam + np.linalg.det(T)))


def _smallest_sv(ring: ChainConfig, k: float, lam: complex) -> float:
    if is_resonant(ring, k):
        return np.inf
    return float(np.linalg.svd(_ring_transfer(ring, k) - lam * np.eye(2), compute_uv=False)[-1])


def _certify(ring: ChainConfig, k: float, lam: complex, m: int) -> float:
    """Smallest residual over periodic Bloch candidates: node defects and ring closure."""
    mu = lam * np.exp(1j * _ring_twist(ring))
    try:
        seeds, mu, _ = _bloch_seeds(ring, k, mu)
    except NotInBandError:
        return np.inf
    best = np.inf
    for x0 in seeds:
        coeffs = _bloch_coefficients(ring, x0, mu)
        first = np.array(coeffs[(0, "u")])
        last = np.array(coeffs[(m, "u")])
        closure = float(np.linalg.norm(last - first))
        best = min(best, max(candidate_residual(ring, k, coeffs), closure))
    return best


def _scan_sector(ring: ChainConfig, m: int, n: int, k_max: float, samples: int, tol: float) -> list[ClosedRoot]:
    lam = np.exp(2j * np.pi * n / m)
    h = k_max / samples
    ks = np.append((np.arange(samples) + 0.5) * h, k_max)
    f = np.array([_secular(ring, k, lam) for k in ks])
    roots: list[float] = []
    # |det| vanishes quadratically where T = lam I; the smallest singular value stays linear
    fun = lambda k: _smallest_sv(ring, k, lam)  # noqa: E731
    # j = 0 is skipped: T(k) -> 1 as k -> 0, so the n = 0 sector always decreases there
    for j in range(1, len(ks)):
        left = f[j - 1]
        right = f[j + 1] if j + 1 < len(ks) else np.inf
        if not (f[j] < left and f[j] <= right) or not np.isfinite(f[j]):
            continue
        hi = ks[j + 1] if j + 1 < len(ks) else ks[j]
        res = scipy.optimize.minimize_scalar(fun, bounds=(ks[j - 1], hi), method="bounded",
                                             options={"xatol": 1e-15, "maxiter": 200})
        x = float(res.x)
        # fminbound stops at ~sqrt(eps) relative accuracy; polish with golden section
        w = 1e-6 * max(1.0, x)
        if fun(x) < min(fun(x - w), fun(x + w)):
            x = float(scipy.optimize.minimize_scalar(
                fun, bracket=(x - w, x, x + w), method="golden", tol=1e-15).x)
        if 0 < x <= k_max and _secular(ring, x, lam) < tol:
            roots.append(x)
    # loop resonances: T is undefined there, test the Bloch-reduced node system instead
    r = 1
    while r * np.pi / ring.l_v <= k_max * (1 + 1e-14):
        kr = r * np.pi / ring.l_v
        try:
            _bloch_seeds(ring, kr, lam * np.exp(1j * _ring_twist(ring)))
            roots.append(kr)
        except NotInBandError:
            pass
        r += 1
    roots.sort()
    merged: list[float] = []
    for x in roots:
        if not merged or x - merged[-1] > 1e-9:
            merged.append(x)
    out = []
    for x in merged:
        res = _certify(ring, x, lam, m)
        if res < tol:
            out.append(ClosedRoot(x, n, res))
        else:
            log.warning("root k=%.17g (n=%d) failed certification with residual %.3e", x, n, res)
    return out


def closed_chain_spectrum(
    cfg: ChainConfig, m: int, k_max: float, samples: int = 2000, tol: float = 1e-8
) -> list[ClosedRoot]:
    """Eigenvalues ``k**2`` of the ring of ``m`` cells (cells ``0..m-1``, edge ``u_m = u_0``).

    For each Bloch index ``n`` the secular function
    ``|det(T(k) - e^{2 pi i n/m})|`` is scanned on ``samples`` points and
    every local minimum refined by golden-section search.  Loop resonances
    are tested directly on the node system.  Each root is certified on
    the periodic candidate; if two accepted roots of one sector fall within
    a grid step, the scan is repeated at double resolution (up to 4 times).
    """
    if m < 2:
        raise InvalidArgumentError("a closed chain needs m >= 2 cells")
    if not k_max > 0:
        raise InvalidArgumentError("k_max must be positive")
    ring = cfg.with_window((0, m - 1))
    if not ring.is_z_invariant():
        raise InvalidArgumentError("the ring configuration is not Z-invariant")

    def sector(n):
        s = samples
        for attempt in range(5):
            found = _scan_sector(ring, m, n, k_max, s, tol)
            ks = [r.k for r in found]
            if all(b - a >= k_max / s for a, b in zip(ks, ks[1:])):
                return found
            if attempt < 4:
                s *= 2
        log.warning("sector n=%d: roots closer than the grid step after 4 refinements", n)
        return found

    with ThreadPoolExecutor(_threads()) as ex:
        parts = list(ex.map(sector, range(m)))
    return sorted((r for part in parts for r in part), key=lambda r: (r.k, r.n))


# --------------------------------------------------------------------------
# sampling


class SampleRow(NamedTuple):
    cell: int
    kind: str
    x: float
    re: float
    im: float
    abs: float


def _edge_order(cand: EigenCandidate):
    return sorted(cand.coeffs, key=lambda key: (key[0], key[1]))


def sample_eigenfunction(cand: EigenCandidate, points_per_edge: int = 33) -> list[SampleRow]:
    """``Phi`` on a uniform grid (endpoints included) of every edge in the window."""
    if points_per_edge < 2:
        raise InvalidArgumentError("points_per_edge must be at least 2")
    rows = []
    for cell, kind in _edge_order(cand):
        A, B = cand.coeffs[(cell, kind)]
        length = cand.config.l_u if kind == "u" else cand.config.l_v
        xs = np.linspace(0.0, length, points_per_edge)
        vals = A * np.exp(1j * cand.k * xs) + B * np.exp(-1j * cand.k * xs)
        rows += [SampleRow(cell, kind, float(x), float(v.real), float(v.imag), float(abs(v)))
                 for x, v in zip(xs, vals)]
    return rows


def vertex_traces(cand: EigenCandidate, cell: int) -> np.ndarray:
    """``(Phi_i^u(l_u), Phi_i^v(0), Phi_i^v(l_v), Phi_{i+1}^u(0))``."""
    eu, ev = _phases(cand.config, cand.k)
    Au, Bu = cand.coeffs[(cell, "u")]
    Av, Bv = cand.coeffs[(cell, "v")]
    An, Bn = cand.coeffs[(cell + 1, "u")]
    return np.array([Au * eu + Bu / eu, Av + Bv, Av * ev + Bv / ev, An + Bn])


def vertex_modulus_jump(cand: EigenCandidate) -> float:
    worst = 0.0
    for c in cand.config.cells:
        m = np.abs(vertex_traces(cand, c))
        worst = max(worst, float(m.max() - m.min()))
    return worst


def modulus_jump_from_rows(rows, cells) -> float:
    """Vertex continuity of ``|Phi|`` read back from sampled rows."""
    ends: dict[tuple[int, str], tuple[float, float]] = {}
    for r in rows:
        key = (int(r.cell), r.kind)
        lo, hi = ends.get(key, (None, None))
        if lo is None or r.x < lo[0]:
            lo = (r.x, r.abs)
        if hi is None or r.x > hi[0]:
            hi = (r.x, r.abs)
        ends[key] = (lo, hi)
    worst = 0.0
    for c in cells:
        vals = [ends[(c, "u")][1][1], ends[(c, "v")][0][1], ends[(c, "v")][1][1], ends[(c + 1, "u")][0][1]]
        worst = max(worst, max(vals) - min(vals))
    return worst


__all__ = [
    "ChainConfig",
    "EdgeCoefficients",
    "EigenCandidate",
    "TransferMatrix",
    "BandScan",
    "ClosedRoot",
    "SampleRow",
    "assemble_node_system",
    "transfer_matrix",
    "band_structure",
    "build_candidate",
    "candidate_residual",
    "candidate_vector",
    "stacked_window_system",
    "transfer_solution_space",
    "general_alpha_identity_defects",
    "general_alpha_reduction_check",
    "delta_zero_identity_defects",
    "a1_b1_cell_spread",
    "closed_chain_spectrum",
    "sample_eigenfunction",
    "vertex_traces",
    "vertex_modulus_jump",
    "modulus_jump_from_rows",
    "is_resonant",
]
