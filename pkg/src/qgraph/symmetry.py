"""Local symmetries at a vertex and twisted Z-shifts of the loop chain.

The twisted shift acts on functions by moving every edge one cell to the
right and multiplying the moved function by a constant phase attached to
the edge it lands on::

    (V_1 Phi) on I_i^a = e^{-i theta_i^a} * (Phi on I_{i-1}^a)

Its trace on the chain node blocks maps node ``j`` to node ``j + 1`` through
``D_j = diag(e^{-i theta_{j+1}^u}, e^{-i theta_{j+1}^v}, e^{-i theta_{j+1}^v},
e^{-i theta_{j+2}^u})``.  The extension is invariant iff
``D_j U_j D_j^* = U_{j+1}`` for every ``j``.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from .exceptions import InvalidArgumentError, InvarianceObstruction, NotQuasiDeltaError
from .extensions import (
    CLUSTER_TOL,
    QuasiDeltaParams,
    build_quasi_delta_block,
    build_zeta,
    is_unitary,
    node_block,
    unitary_eig,
)

TWO_PI = 2 * np.pi

Window = tuple[int, int]

# (cell offset, kind) of the four slots of a chain node
NODE_SLOTS = ((0, "u"), (0, "v"), (0, "v"), (1, "u"))


def _wrap(a: float) -> float:
    return float(np.mod(a, TWO_PI))


@dataclass(frozen=True, eq=False)
class ThetaAssignment:
    """Phases ``theta_i^a`` keyed by ``(cell, kind)``, reduced to ``[0, 2 pi)``.

    Missing keys mean zero phase.
    """

    theta: Mapping[tuple[int, str], float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, val in dict(self.theta).items():
            if not isinstance(val, (int, float, np.floating, np.integer)) or isinstance(val, bool):
                raise InvalidArgumentError(
                    f"theta{key} must be a single real number (constant on the edge), got {val!r}"
                )
            if not np.isfinite(val):
                raise InvalidArgumentError(f"theta{key} is not finite")
            clean[(int(key[0]), str(key[1]))] = _wrap(val)
        object.__setattr__(self, "theta", clean)

    def angle(self, cell: int, kind: str) -> float:
        return self.theta.get((cell, kind), 0.0)

    def phase(self, cell: int, kind: str) -> complex:
        return np.exp(-1j * self.angle(cell, kind))

    def is_zero(self, tol: float = 1e-12) -> bool:
        return all(min(t, TWO_PI - t) <= tol for t in self.theta.values())

    def __eq__(self, other):
        if not isinstance(other, ThetaAssignment):
            return NotImplemented
        keys = set(self.theta) | set(other.theta)
        for key in keys:
            d = abs(self.angle(*key) - other.angle(*key))
            if min(d, TWO_PI - d) > 1e-12:
                return False
        return True

    __hash__ = None

    def to_dict(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {"u": {}, "v": {}}
        for (cell, kind), t in sorted(self.theta.items()):
            out.setdefault(kind, {})[str(cell)] = t
        return out


def _path_phase(theta: ThetaAssignment, cell: int, kind: str, k: int) -> complex:
    if k > 0:
        return np.exp(-1j * sum(theta.angle(cell - n, kind) for n in range(k)))
    if k < 0:
        return np.exp(1j * sum(theta.angle(cell + n, kind) for n in range(1, -k + 1)))
    return 1.0 + 0j


@dataclass(frozen=True, eq=False)
class TraceRepElement:
    """Trace of ``V_k`` on the node blocks of a chain window.

    Block ``j`` of the image is ``diag(phases(j)) @ block(j - k)``.  Blocks
    whose source lies outside the window are not defined and are reported
    through :meth:`valid`.
    """

    k: int
    theta: ThetaAssignment
    window: Window

    @property
    def cells(self) -> range:
        return range(self.window[0], self.window[1] + 1)

    def phases(self, j: int) -> np.ndarray:
        return np.array([_path_phase(self.theta, j + dc, kind, self.k) for dc, kind in NODE_SLOTS])

    def valid(self, j: int) -> bool:
        return self.window[0] <= j - self.k <= self.window[1]

    def matrix(self) -> np.ndarray:
        n = len(self.cells)
        M = np.zeros((4 * n, 4 * n), dtype=complex)
        for pos, j in enumerate(self.cells):
            if not self.valid(j):
                continue
            src = pos - self.k
            M[4 * pos:4 * pos + 4, 4 * src:4 * src + 4] = np.diag(self.phases(j))
        return M

    def apply(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return the image and a per-block validity mask."""
        x = np.asarray(x, dtype=complex)
        mask = np.array([self.valid(j) for j in self.cells])
        return self.matrix() @ x, mask


def build_trace_generator(theta: ThetaAssignment, window: Window) -> TraceRepElement:
    if window[1] - window[0] + 1 < 2:
        raise InvalidArgumentError("the trace generator needs a window of at least two cells")
    return TraceRepElement(1, theta, (int(window[0]), int(window[1])))


def shift_coefficients(
    coeffs: Mapping[tuple[int, str], tuple[complex, complex]], theta: ThetaAssignment, k: int = 1
) -> dict[tuple[int, str], tuple[complex, complex]]:
    """Plane-wave coefficients of ``V_k Phi``."""
    out = {}
    for (cell, kind), (A, B) in coeffs.items():
        target = cell + k
        p = _path_phase(theta, target, kind, k)
        out[(target, kind)] = (p * A, p * B)
    return out


# --------------------------------------------------------------------------
# local symmetries


def is_local_symmetry(v: Iterable[np.ndarray], U: np.ndarray, tol: float = 1e-10) -> bool:
    worst = 0.0
    for g in v:
        g = np.asarray(g, dtype=complex)
        if not is_unitary(g, tol):
            raise InvalidArgumentError("representation element is not unitary")
        worst = max(worst, np.linalg.norm(g @ U - U @ g, 2))
    return worst < tol


def preserves_line(W: np.ndarray, zeta: np.ndarray, tol: float = 1e-10) -> bool:
    w = W @ zeta
    return abs(abs(np.vdot(zeta, w)) - np.linalg.norm(w) * np.linalg.norm(zeta)) <= tol * np.linalg.norm(zeta) ** 2


def local_symmetry_group_dimension(params: QuasiDeltaParams) -> int:
    """Real dimension of ``U(d - 1)``, the largest local symmetry group."""
    return (params.degree - 1) ** 2


def zeta_adapted_basis(zeta: np.ndarray) -> np.ndarray:
    """Unitary whose first column is ``zeta / |zeta|``."""
    zeta = np.asarray(zeta, dtype=complex)
    first = zeta / np.linalg.norm(zeta)
    rest = scipy.linalg.null_space(first.conj()[None, :])
    return np.column_stack([first, rest])


def random_local_symmetry(params: QuasiDeltaParams, rng=None, zeta: np.ndarray | None = None) -> np.ndarray:
    """Random ``W = e^{i beta} (+) Q`` in a zeta-adapted orthonormal basis."""
    rng = np.random.default_rng(rng)
    zeta = build_zeta(params) if zeta is None else zeta
    d = len(zeta)
    B = zeta_adapted_basis(zeta)
    inner = np.zeros((d, d), dtype=complex)
    inner[0, 0] = np.exp(1j * rng.uniform(-np.pi, np.pi))
    if d > 1:
        inner[1:, 1:] = unitary_group.rvs(d - 1, random_state=rng) if d > 2 else \
            np.exp(1j * rng.uniform(-np.pi, np.pi))
    return B @ inner @ B.conj().T


def conjugate_quasi_delta(V: np.ndarray, params: QuasiDeltaParams, tol: float = 1e-10) -> QuasiDeltaParams:
    """Parameters of ``V^* U_{delta,zeta} V``, which is quasi-delta with ``zeta' ~ V^* zeta``.

    Raises :class:`NotQuasiDeltaError` if the entries of ``V^* zeta`` do not
    share one modulus.
    """
    V = np.asarray(V, dtype=complex)
    if not is_unitary(V, 1e-10):
        raise InvalidArgumentError("V must be unitary")
    z = V.conj().T @ build_zeta(params)
    mod = np.abs(z)
    if mod.max() - mod.min() > tol * mod.max():
        raise NotQuasiDeltaError(f"V^* zeta has entry moduli spread {mod.max() - mod.min():.3e}")
    z = z / z[0]
    out = QuasiDeltaParams(params.delta, tuple(np.angle(z[1:])))
    U = build_quasi_delta_block(params)
    err = np.linalg.norm(V.conj().T @ U @ V - build_quasi_delta_block(out), 2)
    if err >= 1e-10:
        raise NotQuasiDeltaError(f"conjugated block misses the quasi-delta form by {err:.3e}")
    return out


# --------------------------------------------------------------------------
# Z-invariance of chain extensions


def _node_matrices(chain_params: Mapping[int, QuasiDeltaParams], builder) -> dict[int, np.ndarray]:
    cells = sorted(chain_params)
    if cells != list(range(cells[0], cells[-1] + 1)):
        raise InvalidArgumentError("chain parameters must cover a contiguous cell range")
    for c in cells:
        if chain_params[c].degree != 4:
            raise InvalidArgumentError(f"cell {c}: chain nodes have degree 4")
    return {c: builder(chain_params[c]) for c in cells}


def _generator_block(theta: ThetaAssignment, j: int) -> np.ndarray:
    """``D_j``: trace of ``V_1`` from node ``j`` to node ``j + 1``."""
    return np.array([theta.phase(j + 1 + dc, kind) for dc, kind in NODE_SLOTS])


def z_invariance_residuals(
    chain_params: Mapping[int, QuasiDeltaParams],
    theta: ThetaAssignment,
    builder: Callable[[QuasiDeltaParams], np.ndarray] = node_block,
) -> dict[int, float]:
    """``|| D_j U_j D_j^* - U_{j+1} ||_2`` for every pair inside the window, keyed by ``j + 1``."""
    U = _node_matrices(chain_params, builder)
    cells = sorted(U)
    out = {}
    for j in cells[:-1]:
        D = _generator_block(theta, j)
        moved = D[:, None] * U[j] * D.conj()[None, :]
        out[j + 1] = float(np.linalg.norm(moved - U[j + 1], 2))
    return out


def check_z_invariance(
    chain_params: Mapping[int, QuasiDeltaParams],
    theta: ThetaAssignment,
    builder: Callable[[QuasiDeltaParams], np.ndarray] = node_block,
) -> float:
    res = z_invariance_residuals(chain_params, theta, builder)
    return max(res.values()) if res else 0.0


def _zeta_of(U: np.ndarray) -> np.ndarray:
    mu, Z = unitary_eig(U)
    i = int(np.argmax(np.abs(mu + 1)))
    z = Z[:, i]
    return z / z[0]


def solve_theta(
    chain_params: Mapping[int, QuasiDeltaParams],
    builder: Callable[[QuasiDeltaParams], np.ndarray] = node_block,
    tol: float = 1e-10,
) -> ThetaAssignment:
    """Phases making the twisted shift commute with the chain extension.

    Requires ``D_j zeta_j ~ zeta_{j+1}``.  Slot 0 fixes the proportionality
    constant, slots 1 and 2 (the two loop ends) must then demand the same
    ``theta_{j+1}^v``, and slot 3 gives ``theta_{j+2}^u``.  The gauge
    ``theta^u = 0`` on the first chain edge after the window start is used.

    Raises :class:`InvarianceObstruction` naming the first offending vertex.
    """
    U = _node_matrices(chain_params, builder)
    cells = sorted(U)
    for j in cells[:-1]:
        a, b = chain_params[j].delta, chain_params[j + 1].delta
        if abs(a - b) > tol:
            raise InvarianceObstruction(j + 1, "delta", f"delta changes from {a:.6g} to {b:.6g}")
    zetas = {c: _zeta_of(U[c]) for c in cells}
    theta: dict[tuple[int, str], float] = {}
    if len(cells) > 1:
        theta[(cells[0] + 1, "u")] = 0.0
    for j in cells[:-1]:
        r = np.angle(zetas[j + 1]) - np.angle(zetas[j])
        gap = np.angle(np.exp(1j * (r[1] - r[2])))
        if abs(gap) > tol:
            raise InvarianceObstruction(
                j + 1, "loop-phase", f"loop ends demand theta^v differing by {gap:.6g}"
            )
        base = theta[(j + 1, "u")]
        theta[(j + 1, "v")] = base - r[1]
        theta[(j + 2, "u")] = base - r[3]
    return ThetaAssignment(theta)


def theta_grid_min_residual(
    chain_params: Mapping[int, QuasiDeltaParams],
    vertex: int,
    resolution: int = 64,
    builder: Callable[[QuasiDeltaParams], np.ndarray] = node_block,
) -> float:
    """Smallest ``|| D U_{vertex-1} D^* - U_vertex ||_2`` over a phase grid.

    Scans the three phases entering ``D`` (chain edge in, loop, chain edge
    out) on ``resolution`` points each.
    """
    Ua = builder(chain_params[vertex - 1])
    Ub = builder(chain_params[vertex])
    grid = np.arange(resolution) * TWO_PI / resolution
    t1, t2 = np.meshgrid(grid, grid, indexing="ij")
    t1 = t1.ravel()
    t2 = t2.ravel()
    best = np.inf
    for t0 in grid:
        ang = np.stack([np.full_like(t1, t0), t1, t1, t2], axis=1)
        D = np.exp(-1j * ang)
        moved = D[:, :, None] * Ua[None] * D.conj()[:, None, :]
        best = min(best, float(np.linalg.norm(moved - Ub[None], ord=2, axis=(1, 2)).min()))
    return best


def cell_params_of(params_of: Callable[[int], QuasiDeltaParams], window: Window) -> dict[int, QuasiDeltaParams]:
    return {c: params_of(c) for c in range(window[0], window[1] + 1)}


__all__ = [
    "ThetaAssignment",
    "TraceRepElement",
    "build_trace_generator",
    "shift_coefficients",
    "is_local_symmetry",
    "preserves_line",
    "local_symmetry_group_dimension",
    "random_local_symmetry",
    "zeta_adapted_basis",
    "conjugate_quasi_delta",
    "z_invariance_residuals",
    "check_z_invariance",
    "solve_theta",
    "theta_grid_min_residual",
    "CLUSTER_TOL",
]
