"""Vertex unitaries and the boundary equation ``phi - i phidot = U (phi + i phidot)``.

The quasi-delta block with parameters ``(delta, alpha_1, ..., alpha_{d-1})`` is

    U = e^{i delta} P - (1 - P),   P = zeta zeta^* / |zeta|^2,
    zeta = (1, e^{i alpha_1}, ..., e^{i alpha_{d-1}}).

Its eigenvalues are ``e^{i delta}`` once and ``-1`` with multiplicity
``d - 1``.  On the chain, the explicit node matching equations use the
complex-conjugate block (see :func:`node_block`).
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import IllConditionedError, InvalidArgumentError
from .graph import MetricGraph, TraceData

#: Eigenvalues closer than this to -1 are treated as exactly -1.
CLUSTER_TOL = 1e-9
#: Default margin for certifying the spectral gap at -1.
GAP_EPS = 1e-6


@dataclass(frozen=True)
class QuasiDeltaParams:
    delta: float
    alphas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not (-np.pi < self.delta < np.pi):
            raise InvalidArgumentError(
                f"delta must lie in (-pi, pi), got {self.delta}; "
                "delta = pi is the Dirichlet block U = -1, build it directly"
            )
        if not all(np.isfinite(self.alphas)):
            raise InvalidArgumentError("alphas must be finite")

    @property
    def degree(self) -> int:
        return len(self.alphas) + 1


def build_zeta(params: QuasiDeltaParams) -> np.ndarray:
    return np.exp(1j * np.concatenate([[0.0], params.alphas]))


def line_projector(zeta: np.ndarray) -> np.ndarray:
    zeta = np.asarray(zeta, dtype=complex)
    return np.outer(zeta, zeta.conj()) / np.vdot(zeta, zeta).real


def build_quasi_delta_block(params: QuasiDeltaParams) -> np.ndarray:
    P = line_projector(build_zeta(params))
    eye = np.eye(params.degree)
    return np.exp(1j * params.delta) * P - (eye - P)


def node_block(params: QuasiDeltaParams) -> np.ndarray:
    """Quasi-delta block in the convention of the chain node equations.

    With ``phi_0 = e^{i alpha_j} phi_j`` and
    ``d tan(delta/2) phi_0 = <(1, e^{-i alpha}), phidot>`` the boundary
    equation needs ``zeta = (1, e^{-i alpha_1}, ...)`` and the eigenvalue
    ``e^{-i delta}``, i.e. the complex conjugate of
    :func:`build_quasi_delta_block`.
    """
    return build_quasi_delta_block(params).conj()


def is_unitary(U: np.ndarray, tol: float = 1e-12) -> bool:
    U = np.asarray(U)
    return U.ndim == 2 and U.shape[0] == U.shape[1] and \
        np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2) < tol


def unitary_eig(U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and an orthonormal eigenbasis of a unitary matrix.

    Uses the complex Schur form, which is diagonal for normal matrices, so
    degenerate eigenspaces come out orthonormal.
    """
    T, Z = scipy.linalg.schur(np.asarray(U, dtype=complex), output="complex")
    return np.diag(T).copy(), Z


def minus_one_projector(U: np.ndarray, tol: float = CLUSTER_TOL) -> np.ndarray:
    mu, Z = unitary_eig(U)
    Zk = Z[:, np.abs(mu + 1) <= tol]
    return Zk @ Zk.conj().T


def partial_cayley(U: np.ndarray, tol: float = CLUSTER_TOL) -> np.ndarray:
    """``A_U = i P_perp (1 - U) / (1 + U)`` evaluated spectrally.

    Eigenvalues within ``tol`` of -1 span the kernel of ``A_U``.  An
    eigenvalue in ``(tol, 10 tol]`` cannot be classified either way and
    raises :class:`IllConditionedError`.
    """
    mu, Z = unitary_eig(U)
    dist = np.abs(mu + 1)
    ambiguous = (dist > tol) & (dist <= 10 * tol)
    if ambiguous.any():
        raise IllConditionedError(
            f"eigenvalue at distance {dist[ambiguous].min():.3e} from -1 (cluster tol {tol:g})"
        )
    keep = dist > tol
    a = np.zeros(len(mu), dtype=complex)
    a[keep] = 1j * (1 - mu[keep]) / (1 + mu[keep])
    # the values are real for unitary U; drop rounding noise
    A = (Z * a.real) @ Z.conj().T
    return (A + A.conj().T) / 2


@dataclass(frozen=True, eq=False)
class BlockUnitary:
    """Block-diagonal unitary, one block per vertex in graph order."""

    blocks: tuple[np.ndarray, ...]
    vertex_ids: tuple[int, ...]

    def __post_init__(self):
        blocks = []
        for b in self.blocks:
            b = np.array(b, dtype=complex)
            b.setflags(write=False)
            blocks.append(b)
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "vertex_ids", tuple(self.vertex_ids))
        if len(self.blocks) != len(self.vertex_ids):
            raise InvalidArgumentError("one block per vertex id required")

    @property
    def dimension(self) -> int:
        return sum(b.shape[0] for b in self.blocks)

    def block(self, vertex_id: int) -> np.ndarray:
        return self.blocks[self.vertex_ids.index(vertex_id)]

    def dense(self) -> np.ndarray:
        return scipy.linalg.block_diag(*self.blocks)

    def apply(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(len(x), dtype=complex)
        o = 0
        for b in self.blocks:
            d = b.shape[0]
            out[o:o + d] = b @ x[o:o + d]
            o += d
        return out


def build_block_unitary(
    graph: MetricGraph,
    params: Mapping[int, QuasiDeltaParams] | QuasiDeltaParams,
    builder=build_quasi_delta_block,
) -> BlockUnitary:
    """Assemble one quasi-delta block per vertex of ``graph``."""
    blocks = []
    for v in graph.vertices:
        p = params if isinstance(params, QuasiDeltaParams) else params[v.id]
        if p.degree != v.degree:
            raise InvalidArgumentError(
                f"vertex {v.id} has degree {v.degree} but parameters for degree {p.degree}"
            )
        blocks.append(builder(p))
    return BlockUnitary(tuple(blocks), tuple(v.id for v in graph.vertices))


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    gap: bool
    margin: float
    eps: float

    def distinct(self, tol: float = 1e-9) -> np.ndarray:
        out: list[complex] = []
        for z in sorted(self.eigenvalues, key=lambda z: (np.angle(z), abs(z))):
            if not any(abs(z - w) <= tol for w in out):
                out.append(z)
        return np.array(out)


def blockwise_spectrum(
    blocks: BlockUnitary | Sequence[np.ndarray], eps: float = GAP_EPS, tol: float = CLUSTER_TOL
) -> SpectrumReport:
    """Union of block spectra and the gap-at-minus-one certificate.

    ``margin`` is the smallest distance to -1 among eigenvalues not equal
    to -1 (``inf`` when every eigenvalue is -1); the gap holds when the
    margin exceeds ``eps``.
    """
    mats = blocks.blocks if isinstance(blocks, BlockUnitary) else blocks
    ev = np.concatenate([unitary_eig(b)[0] for b in mats]) if len(mats) else np.zeros(0, complex)
    dist = np.abs(ev + 1)
    rest = dist[dist > tol]
    margin = float(rest.min()) if len(rest) else float("inf")
    return SpectrumReport(ev, margin > eps, margin, eps)


def _as_block_unitary_matrix(U) -> BlockUnitary:
    if isinstance(U, BlockUnitary):
        return U
    U = np.asarray(U, dtype=complex)
    return BlockUnitary((U,), (0,))


def boundary_residual(U: BlockUnitary | np.ndarray, data: TraceData) -> float:
    """``|| (phi - i phidot) - U (phi + i phidot) ||`` over the window."""
    U = _as_block_unitary_matrix(U)
    phi = data.phi.data
    dphi = data.phidot.data
    if len(phi) != U.dimension or len(dphi) != U.dimension:
        raise InvalidArgumentError(
            f"boundary data of size {len(phi)} does not match unitary of size {U.dimension}"
        )
    if isinstance(U, BlockUnitary) and len(U.blocks) > 1:
        sizes = tuple(np.concatenate([[0], np.cumsum([b.shape[0] for b in U.blocks])]).astype(int))
        if sizes != tuple(data.phi.offsets):
            raise InvalidArgumentError("block layout of U does not match the boundary data")
    return float(np.linalg.norm((phi - 1j * dphi) - U.apply(phi + 1j * dphi)))


def kernel_projection_condition(U: np.ndarray, phi_block: np.ndarray, tol: float = CLUSTER_TOL) -> float:
    """``|| P phi ||`` with ``P`` the projector onto the -1 eigenspace of ``U``."""
    return float(np.linalg.norm(minus_one_projector(U, tol) @ np.asarray(phi_block, dtype=complex)))


def boundary_system(U: np.ndarray) -> np.ndarray:
    """Rows of the boundary equation acting on ``(phi, phidot)``."""
    U = np.asarray(U, dtype=complex)
    eye = np.eye(U.shape[0])
    return np.hstack([eye - U, -1j * (eye + U)])


def projected_system(U: np.ndarray, tol: float = CLUSTER_TOL) -> np.ndarray:
    """``P phi = 0`` stacked with the Robin relation ``P_perp phidot = -A_U phi``."""
    P = minus_one_projector(U, tol)
    A = partial_cayley(U, tol)
    d = U.shape[0]
    return np.vstack([
        np.hstack([P, np.zeros((d, d))]),
        np.hstack([A, np.eye(d) - P]),
    ])
