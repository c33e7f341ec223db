from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from oracles import (
    cayley_by_pseudoinverse,
    hausdorff,
    matched_distance,
    node_residual_via_boundary_equation,
    quasi_delta_by_eigenbasis,
    random_unitary,
)
from qgraph.chain import ChainConfig, build_candidate
from qgraph.exceptions import IllConditionedError, InvalidArgumentError
from qgraph.extensions import (
    BlockUnitary,
    QuasiDeltaParams,
    blockwise_spectrum,
    boundary_residual,
    boundary_system,
    build_block_unitary,
    build_quasi_delta_block,
    build_zeta,
    is_unitary,
    kernel_projection_condition,
    line_projector,
    node_block,
    partial_cayley,
    projected_system,
)
from qgraph.graph import BoundaryVector, TraceData, build_chain_graph, trace_of_plane_wave

angles = st.floats(-np.pi, np.pi, allow_nan=False)
deltas = st.floats(-np.pi + 1e-3, np.pi - 1e-3, allow_nan=False)


def test_zeta_examples():
    assert np.allclose(build_zeta(QuasiDeltaParams(0, (0, 0, 0))), [1, 1, 1, 1])
    assert np.allclose(build_zeta(QuasiDeltaParams(0, (np.pi, 0, 0))), [1, -1, 1, 1])
    assert np.allclose(build_zeta(QuasiDeltaParams(0, (np.pi / 2, np.pi / 2))), [1, 1j, 1j])


def test_block_examples():
    U = build_quasi_delta_block(QuasiDeltaParams(0.0, (0, 0, 0)))
    assert np.allclose(U, np.ones((4, 4)) / 2 - np.eye(4), atol=1e-15)
    U = build_quasi_delta_block(QuasiDeltaParams(0.0, (0.0,)))
    assert np.allclose(U, [[0, 1], [1, 0]], atol=1e-15)
    U = build_quasi_delta_block(QuasiDeltaParams(np.pi / 2, (0, 0, 0)))
    assert matched_distance(np.linalg.eigvals(U), [1j, -1, -1, -1]) < 1e-12


def test_delta_range():
    with pytest.raises(InvalidArgumentError):
        QuasiDeltaParams(np.pi, (0.0,))
    with pytest.raises(InvalidArgumentError):
        QuasiDeltaParams(0.0, (np.nan,))


@settings(max_examples=60, deadline=None)
@given(d=st.integers(2, 8), delta=deltas, data=st.data())
def test_block_matches_eigenbasis_construction(d, delta, data):
    alphas = data.draw(st.lists(angles, min_size=d - 1, max_size=d - 1))
    p = QuasiDeltaParams(delta, tuple(alphas))
    U = build_quasi_delta_block(p)
    assert is_unitary(U, 1e-12)
    assert np.linalg.norm(U - quasi_delta_by_eigenbasis(delta, alphas)) < 1e-12


def test_node_block_is_conjugate_family():
    p = QuasiDeltaParams(0.4, (0.3, -1.0, 2.0))
    V = node_block(p)
    assert np.allclose(V, build_quasi_delta_block(QuasiDeltaParams(-0.4, (-0.3, 1.0, -2.0))), atol=1e-15)


def test_cayley_examples():
    for d in (1, 3, 5):
        assert np.allclose(partial_cayley(np.eye(d)), 0)
    d = 0.9
    A = partial_cayley(np.diag([np.exp(1j * d), -1]))
    assert np.allclose(A, np.diag([np.tan(d / 2), 0]), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(delta=st.floats(-np.pi + 0.1, np.pi - 0.1), a=st.lists(angles, min_size=3, max_size=3))
def test_cayley_identity(delta, a):
    p = QuasiDeltaParams(delta, tuple(a))
    U = build_quasi_delta_block(p)
    A = partial_cayley(U)
    P = line_projector(build_zeta(p))
    assert np.linalg.norm(A - np.tan(delta / 2) * P, 2) < 1e-12
    assert np.linalg.norm(A - A.conj().T) < 1e-12
    assert np.linalg.norm(A - cayley_by_pseudoinverse(U), 2) < 1e-10


def test_cayley_ill_conditioned():
    U = np.diag([np.exp(1j * (np.pi - 5e-9)), 1.0])
    with pytest.raises(IllConditionedError):
        partial_cayley(U)


def test_spectrum_repeated_blocks():
    U = build_quasi_delta_block(QuasiDeltaParams(0.0, (0, 0, 0)))
    rep = blockwise_spectrum([U] * 5)
    assert matched_distance(rep.distinct(), [-1, 1]) < 1e-12
    assert rep.margin == pytest.approx(2)
    assert rep.gap


def test_spectrum_margin_shrinks():
    margins = []
    for N in (5, 50, 500):
        blocks = [np.diag([np.exp(1j * (np.pi - 1 / n))]) for n in range(1, N + 1)]
        rep = blockwise_spectrum(blocks)
        assert rep.margin == pytest.approx(abs(np.exp(1j * (np.pi - 1 / N)) + 1), rel=1e-9)
        margins.append(rep.margin)
    assert margins[0] > margins[1] > margins[2]
    assert not blockwise_spectrum([np.diag([np.exp(1j * (np.pi - 1e-7))])]).gap


def test_spectrum_mixed_blocks():
    blocks = [build_quasi_delta_block(QuasiDeltaParams(d, (0.2, 0.1, 0.0))) for d in (0, np.pi / 3, 0)]
    got = blockwise_spectrum(blocks).distinct()
    assert matched_distance(got, [1, np.exp(1j * np.pi / 3), -1]) < 1e-12


def test_direct_sum_spectrum_random():
    rng = np.random.default_rng(7)
    for _ in range(20):
        blocks = [random_unitary(int(rng.integers(1, 6)), rng) if rng.random() < 0.5
                  else build_quasi_delta_block(QuasiDeltaParams(rng.uniform(-3, 3), tuple(rng.uniform(-3, 3, 3))))
                  for _ in range(int(rng.integers(1, 8)))]
        dense = np.linalg.eigvals(scipy.linalg.block_diag(*blocks))
        assert hausdorff(dense, blockwise_spectrum(blocks).eigenvalues) < 1e-10


def test_boundary_residual_examples():
    rng = np.random.default_rng(3)
    phi = rng.normal(size=4) + 1j * rng.normal(size=4)
    off = (0, 4)
    neumann = TraceData(BoundaryVector(phi, off), BoundaryVector(np.zeros(4), off))
    assert boundary_residual(np.eye(4), neumann) == 0
    dirichlet = TraceData(BoundaryVector(np.zeros(4), off), BoundaryVector(phi, off))
    assert boundary_residual(-np.eye(4), dirichlet) < 1e-15
    with pytest.raises(InvalidArgumentError):
        boundary_residual(np.eye(3), neumann)


def test_boundary_residual_block_layout_mismatch():
    g = build_chain_graph(range(2), 1, 1)
    data = trace_of_plane_wave(g, 1.0, {e.id: (1, 0) for e in g.edges})
    U = BlockUnitary((np.eye(2), np.eye(6)), (0, 1))
    with pytest.raises(InvalidArgumentError):
        boundary_residual(U, data)


@pytest.mark.parametrize("cfg", [
    ChainConfig(window=(0, 5)),
    ChainConfig(window=(-2, 3), delta=0.7, alphas=(0.3, 1.2, -0.4), l_u=1.3, l_v=0.8),
])
def test_chain_candidate_satisfies_boundary_equation(cfg):
    for k in (1 / np.pi, 0.9, 2.3):
        cand = build_candidate(cfg, k)
        assert node_residual_via_boundary_equation(cand) < 1e-10


def test_kernel_projection_examples():
    p = QuasiDeltaParams(0.3, (0.5, -1.1, 2.0))
    U = build_quasi_delta_block(p)
    zeta = build_zeta(p)
    assert kernel_projection_condition(U, zeta) < 1e-14
    perp = np.array([1, -np.exp(1j * 0.5), 0, 0]) * np.exp(-0.5j)
    perp = perp - np.vdot(zeta, perp) * zeta / 4
    assert kernel_projection_condition(U, perp) == pytest.approx(np.linalg.norm(perp), rel=1e-12)
    rng = np.random.default_rng(0)
    phi = rng.normal(size=4) + 1j * rng.normal(size=4)
    expected = np.linalg.norm(phi - np.vdot(zeta, phi) * zeta / 4)
    assert abs(kernel_projection_condition(U, phi) - expected) < 1e-12


def _angles(A, B):
    return scipy.linalg.subspace_angles(A, B).max() if A.shape[1] else 0.0


@pytest.mark.parametrize("seed", range(10))
def test_projected_conditions_equivalent(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 7))
    if seed % 3 == 0:
        Q = unitary_group.rvs(d, random_state=rng)
        w = np.exp(1j * rng.uniform(-3, 3, d))
        w[: d // 2] = -1  # an exact -1 eigenspace
        U = (Q * w) @ Q.conj().T
    else:
        U = build_quasi_delta_block(QuasiDeltaParams(rng.uniform(-3, 3), tuple(rng.uniform(-3, 3, d - 1))))
    N1 = scipy.linalg.null_space(boundary_system(U), rcond=1e-10)
    N2 = scipy.linalg.null_space(projected_system(U), rcond=1e-10)
    assert N1.shape == N2.shape
    assert _angles(N1, N2) < 1e-10


def test_build_block_unitary_degree_check():
    g = build_chain_graph(range(3), 1, 1)
    with pytest.raises(InvalidArgumentError):
        build_block_unitary(g, QuasiDeltaParams(0.0, (0.0,)))
    U = build_block_unitary(g, QuasiDeltaParams(0.0, (0.0, 0.0, 0.0)))
    assert U.dimension == 12
    x = np.arange(12) + 0j
    assert np.allclose(U.apply(x), U.dense() @ x)
