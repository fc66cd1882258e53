import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mconcord.core import (
    BlockPrecision,
    Dataset,
    DataError,
    EdgeGraph,
    NodePartition,
    PartitionError,
    center_columns,
    residual_sigma_estimate,
    unvectorize_block,
    vectorize_block,
)

from conftest import random_estimate


def test_partition_offsets():
    part = NodePartition([2, 1, 3])
    assert part.p == 3
    assert part.total_dim == 6
    assert list(part.offsets) == [0, 2, 3, 6]
    assert part.flat_index(2, 1) == 4
    assert [part.node_of(c) for c in range(6)] == [0, 0, 1, 2, 2, 2]
    assert part.column_labels()[:3] == ["v1.1", "v1.2", "v2.1"]


@pytest.mark.parametrize("dims", [[], [0, 2], [1, -1]])
def test_partition_rejects_bad_dims(dims):
    with pytest.raises(PartitionError):
        NodePartition(dims)


def test_vectorize_examples():
    assert vectorize_block(np.array([[1.0, 2.0], [3.0, 4.0]])).tolist() == [1, 2, 3, 4]
    assert vectorize_block(np.array([[7.5]])).tolist() == [7.5]
    assert vectorize_block(np.array([[1.0, 2.0, 3.0]])).tolist() == [1, 2, 3]
    with pytest.raises(PartitionError):
        vectorize_block(np.ones((2, 2)), shape=(2, 3))


@pytest.mark.parametrize("ki,kj", [(1, 3), (2, 3), (3, 2)])
def test_vectorize_matches_b_matrix_layout(rng, ki, kj):
    # B_1jk has Y_j in columns k*K_j .. (k+1)*K_j - 1; B_2il has Y_i in columns l, K_j + l, ...
    n = 3
    yi, yj = rng.standard_normal((n, ki)), rng.standard_normal((n, kj))
    block = rng.standard_normal((ki, kj))
    w = vectorize_block(block)
    for k in range(ki):
        b1 = np.zeros((n, ki * kj))
        b1[:, k * kj:(k + 1) * kj] = yj
        np.testing.assert_allclose(b1 @ w, sum(block[k, l] * yj[:, l] for l in range(kj)))
    for l in range(kj):
        b2 = np.zeros((n, ki * kj))
        b2[:, [t * kj + l for t in range(ki)]] = yi
        np.testing.assert_allclose(b2 @ w, sum(block[k, l] * yi[:, k] for k in range(ki)))


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6)))
def test_vectorize_round_trip(block):
    np.testing.assert_array_equal(unvectorize_block(vectorize_block(block), block.shape), block)


def test_center_columns():
    part = NodePartition([1])
    data = Dataset(np.array([[1.0], [2.0], [3.0]]), part)
    c = center_columns(data)
    assert c.centered
    assert c.values[:, 0].tolist() == [-1.0, 0.0, 1.0]
    assert center_columns(c) is c


def test_center_random_column(rng):
    data = Dataset(rng.standard_normal((10, 1)) * 5 + 3, NodePartition([1]))
    assert abs(center_columns(data).values.mean()) < 1e-12


def test_dataset_rejects_bad_values():
    part = NodePartition([1, 1])
    with pytest.raises(DataError, match="row 2, column 1"):
        Dataset(np.array([[1.0, 2.0], [np.nan, 1.0], [0.0, 0.0]]), part)
    with pytest.raises(DataError, match="zero variance"):
        Dataset(np.array([[1.0, 2.0], [1.0, 1.0], [1.0, 0.0]]), part)
    with pytest.raises(DataError):
        Dataset(np.array([[1.0, 2.0]]), part)
    with pytest.raises(PartitionError):
        Dataset(np.ones((3, 3)), part)


def test_dataset_is_read_only(rng):
    data = Dataset(rng.standard_normal((4, 2)), NodePartition([2]))
    with pytest.raises(ValueError):
        data.values[0, 0] = 1.0


def test_block_precision_dense_is_symmetric(rng):
    part = NodePartition([2, 1, 3, 2])
    est = random_estimate(part, rng)
    dense = est.to_dense()
    np.testing.assert_array_equal(dense, dense.T)
    # within-node off-diagonal entries are not parameters
    assert dense[0, 1] == 0.0
    assert dense[3, 4] == 0.0
    np.testing.assert_array_equal(est.block(2, 0), est.block(0, 2).T)
    back = BlockPrecision.from_dense(dense, part)
    assert back.blocks.keys() == est.blocks.keys()
    np.testing.assert_array_equal(back.to_dense(), dense)


def test_block_precision_drops_zero_blocks_and_checks_sigma():
    part = NodePartition([1, 1])
    est = BlockPrecision([1.0, 1.0], {(0, 1): np.zeros((1, 1))}, part)
    assert est.blocks == {}
    with pytest.raises(ValueError):
        BlockPrecision([1.0, 0.0], {}, part)
    with pytest.raises(PartitionError):
        BlockPrecision([1.0, 1.0], {(1, 0): np.ones((1, 1))}, part)


def test_edge_graph_invariants():
    g = EdgeGraph.from_weights(3, {(2, 0): 0.5})
    assert g.edges == {(0, 2)}
    assert g.weights == {(0, 2): 0.5}
    with pytest.raises(ValueError):
        EdgeGraph.from_pairs(3, [(1, 1)])
    with pytest.raises(ValueError):
        EdgeGraph.from_weights(3, {(0, 1): 0.0})


def test_residual_sigma_independent_unit_nodes():
    rng = np.random.default_rng(1)
    data = Dataset(rng.standard_normal((10_000, 2)), NodePartition([1, 1]))
    np.testing.assert_allclose(residual_sigma_estimate(center_columns(data)), 1.0, atol=0.1)


def test_residual_sigma_scaled_identity():
    # Omega = 2 I -> covariance I / 2, true sigma = 2
    rng = np.random.default_rng(2)
    data = Dataset(rng.standard_normal((20_000, 2)) / np.sqrt(2), NodePartition([1, 1]))
    np.testing.assert_allclose(residual_sigma_estimate(center_columns(data)), 2.0, atol=0.15)


def test_residual_sigma_needs_enough_rows(rng):
    part = NodePartition([2, 2, 2])
    data = Dataset(rng.standard_normal((4, 6)), part)
    with pytest.raises(DataError, match="node 0"):
        residual_sigma_estimate(data)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_residual_sigma_matches_precision_diagonal_formula(seed):
    # with the full regression on other nodes' columns, e'e / dof relates to the
    # sample covariance inverse: for K_i = 1 it is exactly 1 / (S^{-1})_ii scaled
    rng = np.random.default_rng(seed)
    part = NodePartition([1, 1, 1])
    y = rng.standard_normal((12, 3)) @ (np.eye(3) + 0.3 * rng.standard_normal((3, 3)))
    data = Dataset(y, part)
    got = residual_sigma_estimate(data)
    prec = np.linalg.inv(y.T @ y)
    np.testing.assert_allclose(got, np.diag(prec) * (12 - 2), rtol=1e-8)
