import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_squared, random_tensor
from gtsc.tensor import (
    ModeClassMap,
    SparseTensor,
    TensorFormatError,
    apply_squared,
    contract_to_matrix,
    embed_rectangular,
    flatten,
    load_coordinate,
    remove_empty_indices,
    subtensor,
    symmetrize_square,
    write_coordinate,
)


def entries_of(T):
    return {k: pytest.approx(v) for k, v in T.entries().items()}


# construction -----------------------------------------------------------


def test_duplicates_accumulate_and_zeros_drop():
    T = SparseTensor.from_entries([[0, 0, 0], [0, 0, 0], [1, 0, 1]], [1.0, 1.0, 0.0], (2, 2, 2))
    assert T.entries() == {(0, 0, 0): 2.0}


@pytest.mark.parametrize(
    "idx, val, dims",
    [
        ([[0, 0, 2]], [1.0], (2, 2, 2)),
        ([[0, 0, -1]], [1.0], (2, 2, 2)),
        ([[0, 0, 0]], [-1.0], (2, 2, 2)),
        ([[0, 0, 0]], [np.nan], (2, 2, 2)),
        ([[0, 0]], [1.0], (2, 2, 2)),
    ],
)
def test_invalid_entries_rejected(idx, val, dims):
    with pytest.raises(ValueError):
        SparseTensor.from_entries(idx, val, dims)


def test_columns_are_contiguous(rng):
    T = random_tensor(rng, 7, density=0.4, symmetric=False)
    cols = [tuple(r[1:]) for r in T.indices]
    seen, prev = set(), None
    for c in cols:
        if c != prev:
            assert c not in seen
            seen.add(c)
            prev = c


def test_indices_read_only(rng):
    T = random_tensor(rng, 4)
    with pytest.raises(ValueError):
        T.indices[0, 0] = 1


# coordinate files ---------------------------------------------------------


def test_load_single_entry():
    T = load_coordinate(io.StringIO("3 2 2 2\n0 0 0 1.5\n"))
    assert T.dims == (2, 2, 2)
    assert T.entries() == {(0, 0, 0): 1.5}


def test_load_accumulates_duplicate_lines():
    T = load_coordinate(io.StringIO("3 2 2 2\n0 0 0 1.0\n0 0 0 1.0\n"))
    assert T.entries() == {(0, 0, 0): 2.0}


def test_load_comments_and_one_based():
    text = "# a comment\n3 2 2 2  # header\n\n1 2 2 0.5\n"
    T = load_coordinate(io.StringIO(text), one_based=True)
    assert T.entries() == {(0, 1, 1): 0.5}


@pytest.mark.parametrize(
    "text, line",
    [
        ("3 2 2 2\n0 0 0 1\n0 0 1 -1\n", "line 3"),
        ("3 2 2 2\n0 0 2 1\n", "line 2"),
        ("3 2 2 2\n0 0 1\n", "line 2"),
        ("3 2 2 2\n0 0 x 1\n", "line 2"),
        ("3 2 2\n", "line 1"),
    ],
)
def test_load_errors_name_the_line(text, line):
    with pytest.raises(TensorFormatError, match=line):
        load_coordinate(io.StringIO(text))


def test_load_empty_stream():
    with pytest.raises(TensorFormatError):
        load_coordinate(io.StringIO("# nothing\n"))


@pytest.mark.parametrize("one_based", [False, True])
def test_write_load_round_trip(rng, one_based):
    T = random_tensor(rng, 5, m=4, density=0.05, symmetric=False)
    buf = io.StringIO()
    write_coordinate(T, buf, one_based=one_based)
    U = load_coordinate(io.StringIO(buf.getvalue()), one_based=one_based)
    assert U.dims == T.dims
    assert np.array_equal(U.indices, T.indices)
    assert np.array_equal(U.values, T.values)


# symmetrization -----------------------------------------------------------


def test_symmetrize_distinct_indices():
    S = symmetrize_square(SparseTensor.from_entries([[0, 1, 2]], [1.0], (3, 3, 3)))
    assert S.entries() == {p: 1.0 for p in itertools.permutations((0, 1, 2))}
    assert S.symmetric


def test_symmetrize_repeated_index():
    S = symmetrize_square(SparseTensor.from_entries([[0, 0, 1]], [2.0], (2, 2, 2)))
    assert S.entries() == {(0, 0, 1): 2.0, (0, 1, 0): 2.0, (1, 0, 0): 2.0}


def test_symmetrize_symmetric_input_accumulates():
    perms = list(itertools.permutations((0, 1, 2)))
    S = symmetrize_square(SparseTensor.from_entries(perms, [1.0] * 6, (3, 3, 3)))
    # brute force: every distinct permutation of every source tuple gets its weight
    expected = {}
    for src in perms:
        for p in set(itertools.permutations(src)):
            expected[p] = expected.get(p, 0.0) + 1.0
    assert S.entries() == expected == {p: 6.0 for p in perms}


def test_symmetrize_rejects_rectangular():
    with pytest.raises(ValueError):
        symmetrize_square(SparseTensor.from_entries([[0, 0, 0]], [1.0], (1, 2, 2)))


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 5),
    m=st.integers(2, 4),
    data=st.data(),
)
def test_symmetrize_is_permutation_closed(n, m, data):
    k = data.draw(st.integers(1, 8))
    idx = data.draw(
        st.lists(st.lists(st.integers(0, n - 1), min_size=m, max_size=m), min_size=k, max_size=k)
    )
    val = data.draw(st.lists(st.floats(0.1, 10), min_size=k, max_size=k))
    S = symmetrize_square(SparseTensor.from_entries(idx, val, (n,) * m))
    assert S.is_permutation_symmetric()
    D = S.to_dense()
    for perm in itertools.permutations(range(m)):
        assert np.allclose(D, D.transpose(perm))
    # total mass: each source tuple is copied once per distinct permutation
    copies = [len(set(itertools.permutations(t))) for t in idx]
    assert np.isclose(S.values.sum(), np.dot(copies, val))


# rectangular embedding ------------------------------------------------------


def test_embed_unit_cube():
    U = SparseTensor.from_entries([[0, 0, 0]], [1.0], (1, 1, 1))
    T = embed_rectangular(U, ModeClassMap.parse("a,b,c"))
    assert T.dims == (3, 3, 3)
    assert T.entries() == {p: 1.0 for p in itertools.permutations((0, 1, 2))}


def test_embed_dimension_is_sum_of_classes():
    U =SparseTensor.from_entries([[1, 2, 3]], [1.0], (2, 3, 4))
    T = embed_rectangular(U, ModeClassMap.parse("x,y,z"))
    assert T.n == 9
    assert (1, 4, 8) in T.entries()


def test_embed_shared_class_maps_to_one_block():
    # (week, employee, employee, topic) with employee 5 in either middle mode
    U = SparseTensor.from_entries([[0, 5, 1, 0], [0, 1, 5, 0]], [1.0, 1.0], (2, 7, 7, 3))
    classes = ModeClassMap.parse("A,B,B,C")
    off = classes.offsets(U.dims)
    assert off == {"A": 0, "B": 2, "C": 9}
    T = embed_rectangular(U, classes)
    assert T.n == 12
    e = T.entries()
    assert (0, 2 + 5, 2 + 1, 9) in e and (0, 2 + 1, 2 + 5, 9) in e
    assert e[(0, 7, 3, 9)] == pytest.approx(2.0)


def test_embed_zero_blocks(rng):
    dims = (3, 4, 5)
    idx = np.column_stack([rng.integers(0, d, 30) for d in dims])
    U = SparseTensor.from_entries(idx, rng.random(30) + 0.1, dims)
    classes = ModeClassMap.parse("a,b,c")
    T = embed_rectangular(U, classes)
    block = np.searchsorted([0, 3, 7], T.indices, side="right") - 1
    # every entry touches each class block exactly once
    assert all(sorted(b) == [0, 1, 2] for b in block.tolist())
    assert T.is_permutation_symmetric()


def test_embed_size_mismatch():
    U = SparseTensor.from_entries([[0, 0, 0]], [1.0], (2, 3, 4))
    with pytest.raises(ValueError):
        embed_rectangular(U, ModeClassMap.parse("a,b,b"))


@pytest.mark.parametrize("text", ["a", "a,,b", ""])
def test_malformed_class_map(text):
    with pytest.raises(ValueError):
        ModeClassMap.parse(text)


# empty indices and sub-tensors ----------------------------------------------


def test_remove_empty_indices():
    T = SparseTensor.from_entries([[0, 2, 2], [2, 0, 2], [2, 2, 0]], [1.0] * 3, (3, 3, 3), True)
    R, mapping = remove_empty_indices(T)
    assert R.n == 2
    assert mapping.tolist() == [0, -1, 1]
    R2, mapping2 = remove_empty_indices(R)
    assert R2 is R and mapping2.tolist() == [0, 1]


def test_remove_all_empty():
    R, mapping = remove_empty_indices(SparseTensor.empty((4, 4, 4)))
    assert R.n == 0 and mapping.tolist() == [-1] * 4


def test_subtensor_filters_exactly(rng):
    T = random_tensor(rng, 8, density=0.2)
    S = sorted(rng.choice(8, 5, replace=False).tolist())
    sub = subtensor(T, S)
    pos = {s: r for r, s in enumerate(S)}
    expected = {
        tuple(pos[i] for i in k): v for k, v in T.entries().items() if all(i in pos for i in k)
    }
    assert sub.entries() == expected
    assert sub.symmetric == T.symmetric


def test_subtensor_edge_cases(rng):
    T = random_tensor(rng, 5)
    full = subtensor(T, range(5))
    assert np.array_equal(full.indices, T.indices) and np.array_equal(full.values, T.values)
    assert subtensor(T, []).nnz == 0


def test_subtensor_of_block_community():
    idx = [list(p) for p in itertools.product(range(3), repeat=3)]
    idx += [[i + 3, j + 3, k + 3] for i, j, k in itertools.product(range(3), repeat=3)]
    T = SparseTensor.from_entries(idx, np.ones(len(idx)), (6, 6, 6), True)
    sub = subtensor(T, [0, 1, 2])
    assert sub.nnz == 27 and sub.n == 3


# products -----------------------------------------------------------------


def test_apply_squared_single_entry():
    T = SparseTensor.from_entries([[0, 1, 1]], [2.0], (2, 2, 2))
    assert apply_squared(T, [0.0, 0.5]).tolist() == [0.5, 0.0]
    assert apply_squared(T, [0.0, 0.0]).tolist() == [0.0, 0.0]


@pytest.mark.parametrize("m", [3, 4])
def test_apply_squared_matches_dense(rng, m):
    T = random_tensor(rng, 5, m=m, density=0.3)
    x = rng.random(5)
    assert np.allclose(apply_squared(T, x), dense_squared(T.to_dense(), x), atol=1e-12, rtol=0)


def test_apply_squared_length_mismatch(rng):
    with pytest.raises(ValueError):
        apply_squared(random_tensor(rng, 4), np.ones(3))


def test_contract_single_entry():
    A = contract_to_matrix(SparseTensor.from_entries([[0, 1, 1]], [2.0], (2, 2, 2)), [0, 0.5])
    assert A.toarray().tolist() == [[0.0, 1.0], [0.0, 0.0]]


def test_contract_uniform_is_scaled_flattening(rng):
    T = random_tensor(rng, 6)
    A = contract_to_matrix(T, np.full(6, 1 / 6))
    assert np.allclose(A.toarray(), flatten(T).toarray() / 6, atol=1e-14)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_contract_then_apply_equals_squared(rng, m):
    T = random_tensor(rng, 6, m=m, density=0.3)
    x = rng.random(6)
    assert np.allclose(contract_to_matrix(T, x) @ x, apply_squared(T, x), atol=1e-12, rtol=0)


def test_flatten():
    T = SparseTensor.from_entries([[0, 1, 0], [0, 1, 1]], [1.0, 2.0], (2, 2, 2))
    assert flatten(T)[0, 1] == 3.0
    with pytest.raises(ValueError):
        flatten(SparseTensor.from_entries([[0, 1]], [1.0], (2, 2)))


def test_flatten_matches_dense(rng):
    T = random_tensor(rng, 5, m=4, density=0.2)
    M = flatten(T).toarray()
    assert np.allclose(M, T.to_dense().sum(axis=(2, 3)))
    assert np.allclose(M, M.T)
