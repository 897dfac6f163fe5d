from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbprocess.errors import PreconditionError
from rbprocess.replay_core import (BatchIndices, ReplayBuffer, batch_average, batch_probability, batch_uniform_count,
                                   push, sample_batch)

# chi-square critical values at alpha = 0.001
CHI2_999 = {9: 27.877, 19: 43.820, 34: 65.247}


def test_fifo_order_and_eviction():
    rb = ReplayBuffer(3)
    for x in "abcd":
        push(rb, x)
    assert rb.items() == ["d", "c", "b"]
    assert rb[1] == "d" and rb[3] == "b"
    assert len(rb) == 3


def test_capacity_one():
    rb = ReplayBuffer(1)
    rb.push("a").push("b")
    assert rb.items() == ["b"]


def test_many_pushes():
    rb = ReplayBuffer(100)
    for i in range(1_000_000):
        rb.push(i)
    assert rb.fill == 100
    assert rb.total_pushed == 1_000_000
    assert rb[1] == 999_999 and rb[100] == 999_900


def test_bad_capacity_and_positions():
    with pytest.raises(PreconditionError):
        ReplayBuffer(0)
    rb = ReplayBuffer(2)
    rb.push(1)
    with pytest.raises(IndexError):
        rb[2]
    with pytest.raises(IndexError):
        rb[0]


@given(capacity=st.integers(1, 12), items=st.lists(st.integers(), max_size=60))
def test_buffer_matches_list_model(capacity, items):
    rb = ReplayBuffer(capacity)
    for x in items:
        rb.push(x)
    expected = list(reversed(items))[:capacity]
    assert rb.items() == expected
    assert rb.fill == min(len(items), capacity)
    for pos in range(1, rb.fill + 1):
        assert rb.time_index(pos) == len(items) - pos
        assert items[rb.time_index(pos)] == rb[pos]


@settings(max_examples=200)
@given(fill=st.integers(1, 30), data=st.data())
def test_sample_batch_distinct_in_range(fill, data):
    k = data.draw(st.integers(1, fill))
    seed = data.draw(st.integers(0, 2**32 - 1))
    rb = ReplayBuffer(fill)
    for i in range(fill):
        rb.push(i)
    idx = sample_batch(rb, k, np.random.default_rng(seed))
    assert idx.k == k
    assert len(set(idx.positions)) == k
    assert all(1 <= p <= fill for p in idx.positions)


def test_sample_batch_full_set_when_k_equals_fill():
    rb = ReplayBuffer(5)
    for i in range(4):
        rb.push(i)
    idx = sample_batch(rb, 4, np.random.default_rng(0))
    assert sorted(idx.positions) == [1, 2, 3, 4]


def test_sample_batch_errors():
    rb = ReplayBuffer(4)
    with pytest.raises(PreconditionError):
        sample_batch(rb, 1, np.random.default_rng(0))
    rb.push(1)
    with pytest.raises(PreconditionError):
        sample_batch(rb, 2, np.random.default_rng(0))


def test_sample_batch_consumes_exactly_k_uniforms():
    rb = ReplayBuffer(10)
    for i in range(10):
        rb.push(i)
    a = np.random.default_rng(5)
    sample_batch(rb, 4, a)
    b = np.random.default_rng(5)
    b.random(4)
    assert a.random() == b.random()


@pytest.mark.parametrize("n,k", [(5, 2), (7, 3), (20, 1)])
def test_subset_uniformity_chi_square(n, k):
    rb = ReplayBuffer(n)
    for i in range(n):
        rb.push(i)
    rng = np.random.default_rng(1234)
    draws = 40_000
    counts = Counter(frozenset(sample_batch(rb, k, rng).positions) for _ in range(draws))
    subsets = [frozenset(c) for c in combinations(range(1, n + 1), k)]
    assert set(counts) <= set(subsets)
    expected = draws * float(batch_probability(n, k))
    chi2 = sum((counts.get(s, 0) - expected) ** 2 / expected for s in subsets)
    assert chi2 < CHI2_999[len(subsets) - 1]


def test_batch_average_examples():
    rb = ReplayBuffer(3)
    for x in (2, 1, 3):
        rb.push(x)  # newest-first (3, 1, 2)
    assert float(batch_average(rb, BatchIndices((1, 3))).value[0]) == 2.5
    assert float(batch_average(rb, BatchIndices((1, 2, 3))).value[0]) == 2.0
    assert float(batch_average(rb, BatchIndices((2,)), lambda _: 7.0).value[0]) == 7.0


def test_batch_average_vector_valued():
    @dataclass
    class Item:
        x: float
        y: float

    rb = ReplayBuffer(2)
    rb.push(Item(1.0, 2.0)).push(Item(3.0, 6.0))
    avg = batch_average(rb, BatchIndices((1, 2)), lambda it: [it.x, it.y])
    np.testing.assert_allclose(avg.value, [2.0, 4.0])


def test_batch_probability():
    assert batch_probability(5, 2) == Fraction(1, 10)
    assert batch_probability(9, 9) == 1
    assert batch_probability(30, 5) == Fraction(1, 142506)
    with pytest.raises(PreconditionError):
        batch_probability(3, 4)


def test_batch_uniform_count():
    # warm-up draws min(k, t) for t = 1..n then k
    assert batch_uniform_count(6, 4, 3) == 1 + 2 + 3 + 3 + 3 + 3
    assert batch_uniform_count(3, 1, 1) == 3


def test_dump_csv(tmp_path):
    @dataclass
    class Obs:
        s: int
        r: float

    rb = ReplayBuffer(2)
    rb.push(Obs(0, 0.5)).push(Obs(1, -1.0))
    path = tmp_path / "buf.csv"
    rb.dump_csv(path)
    assert path.read_text().splitlines() == ["position,s,r", "1,1,-1.0", "2,0,0.5"]
