"""Exhaustive minimum-error search, cross-checked by a second enumeration."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import labeled_energy, random_dataset
from khcluster.core import Dataset, PreconditionError, SizeGuardError
from khcluster.kh_engine import verify_stability
from khcluster.core import Partition
from khcluster.oracle import MAX_POINTS, global_min, minimum_curve


def stirling2(n, m):
    table = {(0, 0): 1}
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            table[(i, j)] = j * table.get((i - 1, j), 0) + table.get((i - 1, j - 1), 0)
    return table.get((n, m), 0)


def exhaustive_min(points, m):
    """All surjective labelings, filtered to canonical form, via itertools."""
    n = len(points)
    best = None
    for lab in itertools.product(range(m), repeat=n):
        # canonical: label j appears only after 0..j-1 all appeared
        mx = -1
        ok = True
        for v in lab:
            if v > mx + 1:
                ok = False
                break
            mx = max(mx, v)
        if not ok or mx != m - 1:
            continue
        e = labeled_energy(points, np.array(lab))
        if best is None or e < best[0]:
            best = (e, lab)
    return best


def test_frozen_small_instance():
    ds = Dataset([0.0, 1.0, 9.0, 10.0])
    r1 = global_min(ds, 1)
    assert r1.best_e == pytest.approx(82.0)
    assert r1.best_labels == (0, 0, 0, 0)
    assert r1.partitions_examined == 1
    r2 = global_min(ds, 2)
    assert r2.best_e == pytest.approx(1.0)
    assert r2.best_labels == (0, 0, 1, 1)
    assert r2.partitions_examined == 7
    r3 = global_min(ds, 3)
    assert r3.best_e == pytest.approx(0.5)
    assert r3.best_labels == (0, 0, 1, 2)
    assert r3.partitions_examined == 6
    r4 = global_min(ds, 4)
    assert r4.best_e == 0.0
    assert r4.best_labels == (0, 1, 2, 3)
    assert r4.partitions_examined == 1


def test_examined_counts_are_stirling_numbers():
    rng = np.random.default_rng(2)
    for n in (3, 5, 7, 9):
        ds = Dataset(rng.normal(0, 1, (n, 2)))
        for m in range(1, n + 1):
            assert global_min(ds, m).partitions_examined == stirling2(n, m)


def test_tie_takes_lexicographically_first_labeling():
    # {0}|{1, 2} and {0, 1}|{2} both cost 0.5; (0, 0, 1) sorts first
    r = global_min(Dataset([0.0, 1.0, 2.0]), 2)
    assert r.best_e == pytest.approx(0.5)
    assert r.best_labels == (0, 0, 1)


def test_guards():
    with pytest.raises(SizeGuardError):
        global_min(Dataset(np.arange(MAX_POINTS + 1, dtype=np.float64)), 2)
    ds = Dataset([0.0, 1.0])
    with pytest.raises(PreconditionError):
        global_min(ds, 0)
    with pytest.raises(PreconditionError):
        global_min(ds, 3)


def test_minimum_curve_monotone():
    rng = np.random.default_rng(8)
    ds = random_dataset(rng, 9, 2)
    pts = minimum_curve(ds, 9)
    es = [r.best_e for r in pts]
    assert len(es) == 9
    assert all(a >= b - 1e-12 for a, b in zip(es, es[1:]))
    assert es[-1] <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 7), st.integers(1, 4))
def test_matches_independent_enumeration(seed, n, m):
    """The vectorized search agrees with a plain itertools enumeration."""
    if m > n:
        m = n
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, n, int(rng.integers(1, 3)))
    r = global_min(ds, m)
    e_ref, lab_ref = exhaustive_min(ds.points, m)
    assert r.best_e == pytest.approx(e_ref, rel=1e-9, abs=1e-9)
    assert r.best_labels == lab_ref


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_argmin_is_stable(seed):
    """A global optimum admits no improving subset move."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 11))
    m = int(rng.integers(1, min(n, 5) + 1))
    ds = random_dataset(rng, n, int(rng.integers(1, 4)))
    r = global_min(ds, m)
    p = Partition.from_labels(ds, np.array(r.best_labels), m)
    assert verify_stability(p).stable
