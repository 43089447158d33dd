import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from ligocr.ccl import (Connectivity, count_components, flood_fill_label, is_single_component, same_partition,
                        strip_small_components, two_pass_label)

from conftest import py_components

CONNS = [Connectivity.FOUR, Connectivity.EIGHT]
STRUCT = {Connectivity.FOUR: ndimage.generate_binary_structure(2, 1),
          Connectivity.EIGHT: ndimage.generate_binary_structure(2, 2)}

rasters = arrays(np.uint8, st.tuples(st.integers(1, 16), st.integers(1, 16)),
                 elements=st.sampled_from([0, 255]))


def test_empty_raster():
    labels, stats = two_pass_label(np.zeros((5, 7), np.uint8))
    assert labels.max() == 0 and stats == []
    assert not is_single_component(np.zeros((3, 3), np.uint8))


def test_full_block_four():
    labels, stats = two_pass_label(np.full((2, 2), 255, np.uint8), Connectivity.FOUR)
    assert labels.max() == 1 and stats[0].area == 4


def test_diagonal_pair():
    r = np.array([[255, 0], [0, 255]], np.uint8)
    assert count_components(r, 4) == 2
    assert count_components(r, 8) == 1


def test_stats_fields():
    r = np.zeros((6, 8), np.uint8)
    r[1:3, 2:5] = 255  # 6 px, x 2..4, y 1..2
    r[5, 7] = 255
    _, stats = two_pass_label(r)
    assert [s.area for s in stats] == [6, 1]
    assert stats[0].bbox == (2, 1, 4, 2)
    assert stats[0].centroid == pytest.approx((3.0, 1.5))
    assert stats[1].bbox == (7, 5, 7, 5)


@pytest.mark.parametrize("conn", CONNS)
def test_random_rasters_match_oracles(conn):
    rng = np.random.default_rng(123)
    for _ in range(50):
        r = np.where(rng.random((64, 64)) < 0.4, 255, 0).astype(np.uint8)
        a, _ = two_pass_label(r, conn)
        ref, n = ndimage.label(r >= 128, STRUCT[conn])
        assert a.max() == n
        assert same_partition(a, ref)
        assert np.array_equal(a, flood_fill_label(r, conn))


@settings(max_examples=150, deadline=None)
@given(rasters, st.sampled_from(CONNS))
def test_partition_matches_python_oracle(r, conn):
    labels, stats = two_pass_label(r, conn)
    comps = py_components(r >= 128, conn is Connectivity.EIGHT)
    assert labels.max() == len(comps) == len(stats)
    for i, comp in enumerate(comps, start=1):
        ys, xs = zip(*comp)
        assert set(labels[list(ys), list(xs)].tolist()) == {i}
        assert stats[i - 1].area == len(comp)
    assert sum(s.area for s in stats) == int((r >= 128).sum())


@settings(max_examples=100, deadline=None)
@given(rasters)
def test_eight_never_exceeds_four(r):
    assert count_components(r, 8) <= count_components(r, 4)


@settings(max_examples=100, deadline=None)
@given(rasters, st.sampled_from(CONNS), st.floats(0.01, 0.99))
def test_strip_monotone_and_idempotent(r, conn, frac):
    once = strip_small_components(r, conn, frac)
    assert not (once & ~r).any()
    assert np.array_equal(strip_small_components(once, conn, frac), once)


def test_strip_removes_dot():
    r = np.zeros((40, 40), np.uint8)
    r[5:25, 5:25] = 255  # 400 px
    r[30:33, 30:33] = 255  # 9 px
    out = strip_small_components(r, area_fraction=0.04)
    expected = r.copy()
    expected[30:33, 30:33] = 0
    assert np.array_equal(out, expected)


def test_strip_keeps_single_and_equal_components():
    r = np.zeros((10, 10), np.uint8)
    r[1:4, 1:4] = 255
    assert np.array_equal(strip_small_components(r, area_fraction=0.5), r)
    r[6:9, 6:9] = 255
    assert np.array_equal(strip_small_components(r, area_fraction=0.99), r)


def test_strip_fraction_validated():
    with pytest.raises(ValueError):
        strip_small_components(np.zeros((2, 2), np.uint8), area_fraction=0)


def test_same_partition():
    a = np.array([[1, 0, 2]])
    assert same_partition(a, np.array([[5, 0, 3]]))
    assert not same_partition(a, np.array([[1, 0, 1]]))
    assert not same_partition(a, np.array([[1, 1, 2]]))


def test_connectivity_parse():
    assert Connectivity.parse(4) is Connectivity.FOUR
    assert Connectivity.parse("8") is Connectivity.EIGHT
    with pytest.raises(ValueError):
        Connectivity.parse(6)
