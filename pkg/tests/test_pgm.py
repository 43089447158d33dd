import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ligocr.pgm import PGMError, decode_pgm, encode_pgm, read_pgm, write_pgm


@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_round_trip(r):
    assert np.array_equal(decode_pgm(encode_pgm(r)), r)


def test_header_layout():
    data = encode_pgm(np.array([[0, 255, 7]], np.uint8))
    assert data == b"P5\n3 1\n255\n" + bytes([0, 255, 7])


def test_ascii_and_comments():
    r = decode_pgm(b"P2\n# a comment\n2 2\n255\n0 1\n2 255\n")
    assert r.tolist() == [[0, 1], [2, 255]]


def test_truncated(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(encode_pgm(np.zeros((4, 4), np.uint8))[:-3])
    with pytest.raises(PGMError, match="x.pgm"):
        read_pgm(p)


def test_bad_magic():
    with pytest.raises(PGMError):
        decode_pgm(b"P6\n1 1\n255\n\0\0\0")


def test_file_round_trip(tmp_path):
    r = np.arange(20, dtype=np.uint8).reshape(4, 5)
    write_pgm(tmp_path / "a.pgm", r)
    assert np.array_equal(read_pgm(tmp_path / "a.pgm"), r)
