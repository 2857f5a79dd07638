import numpy as np
import pytest

from fbfep.pgm import PGMError, read_pgm, to_bytes, write_pgm


@pytest.mark.parametrize("binary", [True, False])
def test_roundtrip(tmp_path, binary):
    raster = np.random.default_rng(0).integers(0, 256, (5, 7)).astype(np.uint8)
    path = tmp_path / "img.pgm"
    write_pgm(path, raster / 255.0, binary=binary)
    back = read_pgm(path)
    assert back.shape == (5, 7)
    assert np.array_equal(to_bytes(back), raster)


def test_header_and_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P2\n# comment\n3 1\n# another\n4\n0 2 4\n")
    assert np.allclose(read_pgm(path), [[0.0, 0.5, 1.0]])


def test_sixteen_bit(tmp_path):
    path = tmp_path / "w.pgm"
    path.write_bytes(b"P5\n2 1\n65535\n" + np.array([0, 65535], ">u2").tobytes())
    assert np.array_equal(read_pgm(path), [[0.0, 1.0]])


def test_binary_layout(tmp_path):
    path = tmp_path / "b.pgm"
    write_pgm(path, np.array([[0.0, 1.0], [0.5, 2.0]]))
    assert path.read_bytes() == b"P5\n2 2\n255\n\x00\xff\x80\xff"


@pytest.mark.parametrize("data", [b"P6\n1 1\n255\n\x00\x00\x00", b"P3\n1 1\n255\n0 0 0\n"])
def test_color_rejected(tmp_path, data):
    path = tmp_path / "c.ppm"
    path.write_bytes(data)
    with pytest.raises(PGMError, match="color"):
        read_pgm(path)


@pytest.mark.parametrize("data", [b"BM....", b"P5\n2 2\n255\n\x00", b"P2\n2 1\n3\n1 9\n", b"P2\n2\n"])
def test_malformed(tmp_path, data):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(PGMError):
        read_pgm(path)
