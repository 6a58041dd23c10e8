import numpy as np
import pytest

from capforge import fileio
from capforge.errors import FormatError, IntegrityError


def test_crc32c_check_value():
    # standard CRC32C check vector
    assert fileio.crc32c(b"123456789") == 0xE3069283
    assert fileio.crc32c(b"") == 0


def test_crc32c_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    for n in [1, 7, 1023, 1024, 1025, 5000, 65537, 250_000]:
        buf = rng.integers(0, 256, size=n, dtype=np.uint8).tobytes()
        ref = fileio._update_scalar(0xFFFFFFFF, buf) ^ 0xFFFFFFFF
        assert fileio.crc32c(buf) == ref, n


def test_crc32c_accepts_arrays():
    mat = np.arange(12, dtype="<f4").reshape(3, 4)
    assert fileio.crc32c(mat) == fileio.crc32c(mat.tobytes())


def test_embeddings_roundtrip(tmp_path):
    mat = np.random.default_rng(1).standard_normal((17, 5)).astype(np.float32)
    path = tmp_path / "x.f32"
    fileio.write_embeddings(path, mat)
    back = fileio.read_embeddings(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, mat)
    assert back.tobytes() == mat.tobytes()


def test_embeddings_bad_magic(tmp_path):
    path = tmp_path / "x.f32"
    path.write_bytes(b"NOPE" + b"\0" * 20)
    with pytest.raises(FormatError):
        fileio.read_embeddings(path)


def test_embeddings_truncated(tmp_path):
    mat = np.ones((4, 3), dtype=np.float32)
    blob = fileio.encode_embeddings(mat)
    path = tmp_path / "x.f32"
    path.write_bytes(blob[:-5])
    with pytest.raises(IntegrityError):
        fileio.read_embeddings(path)


def test_scores_roundtrip(tmp_path):
    values = np.linspace(-1, 1, 33, dtype=np.float32)
    path = tmp_path / "s.scores.f32"
    fileio.write_scores(path, values)
    assert np.array_equal(fileio.read_scores(path), values)


def test_scores_errors(tmp_path):
    path = tmp_path / "s.scores.f32"
    path.write_bytes(b"XXXX" + b"\0" * 8)
    with pytest.raises(FormatError):
        fileio.read_scores(path)
    blob = fileio.encode_scores(np.zeros(5, dtype=np.float32))
    path.write_bytes(blob[:-1])
    with pytest.raises(IntegrityError):
        fileio.read_scores(path)
