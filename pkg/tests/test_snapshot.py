"""Binary snapshot format: roundtrip fidelity and corruption rejection."""

import numpy as np
import pytest

from kfplab.grids import GridField, GridSpec
from kfplab.snapshot import read_snapshot, write_snapshot


def _field():
    grid = GridSpec(nx=6, nv=5, nt=4, lx=2.0, vmax=1.5, t_start=0.1, t_end=0.9)
    rng = np.random.default_rng(7)
    vals = rng.standard_normal(grid.shape)
    return GridField(grid, vals, tag="solution")


def test_roundtrip_is_exact(tmp_path):
    f = _field()
    path = tmp_path / "snap.kfp"
    write_snapshot(path, f)
    g = read_snapshot(path)
    assert g.grid == f.grid
    assert g.tag == "solution"
    np.testing.assert_array_equal(g.values, f.values)


def test_rewrite_is_byte_identical(tmp_path):
    f = _field()
    a, b = tmp_path / "a.kfp", tmp_path / "b.kfp"
    write_snapshot(a, f)
    write_snapshot(b, f)
    assert a.read_bytes() == b.read_bytes()


def test_bad_magic_is_rejected(tmp_path):
    f = _field()
    path = tmp_path / "snap.kfp"
    write_snapshot(path, f)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(path)


def test_truncated_payload_is_rejected(tmp_path):
    f = _field()
    path = tmp_path / "snap.kfp"
    write_snapshot(path, f)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 16])
    with pytest.raises(ValueError, match="truncated"):
        read_snapshot(path)


def test_non_solution_fields_are_refused(tmp_path):
    f = _field()
    g = GridField(f.grid, f.values, tag="generic")
    with pytest.raises(ValueError, match="solver output"):
        write_snapshot(tmp_path / "g.kfp", g)
