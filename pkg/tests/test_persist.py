import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotorwave.grid import Grid, WaveField
from rotorwave.persist import (
    FieldFormatError,
    atomic_write_text,
    export_heatmap,
    field_bytes,
    format_cell,
    heatmap_pixels,
    read_csv,
    read_field,
    read_pgm,
    write_csv,
    write_field,
)


def random_field(n=32, L=10.0, seed=0):
    rng = np.random.default_rng(seed)
    return WaveField(Grid(n, L), rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


def test_field_round_trip_is_bit_exact(tmp_path):
    psi = random_field()
    write_field(tmp_path / "a.rwf", psi, t=1.25)
    back, t = read_field(tmp_path / "a.rwf")
    assert t == 1.25
    assert back.grid.n == 32 and back.grid.L == 10.0
    assert back.values.tobytes() == psi.values.tobytes()


def test_momentum_field_keeps_its_representation(tmp_path):
    psi = random_field().to_momentum()
    write_field(tmp_path / "m.rwf", psi)
    back, _ = read_field(tmp_path / "m.rwf")
    assert back.rep == psi.rep
    assert np.array_equal(back.values, psi.values)


def test_field_layout():
    data = field_bytes(random_field(8, 3.0), t=-0.5)
    assert len(data) == 64 + 16 * 64
    assert data[:64].decode().split() == ["RWF1", "8", "3.0", "pos", "-0.5"]
    assert data[63:64] == b"\n"


def test_corrupt_field_is_rejected(tmp_path):
    p = tmp_path / "bad.rwf"
    p.write_bytes(field_bytes(random_field(8, 3.0))[:-16])
    with pytest.raises(FieldFormatError, match="expected"):
        read_field(p)
    p.write_bytes(b"nothing")
    with pytest.raises(FieldFormatError):
        read_field(p)
    p.write_bytes(b"XXXX".ljust(64) + bytes(16 * 64))
    with pytest.raises(FieldFormatError, match="not a field"):
        read_field(p)


def test_uniform_field_gives_constant_image():
    g = Grid(16, 4.0)
    pix = heatmap_pixels(WaveField(g, np.full(g.shape, 0.3 + 0.1j)))
    assert np.all(pix == pix[0, 0])
    assert heatmap_pixels(WaveField(g, np.zeros(g.shape))).max() == 0


def test_gaussian_peak_pixel_lands_at_its_centroid_cell():
    g = Grid(64, 16.0)
    x1, x2 = g.meshgrid()
    i, j = 40, 20
    c1, c2 = g.x[i], g.x[j]
    psi = WaveField(g, np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2)))
    pix = heatmap_pixels(psi)
    row, col = np.unravel_index(pix.argmax(), pix.shape)
    # columns follow x1; rows run from the largest x2 down
    assert col == i
    assert row == g.n - 1 - j
    assert pix.max() == 65535


def test_log_scale_clamps_at_floor():
    g = Grid(64, 40.0)
    x1, x2 = g.meshgrid()
    psi = WaveField(g, np.exp(-(x1**2 + x2**2) / 2))
    pix = heatmap_pixels(psi, "log")
    # density exp(-r^2) is below 1e-12 of its peak beyond r = sqrt(12 ln 10)
    far = (np.hypot(x1, x2) > 6.0).T[::-1, :]
    assert np.all(pix[far] == 0)
    assert pix.max() == 65535
    with pytest.raises(ValueError):
        heatmap_pixels(psi, "cubic")


def test_export_header_carries_grid_metadata(tmp_path):
    psi = random_field(16, 5.0)
    p = export_heatmap(psi, tmp_path / "x.pgm", "log", t=2.0)
    pix, comments = read_pgm(p)
    assert pix.shape == (16, 16) and pix.dtype.str == ">u2"
    assert np.array_equal(pix, heatmap_pixels(psi, "log"))
    meta = dict(kv.split("=") for kv in comments[0].split()[2:])
    assert meta["n"] == "16" and float(meta["L"]) == 5.0 and meta["scale"] == "log"
    assert float(meta["dx"]) == pytest.approx(5.0 / 16)
    assert float(meta["t"]) == 2.0 and float(meta["floor"]) == 1e-12


def test_atomic_writes_leave_no_temporaries(tmp_path):
    for k in range(5):
        atomic_write_text(tmp_path / "out.txt", f"version {k}")
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]
    assert (tmp_path / "out.txt").read_text() == "version 4"


@settings(max_examples=100, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=True))
def test_float_cells_round_trip(x):
    assert float(format_cell(x)) == x


def test_cell_formatting():
    assert format_cell(math.nan) == "nan"
    assert format_cell(True) == "true" and format_cell(np.bool_(False)) == "false"
    assert format_cell(np.int64(3)) == "3"
    assert format_cell(None) == ""
    assert format_cell(np.float64(0.1)) == "0.1"


def test_csv_schema(tmp_path):
    p = write_csv(tmp_path / "t.csv", ("a", "b"), [{"a": 1, "b": 0.25}, {"a": 2}])
    header, rows = read_csv(p)
    assert header == ["a", "b"]
    assert rows == [{"a": "1", "b": "0.25"}, {"a": "2", "b": ""}]
    with pytest.raises(KeyError):
        write_csv(tmp_path / "u.csv", ("a",), [{"a": 1, "z": 2}])
