import json

import numpy as np
import pytest

from calocal import fileio
from calocal.errors import FormatError
from calocal.metrics import histogram
from calocal.showersim import DetectorGeometry, EventSet, ShowerModel, simulate_events


def test_event_roundtrip_at_float32_precision(tmp_path):
    e = simulate_events(DetectorGeometry(6, 5), ShowerModel(), 17, 12.5, seed=2**63 + 5)
    path = tmp_path / "ev.calo"
    fileio.write_events(path, e)
    back = fileio.read_events(path)
    assert back.geometry.shape == (6, 5)
    assert (back.n_events, back.beam_energy, back.seed) == (17, 12.5, 2**63 + 5)
    nz = e.events > 0
    rel = np.abs(back.events[nz] - e.events[nz]) / e.events[nz]
    assert rel.max() <= 2.0 ** -23
    assert np.array_equal(back.events, e.events.astype(np.float32))


def test_file_size_layout(tmp_path):
    e = EventSet(DetectorGeometry(2, 2), np.arange(8.0).reshape(2, 2, 2), 10.0, 1)
    path = tmp_path / "tiny.calo"
    fileio.write_events(path, e)
    raw = path.read_bytes()
    assert fileio.HEADER.size == 36
    assert len(raw) == 68
    assert raw[:4] == b"CALO"
    assert np.frombuffer(raw[36:], "<f4").tolist() == list(range(8))


def test_bad_magic_version_and_truncation(tmp_path):
    e = EventSet(DetectorGeometry(2, 2), np.ones((2, 2, 2)), 10.0, 1)
    good = tmp_path / "good.calo"
    fileio.write_events(good, e)
    raw = good.read_bytes()
    cases = {"magic": b"XYZW" + raw[4:], "version": raw[:4] + b"\x02\0\0\0" + raw[8:],
             "short": raw[:-3], "header": raw[:20]}
    for name, blob in cases.items():
        p = tmp_path / f"{name}.calo"
        p.write_bytes(blob)
        with pytest.raises(FormatError):
            fileio.read_events(p)
    p = tmp_path / "short.calo"
    with pytest.raises(FormatError, match="expected 68 bytes, found 65"):
        fileio.read_events(p)


def test_coefficient_csv(tmp_path):
    a = np.array([[0.7, 0.123456789123], [1.0, 0.85]])
    path = tmp_path / "c.csv"
    fileio.write_coefficients(path, a)
    lines = path.read_text().splitlines()
    assert lines[0] == "row,col,a,A"
    assert lines[2] == "0,1,0.123456789,8.10000007"
    np.testing.assert_allclose(fileio.read_coefficients(path), a, rtol=1e-9)


def test_coefficient_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("row,col,x\n0,0,1\n")
    with pytest.raises(FormatError):
        fileio.read_coefficients(p)
    p.write_text("row,col,a,A\n0,0,1,1\n1,1,1,1\n")
    with pytest.raises(FormatError):
        fileio.read_coefficients(p)


def test_histogram_csv(tmp_path):
    h = histogram([0.1, 0.6, 2.0, -1.0], 2, 0.0, 1.0)
    p = tmp_path / "h.csv"
    fileio.write_histogram(p, h)
    assert p.read_text().splitlines() == [
        "bin_lo,bin_hi,count", "0,0.5,1", "0.5,1,1", "# underflow=1 overflow=1"]


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / "out.bin"
    with pytest.raises(RuntimeError):
        with fileio.atomic_write(target) as fh:
            fh.write(b"partial")
            raise RuntimeError("boom")
    assert list(tmp_path.iterdir()) == []


def test_report_reader_rejects_garbage(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text(json.dumps({"record": "config"}) + "\n")
    with pytest.raises(FormatError):
        fileio.read_report(p)
    p.write_text("not json\n")
    with pytest.raises(FormatError):
        fileio.read_report(p)
