import numpy as np
import pytest

from gradhyd.dataio import (
    fmt,
    load_forcing_csv,
    load_matrix_csv,
    load_vector_csv,
    read_truth,
    write_forcing_csv,
    write_truth,
)
from gradhyd.errors import BadHeader, BadRow, EmptyData, NonFinite
from gradhyd.timeseries import ForcingSeries


def write(tmp_path, text, name="f.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_rows_with_discharge(tmp_path):
    p = write(tmp_path, "time,precip,pet,discharge\n1,2.5,1,0.1\n2,0,1.5,0.2\n3,4,2,0.3\n")
    forcing, obs = load_forcing_csv(p)
    assert forcing.n_total == 3 and len(obs) == 3
    assert np.array_equal(forcing.precip, [2.5, 0, 4])
    assert np.array_equal(obs.y, [0.1, 0.2, 0.3])


def test_without_discharge_and_comments(tmp_path):
    p = write(tmp_path, "# header comment\nTime,Precip,PET\n\n1,1,1\n# mid\n2,2,2\n")
    forcing, obs = load_forcing_csv(p)
    assert obs is None and forcing.n_total == 2


def test_spin_up_trims_observations(tmp_path):
    p = write(tmp_path, "time,precip,pet,discharge\n1,1,1,5\n2,1,1,6\n3,1,1,7\n")
    forcing, obs = load_forcing_csv(p, spin_up=1)
    assert forcing.n == 2 and np.array_equal(obs.y, [6, 7])


def test_bad_header(tmp_path):
    with pytest.raises(BadHeader):
        load_forcing_csv(write(tmp_path, "time,rain,pet\n1,1,1\n"))


def test_negative_precip_reports_line(tmp_path):
    p = write(tmp_path, "time,precip,pet\n1,1,1\n2,-1,1\n")
    with pytest.raises(BadRow) as exc:
        load_forcing_csv(p)
    assert exc.value.line == 3 and "line 3" in str(exc.value)


@pytest.mark.parametrize("row, err", [
    ("1,1", BadRow),
    ("1,x,1", BadRow),
    (",1,1", BadRow),
    ("1,nan,1", NonFinite),
    ("1,1,inf", NonFinite),
])
def test_row_errors(tmp_path, row, err):
    with pytest.raises(err):
        load_forcing_csv(write(tmp_path, f"time,precip,pet\n{row}\n"))


@pytest.mark.parametrize("text", ["", "# only comments\n", "time,precip,pet\n"])
def test_empty(tmp_path, text):
    with pytest.raises(EmptyData):
        load_forcing_csv(write(tmp_path, text))


def test_write_read_roundtrip_exact(tmp_path, rng):
    f = ForcingSeries(rng.exponential(3.0, 20), rng.uniform(0, 5, 20), 0)
    q = rng.exponential(1.0, 20) / 3.0
    p = tmp_path / "sub" / "out.csv"
    write_forcing_csv(p, f, q)
    f2, obs = load_forcing_csv(p)
    assert np.array_equal(f2.precip, f.precip) and np.array_equal(f2.pet, f.pet)
    assert np.array_equal(obs.y, q)


def test_fmt():
    assert fmt(3) == "3" and fmt("a") == "a"
    x = 0.1 + 0.2
    assert float(fmt(x)) == x


def test_truth_roundtrip(tmp_path):
    write_truth(tmp_path / "t.csv", ("a", "b"), [1.5, 1 / 3])
    names, values = read_truth(tmp_path / "t.csv")
    assert names == ("a", "b") and values[1] == 1 / 3


def test_matrix_and_vector(tmp_path):
    m = load_matrix_csv(write(tmp_path, "1,0\n0,2\n"))
    assert np.array_equal(m, np.diag([1.0, 2.0]))
    assert np.array_equal(load_vector_csv(write(tmp_path, "1\n2\n3\n", "v.csv")), [1, 2, 3])
    with pytest.raises(BadRow):
        load_matrix_csv(write(tmp_path, "1,0\n0\n", "bad.csv"))
    with pytest.raises(NonFinite):
        load_matrix_csv(write(tmp_path, "1,nan\n", "nf.csv"))
