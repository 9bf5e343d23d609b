import numpy as np
import pytest

from builders import random_density, random_generators
from qcurrents.currents import total_currents
from qcurrents.fileio import (
    CURRENTS_MAGIC,
    FileFormatError,
    active_pairs,
    read_currents,
    read_trajectory,
    run_id,
    write_currents,
    write_trajectory,
)
from qcurrents.model import RunParameters
from qcurrents.propagator import propagate


@pytest.fixture
def sample(rng):
    gen = random_generators(rng, 3, "mixed", "mixed")
    traj = propagate(random_density(rng, 3), gen, RunParameters(0.5, 0.05, dt=0.01))
    return gen, traj


@pytest.mark.parametrize("fmt, name", [("text", "t.txt"), ("binary", "t.npz")])
def test_trajectory_round_trip(tmp_path, sample, fmt, name):
    _, traj = sample
    write_trajectory(tmp_path / name, traj, {"run_id": "abc"}, fmt)
    back, meta = read_trajectory(tmp_path / name)
    np.testing.assert_array_equal(back.times, traj.times)
    np.testing.assert_array_equal(back.states, traj.states)
    assert meta["run_id"] == "abc" and meta["n_sites"] == 3
    assert back.dt == traj.dt


def test_trajectory_bytes_deterministic(tmp_path, sample):
    _, traj = sample
    for fmt in ("text", "binary"):
        write_trajectory(tmp_path / "a", traj, {}, fmt)
        write_trajectory(tmp_path / "b", traj, {}, fmt)
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_headerless_and_csv_input(tmp_path, sample):
    _, traj = sample
    n = traj.n_sites
    flat = np.empty((len(traj), 1 + 2 * n * n))
    flat[:, 0] = traj.times
    flat[:, 1::2] = traj.states.real.reshape(len(traj), -1)
    flat[:, 2::2] = traj.states.imag.reshape(len(traj), -1)
    np.savetxt(tmp_path / "plain.txt", flat)
    np.savetxt(tmp_path / "plain.csv", flat, delimiter=",")
    for name in ("plain.txt", "plain.csv"):
        back, meta = read_trajectory(tmp_path / name)
        np.testing.assert_allclose(back.states, traj.states, atol=1e-15)
        assert back.dt is None and meta == {}


def test_bad_column_count(tmp_path):
    (tmp_path / "x.txt").write_text("0 1 0 0 0 0\n")
    with pytest.raises(FileFormatError, match="columns"):
        read_trajectory(tmp_path / "x.txt")
    (tmp_path / "e.txt").write_text("# only a header\n")
    with pytest.raises(FileFormatError, match="no data"):
        read_trajectory(tmp_path / "e.txt")


def test_header_mismatch(tmp_path):
    row = " ".join(["0"] * 9)
    (tmp_path / "x.txt").write_text(f"# n_sites: 3\n{row}\n")
    with pytest.raises(FileFormatError, match="header says 3"):
        read_trajectory(tmp_path / "x.txt")


@pytest.mark.parametrize("fmt", ["text", "binary"])
def test_currents_round_trip(tmp_path, sample, fmt):
    gen, traj = sample
    cur = total_currents(traj, gen, labels=("a", "b", "c"))
    write_currents(tmp_path / "c", cur, {"run_id": "r"}, fmt)
    back, meta = read_currents(tmp_path / "c")
    assert back.labels == ("a", "b", "c")
    # text keeps l < n only; j_total is antisymmetric to rounding, not bitwise
    atol = 0.0 if fmt == "binary" else 1e-16
    for name in cur.COMPONENTS:
        np.testing.assert_allclose(back.component(name), cur.component(name), rtol=0,
                                   atol=atol)
    np.testing.assert_array_equal(back.times, cur.times)


def test_currents_text_layout(tmp_path, sample):
    gen, traj = sample
    cur = total_currents(traj, gen)
    write_currents(tmp_path / "c.txt", cur, {})
    lines = (tmp_path / "c.txt").read_text().splitlines()
    assert lines[0] == f"# {CURRENTS_MAGIC}"
    rows = [ln.split() for ln in lines if not ln.startswith("#")]
    pairs = active_pairs(cur)
    assert len(rows) == len(cur) * len(pairs)
    assert all(int(r[1]) < int(r[2]) for r in rows)
    assert len(rows[0]) == 9


def test_not_a_currents_file(tmp_path):
    (tmp_path / "x.txt").write_text("# something else\n1 2 3\n")
    with pytest.raises(FileFormatError):
        read_currents(tmp_path / "x.txt")


def test_run_id_stable():
    a = run_id("simulate", {"dt": 0.1, "x": 1}, "h")
    assert a == run_id("simulate", {"x": 1, "dt": 0.1}, "h")
    assert a != run_id("simulate", {"x": 2, "dt": 0.1}, "h")
